//! Hybrid analog/digital factorization of a digital precoder by orthogonal
//! matching pursuit over a dictionary of array steering vectors.

use nalgebra::SVD;
use num_complex::Complex64;

use crate::channel::{steering_vector, CMatrix, CVector};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridFactors {
    /// `n_t x n_rf`, unit-modulus entries.
    pub rf_matrix: CMatrix,
    /// `n_rf x k`.
    pub baseband: CMatrix,
    /// `||W - rf_matrix * baseband||_F` after power renormalization.
    pub residual: f64,
}

impl HybridFactors {
    pub fn precoder(&self) -> CMatrix {
        &self.rf_matrix * &self.baseband
    }

    /// Per-user columns of the hybrid precoder.
    pub fn beamformers(&self) -> Vec<CVector> {
        let f = self.precoder();
        (0..f.ncols()).map(|k| f.column(k).into_owned()).collect()
    }
}

/// Unit-norm steering columns at spatial frequencies `-1 + 2g/grid_size`,
/// which cover one full period of the array response.
pub fn steering_dictionary(n_t: usize, grid_size: usize) -> Result<CMatrix> {
    if grid_size == 0 {
        return Err(CoreError::Dimension("dictionary needs at least one atom".into()));
    }
    let mut d = CMatrix::zeros(n_t, grid_size);
    for g in 0..grid_size {
        let f = -1.0 + 2.0 * g as f64 / grid_size as f64;
        d.set_column(g, &steering_vector(n_t, f)?);
    }
    Ok(d)
}

/// Stacks per-user beamformers as the columns of an `n_t x k` matrix.
pub fn stack_beamformers(w: &[CVector]) -> Result<CMatrix> {
    let n_t = w.first().map_or(0, |v| v.len());
    if w.iter().any(|v| v.len() != n_t) {
        return Err(CoreError::Dimension("beamformers differ in length".into()));
    }
    Ok(CMatrix::from_columns(w))
}

fn least_squares(rf: &CMatrix, target: &CMatrix) -> Result<CMatrix> {
    SVD::new(rf.clone(), true, true).solve(target, 1e-12).map_err(|e| CoreError::Domain(e.into()))
}

/// Greedy selection of `n_rf` atoms, each the one most correlated with the
/// current residual, followed by a least-squares baseband fit and a rescale
/// to the power of `w_full`.
pub fn omp_decompose(w_full: &CMatrix, dictionary: &CMatrix, n_rf: usize) -> Result<HybridFactors> {
    let (n_t, grid) = (dictionary.nrows(), dictionary.ncols());
    if n_rf == 0 {
        return Err(CoreError::Domain("at least one RF chain required".into()));
    }
    if grid == 0 || n_t == 0 {
        return Err(CoreError::Dimension("empty dictionary".into()));
    }
    if n_rf > n_t.min(grid) {
        return Err(CoreError::Dimension(format!("{n_rf} RF chains exceed min({n_t} antennas, {grid} atoms)")));
    }
    if w_full.nrows() != n_t {
        return Err(CoreError::Dimension(format!("precoder has {} rows, dictionary {n_t}", w_full.nrows())));
    }

    // unit-modulus phase-shifter columns
    let atoms = dictionary.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) });
    let mut chosen: Vec<usize> = Vec::with_capacity(n_rf);
    let mut rf = CMatrix::zeros(n_t, 0);
    let mut baseband = CMatrix::zeros(0, w_full.ncols());
    let mut residual = w_full.clone();
    for _ in 0..n_rf {
        let corr = dictionary.ad_mul(&residual);
        let score = |g: usize| corr.row(g).iter().map(|z| z.norm_sqr()).sum::<f64>();
        let best = (0..grid)
            .filter(|g| !chosen.contains(g))
            .fold(None, |acc: Option<(usize, f64)>, g| match acc {
                Some((_, s)) if s >= score(g) => acc,
                _ => Some((g, score(g))),
            })
            .map(|(g, _)| g)
            .expect("n_rf <= grid leaves an unused atom");
        chosen.push(best);
        rf = CMatrix::from_fn(n_t, chosen.len(), |i, j| atoms[(i, chosen[j])]);
        baseband = least_squares(&rf, w_full)?;
        residual = w_full - &rf * &baseband;
    }

    let target = w_full.norm();
    let fitted = (&rf * &baseband).norm();
    if fitted > 0.0 {
        baseband *= Complex64::from(target / fitted);
    }
    let residual = (w_full - &rf * &baseband).norm();
    Ok(HybridFactors { rf_matrix: rf, baseband, residual })
}
