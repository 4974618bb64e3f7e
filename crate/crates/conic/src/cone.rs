//! Cone kinds and Euclidean projections onto them.
//!
//! Every block of the slack vector lives in one of these cones. The dual
//! projection is obtained through the Moreau decomposition
//! `v = P_K(v) - P_{K*}(-v)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ConicError, Result};

/// One block of the cone product. Dimensions are in slack entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^n`; dual is free.
    Zero(usize),
    /// `R_+^n`.
    Nonneg(usize),
    /// `{(t, z) : ||z|| <= t}` of total dimension `n`.
    SecondOrder(usize),
    /// `cl{(x, y, z) : y > 0, y exp(x / y) <= z}`.
    Exponential,
    /// Symmetric PSD matrices of the given order in scaled packed storage.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonneg(n) | Cone::SecondOrder(n) => n,
            Cone::Exponential => 3,
            Cone::Psd(order) => packed_len(order),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Cone::Zero(0) | Cone::Nonneg(0) => {
                Err(ConicError::InvalidCone("empty linear block".into()))
            }
            Cone::SecondOrder(n) if n == 0 => {
                Err(ConicError::InvalidCone("second-order cone of dimension 0".into()))
            }
            Cone::Psd(0) => Err(ConicError::InvalidCone("PSD cone of order 0".into())),
            _ => Ok(()),
        }
    }

    /// Whether a diagonal row scaling may vary within the block.
    pub(crate) fn separable(&self) -> bool {
        matches!(self, Cone::Zero(_) | Cone::Nonneg(_))
    }

    pub fn short_name(&self) -> String {
        match *self {
            Cone::Zero(n) => format!("zero {n}"),
            Cone::Nonneg(n) => format!("nonneg {n}"),
            Cone::SecondOrder(n) => format!("soc {n}"),
            Cone::Exponential => "exp 3".to_string(),
            Cone::Psd(order) => format!("psd {order}"),
        }
    }

    /// Projects `v` in place onto the cone.
    pub fn project(&self, v: &mut [f64]) {
        match *self {
            Cone::Zero(_) => v.iter_mut().for_each(|x| *x = 0.0),
            Cone::Nonneg(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::SecondOrder(_) => project_soc(v),
            Cone::Exponential => {
                let p = project_exp([v[0], v[1], v[2]]);
                v.copy_from_slice(&p);
            }
            Cone::Psd(order) => project_psd_packed(v, order),
        }
    }

    /// Projects `v` in place onto the dual cone.
    pub fn project_dual(&self, v: &mut [f64]) {
        match *self {
            Cone::Zero(_) => {}
            // self-dual
            Cone::Nonneg(_) | Cone::SecondOrder(_) | Cone::Psd(_) => self.project(v),
            Cone::Exponential => {
                let p = project_exp([-v[0], -v[1], -v[2]]);
                for i in 0..3 {
                    v[i] += p[i];
                }
            }
        }
    }

    /// Distance from `v` to the cone (Euclidean).
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project(&mut p);
        dist(&p, v)
    }

    /// Distance from `v` to the dual cone.
    pub fn dual_distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project_dual(&mut p);
        dist(&p, v)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn packed_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Index of entry `(i, j)`, `i <= j`, in upper-triangular column-major packing.
#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// Packs a symmetric matrix, scaling off-diagonals by `sqrt(2)` so that the
/// packed inner product equals the trace inner product.
pub fn pack_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; packed_len(n)];
    for j in 0..n {
        for i in 0..=j {
            let val = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[packed_index(i, j)] = if i == j { val } else { val * std::f64::consts::SQRT_2 };
        }
    }
    out
}

pub fn unpack_symmetric(v: &[f64], order: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(order, order);
    for j in 0..order {
        for i in 0..=j {
            let val = v[packed_index(i, j)];
            if i == j {
                m[(i, i)] = val;
            } else {
                let val = val / std::f64::consts::SQRT_2;
                m[(i, j)] = val;
                m[(j, i)] = val;
            }
        }
    }
    m
}

/// Nearest (Frobenius) positive semidefinite matrix to a symmetric matrix.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    out = (&out + out.transpose()) * 0.5;
    out
}

fn project_psd_packed(v: &mut [f64], order: usize) {
    if order == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let m = unpack_symmetric(v, order);
    let p = project_psd(&m);
    v.copy_from_slice(&pack_symmetric(&p));
}

/// Projection onto `{(t, z) : ||z|| <= t}`; `v[0]` is `t`.
pub fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nz = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nz <= t {
        return;
    }
    if nz <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = 0.5 * (t + nz);
    v[0] = a;
    let f = a / nz;
    v[1..].iter_mut().for_each(|x| *x *= f);
}

fn in_exp_cone(v: [f64; 3], tol: f64) -> bool {
    let [r, s, t] = v;
    (s > 0.0 && s * (r / s).exp() - t <= tol * (1.0 + t.abs()))
        || (r <= 0.0 && s.abs() <= 0.0 && t >= 0.0)
}

fn in_exp_polar(v: [f64; 3], tol: f64) -> bool {
    let [r, s, t] = v;
    (r > 0.0 && r * (s / r).exp() + std::f64::consts::E * t <= tol * (1.0 + t.abs()))
        || (r.abs() <= 0.0 && s <= 0.0 && t <= 0.0)
}

/// Stationarity function whose roots parametrize the candidate projections
/// onto the boundary ray `(rho, 1, e^rho)`.
fn exp_h(v: [f64; 3], rho: f64) -> f64 {
    let [r, s, t] = v;
    let ep = rho.exp();
    let em = (-rho).exp();
    ((rho - 1.0) * r + s) * ep - (r - rho * s) * em - (rho * (rho - 1.0) + 1.0) * t
}

fn exp_h_deriv(v: [f64; 3], rho: f64) -> f64 {
    let [r, s, t] = v;
    let ep = rho.exp();
    let em = (-rho).exp();
    (rho * r + s) * ep + (r - (rho - 1.0) * s) * em - (2.0 * rho - 1.0) * t
}

/// Given a root `rho`, decomposes `v = sigma d + lambda n` and returns the
/// boundary point when both multipliers have the right sign.
fn exp_candidate(v: [f64; 3], rho: f64) -> Option<[f64; 3]> {
    let ep = rho.exp();
    if !ep.is_finite() {
        return None;
    }
    let d = [rho, 1.0, ep];
    let n = [ep, (1.0 - rho) * ep, -1.0];
    let dd: f64 = d.iter().map(|x| x * x).sum();
    let nn: f64 = n.iter().map(|x| x * x).sum();
    let sigma = (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]) / dd;
    let lambda = (v[0] * n[0] + v[1] * n[1] + v[2] * n[2]) / nn;
    if sigma <= 0.0 || lambda < -1e-12 * (1.0 + nn.sqrt()) {
        return None;
    }
    let p = [sigma * d[0], sigma * d[1], sigma * d[2]];
    // reconstruction check guards against spurious roots
    let scale = 1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let resid: f64 = (0..3)
        .map(|i| (p[i] + lambda.max(0.0) * n[i] - v[i]).abs())
        .fold(0.0, f64::max);
    if resid > 1e-6 * scale {
        return None;
    }
    Some(p)
}

fn refine_exp_root(v: [f64; 3], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = exp_h(v, lo);
    let mut rho = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = exp_h(v, rho);
        if f == 0.0 {
            return rho;
        }
        if (f < 0.0) == (flo < 0.0) {
            lo = rho;
            flo = f;
        } else {
            hi = rho;
        }
        let df = exp_h_deriv(v, rho);
        let newton = rho - f / df;
        rho = if df != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + rho.abs()) {
            break;
        }
    }
    rho
}

/// Projection onto the closure of the exponential cone
/// `{(x, y, z) : y > 0, y exp(x / y) <= z}`.
pub fn project_exp(v: [f64; 3]) -> [f64; 3] {
    let [r, s, t] = v;
    if in_exp_cone(v, 0.0) {
        return v;
    }
    if in_exp_polar(v, 0.0) {
        return [0.0, 0.0, 0.0];
    }
    if r < 0.0 && s < 0.0 {
        return [r, 0.0, t.max(0.0)];
    }

    // Scan for sign changes of h, then refine each bracket; the first root
    // that certifies the KKT decomposition is the projection.
    const LIMIT: f64 = 60.0;
    let mut prev_rho = -LIMIT;
    let mut prev_h = exp_h(v, prev_rho);
    let mut step = 0.25;
    let mut rho = prev_rho;
    while rho < LIMIT {
        rho = (rho + step).min(LIMIT);
        let h = exp_h(v, rho);
        if h == 0.0 {
            if let Some(p) = exp_candidate(v, rho) {
                return p;
            }
        } else if prev_h != 0.0 && (h < 0.0) != (prev_h < 0.0) {
            let root = refine_exp_root(v, prev_rho, rho);
            if let Some(p) = exp_candidate(v, root) {
                return p;
            }
        }
        prev_rho = rho;
        prev_h = h;
        step = if rho.abs() < 8.0 { 0.25 } else { 1.0 };
    }

    // Degenerate fallback: closest of the simple feasible candidates.
    let candidates = [
        [0.0, 0.0, 0.0],
        [r.min(0.0), 0.0, t.max(0.0)],
        [r, s.max(1e-300), s.max(1e-300) * (r / s.max(1e-300)).exp().max(t)],
    ];
    let mut best = candidates[0];
    let mut best_d = f64::INFINITY;
    for c in candidates {
        if !c.iter().all(|x| x.is_finite()) || !in_exp_cone(c, 1e-9) {
            continue;
        }
        let d = dist(&c, &v);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soc_cases() {
        let mut v = vec![2.0, 1.0, 0.0];
        project_soc(&mut v);
        assert_eq!(v, vec![2.0, 1.0, 0.0]);

        let mut v = vec![-2.0, 1.0, 0.0];
        project_soc(&mut v);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);

        let mut v = vec![0.0, 1.0, 1.0];
        project_soc(&mut v);
        let h = std::f64::consts::SQRT_2 / 2.0;
        assert!((v[0] - h).abs() < 1e-15);
        assert!((v[1] - 0.5).abs() < 1e-15);
        assert!((v[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_inside_and_polar() {
        assert_eq!(project_exp([0.0, 1.0, 2.0]), [0.0, 1.0, 2.0]);
        assert_eq!(project_exp([0.0, 0.0, -1.0]), [0.0, 0.0, 0.0]);
        assert_eq!(project_exp([-1.0, -2.0, 3.0]), [-1.0, 0.0, 3.0]);
    }

    #[test]
    fn psd_identity_and_negative_identity() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((project_psd(&i) - &i).norm() < 1e-14);
        let neg = -DMatrix::<f64>::identity(2, 2);
        assert!(project_psd(&neg).norm() < 1e-14);
    }

    #[test]
    fn packing_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 5.0, -1.0, 3.0, -1.0, 4.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 0.25, 0.0, 0.25, 1.0]);
        let pa = pack_symmetric(&a);
        let pb = pack_symmetric(&b);
        let packed: f64 = pa.iter().zip(&pb).map(|(x, y)| x * y).sum();
        assert!((packed - (&a * &b).trace()).abs() < 1e-12);
        assert!((unpack_symmetric(&pa, 3) - a).norm() < 1e-14);
    }

    #[test]
    fn zero_dimensional_blocks_rejected() {
        assert!(Cone::Nonneg(0).validate().is_err());
        assert!(Cone::Psd(0).validate().is_err());
        assert_eq!(Cone::Psd(4).dim(), 10);
    }
}
