//! Transmit beamforming for fixed phases and switch vector.
//!
//! The rank constraint on `W_k = w_k w_k^H` is dropped and each user's rate
//! `log(sum_k Tr(W_k A_i) + s_i) - log(sum_{k!=i} Tr(W_k A_i) + s_i)` is split
//! with epigraph variables `p_i` (concave part, exponential cone) and `q_i`
//! (convex part, restricted by its tangent at `q_bar_i`). Each SCA step
//! solves that conic restriction; rank-one beamformers are recovered at the
//! end by eigen-decomposition or Gaussian randomization.
//!
//! Inside the loop everything is normalized so that noise powers are 1 and the
//! power budget is 1, and the covariances live in the span of the effective
//! channels (nothing outside it affects the objective or the constraints).

use dirsim_conic::{packed_index, AffineExpr, Cone, ConicProblem, ProblemBuilder, SolveStatus, Solver, SolverSettings, WarmStart};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{effective_channels, sample_cn, CMatrix, CVector, ChannelSet};
use crate::error::{CoreError, Result};
use crate::metrics::{sinr_from_effective, user_rates_from_effective};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Noise, power budget and rate threshold shared by the subproblems.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub noise_w: Vec<f64>,
    pub power_w: f64,
    pub gamma_bits: f64,
}

impl LinkBudget {
    pub fn from_scenario(s: &crate::channel::Scenario) -> Self {
        Self { noise_w: s.noise_w(), power_w: s.power_budget_w(), gamma_bits: s.gamma_bits }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingOptions {
    /// Relative objective change that ends the SCA loop.
    pub tol: f64,
    pub max_outer: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub trials: usize,
    pub rank_one_ratio: f64,
    pub seed: u64,
}

impl Default for BeamformingOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_outer: 30, solver_tol: 1e-7, solver_max_iter: 20_000, trials: 200, rank_one_ratio: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaBeamState {
    /// Relaxed covariances in watts, `n_t x n_t`.
    pub covariances: Vec<CMatrix>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub q_bar: Vec<f64>,
    pub iteration: usize,
    /// Relaxed sum-rate (bits/s/Hz) at the start and after every SCA step.
    pub objective_trace: Vec<f64>,
    /// Recovered rank-one beamformers in sqrt-watts.
    pub beamformers: Vec<CVector>,
    /// True sum-rate of `beamformers`.
    pub sum_rate: f64,
    /// Set when the recovered beamformers were worse than the initial ones
    /// and the initial ones were returned instead.
    pub kept_init: bool,
    /// Set when a subproblem hit the solver iteration cap without improving
    /// and the SCA loop stopped at the previous iterate.
    pub stalled: bool,
    /// Conic solver iterations, summed over SCA steps.
    pub solver_iterations: usize,
}

/// Index helper for one Hermitian matrix variable of order `n`: the upper
/// triangle of the real part in packed order, then the strict upper
/// triangle of the imaginary part.
#[derive(Debug, Clone, Copy)]
struct HermVars {
    start: usize,
    n: usize,
}

impl HermVars {
    fn count(n: usize) -> usize {
        n * n
    }

    fn re(&self, j: usize, l: usize) -> usize {
        self.start + packed_index(j.min(l), j.max(l))
    }

    /// Variable index and sign of `Im W_jl`, or `None` on the diagonal.
    fn im(&self, j: usize, l: usize) -> Option<(usize, f64)> {
        if j == l {
            return None;
        }
        let (a, b) = (j.min(l), j.max(l));
        let idx = self.start + self.n * (self.n + 1) / 2 + b * (b - 1) / 2 + a;
        Some((idx, if j < l { 1.0 } else { -1.0 }))
    }

    /// `Re Tr(W A)` for Hermitian `A`.
    fn trace_with(&self, a: &CMatrix) -> AffineExpr {
        let mut e = AffineExpr::default();
        for j in 0..self.n {
            for l in 0..self.n {
                let z = a[(j, l)];
                if z.re != 0.0 {
                    e = e.term(self.re(j, l), z.re);
                }
                if let Some((idx, sign)) = self.im(j, l) {
                    if z.im != 0.0 {
                        e = e.term(idx, sign * z.im);
                    }
                }
            }
        }
        e
    }

    fn trace(&self) -> AffineExpr {
        let mut e = AffineExpr::default();
        for j in 0..self.n {
            e = e.term(self.re(j, j), 1.0);
        }
        e
    }

    /// Packed entries of the real embedding `[[Re W, -Im W], [Im W, Re W]]`.
    fn embedding(&self) -> Vec<AffineExpr> {
        let n = self.n;
        let mut out = vec![AffineExpr::default(); (2 * n) * (2 * n + 1) / 2];
        for j in 0..2 * n {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                let e = if j < n {
                    AffineExpr::default().term(self.re(i, j), scale)
                } else if i >= n {
                    AffineExpr::default().term(self.re(i - n, j - n), scale)
                } else {
                    match self.im(i, j - n) {
                        Some((idx, sign)) => AffineExpr::default().term(idx, -sign * scale),
                        None => AffineExpr::default(),
                    }
                };
                out[packed_index(i, j)] = e;
            }
        }
        out
    }

    fn decode(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, l| {
            let im = self.im(j, l).map_or(0.0, |(idx, sign)| sign * x[idx]);
            Complex64::new(x[self.re(j, l)], im)
        })
    }
}

fn check_psd(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(CoreError::Dimension(format!("{what} must be square")));
    }
    if a.nrows() == 0 {
        return Ok(());
    }
    let herm_gap = (a - a.adjoint()).norm();
    let scale = 1.0 + a.norm();
    if herm_gap > 1e-9 * scale {
        return Err(CoreError::Domain(format!("{what} is not Hermitian")));
    }
    let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
    if min_eig < -1e-9 * scale {
        return Err(CoreError::Domain(format!("{what} is not PSD (eigenvalue {min_eig:e})")));
    }
    Ok(())
}

/// Zeroes the negative eigenvalues left by finite solver accuracy.
fn clamp_psd(w: &CMatrix) -> CMatrix {
    let h = (w + w.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let vals = eig.eigenvalues.map(|v| Complex64::from(v.max(0.0)));
    &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

fn trace_product(w: &CMatrix, a: &CMatrix) -> f64 {
    w.iter().zip(a.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

/// Builds the convex restriction solved at every SCA step.
///
/// Variables are `W0..W{K-1}` (Hermitian, `n^2` reals each), `p` and `q`.
/// The objective minimizes `-log2(e) sum_i (p_i - q_i)`.
pub fn build_p5(a: &[CMatrix], q_bar: &[f64], sigma2: &[f64], gamma_bits: f64, power: f64) -> Result<ConicProblem> {
    let k = a.len();
    if k == 0 || q_bar.len() != k || sigma2.len() != k {
        return Err(CoreError::Dimension(format!(
            "{} channels, {} linearization points, {} noise powers",
            k,
            q_bar.len(),
            sigma2.len()
        )));
    }
    let n = a[0].nrows();
    if n == 0 || a.iter().any(|m| m.nrows() != n) {
        return Err(CoreError::Dimension("channel covariances differ in order".into()));
    }
    for (i, ai) in a.iter().enumerate() {
        check_psd(ai, &format!("A_{i}"))?;
    }
    if q_bar.iter().any(|q| !q.is_finite()) {
        return Err(CoreError::Domain("q_bar must be finite".into()));
    }
    if sigma2.iter().any(|s| !(*s > 0.0)) || !(power > 0.0) || !(gamma_bits >= 0.0) {
        return Err(CoreError::Domain("noise and power must be positive, gamma nonnegative".into()));
    }

    let mut pb = ProblemBuilder::new();
    let w: Vec<HermVars> = (0..k)
        .map(|j| HermVars { start: pb.add_variables(&format!("W{j}"), HermVars::count(n)).start, n })
        .collect();
    let p = pb.add_variables("p", k).start;
    let q = pb.add_variables("q", k).start;
    for i in 0..k {
        pb.add_objective(p + i, -LOG2_E);
        pb.add_objective(q + i, LOG2_E);
    }

    // tr[j][i] = Tr(W_j A_i)
    let tr: Vec<Vec<AffineExpr>> = w.iter().map(|wj| a.iter().map(|ai| wj.trace_with(ai)).collect()).collect();

    // A zero threshold is implied for the true rates. In the restriction it
    // would pin users whose signal vanishes at a point with no interior,
    // which stalls the solver, so it is only emitted for positive targets.
    if gamma_bits > 0.0 {
        let gamma_nats = gamma_bits * std::f64::consts::LN_2;
        let thresholds: Vec<AffineExpr> =
            (0..k).map(|i| AffineExpr::var(p + i).term(q + i, -1.0).plus(-gamma_nats)).collect();
        pb.add_block(Cone::Nonneg(k), &thresholds)?;
    }

    for i in 0..k {
        let mut total = AffineExpr::constant(sigma2[i]);
        for row in &tr {
            total.add(&row[i], 1.0);
        }
        pb.add_block(Cone::Exponential, &[AffineExpr::var(p + i), AffineExpr::constant(1.0), total])?;
    }

    let mut tangent = Vec::with_capacity(k);
    for i in 0..k {
        let eq = q_bar[i].exp();
        let mut e = AffineExpr::var(q + i).scaled(eq).plus(eq * (1.0 - q_bar[i]) - sigma2[i]);
        for (j, row) in tr.iter().enumerate() {
            if j != i {
                e.add(&row[i], -1.0);
            }
        }
        tangent.push(e);
    }
    pb.add_block(Cone::Nonneg(k), &tangent)?;

    let mut budget = AffineExpr::constant(power);
    for wj in &w {
        budget.add(&wj.trace(), -1.0);
    }
    pb.add_block(Cone::Nonneg(1), &[budget])?;

    for wj in &w {
        pb.add_block(Cone::Psd(2 * n), &wj.embedding())?;
    }

    // Tr(W_j A_i) >= 0 already follows from W_j, A_i PSD. Stating it again
    // duplicates the active PSD face at zero-forcing solutions and stalls
    // the dual iterates, so it is left implicit.

    Ok(pb.build()?)
}

/// `q_i = ln(sum_{k != i} Tr(W_k A_i) + sigma_i^2)`.
pub fn update_q_bar(w: &[CMatrix], a: &[CMatrix], sigma2: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|i| {
            let interference: f64 =
                w.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, wk)| trace_product(wk, &a[i])).sum();
            (interference + sigma2[i]).ln()
        })
        .collect()
}

/// Sum-rate of the relaxed covariances, bits/s/Hz.
pub fn relaxed_sum_rate(w: &[CMatrix], a: &[CMatrix], sigma2: &[f64]) -> f64 {
    relaxed_rates(w, a, sigma2).iter().sum()
}

/// Per-user rates (bits/s/Hz) of the covariances `w`.
pub fn relaxed_rates(w: &[CMatrix], a: &[CMatrix], sigma2: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|i| {
            let all: f64 = w.iter().map(|wk| trace_product(wk, &a[i])).sum();
            let own = trace_product(&w[i], &a[i]);
            let interference = (all - own).max(0.0);
            ((all.max(0.0) + sigma2[i]).ln() - (interference + sigma2[i]).ln()) * LOG2_E
        })
        .collect()
}

/// Recovers a beamformer from a covariance.
///
/// Near rank-one matrices return the scaled principal eigenvector. Otherwise
/// `trials` Gaussian samples shaped by `W` (rescaled to power `Tr W`) compete
/// with the principal direction under `score`, and the best one wins.
pub fn extract_rank_one<R: Rng + ?Sized>(
    w: &CMatrix,
    rng: &mut R,
    trials: usize,
    rank_one_ratio: f64,
    mut score: impl FnMut(&CVector) -> f64,
) -> Result<CVector> {
    let n = w.nrows();
    check_psd(w, "covariance")?;
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let lam1 = eig.eigenvalues[order[0]].max(0.0);
    if lam1 <= 0.0 {
        return Ok(CVector::zeros(n));
    }
    let principal: CVector = eig.eigenvectors.column(order[0]) * Complex64::from(lam1.sqrt());
    let lam2 = if n > 1 { eig.eigenvalues[order[1]].max(0.0) } else { 0.0 };
    if lam2 / lam1 <= rank_one_ratio {
        return Ok(principal);
    }
    let power = w.trace().re.max(0.0);
    let shaped = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt());
    let rescale = |v: CVector| {
        let norm = v.norm();
        if norm > 0.0 {
            v * Complex64::from(power.sqrt() / norm)
        } else {
            v
        }
    };
    let mut best = rescale(principal);
    let mut best_score = score(&best);
    for _ in 0..trials {
        let z = CVector::from_fn(n, |_, _| sample_cn(rng));
        let cand = rescale(&shaped * z);
        let s = score(&cand);
        if s > best_score {
            best_score = s;
            best = cand;
        }
    }
    Ok(best)
}

/// Orthonormal basis of the span of the given vectors.
pub(crate) fn span_basis(vectors: &[CVector], n: usize) -> CMatrix {
    let m = CMatrix::from_columns(vectors);
    if vectors.is_empty() || m.norm() == 0.0 {
        return CMatrix::zeros(n, 0);
    }
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    CMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
}

pub(crate) fn feasible_rate(a: &[CVector], w: &[CVector], noise: &[f64], gamma_bits: f64) -> Option<f64> {
    let rates = user_rates_from_effective(a, w, noise).ok()?;
    if rates.iter().all(|&r| r >= gamma_bits - 1e-9) {
        Some(rates.iter().sum())
    } else {
        None
    }
}

/// Matched-filter start `sqrt(P/K) a_k / ||a_k||` (zero for dead channels).
pub fn matched_filter_init(a: &[CVector], power_w: f64) -> Vec<CVector> {
    let k = a.len().max(1) as f64;
    a.iter()
        .map(|ak| {
            let norm = ak.norm();
            if norm > 0.0 {
                ak * Complex64::from((power_w / k).sqrt() / norm)
            } else {
                CVector::zeros(ak.len())
            }
        })
        .collect()
}

/// SCA beamforming on explicit effective channels `a_k` (physical units).
pub fn sca_beamforming_effective(
    a: &[CVector],
    budget: &LinkBudget,
    init: &[CVector],
    opts: &BeamformingOptions,
) -> Result<ScaBeamState> {
    let k = a.len();
    if k == 0 || init.len() != k || budget.noise_w.len() != k {
        return Err(CoreError::Dimension(format!("{k} users, {} initial beamformers", init.len())));
    }
    let n_t = a[0].len();
    if init.iter().chain(a).any(|v| v.len() != n_t) {
        return Err(CoreError::Dimension("vector lengths differ from antenna count".into()));
    }
    if !(budget.power_w > 0.0) {
        return Err(CoreError::Domain("power budget must be positive".into()));
    }
    let init_power: f64 = init.iter().map(|w| w.norm_squared()).sum();
    if init_power > budget.power_w * (1.0 + 1e-9) {
        return Err(CoreError::Infeasible("initial beamformers exceed the power budget".into()));
    }
    let init_rate = feasible_rate(a, init, &budget.noise_w, budget.gamma_bits).ok_or_else(|| {
        CoreError::Infeasible(format!("initial beamformers miss the {} bit rate threshold", budget.gamma_bits))
    })?;

    // normalized channels: noise 1, power 1
    let sqrt_p = budget.power_w.sqrt();
    let a_norm: Vec<CVector> =
        a.iter().zip(&budget.noise_w).map(|(ak, s)| ak * Complex64::from(sqrt_p / s.sqrt())).collect();
    let basis = span_basis(&a_norm, n_t);
    let d = basis.ncols();
    let ones = vec![1.0; k];

    let embed = |wr: &CMatrix| -> CMatrix { &basis * wr * basis.adjoint() * Complex64::from(budget.power_w) };

    if d == 0 {
        return Ok(ScaBeamState {
            covariances: init.iter().map(|w| w * w.adjoint()).collect(),
            p: vec![0.0; k],
            q: vec![0.0; k],
            q_bar: vec![0.0; k],
            iteration: 0,
            objective_trace: vec![init_rate],
            beamformers: init.to_vec(),
            sum_rate: init_rate,
            kept_init: true,
            stalled: false,
            solver_iterations: 0,
        });
    }

    let a_red: Vec<CVector> = a_norm.iter().map(|ak| basis.ad_mul(ak)).collect();
    let a_mats: Vec<CMatrix> = a_red.iter().map(|v| v * v.adjoint()).collect();
    let mut w_red: Vec<CMatrix> = init
        .iter()
        .map(|w| {
            let v = basis.ad_mul(w) / Complex64::from(sqrt_p);
            &v * v.adjoint()
        })
        .collect();

    let settings = SolverSettings::default().with_tol(opts.solver_tol).with_max_iter(opts.solver_max_iter);
    let mut trace = vec![relaxed_sum_rate(&w_red, &a_mats, &ones)];
    let mut q_bar = update_q_bar(&w_red, &a_mats, &ones);
    let mut p = vec![0.0; k];
    let mut q = q_bar.clone();
    let mut warm: Option<WarmStart> = None;
    let mut iteration = 0;
    let mut stalled = false;
    let mut solver_iterations = 0;
    while iteration < opts.max_outer {
        let problem = build_p5(&a_mats, &q_bar, &ones, budget.gamma_bits, 1.0)?;
        let solver = Solver::new(&problem, settings.clone())?;
        let sol = solver.solve(warm.as_ref())?;
        solver_iterations += sol.iterations;
        if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
            return Err(CoreError::Solver(format!("beamforming step {iteration}: {:?}", sol.status)));
        }
        let candidate: Vec<CMatrix> = (0..k)
            .map(|j| {
                let r = &problem.variable_map[&format!("W{j}")];
                clamp_psd(&HermVars { start: r.start, n: d }.decode(&sol.x))
            })
            .collect();
        let value = relaxed_sum_rate(&candidate, &a_mats, &ones);
        let prev = *trace.last().unwrap();
        if sol.status == SolveStatus::MaxIter {
            // an unconverged step is kept only if it is a feasible improvement
            let power: f64 = candidate.iter().map(|w| w.trace().re).sum();
            let meets = relaxed_rates(&candidate, &a_mats, &ones).iter().all(|&r| r >= budget.gamma_bits);
            if !(value > prev && power <= 1.0 + 1e-9 && meets) {
                stalled = true;
                break;
            }
        }
        iteration += 1;
        w_red = candidate;
        let pr = &problem.variable_map["p"];
        let qr = &problem.variable_map["q"];
        p = sol.x[pr.clone()].to_vec();
        q = sol.x[qr.clone()].to_vec();
        q_bar = update_q_bar(&w_red, &a_mats, &ones);
        trace.push(value);
        warm = Some(WarmStart::from(&sol));
        if (value - prev).abs() <= opts.tol * value.abs() + 10.0 * opts.solver_tol {
            break;
        }
    }

    // rank-one recovery, user by user against the others' current choice
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w_vec: Vec<CVector> = w_red
        .iter()
        .map(|m| {
            let eig = SymmetricEigen::new(m.clone());
            let i = eig.eigenvalues.imax();
            eig.eigenvectors.column(i) * Complex64::from(eig.eigenvalues[i].max(0.0).sqrt())
        })
        .collect();
    for j in 0..k {
        let others = w_vec.clone();
        let chosen = extract_rank_one(&w_red[j], &mut rng, opts.trials, opts.rank_one_ratio, |cand| {
            let mut trial = others.clone();
            trial[j] = cand.clone();
            (0..k).map(|i| sinr_from_effective(&a_red, &trial, &ones, i).map_or(0.0, f64::ln_1p)).sum()
        })?;
        w_vec[j] = chosen;
    }
    let mut beamformers: Vec<CVector> = w_vec.iter().map(|v| &basis * v * Complex64::from(sqrt_p)).collect();
    let total: f64 = beamformers.iter().map(|w| w.norm_squared()).sum();
    if total > budget.power_w {
        let s = Complex64::from((budget.power_w / total).sqrt());
        beamformers.iter_mut().for_each(|w| *w *= s);
    }

    let mut kept_init = false;
    let mut sum_rate = match feasible_rate(a, &beamformers, &budget.noise_w, budget.gamma_bits) {
        Some(r) => r,
        None => f64::NEG_INFINITY,
    };
    if sum_rate < init_rate {
        beamformers = init.to_vec();
        sum_rate = init_rate;
        kept_init = true;
    }

    Ok(ScaBeamState {
        covariances: w_red.iter().map(embed).collect(),
        p,
        q,
        q_bar,
        iteration,
        objective_trace: trace,
        beamformers,
        sum_rate,
        kept_init,
        stalled,
        solver_iterations,
    })
}

pub fn sca_beamforming(
    channels: &ChannelSet,
    phases: &[CVector],
    switch: &[bool],
    budget: &LinkBudget,
    init: &[CVector],
    opts: &BeamformingOptions,
) -> Result<ScaBeamState> {
    let a = effective_channels(channels, phases, switch)?;
    sca_beamforming_effective(&a, budget, init, opts)
}
