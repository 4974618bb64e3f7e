//! IRS phase design for fixed beamformers and switch vector.
//!
//! With `u` the stacked reflection coefficients of all IRSs, every received
//! term is linear in `u`: `a_k^H w_i = v_ki^H u`. The unit-modulus constraint
//! is relaxed to `|u_n| <= 1` and a penalty `mu sum (|u_n|^2 - 1)` rewards
//! moduli close to one. Each SCA step linearizes the penalty and the useful
//! signal `|v_kk^H u|^2` at the current point. The product `lambda_k beta_k`
//! (SINR slack times interference-plus-noise) is not jointly convex, so it is
//! bounded above by `a lambda^2 + b beta^2` with `ab = 1/4`, which touches
//! at the expansion point. Each step is therefore a convex restriction and
//!
//! ```text
//! F(u) = sum_k log2(1 + SINR_k(u)) + (mu / 2) sum_n (|u_n|^2 - 1)
//! ```
//!
//! never decreases while `mu` is held fixed. The result is projected to unit
//! modulus at the end and evaluated exactly.

use dirsim_conic::{AffineExpr, Cone, ConicProblem, ProblemBuilder, SolveStatus, Solver, SolverSettings, WarmStart};
use num_complex::Complex64;

use crate::beamforming::LinkBudget;
use crate::channel::{check_design, CVector, ChannelSet};
use crate::error::{CoreError, Result};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Users whose linearized signal is below this are pinned to zero SINR.
const DEAD_SIGNAL: f64 = 1e-300;
/// Users whose SINR is below this fraction of the best user's are treated as
/// unserved in the phase subproblem.
const DEAD_SINR_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptions {
    pub tol: f64,
    pub max_outer: usize,
    /// Initial penalty weight. `None` picks `MU_RATE_FRACTION` times the
    /// starting sum-rate, so the penalty neither freezes the phases nor lets
    /// the moduli collapse.
    pub mu: Option<f64>,
    pub mu_max: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_outer: 30, mu: None, mu_max: 1e6, solver_tol: 1e-7, solver_max_iter: 20_000 }
    }
}

pub const MU_RATE_FRACTION: f64 = 1e-2;

/// Moduli below this at an outer iterate double the penalty weight.
const MODULUS_FLOOR: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScaState {
    /// Final unit-modulus phases, one vector per IRS.
    pub phases: Vec<CVector>,
    /// Stacked relaxed iterate before projection.
    pub u_relaxed: CVector,
    /// True SINRs at `phases`.
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub iteration: usize,
    /// `F(u)` at the start and after every SCA step, with the weight in
    /// `mu_trace` at the same index.
    pub objective_trace: Vec<f64>,
    pub mu_trace: Vec<f64>,
    /// True sum-rate (bits/s/Hz) at `phases`.
    pub sum_rate: f64,
    /// Set when the projected result was worse than (or less feasible than)
    /// the initial phases, which were returned instead.
    pub kept_init: bool,
    /// Set when a subproblem hit the solver iteration cap without improving.
    pub stalled: bool,
    /// Conic solver iterations, summed over SCA steps.
    pub solver_iterations: usize,
}

/// `v[k][i]` with `v_ki^H u = sum_l x_l h_kl^H diag(u_l) G_l w_i`, stacked
/// over IRSs in index order.
pub fn interference_vectors(
    channels: &ChannelSet,
    switch: &[bool],
    beamformers: &[CVector],
) -> Result<Vec<Vec<CVector>>> {
    let l_irs = channels.l_irs();
    let n_r = channels.n_r();
    let k_users = channels.k_users();
    if switch.len() != l_irs || beamformers.len() != k_users {
        return Err(CoreError::Dimension(format!(
            "{} switch flags and {} beamformers for {l_irs} IRSs and {k_users} users",
            switch.len(),
            beamformers.len()
        )));
    }
    if beamformers.iter().any(|w| w.len() != channels.n_t()) {
        return Err(CoreError::Dimension("beamformer length differs from antenna count".into()));
    }
    let reflected: Vec<Vec<CVector>> =
        beamformers.iter().map(|w| channels.g.iter().map(|g| g * w).collect()).collect();
    Ok((0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|i| {
                    let mut v = CVector::zeros(l_irs * n_r);
                    for l in (0..l_irs).filter(|&l| switch[l]) {
                        for n in 0..n_r {
                            // (conj(h_n) (G w)_n)^*
                            v[l * n_r + n] = channels.h[k][l][n] * reflected[i][l][n].conj();
                        }
                    }
                    v
                })
                .collect()
        })
        .collect())
}

/// Per-user SINR for stacked phases `u`.
pub fn sinr_from_vectors(v: &[Vec<CVector>], u: &CVector, noise_w: &[f64]) -> Result<Vec<f64>> {
    let k = v.len();
    if noise_w.len() != k || v.iter().any(|row| row.len() != k || row.iter().any(|x| x.len() != u.len())) {
        return Err(CoreError::Dimension("interference vectors do not match users or phases".into()));
    }
    (0..k)
        .map(|kk| {
            let s = noise_w[kk];
            if !(s > 0.0) {
                return Err(CoreError::Domain(format!("noise power must be positive, got {s}")));
            }
            let signal = v[kk][kk].dotc(u).norm_sqr();
            let interference: f64 = (0..k).filter(|&i| i != kk).map(|i| v[kk][i].dotc(u).norm_sqr()).sum();
            Ok(signal / (interference + s))
        })
        .collect()
}

fn sum_rate_of(sinr: &[f64]) -> f64 {
    sinr.iter().map(|s| s.ln_1p() * LOG2_E).sum()
}

/// Penalized objective `F(u)` tracked by the SCA loop.
pub fn penalized_objective(v: &[Vec<CVector>], u: &CVector, noise_w: &[f64], mu: f64) -> Result<f64> {
    let rate = sum_rate_of(&sinr_from_vectors(v, u, noise_w)?);
    Ok(rate + 0.5 * mu * u.iter().map(|z| z.norm_sqr() - 1.0).sum::<f64>())
}

/// `u / |u|` elementwise, with (near-)zero entries mapped to 1.
pub fn project_unit_modulus(u: &CVector) -> CVector {
    u.map(|z| {
        let r = z.norm();
        if r < 1e-12 {
            Complex64::new(1.0, 0.0)
        } else {
            z / r
        }
    })
}

/// `(Re, Im)` of `v^H u` as affine expressions in the stacked real and
/// imaginary parts of `u`.
fn inner_exprs(v: &CVector, re: usize, im: usize, scale: f64) -> (AffineExpr, AffineExpr) {
    let mut r = AffineExpr::constant(0.0);
    let mut i = AffineExpr::constant(0.0);
    for (j, z) in v.iter().enumerate() {
        // conj(a + ib)(x + iy) = (ax + by) + i(ay - bx)
        r = r.term(re + j, scale * z.re).term(im + j, scale * z.im);
        i = i.term(im + j, scale * z.re).term(re + j, -scale * z.im);
    }
    (r, i)
}

/// Builds the convex restriction solved at every phase SCA step.
///
/// Variables are `u_re`, `u_im` (stacked phases), `lambda` (SINR slack),
/// `tau` (`tau_k <= ln(1 + lambda_k)`) and `beta` (interference plus noise
/// over noise). The objective minimizes
/// `-(sum_k tau_k log2(e) + mu sum_n Re[conj(u_t,n) (u_n - u_t,n)])`.
pub fn build_p9(
    v: &[Vec<CVector>],
    noise_w: &[f64],
    lambda_t: &[f64],
    u_t: &CVector,
    mu: f64,
    gamma_bits: f64,
) -> Result<ConicProblem> {
    let k = v.len();
    let dim = u_t.len();
    if k == 0 || lambda_t.len() != k || noise_w.len() != k {
        return Err(CoreError::Dimension(format!("{k} users, {} slack values", lambda_t.len())));
    }
    if v.iter().any(|row| row.len() != k || row.iter().any(|x| x.len() != dim)) {
        return Err(CoreError::Dimension("interference vectors do not match users or phases".into()));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(CoreError::Domain(format!("penalty weight must be positive, got {mu}")));
    }
    if !(gamma_bits >= 0.0) || noise_w.iter().any(|s| !(*s > 0.0)) {
        return Err(CoreError::Domain("noise must be positive and gamma nonnegative".into()));
    }
    if u_t.iter().any(|z| !(z.norm() <= 1.0 + 1e-9)) {
        return Err(CoreError::Domain("expansion point has a modulus above one".into()));
    }
    let lambda_min = gamma_bits.exp2() - 1.0;
    if lambda_t.iter().any(|&l| !(l >= lambda_min - 1e-9)) {
        return Err(CoreError::Infeasible(format!("SINR slack below the {gamma_bits} bit target")));
    }

    let mut pb = ProblemBuilder::new();
    let re = pb.add_variables("u_re", dim).start;
    let im = pb.add_variables("u_im", dim).start;
    let lam = pb.add_variables("lambda", k).start;
    let tau = pb.add_variables("tau", k).start;
    let beta = pb.add_variables("beta", k).start;
    for i in 0..k {
        pb.add_objective(tau + i, -LOG2_E);
    }
    for (j, z) in u_t.iter().enumerate() {
        pb.add_objective(re + j, -mu * z.re);
        pb.add_objective(im + j, -mu * z.im);
    }

    for j in 0..dim {
        pb.add_block(
            Cone::SecondOrder(3),
            &[AffineExpr::constant(1.0), AffineExpr::var(re + j), AffineExpr::var(im + j)],
        )?;
    }

    let floors: Vec<AffineExpr> = (0..k).map(|i| AffineExpr::var(lam + i).plus(-lambda_min)).collect();
    pb.add_block(Cone::Nonneg(k), &floors)?;

    for i in 0..k {
        pb.add_block(
            Cone::Exponential,
            &[AffineExpr::var(tau + i), AffineExpr::constant(1.0), AffineExpr::var(lam + i).plus(1.0)],
        )?;
    }

    let dead_sinr = DEAD_SINR_RATIO * lambda_t.iter().fold(0.0, |m: f64, &l| m.max(l));
    for kk in 0..k {
        let scale = 1.0 / noise_w[kk].sqrt();
        // beta >= 1 + sum_{i != k} |v_ki^H u|^2 / s as (beta, 2 Re, 2 Im, .., beta - 2)
        let mut rows = vec![AffineExpr::var(beta + kk)];
        let mut beta_t = 1.0;
        for i in (0..k).filter(|&i| i != kk) {
            let (r, m) = inner_exprs(&v[kk][i], re, im, 2.0 * scale);
            rows.push(r);
            rows.push(m);
            beta_t += (v[kk][i].dotc(u_t) * scale).norm_sqr();
        }
        rows.push(AffineExpr::var(beta + kk).plus(-2.0));
        pb.add_block(Cone::SecondOrder(rows.len()), &rows)?;

        // lambda beta <= a lambda^2 + b beta^2 <= 2 Re[conj(c_t) v^H u] - |c_t|^2
        let c_t = v[kk][kk].dotc(u_t) * scale;
        if c_t.norm_sqr() <= DEAD_SIGNAL || lambda_t[kk] < dead_sinr {
            // a user the beamformers have switched off; its bound would need
            // weights near 1/SINR, so its slack is pinned to zero instead
            pb.add_block(Cone::Zero(1), &[AffineExpr::var(lam + kk)])?;
            continue;
        }
        let lam_t = lambda_t[kk];
        let a = beta_t / (2.0 * lam_t);
        let b = lam_t / (2.0 * beta_t);
        let (sr, si) = inner_exprs(&v[kk][kk], re, im, scale);
        let mut r = AffineExpr::constant(-c_t.norm_sqr());
        r.add(&sr, 2.0 * c_t.re);
        r.add(&si, 2.0 * c_t.im);
        // (r/s + s, .., r/s - s) with s = |c_t| keeps the entries at the
        // scale of the signal term instead of 1
        let s = c_t.norm();
        let r = r.scaled(1.0 / s);
        pb.add_block(
            Cone::SecondOrder(4),
            &[
                r.clone().plus(s),
                AffineExpr::var(lam + kk).scaled(2.0 * a.sqrt()),
                AffineExpr::var(beta + kk).scaled(2.0 * b.sqrt()),
                r.plus(-s),
            ],
        )?;
    }

    Ok(pb.build()?)
}

/// Splits stacked phases into one vector per IRS.
pub fn split_phases(u: &CVector, n_r: usize) -> Vec<CVector> {
    u.as_slice().chunks(n_r).map(|c| CVector::from_column_slice(c)).collect()
}

/// Stacks per-IRS phase vectors.
pub fn stack_phases(phases: &[CVector]) -> CVector {
    CVector::from_iterator(phases.iter().map(|p| p.len()).sum(), phases.iter().flat_map(|p| p.iter().copied()))
}

fn meets_target(sinr: &[f64], gamma_bits: f64) -> bool {
    sinr.iter().all(|s| s.ln_1p() * LOG2_E >= gamma_bits - 1e-9)
}

/// Penalty SCA on explicit interference vectors with stacked phases.
pub fn sca_phases_vectors(
    v: &[Vec<CVector>],
    budget: &LinkBudget,
    init_u: &CVector,
    opts: &PhaseOptions,
) -> Result<(CVector, PhaseScaState)> {
    let k = v.len();
    if k == 0 || budget.noise_w.len() != k {
        return Err(CoreError::Dimension(format!("{k} users, {} noise powers", budget.noise_w.len())));
    }
    if init_u.iter().any(|z| (z.norm() - 1.0).abs() > 1e-6) {
        return Err(CoreError::Domain("initial phases must have unit modulus".into()));
    }
    let gamma = budget.gamma_bits;
    let noise = &budget.noise_w;
    let init_sinr = sinr_from_vectors(v, init_u, noise)?;
    if !meets_target(&init_sinr, gamma) {
        return Err(CoreError::Infeasible(format!("initial phases miss the {gamma} bit rate threshold")));
    }
    let init_rate = sum_rate_of(&init_sinr);
    let mut mu = match opts.mu {
        Some(m) => m,
        None => MU_RATE_FRACTION * init_rate.max(1e-3),
    };
    let unchanged = |mu: f64, stalled: bool| PhaseScaState {
        phases: Vec::new(),
        u_relaxed: init_u.clone(),
        lambda: init_sinr.clone(),
        mu,
        iteration: 0,
        objective_trace: vec![init_rate],
        mu_trace: vec![mu],
        sum_rate: init_rate,
        kept_init: true,
        stalled,
        solver_iterations: 0,
    };
    if v.iter().flatten().all(|x| x.iter().all(|z| *z == Complex64::new(0.0, 0.0))) {
        return Ok((init_u.clone(), unchanged(mu, false)));
    }

    let settings = SolverSettings::default().with_tol(opts.solver_tol).with_max_iter(opts.solver_max_iter);
    let mut u = init_u.clone();
    let mut lam_t = init_sinr.clone();
    let lambda_min = gamma.exp2() - 1.0;
    let mut trace = vec![penalized_objective(v, &u, noise, mu)?];
    let mut mu_trace = vec![mu];
    let mut warm: Option<WarmStart> = None;
    let mut iteration = 0;
    let mut stalled = false;
    let mut solver_iterations = 0;
    while iteration < opts.max_outer {
        let lam_floor: Vec<f64> = lam_t.iter().map(|&l| l.max(lambda_min)).collect();
        let problem = build_p9(v, noise, &lam_floor, &u, mu, gamma)?;
        let sol = Solver::new(&problem, settings)?.solve(warm.as_ref())?;
        solver_iterations += sol.iterations;
        let re = problem.variable_map["u_re"].start;
        let im = problem.variable_map["u_im"].start;
        let candidate = CVector::from_fn(u.len(), |j, _| {
            let z = Complex64::new(sol.x[re + j], sol.x[im + j]);
            // solver accuracy can leave the modulus marginally above one
            if z.norm() > 1.0 {
                z / z.norm()
            } else {
                z
            }
        });
        let prev = penalized_objective(v, &u, noise, mu)?;
        let value = penalized_objective(v, &candidate, noise, mu)?;
        let cand_sinr = sinr_from_vectors(v, &candidate, noise)?;
        if sol.status == SolveStatus::MaxIter && !(value > prev && meets_target(&cand_sinr, gamma)) {
            stalled = true;
            break;
        }
        iteration += 1;
        u = candidate;
        lam_t = cand_sinr;
        trace.push(value);
        mu_trace.push(mu);
        warm = Some(WarmStart::from(&sol));
        let min_mod = u.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if min_mod < MODULUS_FLOOR && mu < opts.mu_max {
            mu = (2.0 * mu).min(opts.mu_max);
            continue;
        }
        if (value - prev).abs() <= opts.tol * value.abs() + 10.0 * opts.solver_tol {
            break;
        }
    }

    let projected = project_unit_modulus(&u);
    let mut lambda = sinr_from_vectors(v, &projected, noise)?;
    let mut sum_rate = sum_rate_of(&lambda);
    let mut final_u = projected;
    let mut kept_init = false;
    if !meets_target(&lambda, gamma) || sum_rate < init_rate {
        final_u = init_u.clone();
        lambda = init_sinr;
        sum_rate = init_rate;
        kept_init = true;
    }
    Ok((
        final_u,
        PhaseScaState {
            phases: Vec::new(),
            u_relaxed: u,
            lambda,
            mu,
            iteration,
            objective_trace: trace,
            mu_trace,
            sum_rate,
            kept_init,
            stalled,
            solver_iterations,
        },
    ))
}

/// Phase SCA for the given channels, switch vector and beamformers.
pub fn sca_phases(
    channels: &ChannelSet,
    switch: &[bool],
    beamformers: &[CVector],
    budget: &LinkBudget,
    init_phases: &[CVector],
    opts: &PhaseOptions,
) -> Result<PhaseScaState> {
    check_design(channels, init_phases, switch)?;
    let v = interference_vectors(channels, switch, beamformers)?;
    let (u, mut state) = sca_phases_vectors(&v, budget, &stack_phases(init_phases), opts)?;
    state.phases = split_phases(&u, channels.n_r());
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_modulus_projection() {
        let u = CVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(3.0, -4.0)]);
        let p = project_unit_modulus(&u);
        assert_eq!(p[0], c(1.0, 0.0));
        assert_eq!(p[1], c(1.0, 0.0));
        assert_eq!(p[2], c(0.0, 1.0));
        assert!((p[3] - c(0.6, -0.8)).norm() < 1e-15);
    }

    #[test]
    fn stacking_round_trips() {
        let phases = vec![CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]), CVector::from_vec(vec![c(-1.0, 0.0), c(0.0, -1.0)])];
        let u = stack_phases(&phases);
        assert_eq!(u.len(), 4);
        assert_eq!(split_phases(&u, 2), phases);
    }

    #[test]
    fn p9_structure() {
        let v = vec![vec![CVector::from_vec(vec![c(1.0, 0.5), c(0.2, -0.3)])]];
        let u = CVector::from_element(2, c(1.0, 0.0));
        let p = build_p9(&v, &[1.0], &[0.5], &u, 1.0, 0.0).unwrap();
        assert_eq!(p.num_vars(), 2 * 2 + 3);
        let exp = p.cones.iter().filter(|c| matches!(c, Cone::Exponential)).count();
        assert_eq!(exp, 1);
        assert!(build_p9(&v, &[1.0], &[0.5], &u, 0.0, 0.0).is_err());
        assert!(matches!(build_p9(&v, &[1.0], &[0.5], &u, 1.0, 1.0), Err(CoreError::Infeasible(_))));
    }

    #[test]
    fn penalty_term_vanishes_at_expansion_point() {
        // at u = u_t on the unit circle the linear penalty contributes nothing
        let v = vec![vec![CVector::from_vec(vec![c(1.0, 0.0)])]];
        let u = CVector::from_element(1, c(0.6, 0.8));
        let p = build_p9(&v, &[1.0], &[0.5], &u, 3.0, 0.0).unwrap();
        let mut x = vec![0.0; p.num_vars()];
        x[p.variable_map["u_re"].start] = 0.6;
        x[p.variable_map["u_im"].start] = 0.8;
        let linear: f64 = p.c.iter().zip(&x).map(|(a, b)| a * b).sum();
        // the model keeps -mu Re[conj(u_t) u] and drops the constant
        // +mu |u_t|^2, which cancels it exactly at u = u_t
        assert!((linear + 3.0).abs() < 1e-12);
    }
}
