//! Alternating optimization of beamformers, IRS phases and IRS switches.
//!
//! Each outer pass runs beamforming SCA, then phase SCA, then the greedy
//! switch search, each on the output of the previous stage, until the
//! sum-rate moves by at most `tol` bits/s/Hz. Effective channels are
//! recomputed from the switch vector at the start of every stage, so a
//! switch change is visible to the next beamforming pass.
//!
//! Every stage keeps its input when its own output is worse, so the outer
//! trace is nondecreasing.
//!
//! Cost of one run with `T` outer passes, `S1`/`S2` inner SCA steps per pass
//! and conic accuracies `eps1`/`eps2`, counting interior-point-equivalent
//! work per conic solve:
//!
//! * beamforming: `S1 (K N_t^2 + 2K)^3.5 log(1/eps1)`
//! * phases: `S2 (2 L N_r + 3K)^3.5 log(1/eps2)`
//! * switching: `L^2` candidate evaluations, each `L N_r N_t` for the
//!   effective channels, so `L^3 N_r N_t`
//!
//! [`complexity_model`] evaluates this from a finished [`AoReport`].

use std::time::Instant;

use crate::beamforming::{matched_filter_init, sca_beamforming, BeamformingOptions, LinkBudget};
use crate::channel::{effective_channels, ChannelSet, Scenario};
use crate::error::{CoreError, Result};
use crate::metrics::{sum_rate, transmit_power, user_rates, DesignState};
use crate::phase::{sca_phases, PhaseOptions};
use crate::switch::{greedy_switch, switch_value};

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    /// Outer stopping threshold on the sum-rate change, bits/s/Hz.
    pub tol: f64,
    pub max_outer: usize,
    pub beam: BeamformingOptions,
    pub phase: PhaseOptions,
    /// When false every IRS stays on and the switch stage is skipped.
    pub switching: bool,
    /// Record per-stage wall-clock times. Off by default so that reports are
    /// bit-identical across runs.
    pub record_timings: bool,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_outer: 20,
            beam: BeamformingOptions::default(),
            phase: PhaseOptions::default(),
            switching: true,
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoStatus {
    Converged,
    MaxIter,
    /// No cascaded link carries energy, so every design has rate 0.
    Degenerate,
    /// The starting point misses the rate target.
    Infeasible,
}

/// Stage wall-clock times in milliseconds, summed over outer passes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub beamforming_ms: f64,
    pub phase_ms: f64,
    pub switch_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoReport {
    pub state: DesignState,
    /// Sum-rate at the start and after every outer pass.
    pub objective_trace: Vec<f64>,
    /// Sum-rate after the beamforming, phase and switch stage of each pass.
    pub stage_rates: Vec<[f64; 3]>,
    /// Inner SCA steps of the beamforming stage per pass.
    pub beam_iterations: Vec<usize>,
    /// Inner SCA steps of the phase stage per pass.
    pub phase_iterations: Vec<usize>,
    /// Conic solver iterations of the beamforming and phase stages per pass.
    pub solver_iterations: Vec<[usize; 2]>,
    /// Greedy rounds that removed an IRS, per pass.
    pub switch_removals: Vec<usize>,
    pub timings: StageTimings,
    pub status: AoStatus,
    pub sum_rate: f64,
}

impl AoReport {
    pub fn outer_iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }
}

fn elapsed_ms(start: Option<Instant>) -> f64 {
    start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

fn all_links_dead(channels: &ChannelSet) -> bool {
    let zero = |z: &num_complex::Complex64| z.re == 0.0 && z.im == 0.0;
    (0..channels.l_irs()).all(|l| channels.g[l].iter().all(zero) || channels.h.iter().all(|hk| hk[l].iter().all(zero)))
}

/// Starting point: all-ones phases, every IRS on, matched-filter beamformers
/// sharing the full power budget.
pub fn initial_state(scenario: &Scenario, channels: &ChannelSet) -> Result<DesignState> {
    let mut state = DesignState::neutral(channels.n_t(), channels.k_users(), channels.n_r(), channels.l_irs());
    let a = effective_channels(channels, &state.phases, &state.switch)?;
    state.beamformers = matched_filter_init(&a, scenario.power_budget_w());
    Ok(state)
}

pub fn alternating_optimize(scenario: &Scenario, channels: &ChannelSet, opts: &AoOptions) -> Result<AoReport> {
    scenario.validate()?;
    channels.validate()?;
    if channels.l_irs() != scenario.l_irs()
        || channels.k_users() != scenario.k_users()
        || channels.n_t() != scenario.n_t
        || channels.n_r() != scenario.n_r
    {
        return Err(CoreError::Dimension("channels were not sampled for this scenario".into()));
    }
    let budget = LinkBudget::from_scenario(scenario);
    let mut state = initial_state(scenario, channels)?;
    let rate0 = sum_rate(channels, &state, &budget.noise_w)?;
    let mut report = AoReport {
        state: state.clone(),
        objective_trace: vec![rate0],
        stage_rates: Vec::new(),
        beam_iterations: Vec::new(),
        phase_iterations: Vec::new(),
        solver_iterations: Vec::new(),
        switch_removals: Vec::new(),
        timings: StageTimings::default(),
        status: AoStatus::Converged,
        sum_rate: rate0,
    };
    if user_rates(channels, &state, &budget.noise_w)?.iter().any(|&r| r < budget.gamma_bits - 1e-9) {
        report.status = AoStatus::Infeasible;
        return Ok(report);
    }
    if all_links_dead(channels) {
        report.status = AoStatus::Degenerate;
        return Ok(report);
    }

    let clock = || opts.record_timings.then(Instant::now);
    let mut rate = rate0;
    report.status = AoStatus::MaxIter;
    for pass in 0..opts.max_outer {
        let t = clock();
        let beam_opts = BeamformingOptions { seed: opts.beam.seed ^ pass as u64, ..opts.beam.clone() };
        let beam = sca_beamforming(channels, &state.phases, &state.switch, &budget, &state.beamformers, &beam_opts)?;
        state.beamformers = beam.beamformers;
        report.timings.beamforming_ms += elapsed_ms(t);
        let after_beam = beam.sum_rate;

        let t = clock();
        let phase = sca_phases(channels, &state.switch, &state.beamformers, &budget, &state.phases, &opts.phase)?;
        state.phases = phase.phases;
        report.timings.phase_ms += elapsed_ms(t);
        let after_phase = phase.sum_rate;

        let t = clock();
        let mut removals = 0;
        let mut after_switch = after_phase;
        if opts.switching {
            let (x, value) =
                greedy_switch(channels, &state.phases, &state.beamformers, &budget.noise_w, budget.gamma_bits)?;
            // the greedy search restarts from all-on; keep the current vector
            // when that restart lands somewhere worse
            let current = switch_value(
                channels,
                &state.phases,
                &state.beamformers,
                &budget.noise_w,
                budget.gamma_bits,
                &state.switch,
            )?;
            if value > current {
                removals = channels.l_irs() - x.active();
                state.switch = x.flags;
                after_switch = value;
            }
        }
        report.timings.switch_ms += elapsed_ms(t);

        report.stage_rates.push([after_beam, after_phase, after_switch]);
        report.beam_iterations.push(beam.iteration);
        report.phase_iterations.push(phase.iteration);
        report.solver_iterations.push([beam.solver_iterations, phase.solver_iterations]);
        report.switch_removals.push(removals);
        let prev = rate;
        rate = sum_rate(channels, &state, &budget.noise_w)?;
        report.objective_trace.push(rate);
        if (rate - prev).abs() <= opts.tol {
            report.status = AoStatus::Converged;
            break;
        }
    }
    report.state = state;
    report.sum_rate = rate;
    Ok(report)
}

/// Worst violation in each constraint family; zero means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// `max_k (gamma - R_k)`, floored at 0.
    pub rate_shortfall: f64,
    /// `(sum ||w_k||^2 - P) / P`, floored at 0.
    pub power_excess: f64,
    /// `max | |u_ln| - 1 |`.
    pub modulus_error: f64,
    /// Switch vector length differs from the IRS count. Binary values are
    /// guaranteed by the `bool` representation.
    pub switch_shape_error: bool,
}

impl FeasibilityReport {
    pub const RATE_TOL: f64 = 1e-4;
    pub const POWER_TOL: f64 = 1e-6;
    pub const MODULUS_TOL: f64 = 1e-9;

    pub fn is_feasible(&self) -> bool {
        self.rate_shortfall <= Self::RATE_TOL
            && self.power_excess <= Self::POWER_TOL
            && self.modulus_error <= Self::MODULUS_TOL
            && !self.switch_shape_error
    }
}

pub fn check_feasible(state: &DesignState, scenario: &Scenario, channels: &ChannelSet) -> Result<FeasibilityReport> {
    let switch_shape_error = state.switch.len() != channels.l_irs();
    let rate_shortfall = if switch_shape_error {
        f64::INFINITY
    } else {
        user_rates(channels, state, &scenario.noise_w())?
            .iter()
            .map(|r| scenario.gamma_bits - r)
            .fold(0.0, f64::max)
    };
    let p = scenario.power_budget_w();
    let modulus_error = state.phases.iter().flat_map(|u| u.iter()).map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    Ok(FeasibilityReport {
        rate_shortfall,
        power_excess: ((transmit_power(state) - p) / p).max(0.0),
        modulus_error,
        switch_shape_error,
    })
}

/// Work units of a finished run under the cost model in the module docs.
pub fn complexity_model(report: &AoReport, scenario: &Scenario, opts: &AoOptions) -> f64 {
    let (k, n_t, n_r, l) = (scenario.k_users() as f64, scenario.n_t as f64, scenario.n_r as f64, scenario.l_irs() as f64);
    let beam_step = (k * n_t * n_t + 2.0 * k).powf(3.5) * (1.0 / opts.beam.solver_tol).ln();
    let phase_step = (2.0 * l * n_r + 3.0 * k).powf(3.5) * (1.0 / opts.phase.solver_tol).ln();
    let switch_pass = if opts.switching { l.powi(3) * n_r * n_t } else { 0.0 };
    report
        .beam_iterations
        .iter()
        .zip(&report.phase_iterations)
        .map(|(&s1, &s2)| s1.max(1) as f64 * beam_step + s2.max(1) as f64 * phase_step + switch_pass)
        .sum()
}
