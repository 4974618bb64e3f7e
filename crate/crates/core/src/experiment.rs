//! Config-driven Monte-Carlo sweeps over transmit power or IRS size, comparing
//! switched distributed IRSs, their hybrid-precoded variant, a single IRS of
//! equal total size, and distributed IRSs that are always on.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{alternating_optimize, AoOptions, AoReport, AoStatus};
use crate::channel::{ChannelSet, Point, Scenario};
use crate::error::{CoreError, Result};
use crate::hybrid::{omp_decompose, stack_beamformers, steering_dictionary};
use crate::metrics::{energy_efficiency_from_parts, sum_rate, transmit_power, DesignState, PowerModel};

/// Dictionary atoms per transmit antenna for hybrid precoding.
pub const DICTIONARY_OVERSAMPLING: usize = 4;

pub const CSV_HEADER: [&str; 9] =
    ["scheme", "sweep_var", "sweep_value", "seed", "sum_rate_bps_hz", "ee", "outer_iters", "wall_time_ms", "status"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Distributed IRSs with greedy switching and digital beamforming.
    DIrs,
    /// The `DIrs` design with its beamformers factored onto `n_rf` RF chains.
    DIrsHbf,
    /// One IRS at the given position carrying every reflecting element.
    SIrs(Point),
    /// Distributed IRSs, all on, switch stage skipped.
    AllActive,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::DIrs => f.write_str("d-irs"),
            Scheme::DIrsHbf => f.write_str("d-irs-hbf"),
            Scheme::SIrs([x, y, z]) => write!(f, "s-irs@{x},{y},{z}"),
            Scheme::AllActive => f.write_str("all-active"),
        }
    }
}

impl FromStr for Scheme {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d-irs" => return Ok(Scheme::DIrs),
            "d-irs-hbf" => return Ok(Scheme::DIrsHbf),
            "all-active" => return Ok(Scheme::AllActive),
            _ => {}
        }
        let bad = || CoreError::Config(format!("unknown scheme `{s}` (expected d-irs, d-irs-hbf, all-active or s-irs@x,y,z)"));
        let coords = s.strip_prefix("s-irs@").ok_or_else(bad)?;
        let parsed: Vec<f64> = coords.split(',').map(|c| c.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        match parsed[..] {
            [x, y, z] if parsed.iter().all(|v| v.is_finite()) => Ok(Scheme::SIrs([x, y, z])),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerDbm,
    NR,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::PowerDbm => "power_dbm",
            SweepVariable::NR => "n_r",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_dbm" => Ok(SweepVariable::PowerDbm),
            "n_r" => Ok(SweepVariable::NR),
            _ => Err(CoreError::Config(format!("unknown sweep variable `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(CoreError::Config(format!("unknown profile `{s}` (expected desk or paper)"))),
        }
    }
}

/// A full sweep description. Every field has a default from the selected
/// profile, so an empty document is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bs_position: Point,
    pub irs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub n_t: usize,
    /// Elements per distributed IRS; overridden by an `n_r` sweep.
    pub n_r: usize,
    pub n_paths_irs_user: usize,
    pub beta0_db: f64,
    pub c_los: f64,
    pub c_nlos: f64,
    pub noise_power_dbm: f64,
    /// Transmit budget; overridden by a `power_dbm` sweep.
    pub power_budget_dbm: f64,
    pub gamma_bits: f64,
    /// RF chains of the hybrid precoder. Digital schemes count `n_t` chains.
    pub n_rf: usize,
    pub p_rf_mw: f64,
    /// Per reflecting element of an active IRS.
    pub p_irs_mw: f64,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub monte_carlo_runs: usize,
    pub base_seed: u64,
    pub max_outer: usize,
    pub ao_tol: f64,
    /// Measure wall time per record. Off by default so the CSV is byte-stable.
    pub record_timings: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Full-size setup: 16 antennas, three 16-element IRSs and three users.
    pub fn paper() -> Self {
        Self {
            bs_position: [0.0, 0.0, 0.0],
            irs_positions: vec![[0.0, 30.0, 20.0], [0.0, 60.0, 20.0], [0.0, 90.0, 20.0]],
            user_positions: vec![[0.0, 30.0, 0.0], [0.0, 60.0, 0.0], [0.0, 90.0, 0.0]],
            n_t: 16,
            n_r: 16,
            n_paths_irs_user: 3,
            beta0_db: 61.4,
            c_los: 2.0,
            c_nlos: 5.0,
            noise_power_dbm: -100.0,
            power_budget_dbm: 5.0,
            gamma_bits: 0.0,
            n_rf: 8,
            p_rf_mw: 250.0,
            p_irs_mw: 10.0,
            sweep: Sweep { variable: SweepVariable::PowerDbm, values: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0] },
            schemes: vec![
                Scheme::DIrs,
                Scheme::DIrsHbf,
                Scheme::SIrs([0.0, 60.0, 20.0]),
                Scheme::SIrs([0.0, 90.0, 20.0]),
                Scheme::AllActive,
            ],
            monte_carlo_runs: 20,
            base_seed: 0,
            max_outer: 20,
            ao_tol: 1e-3,
            record_timings: false,
            output_path: None,
        }
    }

    /// Laptop-scale setup: 8 antennas, three 8-element IRSs, two users and a
    /// noise floor low enough that rates span roughly 0.2 to 16 bits/s/Hz.
    pub fn desk() -> Self {
        let paper = Self::paper();
        Self {
            user_positions: paper.user_positions[..2].to_vec(),
            n_t: 8,
            n_r: 8,
            noise_power_dbm: -210.0,
            n_rf: 4,
            sweep: Sweep { variable: SweepVariable::PowerDbm, values: vec![-10.0, 0.0, 10.0, 20.0] },
            ..paper
        }
    }

    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn power_model(&self, scheme: Scheme) -> PowerModel {
        let n_rf = if scheme == Scheme::DIrsHbf { self.n_rf } else { self.n_t };
        PowerModel { p_rf_watts: self.p_rf_mw * 1e-3, p_irs_watts: self.p_irs_mw * 1e-3, n_rf }
    }

    /// The distributed-IRS scenario at one sweep value.
    pub fn scenario_at(&self, sweep_value: f64, seed: u64) -> Scenario {
        let mut s = Scenario {
            bs_position: self.bs_position,
            irs_positions: self.irs_positions.clone(),
            user_positions: self.user_positions.clone(),
            n_t: self.n_t,
            n_r: self.n_r,
            n_paths_irs_user: self.n_paths_irs_user,
            beta0_db: self.beta0_db,
            c_los: self.c_los,
            c_nlos: self.c_nlos,
            noise_power_dbm: self.noise_power_dbm,
            power_budget_dbm: self.power_budget_dbm,
            gamma_bits: self.gamma_bits,
            seed,
        };
        match self.sweep.variable {
            SweepVariable::PowerDbm => s.power_budget_dbm = sweep_value,
            SweepVariable::NR => s.n_r = sweep_value as usize,
        }
        s
    }

    /// The scenario a scheme sees: the single-IRS scheme replaces the
    /// distributed IRSs by one IRS with all of their elements.
    pub fn scheme_scenario(&self, scheme: Scheme, sweep_value: f64, seed: u64) -> Scenario {
        let mut s = self.scenario_at(sweep_value, seed);
        if let Scheme::SIrs(pos) = scheme {
            s.n_r *= s.l_irs();
            s.irs_positions = vec![pos];
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CoreError::Config(m));
        if self.sweep.values.is_empty() {
            return fail("sweep.values must not be empty".into());
        }
        if self.monte_carlo_runs == 0 {
            return fail("monte_carlo_runs must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return fail("schemes must not be empty".into());
        }
        if self.n_rf == 0 || self.n_rf > self.n_t {
            return fail(format!("n_rf must lie in 1..={}, got {}", self.n_t, self.n_rf));
        }
        if self.max_outer == 0 || !(self.ao_tol > 0.0) {
            return fail("max_outer must be positive and ao_tol > 0".into());
        }
        if !(self.p_rf_mw >= 0.0 && self.p_irs_mw >= 0.0) {
            return fail("p_rf_mw and p_irs_mw must be nonnegative".into());
        }
        for &v in &self.sweep.values {
            let ok = match self.sweep.variable {
                SweepVariable::PowerDbm => v.is_finite(),
                SweepVariable::NR => v >= 1.0 && v.fract() == 0.0 && v <= 1e6,
            };
            if !ok {
                return fail(format!("invalid {} sweep value {v}", self.sweep.variable.as_str()));
            }
            for &scheme in &self.schemes {
                self.scheme_scenario(scheme, v, 0).validate().map_err(|e| CoreError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// Parses a TOML document over the full-size profile.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, Profile::Paper)
}

/// Parses a TOML document whose keys override the given profile. Unknown
/// keys are rejected by name.
pub fn parse_config_with(text: &str, profile: Profile) -> Result<ExperimentConfig> {
    let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| CoreError::Config(e.to_string()))?;
    let base = toml::Table::try_from(ExperimentConfig::profile(profile)).map_err(|e| CoreError::Config(e.to_string()))?;
    let merged = merge(base, overrides);
    let config: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| CoreError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn merge(mut base: toml::Table, overrides: toml::Table) -> toml::Table {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let inner = merge(std::mem::take(b), o);
                *b = inner;
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    base
}

pub fn to_toml(config: &ExperimentConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| CoreError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordStatus {
    Ok,
    Infeasible,
    SolverFail,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::SolverFail => "solver_fail",
        }
    }
}

impl FromStr for RecordStatus {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RecordStatus::Ok),
            "infeasible" => Ok(RecordStatus::Infeasible),
            "solver_fail" => Ok(RecordStatus::SolverFail),
            _ => Err(CoreError::Config(format!("unknown record status `{s}`"))),
        }
    }
}

/// One CSV row. Failed runs carry zero rate and efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub seed: u64,
    pub sum_rate: f64,
    pub energy_efficiency: f64,
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
    pub status: RecordStatus,
}

/// A record together with the design it was computed from, for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub value_index: usize,
    pub run_index: usize,
    pub state: Option<DesignState>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one Monte-Carlo run. Every scheme and sweep point of a run shares
/// it, so comparisons along the sweep and across schemes use the same draws.
pub fn derive_seed(base_seed: u64, run_index: usize) -> u64 {
    base_seed ^ splitmix64(run_index as u64)
}

pub fn sample_channels(scenario: &Scenario) -> Result<ChannelSet> {
    ChannelSet::sample(scenario, &mut ChaCha8Rng::seed_from_u64(scenario.seed))
}

fn ao_options(config: &ExperimentConfig, scheme: Scheme, seed: u64) -> AoOptions {
    let mut opts = AoOptions { tol: config.ao_tol, max_outer: config.max_outer, ..AoOptions::default() };
    opts.beam.seed = seed;
    opts.switching = !matches!(scheme, Scheme::AllActive);
    opts
}

fn status_of(report: &AoReport) -> RecordStatus {
    match report.status {
        AoStatus::Infeasible => RecordStatus::Infeasible,
        AoStatus::Converged | AoStatus::MaxIter | AoStatus::Degenerate => RecordStatus::Ok,
    }
}

/// Replaces the digital beamformers of a design by their hybrid
/// factorization on `n_rf` RF chains.
pub fn hybrid_state(state: &DesignState, n_t: usize, n_rf: usize) -> Result<DesignState> {
    let w = stack_beamformers(&state.beamformers)?;
    let dictionary = steering_dictionary(n_t, DICTIONARY_OVERSAMPLING * n_t)?;
    let factors = omp_decompose(&w, &dictionary, n_rf)?;
    Ok(DesignState { beamformers: factors.beamformers(), ..state.clone() })
}

struct Evaluated {
    sum_rate: f64,
    ee: f64,
}

fn evaluate(config: &ExperimentConfig, scheme: Scheme, scenario: &Scenario, ch: &ChannelSet, state: &DesignState) -> Result<Evaluated> {
    let r = sum_rate(ch, state, &scenario.noise_w())?;
    let ee = energy_efficiency_from_parts(r, transmit_power(state), state.active_irs(), scenario.n_r, &config.power_model(scheme))?;
    Ok(Evaluated { sum_rate: r, ee })
}

struct Solved {
    report: AoReport,
    scenario: Scenario,
    channels: ChannelSet,
}

/// Runs every requested scheme for one (sweep point, run) pair.
fn run_point(config: &ExperimentConfig, value_index: usize, run_index: usize) -> Vec<RunOutcome> {
    let value = config.sweep.values[value_index];
    let seed = derive_seed(config.base_seed, run_index);
    let record = |scheme, status, eval: Option<&Evaluated>, iters, ms| RunRecord {
        scheme,
        sweep_var: config.sweep.variable,
        sweep_value: value,
        seed,
        sum_rate: eval.map_or(0.0, |e| e.sum_rate),
        energy_efficiency: eval.map_or(0.0, |e| e.ee),
        outer_iterations: iters,
        wall_time_ms: if config.record_timings { ms } else { 0.0 },
        status,
    };
    let failed = |scheme| RunOutcome {
        record: record(scheme, RecordStatus::SolverFail, None, 0, 0.0),
        value_index,
        run_index,
        state: None,
    };

    let solve = |scheme: Scheme| -> (Result<Solved>, f64) {
        let start = Instant::now();
        let scenario = config.scheme_scenario(scheme, value, seed);
        let solved = sample_channels(&scenario).and_then(|channels| {
            let report = alternating_optimize(&scenario, &channels, &ao_options(config, scheme, seed))?;
            Ok(Solved { report, scenario, channels })
        });
        (solved, start.elapsed().as_secs_f64() * 1e3)
    };
    // the hybrid scheme factors the digital design of the same draw
    let digital = config.schemes.iter().any(|s| matches!(s, Scheme::DIrs | Scheme::DIrsHbf)).then(|| solve(Scheme::DIrs));

    let mut out = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let owned;
        let (solved, ms) = match (scheme, &digital) {
            (Scheme::DIrs | Scheme::DIrsHbf, Some((r, ms))) => (r.as_ref().ok(), *ms),
            _ => {
                owned = solve(scheme);
                (owned.0.as_ref().ok(), owned.1)
            }
        };
        let Some(Solved { report, scenario, channels }) = solved else {
            out.push(failed(scheme));
            continue;
        };
        let start = Instant::now();
        let state = if scheme == Scheme::DIrsHbf { hybrid_state(&report.state, scenario.n_t, config.n_rf) } else { Ok(report.state.clone()) };
        let outcome = state.and_then(|state| {
            let eval = evaluate(config, scheme, scenario, channels, &state)?;
            let ms = ms + start.elapsed().as_secs_f64() * 1e3;
            Ok(RunOutcome {
                record: record(scheme, status_of(report), Some(&eval), report.outer_iterations(), ms),
                value_index,
                run_index,
                state: Some(state),
            })
        });
        out.push(outcome.unwrap_or_else(|_| failed(scheme)));
    }
    out
}

/// Runs the whole sweep in parallel on the current rayon pool. Failures
/// become `solver_fail` records; the result is in CSV order.
pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.sweep.values.len())
        .flat_map(|v| (0..config.monte_carlo_runs).map(move |r| (v, r)))
        .collect();
    let mut out: Vec<RunOutcome> = jobs.into_par_iter().flat_map_iter(|(v, r)| run_point(config, v, r)).collect();
    out.sort_by(|a, b| record_order(&a.record, &b.record));
    Ok(out)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    Ok(run_experiment_detailed(config)?.into_iter().map(|o| o.record).collect())
}

fn record_order(a: &RunRecord, b: &RunRecord) -> Ordering {
    a.scheme
        .to_string()
        .cmp(&b.scheme.to_string())
        .then(a.sweep_value.total_cmp(&b.sweep_value))
        .then(a.seed.cmp(&b.seed))
}

/// Decimal rendering with nine significant digits and no exponent.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit, e.g. 9.9999999996 -> 10.00000000
    let digits = s.chars().filter(char::is_ascii_digit).collect::<String>();
    if digits.trim_start_matches('0').len() > 9 && decimals > 0 {
        let decimals = decimals - 1;
        format!("{x:.decimals$}")
    } else {
        s
    }
}

pub fn write_csv<W: Write>(records: &[RunRecord], writer: W) -> Result<()> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| record_order(a, b));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in sorted {
        w.write_record([
            r.scheme.to_string(),
            r.sweep_var.as_str().to_string(),
            format_sig9(r.sweep_value),
            r.seed.to_string(),
            format_sig9(r.sum_rate),
            format_sig9(r.energy_efficiency),
            r.outer_iterations.to_string(),
            format_sig9(r.wall_time_ms),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the records sorted by (scheme, sweep value, seed).
pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    write_csv(records, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CoreError::Config(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str, col: &str| s.parse::<f64>().map_err(|_| CoreError::Config(format!("bad {col} `{s}`")));
    let int = |s: &str, col: &str| s.parse::<u64>().map_err(|_| CoreError::Config(format!("bad {col} `{s}`")));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != CSV_HEADER.len() {
            return Err(CoreError::Config(format!("row has {} fields", row.len())));
        }
        out.push(RunRecord {
            scheme: row[0].parse()?,
            sweep_var: row[1].parse()?,
            sweep_value: num(&row[2], "sweep_value")?,
            seed: int(&row[3], "seed")?,
            sum_rate: num(&row[4], "sum_rate_bps_hz")?,
            energy_efficiency: num(&row[5], "ee")?,
            outer_iterations: int(&row[6], "outer_iters")? as usize,
            wall_time_ms: num(&row[7], "wall_time_ms")?,
            status: row[8].parse()?,
        });
    }
    Ok(out)
}

/// Mean over `ok` records of one scheme at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMean {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub runs: usize,
    pub sum_rate: f64,
    pub energy_efficiency: f64,
}

/// Per-(scheme, sweep value) means over `ok` records, in CSV order.
pub fn point_means(records: &[RunRecord]) -> Vec<PointMean> {
    let mut sorted: Vec<&RunRecord> = records.iter().filter(|r| r.status == RecordStatus::Ok).collect();
    sorted.sort_by(|a, b| record_order(a, b));
    let mut out: Vec<PointMean> = Vec::new();
    for r in sorted {
        match out.last_mut() {
            Some(m) if m.scheme == r.scheme && m.sweep_value == r.sweep_value => {
                m.runs += 1;
                m.sum_rate += r.sum_rate;
                m.energy_efficiency += r.energy_efficiency;
            }
            _ => out.push(PointMean {
                scheme: r.scheme,
                sweep_value: r.sweep_value,
                runs: 1,
                sum_rate: r.sum_rate,
                energy_efficiency: r.energy_efficiency,
            }),
        }
    }
    for m in &mut out {
        m.sum_rate /= m.runs as f64;
        m.energy_efficiency /= m.runs as f64;
    }
    out
}
