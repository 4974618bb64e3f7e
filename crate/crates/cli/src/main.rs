use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dirsim_core::experiment::{emit_csv, parse_config_with, run_experiment, ExperimentConfig, Profile, RecordStatus};

#[derive(Parser)]
#[command(name = "dirsim", version, about = "Sum-rate sweeps for distributed-IRS mmWave downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per (scheme, sweep value, seed).
    /// Exits with 2 if any record is not `ok`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults that the config file overrides.
        #[arg(long, value_enum, default_value_t = ProfileArg::Paper)]
        profile: ProfileArg,
        /// Worker threads; 0 uses one per core.
        #[arg(long, env = "DIRSIM_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ProfileArg::Paper)]
        profile: ProfileArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn load(path: &Path, profile: ProfileArg) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config_with(&text, profile.into()).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(config: &Path, out: &Path, profile: ProfileArg, threads: usize) -> Result<ExitCode, String> {
    let config = load(config, profile)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let records = pool.install(|| run_experiment(&config)).map_err(|e| e.to_string())?;
    emit_csv(&records, out).map_err(|e| format!("{}: {e}", out.display()))?;

    let count = |s| records.iter().filter(|r| r.status == s).count();
    let (ok, infeasible, failed) = (count(RecordStatus::Ok), count(RecordStatus::Infeasible), count(RecordStatus::SolverFail));
    eprintln!("{} records: {ok} ok, {infeasible} infeasible, {failed} solver_fail -> {}", records.len(), out.display());
    Ok(if ok < records.len() { ExitCode::from(EXIT_PARTIAL) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, profile, threads } => run(&config, &out, profile, threads),
        Command::Validate { config, profile } => load(&config, profile).map(|c| {
            let points = c.sweep.values.len() * c.monte_carlo_runs * c.schemes.len();
            println!("ok: {} sweep over {} values, {} schemes, {points} records", c.sweep.variable.as_str(), c.sweep.values.len(), c.schemes.len());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}
