//! `qvl` command-line front end: grid sweeps of training runs and fidelity
//! campaigns, threshold estimation over finished sweeps, and circuit
//! inspection.

pub mod commands;
pub mod config;
pub mod grid;
pub mod output;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qvl_core::code422::LogicalLabel;
use qvl_core::noise::NoiseModel;

use crate::commands::{InspectRequest, RunContext};
use crate::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "qvl", version, about = "Noisy encoded-classifier experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in config.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "QVL_WORKERS", value_name = "N")]
    pub workers: Option<usize>,
    /// Added to every seed in the config.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub seed_offset: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the classifier at every grid point and seed.
    Train,
    /// Run a fidelity campaign at every grid point.
    Fidelity,
    /// Estimate the ancilla error threshold from a finished sweep.
    Threshold {
        /// Directory holding train_summary.csv and, optionally,
        /// fidelity_summary.csv.
        #[arg(long, value_name = "DIR")]
        sweep: PathBuf,
    },
    /// Print a circuit program.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Circuit text file; otherwise the classifier circuit is built.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["bare", "rounds", "input", "theta"])]
    pub program: Option<PathBuf>,
    /// Build the unencoded circuit.
    #[arg(long, conflicts_with = "rounds")]
    pub bare: bool,
    /// Syndrome rounds in the encoded circuit.
    #[arg(long, default_value_t = 0)]
    pub rounds: usize,
    /// Input bits, e.g. 01.
    #[arg(long, default_value = "00")]
    pub input: LogicalLabel,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Also sample one fault list under this noise model.
    #[arg(long, value_name = "MODEL", requires = "p", value_parser = parse_model)]
    pub noise: Option<NoiseModel>,
    #[arg(long, value_name = "P")]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub f_anc: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_model(s: &str) -> Result<NoiseModel, String> {
    NoiseModel::parse(s).ok_or_else(|| format!("unknown noise model {s:?} (expected none, gate or environmental)"))
}

fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    match (&global.config, global.preset) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(Preset::Desk)) => ExperimentConfig::preset("desk"),
        (None, Some(Preset::Paper)) => ExperimentConfig::preset("paper"),
        (None, None) => bail!("no experiment config: pass --config PATH or --preset desk|paper"),
    }
}

fn context(global: &GlobalArgs, config: ExperimentConfig) -> Result<RunContext> {
    let workers = global
        .workers
        .or(config.run.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let out = global.out.clone().or_else(|| config.run.out.clone()).unwrap_or_else(|| PathBuf::from("qvl-out"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    Ok(RunContext { config, out, workers, seed_offset: global.seed_offset })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train => commands::cmd_train(&context(&cli.global, resolve_config(&cli.global)?)?),
        Command::Fidelity => commands::cmd_fidelity(&context(&cli.global, resolve_config(&cli.global)?)?),
        Command::Threshold { sweep } => {
            // Threshold criteria come from the config when one is given.
            let config = if cli.global.config.is_some() || cli.global.preset.is_some() {
                resolve_config(&cli.global)?
            } else {
                ExperimentConfig::preset("desk")?
            };
            let ctx = context(&cli.global, config)?;
            commands::cmd_threshold(&ctx, &sweep)
        }
        Command::Inspect(args) => {
            let noise = match args.noise {
                Some(model) => Some(commands::noise_for_inspect(model, args.p.unwrap_or(0.0), args.f_anc, args.seed)?),
                None => None,
            };
            let req = InspectRequest {
                program: args.program,
                bare: args.bare,
                rounds: args.rounds,
                input: args.input,
                theta: args.theta,
                noise,
            };
            print!("{}", commands::render_inspect(&req)?);
            Ok(())
        }
    }
}
