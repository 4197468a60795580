use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ising_aqc::config::{ExperimentConfig, Profile};
use ising_aqc::pipeline::{resolve_workers, Pipeline, Stage, WORKERS_ENV};
use ising_aqc::Error;

#[derive(Parser)]
#[command(name = "ising-aqc", version, about = "Adiabatic evolution of disordered transverse-field Ising chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration (paper defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed for the disorder ensembles.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensemble evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Ensemble-size preset: paper (1024) or ci (128).
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Ci,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Calibrate t_f for every chain size and write calibration.csv.
    Calibrate,
    /// Ideal-chain gap traces.
    Spectrum,
    /// Ideal-chain eigenbasis population traces.
    Evolve,
    /// Disorder ensembles, histograms and the conditions scatter.
    Ensemble,
    /// Only the conditions ensemble and its scatter table.
    Conditions,
    /// Validate and summarise existing outputs without recomputation.
    Report,
    /// Every stage in order.
    Run,
}

fn pipeline(cli: &Cli) -> Result<Pipeline, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.profile {
        match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Ci => Profile::Ci,
        }
        .apply(&mut cfg);
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let env = std::env::var(WORKERS_ENV).ok();
    let workers = resolve_workers(cli.workers, env.as_deref(), cfg.workers)?;
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Pipeline::new(cfg, out, workers)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Calibrate => Stage::Calibrate,
        Command::Spectrum => Stage::Spectrum,
        Command::Evolve => Stage::Evolve,
        Command::Ensemble => Stage::Ensemble,
        Command::Conditions => Stage::Conditions,
        Command::Report => Stage::Report,
        Command::Run => Stage::All,
    };
    let result = pipeline(&cli).and_then(|p| {
        p.run(stage)?;
        if matches!(stage, Stage::Report | Stage::All) {
            print!("{}", std::fs::read_to_string(p.out.join("report.txt"))?);
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
