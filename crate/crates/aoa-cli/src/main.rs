use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use aoa_core::harness::{run_experiment, ExperimentConfig};

/// Signal-level simulator for Bluetooth 5.1 AoA direction finding.
#[derive(Parser)]
#[command(name = "aoa-forge", version, about)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,

    /// TOML experiment configuration. Defaults to the shipped indoor
    /// profile; pass "ideal" for the noise-free defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the configuration's RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for CSV artifacts (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum Experiment {
    AngularSweep,
    IndoorLine,
    FhSubset,
    PositioningGrid,
    AttackDemo,
    Calibration,
}

impl Experiment {
    fn id(self) -> &'static str {
        match self {
            Experiment::AngularSweep => "angular-sweep",
            Experiment::IndoorLine => "indoor-line",
            Experiment::FhSubset => "fh-subset",
            Experiment::PositioningGrid => "positioning-grid",
            Experiment::AttackDemo => "attack-demo",
            Experiment::Calibration => "calibration",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        None => ExperimentConfig::indoor(),
        Some(p) if p.as_os_str() == "ideal" => ExperimentConfig::default(),
        Some(p) => match ExperimentConfig::from_file(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }

    match run_experiment(cli.experiment.id(), &cfg, &cli.out) {
        Ok(()) => {
            println!(
                "{}: artifacts written to {}",
                cli.experiment.id(),
                cli.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
