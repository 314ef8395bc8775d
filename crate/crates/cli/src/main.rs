use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qae::config::ConfigError;
use qae::{Experiment, ExperimentConfig, ExperimentError, OUTPUT_ROOT_VAR};

#[derive(Debug, Parser)]
#[command(name = "qae", version, about = "Quantum autoencoder experiments")]
struct Cli {
    experiment: Experiment,
    /// TOML config; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $QAE_OUTPUT_ROOT/<experiment> or ./qae-out/<experiment>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// exact | sampled:SHOTS | poisson:MEAN
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, requires = "n")]
    d: Option<usize>,
    #[arg(long, requires = "d")]
    n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Matrix file for verify-unitaries [default: the bundled learned unitaries]
    #[arg(long)]
    matrices: Option<PathBuf>,
    /// Number of random pairs for decode-check.
    #[arg(long)]
    count: Option<usize>,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cfg.experiment {
        if e != cli.experiment {
            return Err(ConfigError::Invalid(format!(
                "config is for {}, but {} was requested",
                e.name(),
                cli.experiment.name()
            )));
        }
    }
    cfg.experiment = Some(cli.experiment);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = &cli.backend {
        cfg.backend = b.clone();
    }
    if let (Some(d), Some(n)) = (cli.d, cli.n) {
        cfg.d = d;
        cfg.n = n;
    }
    if let Some(r) = cli.runs {
        cfg.runs = r;
    }
    if let Some(m) = &cli.matrices {
        cfg.matrices = Some(m.clone());
    }
    if let Some(c) = cli.count {
        cfg.checks = c;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if cfg.output.is_none() {
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("qae-out"), PathBuf::from);
        cfg.output = Some(root.join(cli.experiment.name()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qae: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = cfg.output.clone().expect("set above");
    match qae::run(cli.experiment, &cfg, &dir) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json value"));
            eprintln!("qae: wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qae: {e}");
            ExitCode::from(ExperimentError::exit_code(&e) as u8)
        }
    }
}
