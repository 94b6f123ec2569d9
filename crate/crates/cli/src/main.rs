use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use ucp_cli::{run, Experiment, ExperimentConfig, GateFailure};

/// Runs one unique continuation study and writes its tables.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Config file; its sections override the experiment's preset.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and the gnuplot script.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    threads: usize,
    /// Extra `section.key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<GateFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn execute(args: &Args) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .context("setting up the thread pool")?;
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::layered(args.experiment, &text)
        .with_context(|| format!("in {}", args.config.display()))?
        .with_overrides(&args.overrides)?;
    cfg.run.seed = args.seed;
    if let Some(e) = cfg.experiment {
        if e != args.experiment {
            log::warn!("config names experiment {}, running {}", e.name(), args.experiment.name());
        }
    }
    cfg.experiment = Some(args.experiment);
    let report = run(&cfg, args.experiment)?;
    let files = report.write(&args.out)?;
    std::fs::write(args.out.join("config.toml"), toml::to_string(&cfg)?)?;
    for s in &report.slopes {
        log::info!("{}: slope {}", s.name, s.value.map_or("n/a".into(), |v| format!("{v:.3}")));
    }
    log::info!("wrote {} files to {}", files.len() + 1, args.out.display());
    Ok(())
}
