use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbsfn_cli::commands::{self, validation_row};
use mbsfn_cli::{CliError, RunConfig};
use mbsfn_core::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "mbsfn",
    version,
    about = "MBSFN conditional outage and ABOT experiments"
)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides experiment.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Place base stations and write the topology file.
    GenerateTopology,
    /// Per-location outage probabilities of one realization.
    OutageMap {
        /// Use this topology instead of drawing one.
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// ABOT versus the configured sweep axis, one CSV pair per series.
    AbotSweep,
    /// Closed-form kernel against Monte Carlo on randomized instances.
    McValidate {
        /// Re-run a single instance of the suite.
        #[arg(long)]
        instance: Option<u64>,
        /// Overrides validation.trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Overrides validation.instances.
        #[arg(long)]
        instances: Option<u64>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::from_toml("")?,
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    }
    let mut cfg = load(&cli)?;
    let exec = Execution::default();
    match cli.command {
        Command::GenerateTopology => {
            let s = commands::generate_topology(&cfg)?;
            let min = s
                .min_distance
                .map_or_else(|| "n/a".to_string(), |d| format!("{d:.6}"));
            println!(
                "wrote {}: stations={} min_pairwise_distance={min} areas={} occupied_areas={}",
                s.path.display(),
                s.stations,
                s.areas,
                s.occupied_areas
            );
        }
        Command::OutageMap { topology } => {
            let s = commands::outage_map(&cfg, topology.as_deref(), exec)?;
            println!(
                "wrote {}: points={} abot={:.6}",
                s.path.display(),
                s.points,
                s.abot
            );
            println!("kernel diagnostics: {}", s.diagnostics);
        }
        Command::AbotSweep => {
            for o in commands::abot_sweep(&cfg, exec)? {
                let label = if o.label.is_empty() {
                    "default"
                } else {
                    &o.label
                };
                println!(
                    "series {label}: wrote {} and {} (skipped realizations: {})",
                    o.realizations_path.display(),
                    o.summary_path.display(),
                    o.curve.skipped()
                );
            }
        }
        Command::McValidate {
            instance,
            trials,
            instances,
        } => {
            if let Some(t) = trials {
                cfg.validation.trials = t;
            }
            if let Some(n) = instances {
                cfg.validation.instances = n;
            }
            let report = commands::mc_validate(&cfg, instance, exec)?;
            let failed: Vec<_> = report.failures().collect();
            println!(
                "wrote {}: {} instances, {} failed",
                report.path.display(),
                report.records.len(),
                failed.len()
            );
            if !failed.is_empty() {
                eprintln!("{}", commands::VALIDATION_HEADER);
                for r in &failed {
                    eprintln!("{}", validation_row(r));
                }
                return Err(CliError::ValidationFailed {
                    failed: failed.len(),
                    total: report.records.len(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
