use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandex::bench::{
    coherence_profile, run_frame_experiment, run_resolution_experiment, run_sweep, write_coherence_csv, Algorithm,
    Ensemble, ExperimentConfig, Placement, RunOptions,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bandex", version, about = "Monte-Carlo sweeps for band-excluded sparse recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write <stem>.csv, <stem>.trials.csv and <stem>.meta.json
    Run {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override the trial count
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the available cores)
        #[arg(long, env = "BANDEX_WORKERS")]
        workers: Option<usize>,
        /// Run dynamic ranges above 1e8 as configured
        #[arg(long)]
        full_range: bool,
        /// Record per-algorithm runtimes; output is then no longer reproducible
        #[arg(long)]
        timing: bool,
    },
    /// Write the column coherence profile of the first instance to <stem>.coherence.csv
    Coherence {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print the algorithm names accepted in configs
    ListAlgorithms,
    /// Check a config without running it
    Validate { config: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let cfg = ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    cfg.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            workers,
            full_range,
            timing,
        } => {
            let mut cfg = load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let workers = workers.unwrap_or_else(default_workers);
            if workers == 0 {
                return Err("--workers must be at least 1".into());
            }
            let opts = RunOptions {
                workers,
                full_range,
                timing,
            };
            let result = if cfg.ensemble == Ensemble::Frame {
                run_frame_experiment(&cfg, &opts)
            } else if cfg.placement == Placement::Consecutive {
                run_resolution_experiment(&cfg, &opts)
            } else {
                run_sweep(&cfg, &opts)
            }
            .map_err(|e| e.to_string())?;
            let written = result.write_outputs(&out, &stem(&config)).map_err(|e| e.to_string())?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Coherence { config, out } => {
            let cfg = load(&config)?;
            let profile = coherence_profile(&cfg).map_err(|e| e.to_string())?;
            let path = out.join(format!("{}.coherence.csv", stem(&config)));
            write_coherence_csv(&profile, &path).map_err(|e| e.to_string())?;
            println!("{}", path.display());
            Ok(())
        }
        Command::ListAlgorithms => {
            for (alg, about) in Algorithm::catalogue() {
                println!("{:<16} {about}", alg.to_string());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!(
                "{}: ok ({} sweep values x {} algorithms x {} trials)",
                config.display(),
                cfg.sweep.values.len(),
                cfg.algorithms.len(),
                cfg.trials
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
