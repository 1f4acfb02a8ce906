use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bregmix::compare::{compare_paths, ranking};
use bregmix::output::write_all;
use bregmix::{run_ensemble, AppError, Execution, ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "bregmix",
    version,
    about = "Monte Carlo experiments for exponentiated-gradient filter mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV curves plus manifest.json.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of Monte Carlo runs (overrides runs).
        #[arg(long)]
        runs: Option<usize>,
        /// Master seed (overrides seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several configs that differ only in the mixture section.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        /// Directory for compare.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    let exec = Execution::from_env();
    match cli.command {
        Command::Run {
            config,
            out,
            runs,
            seed,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(runs) = runs {
                cfg.runs = runs;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output.directory = out;
            }
            let rc = cfg.resolve()?;
            let started = Instant::now();
            let curves = run_ensemble(&rc, exec)?;
            let manifest = write_all(
                &rc.config.output.directory,
                &rc,
                &curves,
                started.elapsed().as_secs_f64(),
            )?;
            println!(
                "{} runs ({} diverged) in {:.1}s -> {}",
                curves.runs_used,
                curves.diverged,
                manifest.wall_clock_seconds,
                rc.config.output.directory.display()
            );
        }
        Command::Compare { configs, out } => {
            let paths: Vec<&std::path::Path> = configs.iter().map(|p| p.as_path()).collect();
            let entries = compare_paths(&paths, &out, exec)?;
            println!(
                "{:<4} {:<24} {:<18} {:>14} {:>12}",
                "rank", "name", "algorithm", "final_mse", "iters_90pct"
            );
            for (rank, i) in ranking(&entries).into_iter().enumerate() {
                let e = &entries[i];
                let iters = e
                    .iterations_to_90pct
                    .map_or("-".to_string(), |n| n.to_string());
                println!(
                    "{:<4} {:<24} {:<18} {:>14.6e} {:>12}",
                    rank + 1,
                    e.name,
                    e.algorithm,
                    e.final_window_mse,
                    iters
                );
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            cfg.validate()?;
            println!("{}", cfg.with_defaults().to_json_pretty());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                AppError::Config(errs) => {
                    for v in &errs.0 {
                        eprintln!("error: {v}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
