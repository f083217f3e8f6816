//! Thin command-line front end over the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use p3s::harness::{self, RunConfig};
use p3s::tabular;

#[derive(Parser)]
#[command(name = "p3s", about = "Population-guided parallel policy search laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment from a config file.
    Train {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Master seed; all run randomness derives from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for CSVs, checkpoints and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Override any config field, e.g. `td3.gamma=0.98` or `scheme=eso`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads for the per-learner phases (results are
        /// identical for any value).
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Certify the tabular improvement guarantee on random MDPs.
    VerifyTheory {
        /// Number of random instances.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional per-instance CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Absolute tolerance on Q-scale comparisons.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Aggregate finished run directories into a comparison table.
    Summarize {
        /// Run directories (each holding eval.csv and run_meta.json).
        dirs: Vec<PathBuf>,
        /// Output path for the text table (a .csv twin is written too).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> p3s::Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            seed,
            out,
            overrides,
            workers,
        } => {
            let cfg = RunConfig::from_file(&config, &overrides)?;
            let artifacts = harness::run(&cfg, seed, Some(&out), workers)?;
            println!(
                "{} on {} | seed {} | {} env steps | final score {:.4}",
                cfg.scheme.name(),
                cfg.env,
                seed,
                cfg.total_env_steps,
                artifacts.final_score
            );
            println!("artifacts in {}", out.display());
            Ok(())
        }
        Command::VerifyTheory {
            instances,
            seed,
            out,
            tolerance,
        } => {
            let (summary, reports) = tabular::certify_corpus(instances, seed, tolerance)?;
            print!("{}", summary.render());
            if let Some(path) = out {
                let mut csv = String::from(tabular::CertReport::csv_header());
                csv.push('\n');
                for (k, r) in reports.iter().enumerate() {
                    csv.push_str(&r.csv_row(k));
                    csv.push('\n');
                }
                std::fs::write(&path, csv)?;
                println!("per-instance report: {}", path.display());
            }
            if summary.violations > 0 {
                return Err(p3s::Error::Config(format!(
                    "{} certification violations",
                    summary.violations
                )));
            }
            Ok(())
        }
        Command::Summarize { dirs, out } => {
            if dirs.is_empty() {
                return Err(p3s::Error::Config("no run directories given".into()));
            }
            let table = harness::export_summary(&dirs, out.as_deref())?;
            print!("{table}");
            Ok(())
        }
    }
}
