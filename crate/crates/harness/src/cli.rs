//! The `rfr` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rfr_core::data::save_dataset;
use rfr_core::losses::PNorm;
use rfr_theory::{verify_theory, SuiteConfig};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::exit;
use crate::report::{render_table, summarize, summary_rows};
use crate::runner::{prepare_splits, read_records, run_experiment, write_outputs};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "rfr", version, about = "Robust fairness regularization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a single regularization weight instead of the configured grid.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Perturbation radius (in the configured `rho_scale` units).
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Perturbation norm: a number > 1 or `inf`.
    #[arg(long = "p-norm", global = true)]
    p_norm: Option<PNorm>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate every (method, lambda, seed) cell of a config.
    Run { config: PathBuf },
    /// Run the optimal-transport and perturbation-equivalence certificates.
    VerifyTheory,
    /// Write the source/target split of every seed to disk.
    GenShift { config: PathBuf },
    /// Aggregate record files (or run directories) into a mean±std table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            lambda: self.lambda,
            rho: self.rho,
            p_norm: self.p_norm,
        }
    }

    /// Rejects training flags on subcommands that do not train.
    fn reject_training_flags(&self, sub: &str) -> Result<()> {
        let given: Vec<&str> = [
            ("--lambda", self.lambda.is_some()),
            ("--rho", self.rho.is_some()),
            ("--p-norm", self.p_norm.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect();
        if given.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{} does not apply to `{sub}`", given.join(", "))))
        }
    }
}

fn output_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.out
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory: set `out` in the config or pass --out".into()))
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(config, &cli.overrides())?;
            let dir = output_dir(&cfg)?.to_path_buf();
            let records = run_experiment(&cfg)?;
            write_outputs(&records, &dir)?;
            print!("{}", render_table(&summarize(&records)));
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            println!("wrote {} records to {}", records.len(), dir.display());
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see records.jsonl");
                return Ok(exit::NUMERIC);
            }
            Ok(exit::OK)
        }
        Command::VerifyTheory => {
            cli.reject_training_flags("verify-theory")?;
            let cfg = SuiteConfig {
                seed: cli.seed.unwrap_or(0),
                ..SuiteConfig::default()
            };
            let report = verify_theory(&cfg)?;
            for c in &report.checks {
                println!(
                    "{} {} ({} instances): {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.instances,
                    c.detail
                );
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("theory_report.json");
                std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
            }
            Ok(if report.passed() { exit::OK } else { exit::NUMERIC })
        }
        Command::GenShift { config } => {
            cli.reject_training_flags("gen-shift")?;
            let cfg = ExperimentConfig::from_file(config, &cli.overrides())?;
            let dir = output_dir(&cfg)?.to_path_buf();
            for (seed, split) in prepare_splits(&cfg)? {
                let sub = dir.join(format!("seed-{seed}"));
                std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
                save_dataset(&split.source, &sub.join("source.csv"))?;
                save_dataset(&split.target, &sub.join("target.csv"))?;
                println!(
                    "seed {seed}: {} source rows, {} target rows -> {}",
                    split.source.len(),
                    split.target.len(),
                    sub.display()
                );
            }
            Ok(exit::OK)
        }
        Command::Report { inputs } => {
            cli.reject_training_flags("report")?;
            let records = read_records(inputs)?;
            let cells = summarize(&records);
            print!("{}", render_table(&cells));
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("summary.csv");
                let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
                for row in summary_rows(&cells) {
                    w.write_record(&row).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            Ok(exit::OK)
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
