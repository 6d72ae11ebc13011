//! `kkl` — train and evaluate learned KKL observers for the benchmark
//! systems.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric divergence,
//! 4 bound-check failure under `evaluate --strict`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kkl_cli::config::{ConfigFile, Resolved};
use kkl_cli::error::CliError;
use kkl_cli::pipeline;

#[derive(Parser)]
#[command(name = "kkl", version, about = "Learned KKL observer pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; omitted fields fall back to the per-system
    /// benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System name (duffing | vanderpol | rossler | lorenz); overrides the
    /// config file.
    #[arg(long)]
    system: Option<String>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    out: Option<String>,
    /// Master seed overriding every seed in the run (same effect as the
    /// KKL_SEED environment variable).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        file.resolve(self.system.as_deref(), self.out.as_deref(), self.seed)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate plant/filter trajectories and write the stage-one dataset.
    GenerateData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the forward map on a generated dataset.
    TrainForward {
        #[command(flatten)]
        common: Common,
        /// Dataset directory (defaults to <out>/data).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the inverse map against a frozen forward model.
    TrainInverse {
        #[command(flatten)]
        common: Common,
        /// Forward model file (defaults to <out>/model_forward.json).
        #[arg(long)]
        forward: Option<PathBuf>,
        /// Pre-generated stage-two CSV; generated automatically when absent.
        #[arg(long)]
        s2: Option<PathBuf>,
    },
    /// Roll out the learned observer on fresh test trajectories.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Inverse model file (defaults to <out>/model_inverse.json).
        #[arg(long)]
        inverse: Option<PathBuf>,
        /// Also write per-state true-vs-estimated plot tables.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Compute metrics and the bound certificate (simulating if needed).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        forward: Option<PathBuf>,
        #[arg(long)]
        inverse: Option<PathBuf>,
        /// Reuse previously simulated runs from this directory.
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Fail (exit 4) when any bound check fails.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Train physics-on and physics-off variants and compare generalization.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Write a bound certificate from existing models and runs.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        forward: Option<PathBuf>,
        #[arg(long)]
        inverse: Option<PathBuf>,
        /// Directory holding run CSVs and runs_meta.json.
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Certificate output path (defaults to <out>/certificate.json).
        #[arg(long)]
        cert: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateData { common } => {
            let cfg = common.resolve()?;
            let dir = pipeline::cmd_generate_data(&cfg)?;
            println!("wrote stage-one dataset to {}", dir.display());
        }
        Command::TrainForward { common, data } => {
            let cfg = common.resolve()?;
            let data = pipeline::locate(&cfg.out_dir, data.as_deref(), "data");
            let model = pipeline::cmd_train_forward(&cfg, &data)?;
            println!("wrote forward model to {}", model.display());
        }
        Command::TrainInverse { common, forward, s2 } => {
            let cfg = common.resolve()?;
            let forward =
                pipeline::locate(&cfg.out_dir, forward.as_deref(), "model_forward.json");
            let model = pipeline::cmd_train_inverse(&cfg, &forward, s2.as_deref())?;
            println!("wrote inverse model to {}", model.display());
        }
        Command::Simulate { common, inverse, emit_plot_data } => {
            let cfg = common.resolve()?;
            let inverse =
                pipeline::locate(&cfg.out_dir, inverse.as_deref(), "model_inverse.json");
            let out = Path::new(&cfg.out_dir).join("eval");
            let runs = pipeline::cmd_simulate(&cfg, &inverse, &out, emit_plot_data)?;
            println!("wrote {} runs to {}", runs.len(), out.display());
        }
        Command::Evaluate { common, forward, inverse, runs, strict, emit_plot_data } => {
            let cfg = common.resolve()?;
            let forward =
                pipeline::locate(&cfg.out_dir, forward.as_deref(), "model_forward.json");
            let inverse =
                pipeline::locate(&cfg.out_dir, inverse.as_deref(), "model_inverse.json");
            let (metrics, certificate) = pipeline::cmd_evaluate(
                &cfg,
                &forward,
                &inverse,
                runs.as_deref(),
                strict,
                emit_plot_data,
            )?;
            println!(
                "rmse {:.6}  smape {:.3}%  tail rmse {:.6} (t >= {})",
                metrics.rmse, metrics.smape, metrics.tail.rmse, metrics.tail.t_cutoff
            );
            for check in &certificate.checks {
                println!(
                    "check {}: {} (margin {:.3e})",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" },
                    check.margin
                );
            }
        }
        Command::Ablate { common } => {
            let cfg = common.resolve()?;
            let report = pipeline::cmd_ablate(&cfg)?;
            for v in &report.variants {
                println!(
                    "nu = {}: in-domain rmse {:.6} / smape {:.3}%, out-of-domain rmse {:.6} / smape {:.3}%",
                    v.nu, v.in_domain.rmse, v.in_domain.smape, v.out_domain.rmse, v.out_domain.smape
                );
            }
        }
        Command::Bounds { common, forward, inverse, runs, cert } => {
            let cfg = common.resolve()?;
            let forward =
                pipeline::locate(&cfg.out_dir, forward.as_deref(), "model_forward.json");
            let inverse =
                pipeline::locate(&cfg.out_dir, inverse.as_deref(), "model_inverse.json");
            let runs = pipeline::locate(&cfg.out_dir, runs.as_deref(), "eval");
            let cert = cert.unwrap_or_else(|| Path::new(&cfg.out_dir).join("certificate.json"));
            let certificate = pipeline::cmd_bounds(&cfg, &forward, &inverse, &runs, &cert)?;
            for check in &certificate.checks {
                println!(
                    "check {}: {} (margin {:.3e})",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" },
                    check.margin
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
