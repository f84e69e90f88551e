use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use defectvqe_cli::{execute, write_artifacts, ConfigError, RunConfig};
use defectvqe_core::fci::solve_fci;
use defectvqe_core::fermion::{parse_fcidump, ActiveSpace};
use serde_json::json;

#[derive(Parser)]
#[command(name = "defectvqe", version, about = "Ground and excited states of defect Hamiltonians on a simulated noisy device")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode selected in a TOML config.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set estimation.shots=0`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact spectrum of an FCIDUMP Hamiltonian in one sector, as CSV on stdout.
    Fci {
        fcidump: PathBuf,
        #[arg(long)]
        electrons: usize,
        #[arg(long, allow_hyphen_values = true)]
        sz: Option<f64>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config = e.downcast_ref::<ConfigError>().is_some();
            let kind = if config { "config" } else { "domain" };
            let diag = json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{diag}");
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run { config, overrides, out } => {
            let mut cfg = RunConfig::load(&config, &overrides)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let artifacts = execute(&cfg)?;
            write_artifacts(&cfg.output_dir, &artifacts)?;
            for a in &artifacts {
                println!("{}", cfg.output_dir.join(&a.name).display());
            }
            Ok(())
        }
        Command::Fci { fcidump, electrons, sz } => {
            let text = std::fs::read_to_string(&fcidump)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", fcidump.display())))?;
            let mut h = parse_fcidump(&text).with_context(|| format!("parsing {}", fcidump.display()))?.hamiltonian;
            h.space = ActiveSpace::new(h.space.n_spatial, electrons).map_err(|e| ConfigError(e.to_string()))?;
            let sol = solve_fci(&h, electrons, sz)?;
            print!("{}", sol.to_csv());
            Ok(())
        }
        Command::Validate { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            println!("{}", json!({ "ok": true, "mode": cfg.mode }));
            Ok(())
        }
    }
}
