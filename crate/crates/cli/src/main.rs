//! Command-line pipeline for hierarchical multi-layer dissolution ERGMs:
//! ingest sponsorship data, fit the exchange sampler, simulate, run
//! goodness-of-fit checks, and export diagnostics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "slergm", version, about = "Multi-layer dissolution ERGMs for weighted signed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the layer stack from sponsorship and actor CSVs.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the adaptive exchange sampler and write chains.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override mcmc.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override mcmc.chains.
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Forward-simulate stacks (prior predictive, or posterior with --chain).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Manifest of the fit that produced --chain (default: sibling manifest.json).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Prior and posterior predictive goodness-of-fit reports.
    Gof {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Effective sample sizes, acceptance rates and trace export.
    Diagnose {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a deterministic synthetic sponsorship dataset for demos.
    DemoData {
        #[arg(long, default_value_t = 63)]
        seed: u64,
        #[arg(long, default_value = "demo-data")]
        out: PathBuf,
    },
}

fn sibling_manifest(chain: &std::path::Path, manifest: &Option<PathBuf>) -> PathBuf {
    manifest.clone().unwrap_or_else(|| {
        chain
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join("manifest.json")
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            commands::cmd_ingest(&cfg, &out_dir)
        }
        Command::Fit { config, out, seed, chains } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.mcmc.seed = seed;
            }
            if let Some(chains) = chains {
                cfg.mcmc.chains = chains;
            }
            cfg.mcmc.validate()?;
            let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            commands::cmd_fit(&cfg, &out_dir)
        }
        Command::Simulate { config, chain, manifest, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.predictive.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            match &chain {
                Some(chain_path) => {
                    let manifest_path = sibling_manifest(chain_path, &manifest);
                    commands::cmd_simulate(&cfg, Some((chain_path, &manifest_path)), &out_dir)
                }
                None => commands::cmd_simulate(&cfg, None, &out_dir),
            }
        }
        Command::Gof { config, chain, manifest, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.predictive.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let manifest_path = sibling_manifest(&chain, &manifest);
            commands::cmd_gof(&cfg, &chain, &manifest_path, &out_dir)
        }
        Command::Diagnose { chain, manifest, out } => {
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out"));
            let manifest_path = sibling_manifest(&chain, &manifest);
            commands::cmd_diagnose(&chain, &manifest_path, &out_dir)
        }
        Command::DemoData { seed, out } => commands::cmd_demo_data(seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version go to stdout with success
            if e.use_stderr() {
                let payload = serde_json::json!({
                    "error": e.to_string(),
                    "kind": "usage",
                });
                eprintln!("{payload}");
                return ExitCode::from(2);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": format!("{e:#}"),
                "kind": "runtime",
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
