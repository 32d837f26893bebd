use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use onlc_core::cohort::{generate_cohort, run_trial, TrialConfig};
use onlc_core::evaluation::{grid_csv, Zone};
use onlc_service::{api, Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "onlc", version, about = "Nurse-in-the-loop lifestyle controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the /v1 API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Storage root; overrides the config file.
        #[arg(long, env = "ONLC_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Simulate a closed-loop trial on a synthetic cohort.
    RunTrial {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Trial config JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for per-patient CSVs and summaries.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the Clarke zone of every integer point up to `max`.
    ClarkeGrid {
        #[arg(long, default_value_t = 400)]
        max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { config, port, data_dir } => serve(config, port, data_dir),
        Command::RunTrial { seed, config, out } => {
            let config = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    TrialConfig::from_json(&text)?
                }
                None => TrialConfig::default(),
            };
            let cohort = generate_cohort(config.patients, seed, &config.generator)?;
            let result = run_trial(&cohort, seed, &config)?;
            for arm in &result.summary.arms {
                println!(
                    "{:?}: {} patients, mean weight change {:+.2} lbs, glucose in range {:.1}%",
                    arm.arm,
                    arm.patients,
                    arm.mean_weight_change,
                    100.0 * arm.glucose_in_range
                );
            }
            println!("twin zone A: {:.1}%", 100.0 * result.summary.twin_zones.fraction(Zone::A));
            print!("{}", result.summary.accuracy.render());
            if let Some(dir) = out {
                result.write(&dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::ClarkeGrid { max, out } => {
            if max == 0 || f64::from(max) > onlc_core::evaluation::GRID_MAX {
                bail!("max must be in 1..=600");
            }
            let csv = grid_csv(max);
            match out {
                Some(path) => fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn serve(config: Option<PathBuf>, port: u16, data_dir: Option<PathBuf>) -> Result<()> {
    let mut config: ServiceConfig = match config {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ServiceConfig::default(),
    };
    if data_dir.is_some() {
        config.data_dir = data_dir;
    }
    if config.data_dir.is_none() {
        config.data_dir = Some(PathBuf::from("onlc-data"));
    }
    let service = Arc::new(Service::open(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        println!("listening on {}", listener.local_addr()?);
        axum::serve(listener, api::router(service.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        service.snapshot()?;
        Ok(())
    })
}
