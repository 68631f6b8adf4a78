use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use bomai_harness::config::Mode;
use bomai_harness::record::load_records;
use bomai_harness::runner::{run_many, run_sweep, SWEEP_BETAS};
use bomai_harness::server::{serve, AppState};
use bomai_harness::session::Session;
use bomai_harness::verify::{self, UnderPolicy};
use bomai_harness::{plots, Experiment, ExperimentConfig, RunRecord};
use bomai_stm::{bits_from_hex, bits_from_str, k_space_estimate};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "bomai", about = "Desk-scale BoMAI experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scripted runs; prints the verifier report.
    Run {
        /// Experiment TOML; `acceptance` names the shipped acceptance config.
        config: String,
        /// Single seed; without it the config's seed count runs from 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        seeds: Option<u64>,
        /// Directory for JSONL and CSV records and SVG plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benignity fraction across β with the space prior and the equal-space control.
    Sweep {
        /// Experiment TOML; `space-prior` names the shipped sweep config.
        config: String,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verifier report over saved JSONL records (a file or a directory).
    Verify {
        records: PathBuf,
        /// 1: exploration bound, 2: prediction under the mentor, 3: under the
        /// planner, 4: value, 5: benignity sweep. All checks when omitted.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        theorem: Option<u8>,
    },
    /// WebSocket service for the operator console.
    Serve {
        /// Experiment TOML; `interactive` names the shipped console config.
        config: String,
        #[arg(long, default_value_t = 8787)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of K^Space_β for a hex string.
    Kspace {
        hex: String,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Read the argument as a 0/1 string instead of hex.
        #[arg(long)]
        binary: bool,
    },
}

fn load_config(name: &str) -> Result<ExperimentConfig> {
    match name {
        "acceptance" => Ok(ExperimentConfig::acceptance()),
        "space-prior" => Ok(ExperimentConfig::space_prior()),
        "interactive" => Ok(interactive_config()),
        path => ExperimentConfig::load(Path::new(path)).with_context(|| format!("loading {path}")),
    }
}

fn interactive_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(include_str!("../configs/interactive.toml")).expect("shipped config parses")
}

fn report(runs: &[RunRecord], theorem: Option<u8>) -> bool {
    let mut reports = Vec::new();
    if theorem.is_none() {
        reports.push(verify::verify_lemma1(runs));
        reports.push(verify::verify_martingale(runs));
    }
    let want = |t: u8| theorem.is_none_or(|x| x == t);
    if want(1) {
        reports.push(verify::verify_theorem1(runs));
    }
    if want(2) {
        reports.push(verify::verify_prediction(runs, UnderPolicy::Mentor));
    }
    if want(3) {
        reports.push(verify::verify_prediction(runs, UnderPolicy::Star));
    }
    if want(4) {
        reports.push(verify::verify_value(runs));
    }
    let (main, control) = verify::sweep_points(runs);
    if theorem == Some(5) || (theorem.is_none() && !main.is_empty()) {
        let rf = runs[0].meta.thresholds.run_fraction;
        reports.push(verify::verify_sweep(&main, &control, rf));
    }
    for r in &reports {
        println!("{}", r.line());
    }
    reports.iter().all(|r| r.pass)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, seeds, out } => {
            let cfg = load_config(&config)?;
            let exp = Arc::new(Experiment::build(&cfg)?);
            let runs = match seed {
                Some(s) => run_many(&exp, s, seeds.unwrap_or(1))?,
                None => run_many(&exp, 0, seeds.unwrap_or(cfg.seeds))?,
            };
            if let Some(dir) = &out {
                for r in &runs {
                    r.save(dir, &format!("{}-seed{}", cfg.name, r.meta.seed))?;
                }
                plots::plot_runs(&runs, &dir.join("plots"))?;
            }
            if !report(&runs, None) {
                std::process::exit(1);
            }
        }
        Command::Sweep { config, betas, seeds, out } => {
            let cfg = load_config(&config)?;
            let betas = betas.unwrap_or_else(|| SWEEP_BETAS.to_vec());
            let seeds = seeds.unwrap_or(cfg.seeds);
            let (main, main_runs) = run_sweep(&cfg, &betas, seeds, false)?;
            let (control, control_runs) = run_sweep(&cfg, &betas, seeds, true)?;
            let r = verify::verify_sweep(&main, &control, cfg.thresholds.run_fraction);
            println!("{}", r.line());
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                for (tag, groups) in [("space", &main_runs), ("equal", &control_runs)] {
                    for runs in groups {
                        for run in runs {
                            let beta = run.meta.beta.unwrap_or(f64::NAN);
                            run.save(&dir.join("records"), &format!("{tag}-beta{beta}-seed{}", run.meta.seed))?;
                        }
                    }
                }
                plots::plot_sweep(&main, &control, &dir.join("benign_fraction.svg"))?;
                std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&(&main, &control))?)?;
            }
            if !r.pass {
                std::process::exit(1);
            }
        }
        Command::Verify { records, theorem } => {
            let runs = load_records(&records)?;
            anyhow::ensure!(!runs.is_empty(), "no records under {}", records.display());
            if !report(&runs, theorem) {
                std::process::exit(1);
            }
        }
        Command::Serve { config, port, host, seed, out } => {
            let cfg = load_config(&config)?;
            if cfg.mode != Mode::Interactive {
                eprintln!("note: config mode is not interactive; serving it anyway");
            }
            let exp = Arc::new(Experiment::build(&cfg)?);
            let state = AppState::new(Session::new(exp, seed), out);
            let addr = SocketAddr::new(host, port);
            eprintln!("listening on ws://{addr}/ws");
            tokio::runtime::Runtime::new()?.block_on(serve(addr, state))?;
        }
        Command::Kspace { hex, beta, samples, seed, binary } => {
            let x = if binary { bits_from_str(&hex)? } else { bits_from_hex(&hex)? };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let est = k_space_estimate(&x, beta, samples, &mut rng)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
    }
    Ok(())
}
