//! `rsfl`: run scenario sweeps, time the optimizer and self-check the library.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rsfl_core::config::parse_config;
use rsfl_core::experiment::{self, EmitFormat, RunManifest};
use rsfl_core::harness::Scenario;
use rsfl_core::verify;

#[derive(Parser)]
#[command(name = "rsfl", version, about = "Jamming-resilient split federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (scenario, seed) pair and write metrics.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated scenarios; all six when omitted.
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated seeds or half-open ranges `a..b`; defaults to
        /// RSFLLM_SEED or the config seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values = ["csv", "json"])]
        format: Vec<Format>,
    },
    /// Time the optimizer over N·K ∈ {64, 128, 256, 512}.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized property checks at the config's antenna counts.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            seeds,
            out,
            workers,
            format,
        } => {
            let cfg = parse_config(&config).with_context(|| format!("reading {}", config.display()))?;
            let scenarios = match scenario {
                Some(s) => experiment::parse_scenarios(&s)?,
                None => Scenario::ALL.to_vec(),
            };
            let seeds = match seeds {
                Some(s) => experiment::parse_seeds(&s)?,
                None => vec![experiment::default_seed(&cfg)?],
            };
            let manifest = RunManifest {
                config_path: config,
                scenarios,
                seeds,
                output_dir: out,
                emit_formats: format
                    .into_iter()
                    .map(|f| match f {
                        Format::Csv => EmitFormat::Csv,
                        Format::Json => EmitFormat::Json,
                    })
                    .collect(),
                workers,
            };
            let output = experiment::run(&manifest)?;
            println!("{:<14} {:>10} {:>12} {:>12} {:>10}", "scenario", "mse_db", "rate_nats", "rate_bits", "final_acc");
            for (name, m) in &output.summary {
                let show = |k: &str| match m.get(k).and_then(|s| s.mean) {
                    Some(v) => format!("{v:.3}"),
                    None => "-".into(),
                };
                println!(
                    "{:<14} {:>10} {:>12} {:>12} {:>10}",
                    name,
                    if name == "baseline" { "-inf".into() } else { show("mse_db") },
                    show("sum_rate_nats"),
                    show("sum_rate_bits"),
                    show("final_accuracy")
                );
            }
            for p in &output.written {
                println!("wrote {}", p.display());
            }
        }
        Command::Bench { config, repeats, out } => {
            let cfg = parse_config(&config).with_context(|| format!("reading {}", config.display()))?;
            let report = experiment::bench_scaling(&cfg, repeats)?;
            let table = report.csv();
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            }
            if !report.linear {
                bail!("per-iteration time deviates from linear scaling by more than 2x");
            }
        }
        Command::Verify { config, trials } => {
            let cfg = parse_config(&config).with_context(|| format!("reading {}", config.display()))?;
            let checks = verify::run_checks(&cfg, trials)?;
            for c in &checks {
                println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
        }
    }
    Ok(())
}
