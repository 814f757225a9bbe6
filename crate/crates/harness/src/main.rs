use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cueing_core::implicit::WarmStartMode;
use cueing_harness::report::{read_report, render};
use cueing_harness::suite::{run_suite, Check};
use cueing_harness::{build_report, emit_report, tables, verify, RunConfig};

#[derive(Parser)]
#[command(
    name = "cueing",
    version,
    about = "Hybrid explicit/implicit MPC motion-cueing benchmark"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampling-based checks, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build both explicit tables and write them.
    BuildTable {
        #[command(flatten)]
        common: Common,
    },
    /// Run every scenario under every selected warm-start mode.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated warm-start modes, e.g. NO_GUESS,EXPLICIT_ALL.
        #[arg(long, value_delimiter = ',')]
        mode: Vec<WarmStartMode>,
        /// Plant actuator lag scaled by the configured mismatch factor.
        #[arg(long)]
        mismatch: bool,
    },
    /// Print a summary of a finished run.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Run the point checks and the configured suite, then check invariants.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Sampled parameters per axis for the table check.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Random instances for the short-horizon oracle check.
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let scenarios = cfg.scenarios()?;
    let table = if cfg.modes.iter().any(|m| m.needs_table()) {
        Some(tables::controller(cfg)?)
    } else {
        None
    };
    log::info!("{} scenarios x {} modes", scenarios.len(), cfg.modes.len());
    let runs = run_suite(cfg, &scenarios, &cfg.modes, table.as_ref())?;
    let report = build_report(cfg, &runs);
    emit_report(cfg, &report, &runs, out)?;
    print!("{}", render(&report));
    println!("\nreport written to {}", out.display());
    Ok(report.passed())
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().cmd {
        Cmd::BuildTable { common } => {
            let cfg = load(&common)?;
            for (axis, stats, path) in tables::build_and_save(&cfg, &cfg.out_dir)? {
                println!(
                    "{}: {} regions -> {}",
                    axis.name(),
                    stats.regions,
                    path.display()
                );
            }
            Ok(true)
        }
        Cmd::Run {
            common,
            mode,
            mismatch,
        } => {
            let mut cfg = load(&common)?;
            if !mode.is_empty() {
                cfg.modes = mode;
            }
            cfg.simulation.mismatch |= mismatch;
            cfg.validate()?;
            let out = cfg.out_dir.clone();
            run(&cfg, &out)
        }
        Cmd::Report { common } => {
            let cfg = load(&common)?;
            let report = read_report(&cfg.out_dir).context("no report in the output directory")?;
            print!("{}", render(&report));
            Ok(report.passed())
        }
        Cmd::Verify {
            common,
            samples,
            instances,
        } => {
            let cfg = load(&common)?;
            let checks = vec![
                verify::explicit_oracle(&cfg, samples, cfg.seed)?,
                verify::adaptive_weights(&cfg),
                verify::jacobians(&cfg, 100, cfg.seed),
                verify::nlp_oracle(&cfg, instances, 10, cfg.seed)?,
            ];
            print_checks(&checks);
            println!();
            let out = cfg.out_dir.clone();
            let suite_ok = run(&cfg, &out)?;
            Ok(suite_ok && checks.iter().all(|c| c.passed))
        }
    }
}
