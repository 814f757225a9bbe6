//! JSON and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::closed_loop::RunLog;
use crate::config::RunConfig;
use crate::metrics::{summarize_modes, summarize_run, timing, ModeSummary, RunSummary};
use crate::suite::{suite_checks, Check};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub dt: f64,
    pub horizon: usize,
    pub mismatch: bool,
    pub scenarios: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: ReportMeta,
    pub runs: Vec<RunSummary>,
    pub modes: Vec<ModeSummary>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn build_report(cfg: &RunConfig, runs: &[RunLog]) -> RunReport {
    let summaries: Vec<RunSummary> = runs
        .iter()
        .map(|r| summarize_run(r, &cfg.constraints, &cfg.braking))
        .collect();
    let mut modes: Vec<_> = runs.iter().map(|r| r.mode).collect();
    modes.sort();
    modes.dedup();
    let mut scenarios: Vec<String> = runs.iter().map(|r| r.scenario.name()).collect();
    scenarios.sort();
    scenarios.dedup();
    RunReport {
        meta: ReportMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            dt: cfg.model.dt,
            horizon: cfg.ocp.horizon,
            mismatch: cfg.simulation.mismatch,
            scenarios: scenarios.len(),
        },
        modes: summarize_modes(runs, &summaries, &modes),
        checks: suite_checks(cfg, runs, &summaries),
        runs: summaries,
    }
}

const TICK_HEADER: [&str; 33] = [
    "tick",
    "t",
    "omega_long",
    "theta_long",
    "v_long",
    "s_long",
    "omega_lat",
    "theta_lat",
    "v_lat",
    "s_lat",
    "a_tran_long",
    "a_rot_long",
    "a_tran_lat",
    "a_rot_lat",
    "u_rot_long",
    "u_tran_long",
    "u_rot_lat",
    "u_tran_lat",
    "f_ref_long",
    "f_ref_lat",
    "f_long",
    "f_lat",
    "iterations",
    "qp_pivots",
    "status",
    "relaxed",
    "fallback",
    "cost",
    "cost_uncapped",
    "w_s_long",
    "w_s_lat",
    "w_omega_long",
    "w_omega_lat",
];

fn write_run_csv(
    run: &RunLog,
    path: &Path,
    adaptive: &cueing_core::implicit::AdaptiveWeightParams,
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(TICK_HEADER)?;
    for t in &run.ticks {
        let mut rec: Vec<String> = vec![t.tick.to_string(), t.t.to_string()];
        rec.extend(t.state.to_array().iter().map(f64::to_string));
        rec.extend(t.input.to_array().iter().map(f64::to_string));
        for v in [
            t.f_ref.f_long,
            t.f_ref.f_lat,
            t.f_sensed.f_long,
            t.f_sensed.f_lat,
        ] {
            rec.push(v.to_string());
        }
        rec.push(t.iterations.to_string());
        rec.push(t.qp_pivots.to_string());
        rec.push(
            serde_json::to_value(t.status)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
        );
        rec.push(t.relaxed.to_string());
        rec.push(t.fallback.to_string());
        rec.push(t.cost.to_string());
        rec.push(t.cost_uncapped.map(|c| c.to_string()).unwrap_or_default());
        let sw = cueing_core::implicit::StageWeights::at_state(&t.state, adaptive);
        for v in [sw.s_long, sw.s_lat, sw.omega_long, sw.omega_lat] {
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.json`, `modes.csv`, `runs/<scenario>__<mode>.csv` and
/// `timing.json`. All but the timing file are byte-deterministic.
pub fn emit_report(cfg: &RunConfig, report: &RunReport, runs: &[RunLog], dir: &Path) -> Result<()> {
    let run_dir = dir.join("runs");
    fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;

    let json = serde_json::to_string_pretty(report)?;
    fs::write(dir.join("summary.json"), json + "\n").context("writing summary.json")?;

    let mut table = csv::Writer::from_path(dir.join("modes.csv")).context("writing modes.csv")?;
    table.write_record([
        "mode",
        "runs",
        "mean_iterations",
        "std_iterations",
        "max_iterations",
        "improvement_pct",
        "rmse_long",
        "rmse_lat",
    ])?;
    for m in &report.modes {
        table.write_record([
            m.mode.name().to_string(),
            m.runs.to_string(),
            m.iterations.mean.to_string(),
            m.iterations.std.to_string(),
            m.iterations.max.to_string(),
            m.improvement_vs_no_guess
                .map(|v| (100.0 * v).to_string())
                .unwrap_or_default(),
            m.mean_rmse_long.to_string(),
            m.mean_rmse_lat.to_string(),
        ])?;
    }
    table.flush()?;

    for run in runs {
        write_run_csv(
            run,
            &run_dir.join(format!("{}.csv", run.name())),
            &cfg.ocp.adaptive,
        )?;
    }

    let timings: Vec<_> = runs.iter().map(timing).collect();
    let mut f = fs::File::create(dir.join("timing.json")).context("writing timing.json")?;
    writeln!(f, "{}", serde_json::to_string_pretty(&timings)?)?;
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Plain-text table of a report.
pub fn render(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "config {} | {} scenarios | dt {} s | horizon {}\n\n",
        &report.meta.config_hash[..12],
        report.meta.scenarios,
        report.meta.dt,
        report.meta.horizon
    ));
    s.push_str(&format!(
        "{:<16} {:>5} {:>10} {:>9} {:>6} {:>12} {:>10} {:>10}\n",
        "mode", "runs", "mean iter", "std", "max", "improvement", "rmse long", "rmse lat"
    ));
    for m in &report.modes {
        s.push_str(&format!(
            "{:<16} {:>5} {:>10.3} {:>9.3} {:>6} {:>12} {:>10.4} {:>10.4}\n",
            m.mode.name(),
            m.runs,
            m.iterations.mean,
            m.iterations.std,
            m.iterations.max,
            m.improvement_vs_no_guess
                .map(|v| format!("{:.1}%", 100.0 * v))
                .unwrap_or_else(|| "-".into()),
            m.mean_rmse_long,
            m.mean_rmse_lat
        ));
    }
    s.push('\n');
    for c in &report.checks {
        s.push_str(&format!(
            "[{}] {}: {}\n",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    s
}
