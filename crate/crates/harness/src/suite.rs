//! Scenario × mode runs on a worker pool, and the invariants checked on them.

use anyhow::{Context, Result};
use cueing_core::explicit::ExplicitController;
use cueing_core::implicit::{SolveStatus, WarmStartMode};
use cueing_core::scenarios::Scenario;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_loop::{Controller, RunLog};
use crate::config::RunConfig;
use crate::metrics::RunSummary;

/// Runs every scenario under every mode. The result is ordered scenario-major,
/// independent of scheduling.
pub fn run_suite(
    cfg: &RunConfig,
    scenarios: &[Scenario],
    modes: &[WarmStartMode],
    table: Option<&ExplicitController>,
) -> Result<Vec<RunLog>> {
    let ctl = Controller::new(cfg, table)?;
    let jobs: Vec<(&Scenario, WarmStartMode)> = scenarios
        .iter()
        .flat_map(|sc| modes.iter().map(move |&m| (sc, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("building worker pool")?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(sc, mode)| {
                let log = ctl
                    .run(sc, mode)
                    .with_context(|| format!("{} / {mode}", sc.name()))?;
                log::info!(
                    "{}: {} ticks, mean iterations {:.2}",
                    log.name(),
                    log.ticks.len(),
                    log.ticks.iter().map(|t| t.iterations).sum::<usize>() as f64
                        / log.ticks.len().max(1) as f64
                );
                Ok(log)
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

pub const TOL: f64 = 1e-6;
pub const PARITY: f64 = 0.02;
pub const AGREEMENT: f64 = 1e-4;
pub const MIN_IMPROVEMENT: f64 = 0.10;
pub const MAX_CAP_INFLATION: f64 = 0.003;
pub const WASHOUT_RATIO: f64 = 0.2;
/// RMSE below this counts as zero tracking error, m/s².
pub const RMSE_FLOOR: f64 = 1e-6;

fn mean_iters(runs: &[RunLog], mode: WarmStartMode) -> Option<f64> {
    let v: Vec<usize> = runs
        .iter()
        .filter(|r| r.mode == mode)
        .flat_map(|r| r.ticks.iter().map(|t| t.iterations))
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64)
}

/// Runs of one scenario, in mode order.
fn by_scenario<'a>(
    runs: &'a [RunLog],
    summaries: &'a [RunSummary],
) -> Vec<Vec<(&'a RunLog, &'a RunSummary)>> {
    let mut names: Vec<String> = runs.iter().map(|r| r.scenario.name()).collect();
    names.dedup();
    names
        .iter()
        .map(|n| {
            runs.iter()
                .zip(summaries)
                .filter(|(r, _)| r.scenario.name() == *n)
                .collect()
        })
        .collect()
}

pub fn constraint_check(cfg: &RunConfig, summaries: &[RunSummary]) -> Check {
    let c = &cfg.constraints;
    let viol: usize = summaries.iter().map(|s| s.violations).sum();
    let w_long = summaries
        .iter()
        .map(|s| s.max_omega_long)
        .fold(0.0, f64::max);
    let w_lat = summaries
        .iter()
        .map(|s| s.max_omega_lat)
        .fold(0.0, f64::max);
    let disp = summaries
        .iter()
        .map(|s| s.max_displacement)
        .fold(0.0, f64::max);
    let ok = viol == 0
        && w_long.to_radians() <= c.omega_long_max + TOL
        && w_lat.to_radians() <= c.omega_lat_max + TOL
        && disp <= c.s_envelope_max + TOL;
    Check::new(
        "constraints",
        ok,
        format!(
            "{viol} violating ticks; max |omega| {w_long:.4}/{w_lat:.4} deg/s; max displacement {disp:.4} m"
        ),
    )
}

pub fn ordering_check(runs: &[RunLog]) -> Check {
    let (Some(all), Some(first), Some(none)) = (
        mean_iters(runs, WarmStartMode::ExplicitAll),
        mean_iters(runs, WarmStartMode::ExplicitFirst),
        mean_iters(runs, WarmStartMode::NoGuess),
    ) else {
        return Check::new(
            "warm-start ordering",
            false,
            "needs EXPLICIT_ALL, EXPLICIT_FIRST and NO_GUESS runs",
        );
    };
    let improvement = (none - all) / none;
    Check::new(
        "warm-start ordering",
        all <= first && first <= none && improvement >= MIN_IMPROVEMENT,
        format!(
            "mean iterations EXPLICIT_ALL {all:.3}, EXPLICIT_FIRST {first:.3}, NO_GUESS {none:.3}; improvement {:.1}%",
            100.0 * improvement
        ),
    )
}

pub fn improvement_check(runs: &[RunLog]) -> Check {
    match (
        mean_iters(runs, WarmStartMode::ExplicitAll),
        mean_iters(runs, WarmStartMode::NoGuess),
    ) {
        (Some(all), Some(none)) => Check::new(
            "explicit-all improvement",
            all < none,
            format!(
                "{:.2}% fewer iterations than NO_GUESS",
                100.0 * (none - all) / none
            ),
        ),
        _ => Check::new(
            "explicit-all improvement",
            false,
            "needs EXPLICIT_ALL and NO_GUESS runs",
        ),
    }
}

pub fn parity_check(runs: &[RunLog], summaries: &[RunSummary]) -> Check {
    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    let mut compared = 0;
    let excluded: Vec<String> = runs
        .iter()
        .filter(|r| !r.all_converged())
        .map(|r| r.name())
        .collect();
    for group in by_scenario(runs, summaries) {
        let conv: Vec<&RunSummary> = group
            .iter()
            .filter(|(r, _)| r.all_converged())
            .map(|(_, s)| *s)
            .collect();
        for (i, a) in conv.iter().enumerate() {
            for b in &conv[i + 1..] {
                compared += 1;
                for (x, y) in [(a.rmse_long, b.rmse_long), (a.rmse_lat, b.rmse_lat)] {
                    let rel = (x - y).abs() / x.max(y).max(RMSE_FLOOR);
                    if rel > worst {
                        worst = rel;
                        worst_at = format!("{} {} vs {}", a.scenario, a.mode, b.mode);
                    }
                }
            }
        }
    }
    let mut detail = format!(
        "{compared} mode pairs; worst relative RMSE gap {:.4}% ({worst_at})",
        100.0 * worst
    );
    if !excluded.is_empty() {
        detail.push_str(&format!(
            "; not fully converged, left out: {}",
            excluded.join(", ")
        ));
    }
    Check::new("tracking parity", worst <= PARITY, detail)
}

/// Trajectories of different modes agree on ticks where all converged.
pub fn agreement_check(runs: &[RunLog], summaries: &[RunSummary]) -> Check {
    let mut worst = 0.0_f64;
    let mut ticks = 0;
    for group in by_scenario(runs, summaries) {
        let logs: Vec<&RunLog> = group.iter().map(|(r, _)| *r).collect();
        let len = logs.iter().map(|r| r.ticks.len()).min().unwrap_or(0);
        for k in 0..len {
            if logs
                .iter()
                .any(|r| r.ticks[k].status != SolveStatus::Converged)
            {
                continue;
            }
            ticks += 1;
            let a = logs[0].ticks[k].state.to_array();
            for r in &logs[1..] {
                let b = r.ticks[k].state.to_array();
                for i in 0..a.len() {
                    worst = worst.max((a[i] - b[i]).abs());
                }
            }
        }
    }
    Check::new(
        "cross-mode agreement",
        worst <= AGREEMENT,
        format!("{ticks} ticks; max state difference {worst:.3e}"),
    )
}

pub fn cap_check(runs: &[RunLog]) -> Check {
    let v: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.ticks.iter())
        .filter_map(|t| t.cost_uncapped.map(|u| (t.cost - u) / u.abs().max(1e-12)))
        .collect();
    let mean = if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    };
    Check::new(
        "iteration-cap sub-optimality",
        mean < MAX_CAP_INFLATION,
        format!(
            "{} capped ticks; mean cost inflation {:.4}%",
            v.len(),
            100.0 * mean
        ),
    )
}

pub fn washout_check(summaries: &[RunSummary]) -> Check {
    let w: Vec<(&str, f64)> = summaries
        .iter()
        .filter_map(|s| s.washout.as_ref().map(|w| (s.scenario.as_str(), w.ratio)))
        .collect();
    let worst = w.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Check::new(
        "washout",
        !w.is_empty() && worst <= WASHOUT_RATIO,
        format!("{} step runs; worst residual/peak {:.3}", w.len(), worst),
    )
}

pub fn completion_check(runs: &[RunLog]) -> Check {
    let aborted: Vec<String> = runs
        .iter()
        .filter_map(|r| r.aborted_at.map(|k| format!("{} at tick {k}", r.name())))
        .collect();
    Check::new(
        "runs complete",
        aborted.is_empty(),
        if aborted.is_empty() {
            format!("{} runs", runs.len())
        } else {
            aborted.join(", ")
        },
    )
}

/// All closed-loop invariants that apply to the given runs.
pub fn suite_checks(cfg: &RunConfig, runs: &[RunLog], summaries: &[RunSummary]) -> Vec<Check> {
    let mut out = vec![
        completion_check(runs),
        constraint_check(cfg, summaries),
        agreement_check(runs, summaries),
        parity_check(runs, summaries),
        cap_check(runs),
    ];
    if summaries.iter().any(|s| s.washout.is_some()) {
        out.push(washout_check(summaries));
    }
    let has = |m| runs.iter().any(|r| r.mode == m);
    if has(WarmStartMode::ExplicitAll)
        && has(WarmStartMode::ExplicitFirst)
        && has(WarmStartMode::NoGuess)
    {
        out.push(ordering_check(runs));
    }
    out
}
