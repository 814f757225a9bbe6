//! Per-run and per-mode statistics computed from tick logs.

use cueing_core::constraints::{check_feasible, envelope_norm, BrakingParams, ConstraintSet};
use cueing_core::implicit::{SolveStatus, WarmStartMode};
use cueing_core::scenarios::ScenarioKind;
use serde::{Deserialize, Serialize};

use crate::closed_loop::{RunLog, TickLog};

/// Root-mean-square of `f_sensed - f_ref` per axis.
pub fn compute_rmse(ticks: &[TickLog]) -> (f64, f64) {
    if ticks.is_empty() {
        return (0.0, 0.0);
    }
    let n = ticks.len() as f64;
    let (mut sl, mut st) = (0.0, 0.0);
    for t in ticks {
        sl += (t.f_sensed.f_long - t.f_ref.f_long).powi(2);
        st += (t.f_sensed.f_lat - t.f_ref.f_lat).powi(2);
    }
    ((sl / n).sqrt(), (st / n).sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: usize,
}

pub fn iteration_stats(iters: impl IntoIterator<Item = usize>) -> IterationStats {
    let v: Vec<usize> = iters.into_iter().collect();
    if v.is_empty() {
        return IterationStats::default();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<usize>() as f64 / n;
    let var = v.iter().map(|&i| (i as f64 - mean).powi(2)).sum::<f64>() / n;
    IterationStats {
        count: v.len(),
        mean,
        std: var.sqrt(),
        max: v.iter().copied().max().unwrap_or(0),
    }
}

/// Fractional reduction of `mean` relative to `baseline` (0.3 = 30% fewer).
pub fn relative_improvement(mean: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - mean) / baseline
    }
}

/// Displacement after a step returns to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WashoutCheck {
    /// Peak `sqrt(s_long² + s_lat²)` while the step is on, m.
    pub peak: f64,
    /// Largest displacement from `settle` seconds after the step ends, m.
    pub residual: f64,
    pub ratio: f64,
}

/// `None` unless the run is a STEP that ends early enough to observe
/// `settle` seconds of washout.
pub fn washout(run: &RunLog, settle: f64) -> Option<WashoutCheck> {
    let sc = &run.scenario;
    if sc.kind != ScenarioKind::Step {
        return None;
    }
    let end = sc.onset + sc.hold;
    let last = run.ticks.last()?.t;
    if last < end + settle {
        return None;
    }
    let disp = |t: &TickLog| envelope_norm(t.state.s_long, t.state.s_lat);
    let peak = run
        .ticks
        .iter()
        .filter(|t| t.t >= sc.onset && t.t < end)
        .map(disp)
        .fold(0.0, f64::max);
    let residual = run
        .ticks
        .iter()
        .filter(|t| t.t >= end + settle - 1e-9)
        .map(disp)
        .fold(0.0, f64::max);
    Some(WashoutCheck {
        peak,
        residual,
        ratio: if peak > 0.0 { residual / peak } else { 0.0 },
    })
}

/// Ticks whose logged state or input breaks a bound by more than `tol`.
pub fn violation_count(ticks: &[TickLog], c: &ConstraintSet, b: &BrakingParams, tol: f64) -> usize {
    ticks
        .iter()
        .filter(|t| !check_feasible(&t.state, &t.input, c, b, tol).is_empty())
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: WarmStartMode,
    pub ticks: usize,
    pub completed: bool,
    pub aborted_at: Option<usize>,
    pub converged_ticks: usize,
    pub rmse_long: f64,
    pub rmse_lat: f64,
    pub iterations: IterationStats,
    pub mean_qp_pivots: f64,
    pub cap_hits: usize,
    pub relaxed_ticks: usize,
    pub warm_start_fallbacks: usize,
    pub violations: usize,
    /// deg/s.
    pub max_omega_long: f64,
    /// deg/s.
    pub max_omega_lat: f64,
    /// m.
    pub max_displacement: f64,
    pub washout: Option<WashoutCheck>,
    /// Mean relative cost excess of capped ticks over their uncapped re-solve.
    pub cap_cost_inflation: Option<f64>,
}

pub const WASHOUT_SETTLE: f64 = 10.0;

pub fn summarize_run(run: &RunLog, c: &ConstraintSet, b: &BrakingParams) -> RunSummary {
    let t = &run.ticks;
    let (rmse_long, rmse_lat) = compute_rmse(t);
    let inflation: Vec<f64> = t
        .iter()
        .filter_map(|k| k.cost_uncapped.map(|u| (k.cost - u) / u.abs().max(1e-12)))
        .collect();
    let max_abs = |f: fn(&TickLog) -> f64| t.iter().map(|k| f(k).abs()).fold(0.0, f64::max);
    RunSummary {
        scenario: run.scenario.name(),
        mode: run.mode,
        ticks: t.len(),
        completed: run.completed(),
        aborted_at: run.aborted_at,
        converged_ticks: t
            .iter()
            .filter(|k| k.status == SolveStatus::Converged)
            .count(),
        rmse_long,
        rmse_lat,
        iterations: iteration_stats(t.iter().map(|k| k.iterations)),
        mean_qp_pivots: if t.is_empty() {
            0.0
        } else {
            t.iter().map(|k| k.qp_pivots).sum::<usize>() as f64 / t.len() as f64
        },
        cap_hits: t
            .iter()
            .filter(|k| k.status == SolveStatus::IterationCap)
            .count(),
        relaxed_ticks: t.iter().filter(|k| k.relaxed).count(),
        warm_start_fallbacks: t.iter().filter(|k| k.fallback).count(),
        violations: violation_count(t, c, b, 1e-6),
        max_omega_long: max_abs(|k| k.state.omega_long).to_degrees(),
        max_omega_lat: max_abs(|k| k.state.omega_lat).to_degrees(),
        max_displacement: t
            .iter()
            .map(|k| envelope_norm(k.state.s_long, k.state.s_lat))
            .fold(0.0, f64::max),
        washout: washout(run, WASHOUT_SETTLE),
        cap_cost_inflation: if inflation.is_empty() {
            None
        } else {
            Some(inflation.iter().sum::<f64>() / inflation.len() as f64)
        },
    }
}

/// Suite-level statistics of one warm-start mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: WarmStartMode,
    pub runs: usize,
    /// Pooled over every tick of every run.
    pub iterations: IterationStats,
    /// Reduction of the mean against NO_GUESS, if that mode ran.
    pub improvement_vs_no_guess: Option<f64>,
    pub mean_rmse_long: f64,
    pub mean_rmse_lat: f64,
    pub cap_hits: usize,
    pub violations: usize,
}

pub fn summarize_modes(
    runs: &[RunLog],
    summaries: &[RunSummary],
    modes: &[WarmStartMode],
) -> Vec<ModeSummary> {
    let mut out: Vec<ModeSummary> = modes
        .iter()
        .map(|&mode| {
            let idx: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].mode == mode).collect();
            let n = idx.len().max(1) as f64;
            ModeSummary {
                mode,
                runs: idx.len(),
                iterations: iteration_stats(
                    idx.iter()
                        .flat_map(|&i| runs[i].ticks.iter().map(|t| t.iterations)),
                ),
                improvement_vs_no_guess: None,
                mean_rmse_long: idx.iter().map(|&i| summaries[i].rmse_long).sum::<f64>() / n,
                mean_rmse_lat: idx.iter().map(|&i| summaries[i].rmse_lat).sum::<f64>() / n,
                cap_hits: idx.iter().map(|&i| summaries[i].cap_hits).sum(),
                violations: idx.iter().map(|&i| summaries[i].violations).sum(),
            }
        })
        .collect();
    if let Some(base) = out
        .iter()
        .find(|m| m.mode == WarmStartMode::NoGuess)
        .map(|m| m.iterations.mean)
    {
        for m in &mut out {
            m.improvement_vs_no_guess = Some(relative_improvement(m.iterations.mean, base));
        }
    }
    out
}

/// Wall-time percentiles of one run, ms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub run: String,
    pub ticks: usize,
    pub total_s: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

pub fn timing(run: &RunLog) -> TimingSummary {
    let mut w: Vec<f64> = run.wall.iter().map(|s| s * 1e3).collect();
    w.sort_by(f64::total_cmp);
    let pct = |p: f64| {
        if w.is_empty() {
            0.0
        } else {
            w[((p * (w.len() - 1) as f64).round() as usize).min(w.len() - 1)]
        }
    };
    TimingSummary {
        run: run.name(),
        ticks: w.len(),
        total_s: run.wall.iter().sum(),
        p50_ms: pct(0.5),
        p90_ms: pct(0.9),
        p99_ms: pct(0.99),
        max_ms: w.last().copied().unwrap_or(0.0),
    }
}
