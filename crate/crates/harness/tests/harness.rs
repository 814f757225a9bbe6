use std::fs;
use std::path::Path;

use cueing_core::implicit::{SolveStatus, WarmStartMode};
use cueing_core::model::{ControlInput, PlatformState, SpecificForce};
use cueing_core::scenarios::{AxisRouting, Scenario, ScenarioKind};
use cueing_harness::metrics::{compute_rmse, iteration_stats, relative_improvement};
use cueing_harness::report::read_report;
use cueing_harness::suite::{agreement_check, run_suite};
use cueing_harness::{
    build_report, emit_report, run_closed_loop, tables, verify, RunConfig, TickLog,
};

fn tick(k: usize, f_ref: (f64, f64), f: (f64, f64)) -> TickLog {
    TickLog {
        tick: k,
        t: k as f64 * 0.01,
        state: PlatformState::default(),
        input: ControlInput::default(),
        f_ref: SpecificForce::new(f_ref.0, f_ref.1),
        f_sensed: SpecificForce::new(f.0, f.1),
        iterations: 1,
        qp_pivots: 0,
        status: SolveStatus::Converged,
        relaxed: false,
        fallback: false,
        cost: 0.0,
        cost_uncapped: None,
    }
}

fn short_config(scenarios: Vec<Scenario>) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenarios.grid = None;
    cfg.scenarios.list = scenarios;
    cfg.threads = 1;
    cfg
}

#[test]
fn rmse_of_perfect_and_constant_error() {
    let perfect: Vec<_> = (0..50).map(|k| tick(k, (0.3, -0.2), (0.3, -0.2))).collect();
    assert_eq!(compute_rmse(&perfect), (0.0, 0.0));
    let off: Vec<_> = (0..50).map(|k| tick(k, (1.0, 0.0), (1.1, -0.1))).collect();
    let (l, t) = compute_rmse(&off);
    assert!((l - 0.1).abs() < 1e-12 && (t - 0.1).abs() < 1e-12);
}

#[test]
fn rmse_matches_scalar_loop() {
    let ticks: Vec<_> = (0..400)
        .map(|k| {
            let t = k as f64 * 0.01;
            tick(
                k,
                (t.sin(), (2.0 * t).cos()),
                (0.9 * t.sin(), (2.0 * t).cos() + 0.05 * t),
            )
        })
        .collect();
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..400 {
        let t = k as f64 * 0.01;
        a += (0.1 * t.sin()) * (0.1 * t.sin());
        b += (0.05 * t) * (0.05 * t);
    }
    let (l, r) = compute_rmse(&ticks);
    assert!((l - (a / 400.0_f64).sqrt()).abs() < 1e-12);
    assert!((r - (b / 400.0_f64).sqrt()).abs() < 1e-12);
}

#[test]
fn iteration_statistics() {
    let s = iteration_stats([3, 3, 3, 3]);
    assert_eq!((s.count, s.mean, s.std, s.max), (4, 3.0, 0.0, 3));
    let s = iteration_stats([1, 2, 3, 4]);
    assert!((s.std - 1.25_f64.sqrt()).abs() < 1e-12);
    assert_eq!(relative_improvement(5.0, 5.0), 0.0);
    assert!((relative_improvement(70.0, 100.0) - 0.3).abs() < 1e-12);
    assert_eq!(iteration_stats([]).count, 0);
}

fn quiet() -> Scenario {
    // step that starts after the run ends, so the reference is zero throughout
    let mut sc = Scenario::synthetic(ScenarioKind::Step, 1.0, 0.0, 1.0, AxisRouting::Both);
    sc.onset = 100.0;
    sc
}

#[test]
fn zero_reference_stays_at_rest() {
    let cfg = short_config(vec![quiet()]);
    let run = run_closed_loop(&cfg, &quiet(), WarmStartMode::NoGuess, None).unwrap();
    assert_eq!(run.ticks.len(), 101);
    for t in &run.ticks {
        assert_eq!(t.status, SolveStatus::Converged);
        assert!(t.iterations <= 2, "tick {} took {}", t.tick, t.iterations);
        assert!(t.state.to_array().iter().all(|v| v.abs() < 1e-9));
        assert!(t.input.to_array().iter().all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn table_modes_need_a_table() {
    let cfg = short_config(vec![quiet()]);
    assert!(run_closed_loop(&cfg, &quiet(), WarmStartMode::ExplicitAll, None).is_err());
}

fn files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p.to_string_lossy().into_owned());
        }
    }
    out.sort();
    out
}

#[test]
fn reports_are_reproducible_and_agree_across_modes() {
    let step = Scenario::synthetic(ScenarioKind::Step, 1.5, 0.0, 1.5, AxisRouting::Long);
    let sine = Scenario::synthetic(ScenarioKind::Sine, 1.0, 0.8, 1.0, AxisRouting::Both);
    let mut cfg = short_config(vec![step, sine]);
    let table = tables::controller(&cfg).unwrap();
    let scenarios = cfg.scenarios().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut last = None;
    for (i, d) in dirs.iter().enumerate() {
        cfg.threads = i + 1;
        let runs = run_suite(&cfg, &scenarios, &WarmStartMode::ALL, Some(&table)).unwrap();
        assert_eq!(runs.len(), 8);
        let report = build_report(&cfg, &runs);
        emit_report(&cfg, &report, &runs, d.path()).unwrap();
        assert_eq!(read_report(d.path()).unwrap(), report);
        for r in &runs {
            let text = fs::read_to_string(d.path().join("runs").join(format!("{}.csv", r.name())))
                .unwrap();
            assert_eq!(text.lines().count(), r.ticks.len() + 1);
        }
        let summaries: Vec<_> = report.runs.clone();
        let agree = agreement_check(&runs, &summaries);
        assert!(agree.passed, "{}", agree.detail);
        last = Some(runs);
    }
    let runs = last.unwrap();
    assert!(runs.iter().all(|r| r.completed()));

    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    assert_eq!(a.len(), b.len());
    for (pa, pb) in a.iter().zip(&b) {
        if pa.ends_with("timing.json") {
            continue;
        }
        assert!(
            fs::read(pa).unwrap() == fs::read(pb).unwrap(),
            "{pa} differs"
        );
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trace = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/track_60s.csv");
    fs::copy(&trace, dir.path().join("lap.csv")).unwrap();
    let text = r#"
seed = 7
modes = ["NO_GUESS", "EXPLICIT_ALL"]

[scenarios.grid]
kinds = ["SINE"]
amplitudes = [1.0]
frequencies = [0.2]
axes = ["lat"]

[[scenarios.scenario]]
kind = "TRACE"
trace = "lap.csv"
axis = "both"
"#;
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 7);
    let sc = cfg.scenarios().unwrap();
    assert_eq!(sc.len(), 2);
    assert_eq!(sc[0].name(), "sine-a1-f0.2-lat");
    assert_eq!(
        sc[1].trace.as_deref(),
        Some(dir.path().join("lap.csv").as_path())
    );

    fs::write(&path, text.replace("seed = 7", "seed = 7\nsede = 1")).unwrap();
    assert!(RunConfig::load(&path).is_err());
}

#[test]
fn sqp_matches_general_nlp_solver_on_short_horizons() {
    let cfg = RunConfig::default();
    let check = verify::nlp_oracle(&cfg, 6, 10, 11).unwrap();
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn point_checks_pass() {
    let cfg = RunConfig::default();
    let w = verify::adaptive_weights(&cfg);
    assert!(w.passed, "{}", w.detail);
    let j = verify::jacobians(&cfg, 5, 3);
    assert!(j.passed, "{}", j.detail);
}

#[test]
fn example_config_spells_out_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.hash(), RunConfig::default().hash());
}
