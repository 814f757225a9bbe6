use cueing_core::constraints::check_feasible;
use cueing_core::implicit::condensed::{CondensedProblem, Tick};
use cueing_core::implicit::*;
use cueing_core::model::{rk4_implicit, sx, ControlInput, PlatformState, SpecificForce, NU, NX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn short_cfg(horizon: usize) -> OcpConfig {
    OcpConfig {
        horizon,
        ..OcpConfig::default()
    }
}

/// Random state strictly inside every bound, braking maps included.
fn feasible_state(cfg: &OcpConfig, rng: &mut ChaCha8Rng, frac: f64) -> PlatformState {
    let c = &cfg.constraints;
    loop {
        let mut x = PlatformState::default();
        let mut u = |lim: f64| rng.gen_range(-frac * lim..frac * lim);
        x.omega_long = u(c.omega_long_max);
        x.omega_lat = u(c.omega_lat_max);
        x.theta_long = u(0.2);
        x.theta_lat = u(0.2);
        x.v_long = u(0.1);
        x.v_lat = u(0.1);
        x.s_long = u(0.3);
        x.s_lat = u(0.3);
        x.a_tran_long = u(1.0);
        x.a_tran_lat = u(1.0);
        x.a_rot_long = u(0.3);
        x.a_rot_lat = u(0.3);
        if check_feasible(&x, &ControlInput::default(), c, &cfg.braking, -1e-3).is_empty() {
            return x;
        }
    }
}

fn random_reference(n: usize, rng: &mut ChaCha8Rng, amp: f64) -> Vec<SpecificForce> {
    let (l, t) = (rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    let (dl, dt) = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
    (0..=n)
        .map(|k| SpecificForce::new(l + dl * k as f64, t + dt * k as f64))
        .collect()
}

fn random_z(tr: &Transcription, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let inputs: Vec<ControlInput> = (0..tr.horizon)
        .map(|_| ControlInput::from_array(&std::array::from_fn(|_| rng.gen_range(-2.0..2.0))))
        .collect();
    let mut z = tr.from_inputs(&inputs);
    // off the dynamics manifold so the defects are nonzero
    for v in &mut z[NU * tr.horizon..] {
        *v += rng.gen_range(-0.05..0.05);
    }
    z
}

fn fd_check(
    name: &str,
    f: impl Fn(&[f64]) -> Vec<f64>,
    jac: &nalgebra::DMatrix<f64>,
    z: &[f64],
) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut zp = z.to_vec();
    for col in 0..z.len() {
        zp[col] = z[col] + h;
        let fp = f(&zp);
        zp[col] = z[col] - h;
        let fm = f(&zp);
        zp[col] = z[col];
        for row in 0..fp.len() {
            let fd = (fp[row] - fm[row]) / (2.0 * h);
            let err = (fd - jac[(row, col)]).abs() / (1.0 + jac[(row, col)].abs());
            worst = worst.max(err);
        }
    }
    assert!(worst <= 1e-5, "{name}: relative error {worst}");
    worst
}

#[test]
fn transcription_jacobians_match_finite_differences() {
    let cfg = short_cfg(10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x0 = feasible_state(&cfg, &mut rng, 0.8);
        let f = random_reference(cfg.horizon, &mut rng, 2.0);
        let tr = transcribe(&cfg, &x0, &f, &adaptive_weight_mode(&cfg, &x0));
        let z = random_z(&tr, &mut rng);
        fd_check("defects", |z| tr.defects(z), &tr.defect_jacobian(&z), &z);
        fd_check(
            "inequalities",
            |z| tr.inequalities(z),
            &tr.inequality_jacobian(&z),
            &z,
        );
        let g = nalgebra::DMatrix::from_row_slice(1, z.len(), &tr.cost_gradient(&z));
        fd_check("cost", |z| vec![tr.cost(z)], &g, &z);
    }
}

#[test]
fn condensed_row_gradients_match_finite_differences() {
    let cfg = short_cfg(8);
    let prob = CondensedProblem::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nu = prob.n_inputs();
    for trial in 0..20 {
        let x0 = feasible_state(&cfg, &mut rng, 0.8).to_array();
        let relaxed = trial % 2 == 1;
        let sigma: Vec<f64> = if relaxed {
            (0..prob.n_groups())
                .map(|_| rng.gen_range(0.0..0.1))
                .collect()
        } else {
            Vec::new()
        };
        let mut w: Vec<f64> = (0..nu).map(|_| rng.gen_range(-2.0..2.0)).collect();
        w.extend(&sigma);
        let values = |w: &[f64]| {
            let x = prob.simulate(&x0, &w[..nu]);
            prob.row_values(&x, &w[..nu], &w[nu..])
        };
        let x = prob.simulate(&x0, &w[..nu]);
        let m = prob.n_rows(relaxed);
        let mut jac = nalgebra::DMatrix::zeros(m, w.len());
        let mut row = vec![0.0; w.len()];
        for i in 0..m {
            prob.row_gradient(i, &x, relaxed, &mut row);
            for (c, v) in row.iter().enumerate() {
                jac[(i, c)] = *v;
            }
        }
        fd_check("condensed rows", values, &jac, &w);
    }
}

#[test]
fn transcription_cost_matches_scalar_oracle() {
    let cfg = short_cfg(20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x0 = feasible_state(&cfg, &mut rng, 0.5);
        let f = random_reference(cfg.horizon, &mut rng, 1.5);
        let weights = adaptive_weight_mode(&cfg, &x0);
        let tr = transcribe(&cfg, &x0, &f, &weights);
        let u = ControlInput::new(0.1, -0.4, 0.05, 0.3);

        let g = cfg.model.g;
        let mut x = x0.to_array();
        let mut oracle = 0.0;
        for k in 1..=cfg.horizon {
            x = rk4_implicit(&x, &u.to_array(), cfg.model.tau_act, cfg.model.dt);
            let f_long = x[sx::A_TRAN_LONG] + g * x[sx::THETA_LONG].sin();
            let f_lat = x[sx::A_TRAN_LAT] - g * x[sx::THETA_LONG].cos() * x[sx::THETA_LAT].sin();
            let w = &weights[k - 1];
            oracle += (f_long - f[k].f_long).powi(2) + (f_lat - f[k].f_lat).powi(2);
            oracle += w.s_long * x[sx::S_LONG].powi(2) + w.s_lat * x[sx::S_LAT].powi(2);
            oracle +=
                w.omega_long * x[sx::OMEGA_LONG].powi(2) + w.omega_lat * x[sx::OMEGA_LAT].powi(2);
            oracle += 1e-3 * u.to_array().iter().map(|v| v * v).sum::<f64>();
        }
        let z = tr.from_inputs(&vec![u; cfg.horizon]);
        assert!((tr.cost(&z) - oracle).abs() <= 1e-12 * oracle.max(1.0));
        assert!(tr.defects(&z).iter().all(|d| *d == 0.0));

        let prob = CondensedProblem::new(&cfg).unwrap();
        let tick = Tick {
            x0: x0.to_array(),
            f_ref: &f,
            weights: &weights,
        };
        let us: Vec<f64> = vec![u; cfg.horizon]
            .iter()
            .flat_map(|u| u.to_array())
            .collect();
        let ev = prob.evaluate(&tick, &us, &[]);
        assert!((ev.cost - oracle).abs() <= 1e-9 * oracle.max(1.0));
    }
}

#[test]
fn zero_problem_stays_at_rest() {
    let cfg = OcpConfig::default();
    let solver = ImplicitSolver::new(cfg.clone()).unwrap();
    let f = vec![SpecificForce::default(); cfg.horizon + 1];
    let r = solver
        .solve(
            &PlatformState::default(),
            &f,
            &vec![ControlInput::default(); cfg.horizon],
        )
        .unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.iterations <= 2, "{} iterations", r.iterations);
    assert!(r
        .u_cmd_opt
        .iter()
        .all(|u| u.to_array().iter().all(|v| v.abs() < 1e-9)));
    assert!(r.cost.abs() < 1e-12);
}

#[test]
fn exact_warm_start_needs_one_iteration() {
    let cfg = OcpConfig::default();
    let solver = ImplicitSolver::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..3 {
        let x0 = feasible_state(&cfg, &mut rng, 0.4);
        let f = random_reference(cfg.horizon, &mut rng, 1.0);
        let first = solver
            .solve(&x0, &f, &vec![ControlInput::default(); cfg.horizon])
            .unwrap();
        assert_eq!(first.status, SolveStatus::Converged);
        let again = solver.solve(&x0, &f, &first.u_cmd_opt).unwrap();
        assert_eq!(again.status, SolveStatus::Converged);
        assert_eq!(again.iterations, 1);
    }
}

fn assert_solution_valid(
    cfg: &OcpConfig,
    x0: &PlatformState,
    f: &[SpecificForce],
    r: &SolveResult,
) {
    assert_eq!(r.x_pred.len(), cfg.horizon + 1);
    assert!(r.kkt_residual <= cfg.kkt_tol);
    let tr = transcribe(cfg, x0, f, &adaptive_weight_mode(cfg, x0));
    let mut z = r.stacked_inputs();
    for x in &r.x_pred[1..] {
        z.extend(x.to_array());
    }
    let defect = tr.defects(&z).iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    assert!(defect <= 1e-8, "defect {defect}");
    for (k, x) in r.x_pred.iter().enumerate().skip(1) {
        let u = r.u_cmd_opt[k.min(cfg.horizon - 1)];
        let rep = check_feasible(x, &u, &cfg.constraints, &cfg.braking, 1e-6);
        assert!(rep.is_empty(), "node {k}: {rep:?}");
    }
    assert!((tr.cost(&z) - r.cost).abs() <= 1e-9 * r.cost.max(1.0));
}

#[test]
fn converged_solutions_are_feasible() {
    let cfg = OcpConfig::default();
    let solver = ImplicitSolver::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut converged = 0;
    for _ in 0..8 {
        let x0 = feasible_state(&cfg, &mut rng, 0.7);
        let f = random_reference(cfg.horizon, &mut rng, 3.0);
        let r = solver
            .solve(&x0, &f, &vec![ControlInput::default(); cfg.horizon])
            .unwrap();
        if r.status == SolveStatus::Converged && !r.relaxed {
            assert_solution_valid(&cfg, &x0, &f, &r);
            converged += 1;
        }
    }
    assert!(converged >= 6, "only {converged} of 8 converged");
}

#[test]
fn solve_is_deterministic() {
    let cfg = OcpConfig::default();
    let a = ImplicitSolver::new(cfg.clone()).unwrap();
    let b = ImplicitSolver::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x0 = feasible_state(&cfg, &mut rng, 0.6);
    let f = random_reference(cfg.horizon, &mut rng, 2.0);
    let guess = vec![ControlInput::new(0.1, 0.5, 0.0, -0.2); cfg.horizon];
    let r1 = a.solve(&x0, &f, &guess).unwrap();
    let r2 = a.solve(&x0, &f, &guess).unwrap();
    let r3 = b.solve(&x0, &f, &guess).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1, r3);
}

#[test]
fn step_reference_saturates_tilt_rate() {
    let cfg = OcpConfig::default();
    let solver = ImplicitSolver::new(cfg.clone()).unwrap();
    let f = vec![SpecificForce::new(0.5, 0.0); cfg.horizon + 1];
    let r = solver
        .solve(
            &PlatformState::default(),
            &f,
            &vec![ControlInput::default(); cfg.horizon],
        )
        .unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert_solution_valid(&cfg, &PlatformState::default(), &f, &r);
    let peak = r
        .x_pred
        .iter()
        .map(|x| x.omega_long)
        .fold(0.0_f64, f64::max);
    assert!(
        (peak - cfg.constraints.omega_long_max).abs() <= 1e-6,
        "peak tilt rate {} deg/s",
        peak.to_degrees()
    );
    // tilt coordination: the first commands pitch the platform forward
    assert!(r.u_cmd_opt[0].a_rot_long > 0.0);
}

#[test]
fn weighted_solve_checks_dimensions() {
    let cfg = short_cfg(10);
    let solver = ImplicitSolver::new(cfg.clone()).unwrap();
    let x0 = PlatformState::default();
    let f = vec![SpecificForce::default(); 11];
    let guess = vec![ControlInput::default(); 10];
    assert!(solver.solve(&x0, &f[..10], &guess).is_err());
    assert!(solver.solve(&x0, &f, &guess[..9]).is_err());
    assert!(solver.solve_weighted(&x0, &f, &guess, &[]).is_err());
    let mut bad = x0;
    bad.s_long = f64::NAN;
    assert!(solver.solve(&bad, &f, &guess).is_err());
}

#[test]
fn predicted_stage_weights_follow_the_trajectory() {
    let cfg = short_cfg(10);
    let mut states = vec![PlatformState::default(); 11];
    states[4].s_long = 0.5;
    let w = adaptive_weights_along(&cfg, &states);
    assert_eq!(w.len(), 10);
    assert!((w[3].s_long - 60.01).abs() < 1e-12);
    assert_eq!(w[0].s_long, 0.01);
}

#[test]
fn warm_start_states_follow_inputs() {
    let cfg = OcpConfig::default();
    let prev = {
        let solver = ImplicitSolver::new(cfg.clone()).unwrap();
        let f = vec![SpecificForce::new(1.0, 0.0); cfg.horizon + 1];
        solver
            .solve(
                &PlatformState::default(),
                &f,
                &vec![ControlInput::default(); cfg.horizon],
            )
            .unwrap()
    };
    let x0 = PlatformState::default();
    let w = build_warm_start(
        WarmStartMode::ShiftOwnFirst,
        Some(&prev),
        None,
        &x0,
        &SpecificForce::default(),
        &cfg,
    );
    assert!(!w.fallback);
    assert!(w.inputs.iter().all(|u| *u == prev.u_cmd_opt[0]));
    let mut x = x0.to_array();
    for (k, u) in w.inputs.iter().enumerate() {
        x = rk4_implicit(&x, &u.to_array(), cfg.model.tau_act, cfg.model.dt);
        let got = w.states[k + 1].to_array();
        for i in 0..NX {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }
}
