//! Point checks on the controllers, independent of closed-loop runs.

use std::time::Instant;

use anyhow::Result;
use cueing_core::constraints::check_feasible;
use cueing_core::explicit::check_against_oracle;
use cueing_core::implicit::{
    adaptive_weight_displacement, adaptive_weight_mode, adaptive_weight_tiltrate, transcribe,
    ImplicitSolver, OcpConfig, SolveStatus, Transcription,
};
use cueing_core::model::{Axis, ControlInput, PlatformState, SpecificForce, NU};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::oracle;
use crate::suite::Check;
use crate::tables;

/// Explicit tables against the dense QP on sampled feasible parameters.
pub fn explicit_oracle(cfg: &RunConfig, samples: usize, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for axis in Axis::BOTH {
        let (table, stats) = tables::build_axis(cfg, axis)?;
        let qp = tables::dense_qp(cfg, axis)?;
        let r = check_against_oracle(&table, &qp, samples, seed);
        ok &= r.feasible >= samples && r.covered == r.feasible && r.max_input_error <= 1e-6;
        details.push(format!(
            "{}: {} regions, {}/{} covered, max input error {:.2e}",
            axis.name(),
            stats.regions,
            r.covered,
            r.feasible,
            r.max_input_error
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    details.push(format!("{secs:.1} s"));
    Ok(Check::new("explicit table oracle", ok, details.join("; ")))
}

pub fn adaptive_weights(cfg: &RunConfig) -> Check {
    let p = &cfg.ocp.adaptive;
    let vals = [
        (adaptive_weight_displacement(0.0, p), 0.01, 0.0),
        (adaptive_weight_tiltrate(0.0, p), 0.0001, 0.0),
        (adaptive_weight_displacement(0.5, p), 60.01, 1e-12),
        (adaptive_weight_tiltrate(3.0, p), 2.1001, 1e-12),
    ];
    let ok = vals
        .iter()
        .all(|(got, want, tol)| (got - want).abs() <= *tol);
    Check::new(
        "adaptive weights",
        ok,
        format!(
            "W_s(0) {}, W_omega(0) {}, W_s(0.5) {}, W_omega(3) {}",
            vals[0].0, vals[1].0, vals[2].0, vals[3].0
        ),
    )
}

/// State drawn inside every bound, including the braking maps.
pub fn random_state(ocp: &OcpConfig, rng: &mut ChaCha8Rng, frac: f64) -> PlatformState {
    let c = &ocp.constraints;
    loop {
        let mut u = |lim: f64| rng.gen_range(-frac * lim..=frac * lim);
        let x = PlatformState {
            omega_long: u(c.omega_long_max),
            theta_long: u(0.2),
            v_long: u(0.1),
            s_long: u(0.3),
            omega_lat: u(c.omega_lat_max),
            theta_lat: u(0.2),
            v_lat: u(0.1),
            s_lat: u(0.3),
            a_tran_long: u(1.0),
            a_rot_long: u(0.3),
            a_tran_lat: u(1.0),
            a_rot_lat: u(0.3),
        };
        if check_feasible(&x, &ControlInput::default(), c, &ocp.braking, -1e-3).is_empty() {
            return x;
        }
    }
}

/// Reference with a random level and slope per axis.
pub fn random_reference(n: usize, rng: &mut ChaCha8Rng, amp: f64) -> Vec<SpecificForce> {
    let (l, t) = (rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    let (dl, dt) = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
    (0..=n)
        .map(|k| SpecificForce::new(l + dl * k as f64, t + dt * k as f64))
        .collect()
}

fn fd_error(f: impl Fn(&[f64]) -> Vec<f64>, jac: &DMatrix<f64>, z: &[f64]) -> f64 {
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
            worst = worst.max((fd - jac[(row, col)]).abs() / (1.0 + jac[(row, col)].abs()));
        }
    }
    worst
}

fn random_point(tr: &Transcription, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let inputs: Vec<ControlInput> = (0..tr.horizon)
        .map(|_| ControlInput::from_array(&std::array::from_fn(|_| rng.gen_range(-2.0..2.0))))
        .collect();
    let mut z = tr.from_inputs(&inputs);
    for v in &mut z[NU * tr.horizon..] {
        *v += rng.gen_range(-0.05..0.05);
    }
    z
}

/// Defect and constraint Jacobians against central differences.
pub fn jacobians(cfg: &RunConfig, points: usize, seed: u64) -> Check {
    let ocp = cfg.ocp_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e_def, mut e_ineq) = (0.0_f64, 0.0_f64);
    for _ in 0..points {
        let x0 = random_state(&ocp, &mut rng, 0.8);
        let f = random_reference(ocp.horizon, &mut rng, 2.0);
        let tr = transcribe(&ocp, &x0, &f, &adaptive_weight_mode(&ocp, &x0));
        let z = random_point(&tr, &mut rng);
        e_def = e_def.max(fd_error(|z| tr.defects(z), &tr.defect_jacobian(&z), &z));
        e_ineq = e_ineq.max(fd_error(
            |z| tr.inequalities(z),
            &tr.inequality_jacobian(&z),
            &z,
        ));
    }
    Check::new(
        "jacobians",
        e_def <= 1e-5 && e_ineq <= 1e-5,
        format!(
            "{points} points; max relative error defects {e_def:.2e}, inequalities {e_ineq:.2e}"
        ),
    )
}

/// SQP solutions on a short horizon against the general-purpose oracle.
pub fn nlp_oracle(cfg: &RunConfig, instances: usize, horizon: usize, seed: u64) -> Result<Check> {
    let mut ocp = cfg.ocp_config();
    ocp.horizon = horizon;
    let solver = ImplicitSolver::new(ocp.clone())?;
    let c = &ocp.constraints;
    let bounds = [
        c.a_cmd_rot_max,
        c.a_cmd_tran_max,
        c.a_cmd_rot_max,
        c.a_cmd_tran_max,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for i in 0..instances {
        let x0 = random_state(&ocp, &mut rng, 0.8);
        let f = random_reference(horizon, &mut rng, 3.0);
        let r = solver.solve(&x0, &f, &vec![ControlInput::default(); horizon])?;
        if r.status != SolveStatus::Converged || r.relaxed {
            failures.push(format!("#{i} {:?}", r.status));
            continue;
        }
        let tr = transcribe(&ocp, &x0, &f, &adaptive_weight_mode(&ocp, &x0));
        let Some(best) = oracle::solve(&tr, bounds, 4, seed.wrapping_add(i as u64)) else {
            failures.push(format!("#{i} oracle found no feasible point"));
            continue;
        };
        let rel = (r.cost - best.cost).abs() / best.cost.abs().max(1e-9);
        if rel > worst {
            worst = rel;
        }
    }
    let ok = failures.is_empty() && worst <= 1e-3;
    let mut detail = format!(
        "{instances} instances, N = {horizon}; worst relative cost gap {:.2e}",
        worst
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; failed: {}", failures.join(", ")));
    }
    Ok(Check::new("nlp oracle", ok, detail))
}
