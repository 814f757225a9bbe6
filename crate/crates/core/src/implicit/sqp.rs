use serde::{Deserialize, Serialize};

use super::condensed::{CondensedProblem, Evaluation, LinearizedRows, RowSpec, State, Tick};
use super::config::{adaptive_weight_mode, OcpConfig, StageWeights};
use crate::error::{CueingError, Result};
use crate::model::{ControlInput, PlatformState, SpecificForce, NU};
use crate::qp::{self, QpOptions, QpStatus};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-8;
const HINT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    InfeasibleQp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub u_cmd_opt: Vec<ControlInput>,
    pub x_pred: Vec<PlatformState>,
    /// QP solves.
    pub iterations: usize,
    /// Active-set changes summed over all QP solves.
    pub qp_pivots: usize,
    pub kkt_residual: f64,
    pub cost: f64,
    pub status: SolveStatus,
    /// The braking rows were relaxed.
    pub relaxed: bool,
}

impl SolveResult {
    pub fn first_input(&self) -> ControlInput {
        self.u_cmd_opt[0]
    }

    pub fn stacked_inputs(&self) -> Vec<f64> {
        self.u_cmd_opt.iter().flat_map(|u| u.to_array()).collect()
    }
}

/// SQP solver for one OCP configuration. Holds precomputed prediction data
/// only, so a solve does not depend on earlier solves.
#[derive(Clone, Debug)]
pub struct ImplicitSolver {
    cfg: OcpConfig,
    problem: CondensedProblem,
    qp_opts: QpOptions,
}

fn to_states(x: &[State]) -> Vec<PlatformState> {
    x.iter().map(PlatformState::from_array).collect()
}

impl ImplicitSolver {
    pub fn new(cfg: OcpConfig) -> Result<Self> {
        let problem = CondensedProblem::new(&cfg)?;
        Ok(Self {
            cfg,
            problem,
            qp_opts: QpOptions::default(),
        })
    }

    pub fn config(&self) -> &OcpConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &CondensedProblem {
        &self.problem
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    /// Solve with the weights frozen at `x0`.
    pub fn solve(
        &self,
        x0: &PlatformState,
        f_ref: &[SpecificForce],
        guess: &[ControlInput],
    ) -> Result<SolveResult> {
        let weights = adaptive_weight_mode(&self.cfg, x0);
        self.solve_weighted(x0, f_ref, guess, &weights)
    }

    /// Solve with explicit stage weights. `f_ref` holds `N + 1` samples
    /// (sample `k` is the reference for state `k`), `guess` holds `N` inputs.
    pub fn solve_weighted(
        &self,
        x0: &PlatformState,
        f_ref: &[SpecificForce],
        guess: &[ControlInput],
        weights: &[StageWeights],
    ) -> Result<SolveResult> {
        let n = self.cfg.horizon;
        if f_ref.len() != n + 1 {
            return Err(CueingError::Config(format!(
                "reference horizon has {} samples, expected {}",
                f_ref.len(),
                n + 1
            )));
        }
        if guess.len() != n {
            return Err(CueingError::Config(format!(
                "guess has {} inputs, expected {n}",
                guess.len()
            )));
        }
        if weights.len() != n {
            return Err(CueingError::Config(format!(
                "{} stage weights, expected {n}",
                weights.len()
            )));
        }
        if !x0.is_finite() {
            return Err(CueingError::NonFinite("initial state"));
        }
        if f_ref
            .iter()
            .any(|f| !f.f_long.is_finite() || !f.f_lat.is_finite())
        {
            return Err(CueingError::NonFinite("reference"));
        }
        if guess.iter().any(|u| !u.is_finite()) {
            return Err(CueingError::NonFinite("guess"));
        }

        let prob = &self.problem;
        let tick = Tick {
            x0: x0.to_array(),
            f_ref,
            weights,
        };
        let mut u: Vec<f64> = guess.iter().flat_map(|g| g.to_array()).collect();
        prob.clip_inputs(&mut u);
        let mut sigma: Vec<f64> = Vec::new();
        let mut eval = prob.evaluate(&tick, &u, &sigma);

        let mut iterations = 0;
        let mut pivots = 0;
        let mut penalty = 0.0_f64;
        let mut kkt = f64::INFINITY;
        let mut status = SolveStatus::IterationCap;
        let mut curvature: Vec<(usize, f64)> = Vec::new();
        // rows tight at the guess seed the first QP's active set
        let mut hint: Vec<usize> = (0..eval.values.len())
            .filter(|&i| eval.values[i] >= -HINT_TOL)
            .collect();

        while iterations < self.cfg.max_sqp_iters {
            let (h, grad) = prob.hessian_gradient(&tick, &u, &eval.x, &sigma, &curvature);
            let rows = LinearizedRows::new(prob, &eval.x, &eval.values, !sigma.is_empty());
            let sol = qp::solve_hinted(&h, &grad, &rows, &self.qp_opts, &hint)
                .map_err(|e| CueingError::Config(format!("SQP subproblem: {e}")))?;
            iterations += 1;
            pivots += sol.pivots;
            if sol.status != QpStatus::Optimal {
                if sigma.is_empty() && prob.n_groups() > 0 {
                    log::debug!(
                        "QP infeasible at SQP iteration {iterations}, relaxing braking rows"
                    );
                    sigma = prob.initial_relaxation(&eval.x, &u);
                    eval = prob.evaluate(&tick, &u, &sigma);
                    penalty = 0.0;
                    curvature.clear();
                    continue;
                }
                status = SolveStatus::InfeasibleQp;
                break;
            }
            let d = &sol.x;

            // stationarity of the QP step, primal feasibility, complementarity
            let hd = &h * nalgebra::DVector::from_column_slice(d);
            kkt = hd.amax().max(eval.max_violation());
            for (lam, g) in sol.multipliers.iter().zip(&eval.values) {
                kkt = kkt.max((lam * g).abs());
            }
            if kkt <= self.cfg.kkt_tol {
                status = SolveStatus::Converged;
                break;
            }

            let lam_max = sol.multipliers.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            penalty = penalty.max(1.5 * lam_max + 1e-6);
            let merit = |e: &Evaluation| e.cost + penalty * e.violation();
            let phi0 = merit(&eval);
            let slope =
                grad.iter().zip(d).map(|(g, di)| g * di).sum::<f64>() - penalty * eval.violation();

            let nu_total = prob.n_inputs();
            let mut alpha = 1.0;
            let (next_u, next_sigma, next_eval) = loop {
                let tu: Vec<f64> = u
                    .iter()
                    .zip(&d[..nu_total])
                    .map(|(a, b)| a + alpha * b)
                    .collect();
                let ts: Vec<f64> = sigma
                    .iter()
                    .zip(&d[nu_total..])
                    .map(|(a, b)| (a + alpha * b).max(0.0))
                    .collect();
                let te = prob.evaluate(&tick, &tu, &ts);
                if merit(&te) <= phi0 + ARMIJO * alpha * slope.min(0.0) || alpha < MIN_STEP {
                    break (tu, ts, te);
                }
                alpha *= 0.5;
            };
            curvature = sol
                .active
                .iter()
                .filter(|&&i| matches!(prob.row(i), RowSpec::Norm { .. }))
                .map(|&i| (i, sol.multipliers[i]))
                .collect();
            hint.clone_from(&sol.active);
            u = next_u;
            sigma = next_sigma;
            eval = next_eval;
        }

        let relaxed = !sigma.is_empty();
        Ok(SolveResult {
            u_cmd_opt: u.chunks_exact(NU).map(ControlInput::from_slice).collect(),
            x_pred: to_states(&eval.x),
            iterations,
            qp_pivots: pivots,
            kkt_residual: kkt,
            cost: prob.cost(&tick, &u, &eval.x, &[]),
            status,
            relaxed,
        })
    }
}
