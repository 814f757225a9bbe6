//! Controller and plant in a loop: table lookup, warm start, SQP solve,
//! plant step.

use std::time::Instant;

use anyhow::Result;
use cueing_core::explicit::ExplicitController;
use cueing_core::implicit::{
    adaptive_weight_mode, adaptive_weights_along, build_warm_start, ImplicitSolver, OcpConfig,
    SolveResult, SolveStatus, StageWeights, WarmStartMode, WeightEvaluation,
};
use cueing_core::model::{
    integrate_step, specific_force, ControlInput, PlatformState, SpecificForce, Variant,
};
use cueing_core::scenarios::{generate_reference, Scenario};
use serde::{Deserialize, Serialize};

use crate::config::{Preview, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickLog {
    pub tick: usize,
    pub t: f64,
    /// Plant state at the start of the tick.
    pub state: PlatformState,
    /// Command applied during the tick.
    pub input: ControlInput,
    pub f_ref: SpecificForce,
    pub f_sensed: SpecificForce,
    pub iterations: usize,
    pub qp_pivots: usize,
    pub status: SolveStatus,
    pub relaxed: bool,
    /// Warm start fell back to zeros.
    pub fallback: bool,
    pub cost: f64,
    /// Cost of the same tick solved without the iteration cap, only for
    /// capped ticks.
    pub cost_uncapped: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub scenario: Scenario,
    pub mode: WarmStartMode,
    pub dt: f64,
    pub ticks: Vec<TickLog>,
    /// Seconds spent per tick (lookup, warm start and solve).
    pub wall: Vec<f64>,
    /// Tick at which the solver gave up.
    pub aborted_at: Option<usize>,
}

impl RunLog {
    pub fn name(&self) -> String {
        format!("{}__{}", self.scenario.name(), self.mode.name())
    }

    pub fn completed(&self) -> bool {
        self.aborted_at.is_none()
    }

    pub fn all_converged(&self) -> bool {
        self.completed()
            && self
                .ticks
                .iter()
                .all(|t| t.status == SolveStatus::Converged)
    }
}

/// Reference samples at the controller step, padded with `tail` seconds of
/// the last value.
pub fn reference(cfg: &RunConfig, sc: &Scenario) -> Result<Vec<SpecificForce>> {
    let dt = cfg.model.dt;
    let mut f = generate_reference(sc, dt)?;
    let extra = (cfg.simulation.tail / dt).round() as usize;
    let last = *f.last().unwrap();
    f.extend(std::iter::repeat_n(last, extra));
    Ok(f)
}

fn horizon_reference(
    f: &[SpecificForce],
    k: usize,
    n: usize,
    preview: Preview,
) -> Vec<SpecificForce> {
    match preview {
        Preview::Horizon => (0..=n).map(|j| f[(k + j).min(f.len() - 1)]).collect(),
        Preview::Hold => vec![f[k]; n + 1],
    }
}

/// Everything a run needs that does not change between runs.
pub struct Controller<'a> {
    pub cfg: &'a RunConfig,
    pub ocp: OcpConfig,
    solver: ImplicitSolver,
    uncapped: Option<ImplicitSolver>,
    pub table: Option<&'a ExplicitController>,
}

impl<'a> Controller<'a> {
    pub fn new(cfg: &'a RunConfig, table: Option<&'a ExplicitController>) -> Result<Self> {
        let ocp = cfg.ocp_config();
        let solver = ImplicitSolver::new(ocp.clone())?;
        let uncapped = if cfg.simulation.uncapped_resolve {
            let mut o = ocp.clone();
            o.max_sqp_iters = cfg.simulation.uncapped_iters;
            Some(ImplicitSolver::new(o)?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            ocp,
            solver,
            uncapped,
            table,
        })
    }

    pub fn solver(&self) -> &ImplicitSolver {
        &self.solver
    }

    fn weights(
        &self,
        x: &PlatformState,
        prev: Option<&SolveResult>,
        guess: &[PlatformState],
    ) -> Vec<StageWeights> {
        match self.ocp.weight_evaluation {
            WeightEvaluation::Measured => adaptive_weight_mode(&self.ocp, x),
            WeightEvaluation::PredictedStages => {
                // previous prediction shifted by one tick, measured state in front
                let mut states = vec![*x];
                match prev {
                    Some(p) => states.extend(p.x_pred.iter().skip(2)),
                    None => states.extend(guess.iter().skip(1)),
                }
                adaptive_weights_along(&self.ocp, &states)
            }
        }
    }

    /// Runs one scenario under one warm-start mode.
    pub fn run(&self, sc: &Scenario, mode: WarmStartMode) -> Result<RunLog> {
        let f = reference(self.cfg, sc)?;
        let n = self.ocp.horizon;
        let plant = self.cfg.plant_model();
        let table = if mode.needs_table() { self.table } else { None };
        if mode.needs_table() && table.is_none() {
            anyhow::bail!("mode {mode} needs the explicit tables");
        }

        let mut x = PlatformState::default();
        let mut prev: Option<SolveResult> = None;
        let mut ticks = Vec::with_capacity(f.len());
        let mut wall = Vec::with_capacity(f.len());
        let mut aborted_at = None;
        for k in 0..f.len() {
            let start = Instant::now();
            let f_hor = horizon_reference(&f, k, n, self.cfg.simulation.preview);
            let guess = build_warm_start(mode, prev.as_ref(), table, &x, &f[k], &self.ocp);
            let weights = self.weights(&x, prev.as_ref(), &guess.states);
            let res = self
                .solver
                .solve_weighted(&x, &f_hor, &guess.inputs, &weights)?;
            wall.push(start.elapsed().as_secs_f64());
            if res.status == SolveStatus::InfeasibleQp {
                log::warn!("{}: {mode}: infeasible subproblem at tick {k}", sc.name());
                aborted_at = Some(k);
                break;
            }
            let cost_uncapped = match (&self.uncapped, res.status) {
                (Some(u), SolveStatus::IterationCap) => {
                    let r = u.solve_weighted(&x, &f_hor, &guess.inputs, &weights)?;
                    Some(r.cost)
                }
                _ => None,
            };
            let u0 = res.first_input();
            ticks.push(TickLog {
                tick: k,
                t: k as f64 * self.cfg.model.dt,
                state: x,
                input: u0,
                f_ref: f[k],
                f_sensed: specific_force(&x, self.cfg.model.g),
                iterations: res.iterations,
                qp_pivots: res.qp_pivots,
                status: res.status,
                relaxed: res.relaxed,
                fallback: guess.fallback,
                cost: res.cost,
                cost_uncapped,
            });
            x = integrate_step(&x, &u0, &plant, Variant::Implicit)?;
            prev = Some(res);
        }
        Ok(RunLog {
            scenario: sc.clone(),
            mode,
            dt: self.cfg.model.dt,
            ticks,
            wall,
            aborted_at,
        })
    }
}

/// Single run without a shared controller.
pub fn run_closed_loop(
    cfg: &RunConfig,
    sc: &Scenario,
    mode: WarmStartMode,
    table: Option<&ExplicitController>,
) -> Result<RunLog> {
    Controller::new(cfg, table)?.run(sc, mode)
}
