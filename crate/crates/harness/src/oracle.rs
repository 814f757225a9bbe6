//! General-purpose reference solver for small horizons: augmented
//! Lagrangian over the inputs, inner L-BFGS with finite-difference
//! gradients, several starting points. Works only through the
//! transcription's simulation, cost and constraint values.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use cueing_core::implicit::Transcription;
use cueing_core::model::ControlInput;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub inputs: Vec<ControlInput>,
    pub cost: f64,
    pub max_violation: f64,
}

struct Lagrangian<'a> {
    tr: &'a Transcription,
    lambda: &'a [f64],
    mu: f64,
}

impl Lagrangian<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let z = self.tr.from_inputs(&to_inputs(u));
        let g = self.tr.inequalities(&z);
        let mut v = self.tr.cost(&z);
        for (gi, li) in g.iter().zip(self.lambda) {
            let s = (li + self.mu * gi).max(0.0);
            v += (s * s - li * li) / (2.0 * self.mu);
        }
        v
    }
}

impl CostFunction for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok(self.value(u))
    }
}

impl Gradient for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, u: &Self::Param) -> Result<Vec<f64>, argmin::core::Error> {
        let mut p = u.clone();
        let mut g = vec![0.0; u.len()];
        for i in 0..u.len() {
            let h = 1e-7 * (1.0 + u[i].abs());
            p[i] = u[i] + h;
            let fp = self.value(&p);
            p[i] = u[i] - h;
            let fm = self.value(&p);
            p[i] = u[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

fn to_inputs(u: &[f64]) -> Vec<ControlInput> {
    u.chunks_exact(4).map(ControlInput::from_slice).collect()
}

fn evaluate(tr: &Transcription, u: &[f64]) -> (f64, f64) {
    let z = tr.from_inputs(&to_inputs(u));
    let viol = tr.inequalities(&z).iter().fold(0.0_f64, |m, g| m.max(*g));
    (tr.cost(&z), viol)
}

/// One augmented-Lagrangian solve from `start`.
fn solve_from(tr: &Transcription, start: Vec<f64>) -> Option<(Vec<f64>, f64, f64)> {
    let m = tr.inequalities(&tr.from_inputs(&to_inputs(&start))).len();
    let mut lambda = vec![0.0; m];
    let mut mu = 10.0;
    let mut u = start;
    let mut prev_viol = f64::INFINITY;
    for _ in 0..40 {
        let problem = Lagrangian {
            tr,
            lambda: &lambda,
            mu,
        };
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 20)
            .with_tolerance_grad(1e-9)
            .ok()?
            .with_tolerance_cost(1e-15)
            .ok()?;
        let res = Executor::new(problem, solver)
            .configure(|s| s.param(u.clone()).max_iters(1000))
            .run()
            .ok()?;
        u = res.state().get_best_param()?.clone();
        let z = tr.from_inputs(&to_inputs(&u));
        let g = tr.inequalities(&z);
        for (li, gi) in lambda.iter_mut().zip(&g) {
            *li = (*li + mu * gi).max(0.0);
        }
        let viol = g.iter().fold(0.0_f64, |a, b| a.max(*b));
        if viol < 1e-9 && (prev_viol < 1e-9 || viol == 0.0) {
            break;
        }
        if viol > 0.25 * prev_viol {
            mu = (mu * 10.0).min(1e10);
        }
        prev_viol = viol;
    }
    let (cost, viol) = evaluate(tr, &u);
    Some((u, cost, viol))
}

/// Best feasible result over a zero start and `starts - 1` random starts
/// inside the input box.
pub fn solve(
    tr: &Transcription,
    bounds: [f64; 4],
    starts: usize,
    seed: u64,
) -> Option<OracleSolution> {
    let n = 4 * tr.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OracleSolution> = None;
    for s in 0..starts.max(1) {
        let start: Vec<f64> = if s == 0 {
            vec![0.0; n]
        } else {
            (0..n)
                .map(|i| 0.5 * rng.gen_range(-bounds[i % 4]..bounds[i % 4]))
                .collect()
        };
        let Some((u, cost, viol)) = solve_from(tr, start) else {
            continue;
        };
        if viol > 1e-7 {
            continue;
        }
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(OracleSolution {
                inputs: to_inputs(&u),
                cost,
                max_violation: viol,
            });
        }
    }
    best
}
