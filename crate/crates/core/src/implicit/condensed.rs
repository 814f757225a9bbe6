//! The optimal control problem with the states eliminated.
//!
//! The 12-state model is linear, so one RK4 step is the exact map
//! `x_{k+1} = A x_k + B u_k` and every state is affine in the stacked input
//! `U = [u_0; ...; u_{N-1}]`:
//!
//! ```text
//!     x_k = A^k x_0 + sum_{j<k} A^{k-1-j} B u_j
//! ```
//!
//! Constraint rows are stored in the form `g_i(U, sigma) <= 0`, where
//! `sigma` holds the optional relaxation of the braking rows (one
//! nonnegative variable per braking row family, shared across stages).
//!
//! Norm rows enter as `|q| - limit`, which is convex in `U`, together with a
//! fixed circumscribed polygon of cuts. The squared form has a zero gradient
//! at the origin and gives the QP nothing to hold the first step.

use nalgebra::{DMatrix, SVector};

use super::config::{OcpConfig, StageWeights};
use crate::constraints::{ConstraintRows, LinearRow, NormRow, RowKind};
use crate::model::{discrete_implicit, su, sx, InputMatrix, SpecificForce, StateMatrix, NU, NX};
use crate::qp::QpConstraints;

pub type State = [f64; NX];

/// Sides of the outer polygon around each norm row.
pub const POLYGON: usize = 8;

fn polygon() -> [(f64, f64); POLYGON] {
    std::array::from_fn(|dir| {
        let a = std::f64::consts::TAU * dir as f64 / POLYGON as f64;
        (a.cos(), a.sin())
    })
}

/// Quadratic weight on each relaxation variable, keeps the QP strictly convex.
pub const SIGMA_REGULARIZATION: f64 = 1.0;

/// One constraint row of the condensed problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowSpec {
    /// `side = 1`: `c·x_k - upper`; `side = -1`: `lower - c·x_k`.
    State { row: usize, stage: usize, side: f64 },
    /// `|q| - limit`.
    Norm { row: usize, stage: usize },
    /// `cos·q_long + sin·q_lat - limit` for polygon direction `dir`.
    NormCut {
        row: usize,
        stage: usize,
        dir: usize,
    },
    /// Commanded input `input` of step `stage` (0-based).
    Input {
        input: usize,
        stage: usize,
        side: f64,
    },
    /// `-sigma_group`.
    Sigma { group: usize },
}

/// Problem data for one tick.
#[derive(Clone, Debug)]
pub struct Tick<'a> {
    pub x0: State,
    /// `N + 1` samples, index `k` is the reference for `x_k`.
    pub f_ref: &'a [SpecificForce],
    /// `N` entries, index `k - 1` weights stage `k`.
    pub weights: &'a [StageWeights],
}

impl Tick<'_> {
    fn uniform_weights(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] == w[1])
    }
}

/// Values of an iterate.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// `N + 1` states.
    pub x: Vec<State>,
    pub cost: f64,
    /// `g_i` for every row (relaxation rows included when relaxed).
    pub values: Vec<f64>,
}

impl Evaluation {
    pub fn violation(&self) -> f64 {
        self.values.iter().map(|v| v.max(0.0)).sum()
    }

    pub fn max_violation(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(*v))
    }
}

const WASHOUT_STATES: [usize; 4] = [sx::S_LONG, sx::S_LAT, sx::OMEGA_LONG, sx::OMEGA_LAT];

fn washout_weight(w: &StageWeights, slot: usize) -> f64 {
    match slot {
        0 => w.s_long,
        1 => w.s_lat,
        2 => w.omega_long,
        _ => w.omega_lat,
    }
}

#[derive(Clone, Debug)]
pub struct CondensedProblem {
    pub horizon: usize,
    g: f64,
    w_f: f64,
    w_u: f64,
    slack_penalty: f64,
    a: StateMatrix,
    b: InputMatrix,
    /// `A^m B`, `m = 0..N`.
    p: Vec<InputMatrix>,
    linear: Vec<LinearRow>,
    norm: Vec<NormRow>,
    input_lower: [f64; NU],
    input_upper: [f64; NU],
    rows: Vec<RowSpec>,
    /// Relaxation group of each entry of `rows`.
    relax: Vec<Option<usize>>,
    n_groups: usize,
    /// `c' A^m B` per linear row.
    lin_sens: Vec<Vec<[f64; NU]>>,
    /// `(c_long' A^m B, c_lat' A^m B)` per norm row.
    norm_sens: Vec<(Vec<[f64; NU]>, Vec<[f64; NU]>)>,
    /// Unit-weight Gauss-Newton blocks of the four washout terms.
    washout_blocks: [DMatrix<f64>; 4],
    polygon: [(f64, f64); POLYGON],
    /// Nonzero state coefficients of each linear row.
    linear_nz: Vec<Vec<(usize, f64)>>,
    /// Nonzero state coefficients of each norm row, `(long, lat)`.
    norm_nz: Vec<(Vec<(usize, f64)>, Vec<(usize, f64)>)>,
}

fn nonzeros(c: &[f64; NX]) -> Vec<(usize, f64)> {
    c.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect()
}

fn sparse_dot(c: &[(usize, f64)], x: &State) -> f64 {
    c.iter().map(|&(i, v)| v * x[i]).sum()
}

fn is_braking(kind: RowKind) -> bool {
    matches!(
        kind,
        RowKind::BrakingTilt(_) | RowKind::BrakingEnvelope | RowKind::BrakingDisplacement(_)
    )
}

impl CondensedProblem {
    pub fn new(cfg: &OcpConfig) -> crate::Result<Self> {
        cfg.validate()?;
        let n = cfg.horizon;
        let (a, b) = discrete_implicit(cfg.model.tau_act, cfg.model.dt);
        let mut p = Vec::with_capacity(n);
        let mut cur = b;
        for _ in 0..n {
            p.push(cur);
            cur = a * cur;
        }

        let all = ConstraintRows::new(&cfg.constraints, &cfg.braking);
        let mut input_lower = [f64::NEG_INFINITY; NU];
        let mut input_upper = [f64::INFINITY; NU];
        let mut linear = Vec::new();
        for row in all.linear {
            if row.is_input_row() {
                let i = row.input.iter().position(|c| *c != 0.0).unwrap();
                input_lower[i] = input_lower[i].max(row.lower / row.input[i]);
                input_upper[i] = input_upper[i].min(row.upper / row.input[i]);
            } else {
                linear.push(row);
            }
        }
        let norm = all.norm;

        let mut groups: Vec<RowKind> = Vec::new();
        let mut group_of = |kind: RowKind| -> Option<usize> {
            if !is_braking(kind) {
                return None;
            }
            Some(match groups.iter().position(|k| *k == kind) {
                Some(i) => i,
                None => {
                    groups.push(kind);
                    groups.len() - 1
                }
            })
        };
        let mut rows = Vec::new();
        let mut relax = Vec::new();
        for stage in 1..=n {
            for (r, row) in linear.iter().enumerate() {
                let grp = group_of(row.kind);
                for side in [1.0, -1.0] {
                    rows.push(RowSpec::State {
                        row: r,
                        stage,
                        side,
                    });
                    relax.push(grp);
                }
            }
            for (r, row) in norm.iter().enumerate() {
                let grp = group_of(row.kind);
                rows.push(RowSpec::Norm { row: r, stage });
                relax.push(grp);
                for dir in 0..POLYGON {
                    rows.push(RowSpec::NormCut { row: r, stage, dir });
                    relax.push(grp);
                }
            }
        }
        for stage in 0..n {
            for input in 0..NU {
                for side in [1.0, -1.0] {
                    rows.push(RowSpec::Input { input, stage, side });
                    relax.push(None);
                }
            }
        }
        let n_groups = groups.len();

        let sens = |c: &[f64; NX]| -> Vec<[f64; NU]> {
            p.iter()
                .map(|pm| {
                    let mut out = [0.0; NU];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = (0..NX).map(|i| c[i] * pm[(i, j)]).sum();
                    }
                    out
                })
                .collect()
        };
        let lin_sens = linear.iter().map(|r| sens(&r.state)).collect();
        let norm_sens = norm.iter().map(|r| (sens(&r.long), sens(&r.lat))).collect();

        let nu_total = NU * n;
        let washout_blocks = WASHOUT_STATES.map(|state| {
            let mut jm = DMatrix::zeros(n, nu_total);
            for k in 1..=n {
                for j in 0..k {
                    for c in 0..NU {
                        jm[(k - 1, NU * j + c)] = p[k - 1 - j][(state, c)];
                    }
                }
            }
            jm.tr_mul(&jm)
        });

        let linear_nz = linear.iter().map(|r| nonzeros(&r.state)).collect();
        let norm_nz = norm
            .iter()
            .map(|r| (nonzeros(&r.long), nonzeros(&r.lat)))
            .collect();
        Ok(Self {
            horizon: n,
            g: cfg.model.g,
            w_f: cfg.w_f,
            w_u: cfg.w_u,
            slack_penalty: cfg.slack_penalty,
            a,
            b,
            p,
            linear,
            norm,
            input_lower,
            input_upper,
            rows,
            relax,
            n_groups,
            lin_sens,
            norm_sens,
            washout_blocks,
            polygon: polygon(),
            linear_nz,
            norm_nz,
        })
    }

    pub fn n_inputs(&self) -> usize {
        NU * self.horizon
    }

    /// Number of relaxation variables used when relaxed.
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Row count, with or without the relaxation rows.
    pub fn n_rows(&self, relaxed: bool) -> usize {
        self.rows.len() + if relaxed { self.n_groups } else { 0 }
    }

    pub fn row(&self, i: usize) -> RowSpec {
        if i < self.rows.len() {
            self.rows[i]
        } else {
            RowSpec::Sigma {
                group: i - self.rows.len(),
            }
        }
    }

    /// Constraint family of a row, `None` for relaxation rows.
    pub fn row_kind(&self, i: usize) -> Option<RowKind> {
        match self.row(i) {
            RowSpec::State { row, .. } => Some(self.linear[row].kind),
            RowSpec::Norm { row, .. } | RowSpec::NormCut { row, .. } => Some(self.norm[row].kind),
            RowSpec::Input { input, .. } => Some(match input {
                su::A_ROT_LONG => RowKind::CommandRotAccel(crate::model::Axis::Long),
                su::A_TRAN_LONG => RowKind::CommandTranAccel(crate::model::Axis::Long),
                su::A_ROT_LAT => RowKind::CommandRotAccel(crate::model::Axis::Lat),
                _ => RowKind::CommandTranAccel(crate::model::Axis::Lat),
            }),
            RowSpec::Sigma { .. } => None,
        }
    }

    pub fn input_bounds(&self) -> ([f64; NU], [f64; NU]) {
        (self.input_lower, self.input_upper)
    }

    /// Clips a stacked input to the command bounds.
    pub fn clip_inputs(&self, u: &mut [f64]) {
        for (i, v) in u.iter_mut().enumerate() {
            let c = i % NU;
            *v = v.clamp(self.input_lower[c], self.input_upper[c]);
        }
    }

    pub fn step(&self, x: &State, u: &[f64]) -> State {
        let xv = SVector::<f64, NX>::from_column_slice(x);
        let uv = SVector::<f64, NU>::from_column_slice(u);
        let next = self.a * xv + self.b * uv;
        let mut out = [0.0; NX];
        out.copy_from_slice(next.as_slice());
        out
    }

    /// `N + 1` states from `x0` under the stacked input `u`.
    pub fn simulate(&self, x0: &State, u: &[f64]) -> Vec<State> {
        let mut x = Vec::with_capacity(self.horizon + 1);
        x.push(*x0);
        for k in 0..self.horizon {
            let next = self.step(&x[k], &u[NU * k..NU * k + NU]);
            x.push(next);
        }
        x
    }

    /// Specific-force residuals `(f_long - ref, f_lat - ref)` of a state.
    fn force_residual(&self, x: &State, f_ref: &SpecificForce) -> (f64, f64) {
        let (st, ct) = x[sx::THETA_LONG].sin_cos();
        let f_long = x[sx::A_TRAN_LONG] + self.g * st;
        let f_lat = x[sx::A_TRAN_LAT] - self.g * ct * x[sx::THETA_LAT].sin();
        (f_long - f_ref.f_long, f_lat - f_ref.f_lat)
    }

    /// Objective at a trajectory.
    pub fn cost(&self, tick: &Tick, u: &[f64], x: &[State], sigma: &[f64]) -> f64 {
        let mut j = 0.0;
        for k in 1..=self.horizon {
            let (rl, rt) = self.force_residual(&x[k], &tick.f_ref[k]);
            j += self.w_f * (rl * rl + rt * rt);
            let w = &tick.weights[k - 1];
            for (slot, &state) in WASHOUT_STATES.iter().enumerate() {
                j += washout_weight(w, slot) * x[k][state] * x[k][state];
            }
        }
        j += self.w_u * u.iter().map(|v| v * v).sum::<f64>();
        j += sigma
            .iter()
            .map(|s| self.slack_penalty * s + 0.5 * SIGMA_REGULARIZATION * s * s)
            .sum::<f64>();
        j
    }

    fn row_value(
        &self,
        spec: RowSpec,
        group: Option<usize>,
        x: &[State],
        u: &[f64],
        sigma: &[f64],
    ) -> f64 {
        let relax = match (group, sigma.is_empty()) {
            (Some(g), false) => sigma[g],
            _ => 0.0,
        };
        match spec {
            RowSpec::State { row, stage, side } => {
                let r = &self.linear[row];
                let v: f64 = r.state.iter().zip(&x[stage]).map(|(c, xi)| c * xi).sum();
                if side > 0.0 {
                    v - r.upper - relax
                } else {
                    r.lower - v - relax
                }
            }
            RowSpec::Norm { row, stage } => {
                let r = &self.norm[row];
                let (ql, qt) = r.components(&x[stage]);
                ql.hypot(qt) - r.limit - relax
            }
            RowSpec::NormCut { row, stage, dir } => {
                let r = &self.norm[row];
                let (ql, qt) = r.components(&x[stage]);
                let (c, s) = self.polygon[dir];
                c * ql + s * qt - r.limit - relax
            }
            RowSpec::Input { input, stage, side } => {
                let v = u[NU * stage + input];
                if side > 0.0 {
                    v - self.input_upper[input]
                } else {
                    self.input_lower[input] - v
                }
            }
            RowSpec::Sigma { group } => -sigma[group],
        }
    }

    /// Row values `g_i` at a trajectory. `sigma` empty means unrelaxed.
    pub fn row_values(&self, x: &[State], u: &[f64], sigma: &[f64]) -> Vec<f64> {
        let relaxed = !sigma.is_empty();
        (0..self.n_rows(relaxed))
            .map(|i| {
                let grp = self.relax.get(i).copied().flatten();
                self.row_value(self.row(i), grp, x, u, sigma)
            })
            .collect()
    }

    pub fn evaluate(&self, tick: &Tick, u: &[f64], sigma: &[f64]) -> Evaluation {
        let x = self.simulate(&tick.x0, u);
        let cost = self.cost(tick, u, &x, sigma);
        let values = self.row_values(&x, u, sigma);
        Evaluation { x, cost, values }
    }

    /// Smallest relaxation that makes every braking row feasible at `x`.
    pub fn initial_relaxation(&self, x: &[State], u: &[f64]) -> Vec<f64> {
        let mut sigma = vec![0.0_f64; self.n_groups];
        for (i, spec) in self.rows.iter().enumerate() {
            if let Some(g) = self.relax[i] {
                let v = self.row_value(*spec, None, x, u, &[]);
                sigma[g] = sigma[g].max(v);
            }
        }
        sigma
    }

    /// Adds `weight · (d/dU) x_k[state]` to `out`.
    fn add_state_gradient(&self, state: usize, stage: usize, weight: f64, out: &mut [f64]) {
        for j in 0..stage {
            let pm = &self.p[stage - 1 - j];
            for c in 0..NU {
                out[NU * j + c] += weight * pm[(state, c)];
            }
        }
    }

    /// Gauss-Newton Hessian and gradient of the objective in `(U, sigma)`.
    /// `curvature` lists `(row, multiplier)` of norm rows whose constraint
    /// curvature is added to the Hessian.
    pub fn hessian_gradient(
        &self,
        tick: &Tick,
        u: &[f64],
        x: &[State],
        sigma: &[f64],
        curvature: &[(usize, f64)],
    ) -> (DMatrix<f64>, Vec<f64>) {
        let n = self.horizon;
        let nu_total = self.n_inputs();
        let dim = nu_total + sigma.len();
        let mut h = DMatrix::zeros(dim, dim);
        let mut grad = vec![0.0; dim];

        // washout terms
        if tick.uniform_weights() {
            let w = &tick.weights[0];
            for (slot, block) in self.washout_blocks.iter().enumerate() {
                let wt = 2.0 * washout_weight(w, slot);
                let mut view = h.view_mut((0, 0), (nu_total, nu_total));
                view.zip_apply(block, |a, b| *a += wt * b);
            }
        } else {
            let mut jw = DMatrix::zeros(4 * n, nu_total);
            for k in 1..=n {
                let w = &tick.weights[k - 1];
                for (slot, &state) in WASHOUT_STATES.iter().enumerate() {
                    let sw = washout_weight(w, slot).sqrt();
                    for j in 0..k {
                        for c in 0..NU {
                            jw[(4 * (k - 1) + slot, NU * j + c)] =
                                sw * self.p[k - 1 - j][(state, c)];
                        }
                    }
                }
            }
            let mut view = h.view_mut((0, 0), (nu_total, nu_total));
            view.gemm(2.0, &jw.transpose(), &jw, 1.0);
        }
        for k in 1..=n {
            let w = &tick.weights[k - 1];
            for (slot, &state) in WASHOUT_STATES.iter().enumerate() {
                let v = 2.0 * washout_weight(w, slot) * x[k][state];
                if v != 0.0 {
                    self.add_state_gradient(state, k, v, &mut grad);
                }
            }
        }

        // specific-force terms
        if self.w_f > 0.0 {
            let mut jf = DMatrix::zeros(2 * n, nu_total);
            let mut scratch = vec![0.0; nu_total];
            for k in 1..=n {
                let xk = &x[k];
                let (st, ct) = xk[sx::THETA_LONG].sin_cos();
                let (sl, cl) = xk[sx::THETA_LAT].sin_cos();
                let (rl, rt) = self.force_residual(xk, &tick.f_ref[k]);
                let long_terms = [(sx::A_TRAN_LONG, 1.0), (sx::THETA_LONG, self.g * ct)];
                let lat_terms = [
                    (sx::A_TRAN_LAT, 1.0),
                    (sx::THETA_LONG, self.g * st * sl),
                    (sx::THETA_LAT, -self.g * ct * cl),
                ];
                for (r, terms, res) in [
                    (2 * (k - 1), &long_terms[..], rl),
                    (2 * (k - 1) + 1, &lat_terms[..], rt),
                ] {
                    scratch[..NU * k].iter_mut().for_each(|v| *v = 0.0);
                    for &(state, coef) in terms {
                        self.add_state_gradient(state, k, coef, &mut scratch);
                    }
                    for (col, v) in scratch[..NU * k].iter().enumerate() {
                        jf[(r, col)] = *v;
                        grad[col] += 2.0 * self.w_f * res * v;
                    }
                }
            }
            let mut view = h.view_mut((0, 0), (nu_total, nu_total));
            view.gemm(2.0 * self.w_f, &jf.transpose(), &jf, 1.0);
        }

        // lambda · (I - qq'/|q|²)/|q| pulled back to U, rank one in 2-D
        if !curvature.is_empty() {
            let mut jc = DMatrix::zeros(curvature.len(), nu_total);
            for (r, &(i, lam)) in curvature.iter().enumerate() {
                let RowSpec::Norm { row, stage } = self.row(i) else {
                    continue;
                };
                let (ql, qt) = self.norm[row].components(&x[stage]);
                let nq = ql.hypot(qt);
                if lam <= 0.0 || nq < 1e-9 {
                    continue;
                }
                let scale = (lam / nq).sqrt();
                let (tl, tt) = (-qt / nq * scale, ql / nq * scale);
                let (sl, st) = &self.norm_sens[row];
                for j in 0..stage {
                    let a = &sl[stage - 1 - j];
                    let b = &st[stage - 1 - j];
                    for c in 0..NU {
                        jc[(r, NU * j + c)] = tl * a[c] + tt * b[c];
                    }
                }
            }
            let mut view = h.view_mut((0, 0), (nu_total, nu_total));
            view.gemm(1.0, &jc.transpose(), &jc, 1.0);
        }

        for i in 0..nu_total {
            h[(i, i)] += 2.0 * self.w_u;
            grad[i] += 2.0 * self.w_u * u[i];
        }
        for (g, s) in sigma.iter().enumerate() {
            let i = nu_total + g;
            h[(i, i)] += SIGMA_REGULARIZATION;
            grad[i] += self.slack_penalty + SIGMA_REGULARIZATION * s;
        }
        (h, grad)
    }

    /// Coefficients of `(q_long, q_lat)` in the linearization of a norm row.
    fn norm_weights(&self, spec: RowSpec, x: &[State]) -> (f64, f64) {
        match spec {
            RowSpec::Norm { row, stage } => {
                let (ql, qt) = self.norm[row].components(&x[stage]);
                let n = ql.hypot(qt);
                if n > 1e-12 {
                    (ql / n, qt / n)
                } else {
                    (0.0, 0.0)
                }
            }
            RowSpec::NormCut { dir, .. } => self.polygon[dir],
            _ => unreachable!(),
        }
    }

    /// Gradient of row `i` with respect to `(U, sigma)`, written into `out`
    /// (length `n_inputs + sigma.len()`).
    pub fn row_gradient(&self, i: usize, x: &[State], relaxed: bool, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let nu_total = self.n_inputs();
        match self.row(i) {
            RowSpec::State { row, stage, side } => {
                let sens = &self.lin_sens[row];
                for j in 0..stage {
                    let s = &sens[stage - 1 - j];
                    for c in 0..NU {
                        out[NU * j + c] = side * s[c];
                    }
                }
            }
            spec @ (RowSpec::Norm { row, stage } | RowSpec::NormCut { row, stage, .. }) => {
                let (wl, wt) = self.norm_weights(spec, x);
                let (sl, st) = &self.norm_sens[row];
                for j in 0..stage {
                    let a = &sl[stage - 1 - j];
                    let b = &st[stage - 1 - j];
                    for c in 0..NU {
                        out[NU * j + c] = wl * a[c] + wt * b[c];
                    }
                }
            }
            RowSpec::Input { input, stage, side } => out[NU * stage + input] = side,
            RowSpec::Sigma { group } => out[nu_total + group] = -1.0,
        }
        if relaxed {
            if let Some(g) = self.relax.get(i).copied().flatten() {
                out[nu_total + g] = -1.0;
            }
        }
    }

    /// Directional derivative of every row along `(d, d_sigma)`, using the
    /// state perturbation `dx` caused by `d`. Walks the rows in layout order.
    fn row_derivatives(
        &self,
        norm_dirs: &[(f64, f64)],
        dx: &[State],
        d: &[f64],
        d_sigma: &[f64],
        out: &mut [f64],
    ) {
        let relaxed = !d_sigma.is_empty();
        let mut i = 0;
        let mut dirs = norm_dirs.iter();
        for dxs in &dx[1..=self.horizon] {
            for c in &self.linear_nz {
                let v = sparse_dot(c, dxs);
                out[i] = v;
                out[i + 1] = -v;
                i += 2;
            }
            for (cl, ct) in &self.norm_nz {
                let (dl, dt) = (sparse_dot(cl, dxs), sparse_dot(ct, dxs));
                let (wl, wt) = dirs.next().unwrap();
                out[i] = wl * dl + wt * dt;
                for (k, (c, s)) in self.polygon.iter().enumerate() {
                    out[i + 1 + k] = c * dl + s * dt;
                }
                i += 1 + POLYGON;
            }
        }
        for stage in 0..self.horizon {
            for input in 0..NU {
                let v = d[NU * stage + input];
                out[i] = v;
                out[i + 1] = -v;
                i += 2;
            }
        }
        debug_assert_eq!(i, self.rows.len());
        if relaxed {
            for (o, g) in out.iter_mut().zip(&self.relax) {
                if let Some(g) = g {
                    *o -= d_sigma[*g];
                }
            }
            for (o, ds) in out[i..].iter_mut().zip(d_sigma) {
                *o = -ds;
            }
        }
    }
}

/// The rows linearized at an iterate, as seen by the QP solver:
/// `-(g_i + grad g_i · d) >= 0`.
pub struct LinearizedRows<'a> {
    problem: &'a CondensedProblem,
    x: &'a [State],
    values: &'a [f64],
    relaxed: bool,
    /// Linearization direction of each norm row, stage-major.
    norm_dirs: Vec<(f64, f64)>,
}

impl<'a> LinearizedRows<'a> {
    pub fn new(
        problem: &'a CondensedProblem,
        x: &'a [State],
        values: &'a [f64],
        relaxed: bool,
    ) -> Self {
        let norm_dirs = (1..=problem.horizon)
            .flat_map(|stage| {
                (0..problem.norm.len())
                    .map(move |row| problem.norm_weights(RowSpec::Norm { row, stage }, x))
            })
            .collect();
        Self {
            problem,
            x,
            values,
            relaxed,
            norm_dirs,
        }
    }
}

impl QpConstraints for LinearizedRows<'_> {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn dim(&self) -> usize {
        self.problem.n_inputs()
            + if self.relaxed {
                self.problem.n_groups
            } else {
                0
            }
    }

    fn slacks(&self, step: &[f64], out: &mut [f64]) {
        let nu_total = self.problem.n_inputs();
        let (d, d_sigma) = step.split_at(nu_total);
        let zero = [0.0; NX];
        let mut dx = Vec::with_capacity(self.problem.horizon + 1);
        dx.push(zero);
        for k in 0..self.problem.horizon {
            let xv = SVector::<f64, NX>::from_column_slice(&dx[k]);
            let uv = SVector::<f64, NU>::from_column_slice(&d[NU * k..NU * k + NU]);
            let next = self.problem.a * xv + self.problem.b * uv;
            let mut s = [0.0; NX];
            s.copy_from_slice(next.as_slice());
            dx.push(s);
        }
        self.problem
            .row_derivatives(&self.norm_dirs, &dx, d, d_sigma, out);
        for (o, v) in out.iter_mut().zip(self.values) {
            *o = -(*o + v);
        }
    }

    fn normal(&self, i: usize, out: &mut [f64]) {
        self.problem.row_gradient(i, self.x, self.relaxed, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    fn bound(&self, i: usize) -> f64 {
        self.values[i]
    }
}
