//! Condensed multi-parametric QP of one axis and its critical-region
//! enumeration.
//!
//! Parameter `p = [omega, theta, v, s, f_ref]`, decision `U = [u_0; ...; u_{N-1}]`
//! with `u_k = [a_rot, a_tran]`. The problem is
//!
//! ```text
//!     min  1/2 U'HU + U'Fp + 1/2 p'Yp   s.t.  G U <= w + S p,  p in box
//! ```
//!
//! For a fixed active set `A` the KKT system is affine in `p`, so the optimal
//! input and the multipliers are affine on the polyhedron where the inactive
//! rows stay feasible and the active multipliers stay nonnegative. Every
//! candidate active set (at most one side of each two-sided row, at most
//! `dim U` rows) is tried; those whose region has a nonempty interior are kept.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::LinearizedAxisModel;
use super::table::{CriticalRegion, RegionTable, TableMeta};
use crate::constraints::ConstraintSet;
use crate::error::{CueingError, Result};
use crate::model::Axis;
use crate::qp::{self, DenseConstraints, QpOptions, QpStatus};

/// Parameter dimension: four axis states plus the reference.
pub const N_PARAM: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplicitWeights {
    /// Specific-force tracking weight.
    pub w_f: f64,
    /// Input weight on both accelerations.
    pub w_u: f64,
    /// State regularization on predicted states.
    pub w_reg: f64,
}

impl Default for ExplicitWeights {
    fn default() -> Self {
        Self {
            w_f: 1.0,
            w_u: 1e-3,
            w_reg: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    pub horizon: usize,
    /// Reference bound of the parameter box, m/s².
    pub f_ref_max: f64,
    pub region_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            horizon: 2,
            f_ref_max: 6.7,
            region_cap: 50_000,
        }
    }
}

/// Summary of one enumeration run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub candidates: usize,
    pub rank_deficient: usize,
    pub empty: usize,
    pub regions: usize,
}

/// The condensed parametric QP of one axis.
#[derive(Clone, Debug)]
pub struct ParametricQp {
    pub axis: Axis,
    pub horizon: usize,
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
    pub s: DMatrix<f64>,
    pub lower: [f64; N_PARAM],
    pub upper: [f64; N_PARAM],
}

impl ParametricQp {
    pub fn new(
        model: &LinearizedAxisModel,
        weights: &ExplicitWeights,
        c: &ConstraintSet,
        opts: &BuildOptions,
    ) -> Result<Self> {
        let n = opts.horizon;
        if n == 0 || n > 3 {
            return Err(CueingError::Config(format!(
                "explicit horizon must be 1..=3, got {n}"
            )));
        }
        if !(weights.w_u > 0.0 && weights.w_f >= 0.0 && weights.w_reg >= 0.0) {
            return Err(CueingError::Config(
                "explicit weights must satisfy w_u > 0, w_f >= 0, w_reg >= 0".into(),
            ));
        }
        c.validate()?;
        let nu = 2 * n;

        // x_k = phi_k x0 + psi_k U
        let mut phi = vec![DMatrix::<f64>::identity(4, 4)];
        let mut psi = vec![DMatrix::<f64>::zeros(4, nu)];
        let a = DMatrix::from_iterator(4, 4, model.a.iter().copied());
        let b = DMatrix::from_iterator(4, 2, model.b.iter().copied());
        for k in 0..n {
            let next_phi = &a * &phi[k];
            let mut next_psi = &a * &psi[k];
            next_psi.view_mut((0, 2 * k), (4, 2)).copy_from(&b);
            phi.push(next_phi);
            psi.push(next_psi);
        }

        // residual rows r = M U + P p with weight rho
        let mut h = DMatrix::zeros(nu, nu);
        let mut f = DMatrix::zeros(nu, N_PARAM);
        let mut y = DMatrix::zeros(N_PARAM, N_PARAM);
        let mut add_residual = |m: DMatrix<f64>, p: DMatrix<f64>, rho: f64| {
            h += m.transpose() * &m * (2.0 * rho);
            f += m.transpose() * &p * (2.0 * rho);
            y += p.transpose() * &p * (2.0 * rho);
        };
        let c_row = DMatrix::from_iterator(1, 4, model.c.iter().copied());
        for k in 0..n {
            let mut m = &c_row * &psi[k];
            m[(0, 2 * k)] += model.d[0];
            m[(0, 2 * k + 1)] += model.d[1];
            let mut p = DMatrix::zeros(1, N_PARAM);
            p.view_mut((0, 0), (1, 4)).copy_from(&(&c_row * &phi[k]));
            p[(0, 4)] = -1.0;
            add_residual(m, p, weights.w_f);
        }
        for k in 1..=n {
            let mut p = DMatrix::zeros(4, N_PARAM);
            p.view_mut((0, 0), (4, 4)).copy_from(&phi[k]);
            add_residual(psi[k].clone(), p, weights.w_reg);
        }
        h += DMatrix::<f64>::identity(nu, nu) * (2.0 * weights.w_u);

        // constraints, each bound as a consecutive (+, -) pair
        let state_limits = [c.omega_max(model.axis), c.theta_max, c.v_max, c.s_axis_max];
        let input_limits = [c.a_rot_max, c.a_tran_max];
        let mut g_rows: Vec<Vec<f64>> = Vec::new();
        let mut w = Vec::new();
        let mut s_rows: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            for (j, lim) in input_limits.iter().enumerate() {
                for sign in [1.0, -1.0] {
                    let mut row = vec![0.0; nu];
                    row[2 * k + j] = sign;
                    g_rows.push(row);
                    w.push(*lim);
                    s_rows.push(vec![0.0; N_PARAM]);
                }
            }
            for (i, lim) in state_limits.iter().enumerate() {
                for sign in [1.0, -1.0] {
                    g_rows.push((0..nu).map(|j| sign * psi[k + 1][(i, j)]).collect());
                    w.push(*lim);
                    let mut srow = vec![0.0; N_PARAM];
                    for j in 0..4 {
                        srow[j] = -sign * phi[k + 1][(i, j)];
                    }
                    s_rows.push(srow);
                }
            }
        }
        let m = g_rows.len();
        let g = DMatrix::from_fn(m, nu, |i, j| g_rows[i][j]);
        let s = DMatrix::from_fn(m, N_PARAM, |i, j| s_rows[i][j]);

        let upper = [
            state_limits[0],
            state_limits[1],
            state_limits[2],
            state_limits[3],
            opts.f_ref_max,
        ];
        let lower = upper.map(|v| -v);
        Ok(Self {
            axis: model.axis,
            horizon: n,
            h,
            f,
            y,
            g,
            w: DVector::from_vec(w),
            s,
            lower,
            upper,
        })
    }

    pub fn n_u(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn in_bounds(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Objective value of an input sequence.
    pub fn cost(&self, u: &[f64], p: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let p = DVector::from_column_slice(p);
        0.5 * u.dot(&(&self.h * &u)) + u.dot(&(&self.f * &p)) + 0.5 * p.dot(&(&self.y * &p))
    }

    /// Solves the QP at one parameter with the dense active-set solver.
    /// Returns `None` when the QP is infeasible.
    pub fn solve_dense(&self, p: &[f64]) -> Option<Vec<f64>> {
        let nu = self.n_u();
        let pv = DVector::from_column_slice(p);
        let lin = &self.f * &pv;
        let rhs = &self.w + &self.s * &pv;
        let mut cons = DenseConstraints::new(nu);
        let mut row = vec![0.0; nu];
        for i in 0..self.n_rows() {
            for j in 0..nu {
                row[j] = self.g[(i, j)];
            }
            cons.push_le(&row, rhs[i]);
        }
        let sol = qp::solve(&self.h, lin.as_slice(), &cons, &QpOptions::default()).ok()?;
        (sol.status == QpStatus::Optimal).then_some(sol.x)
    }

    /// Maximum violation of the constraints at `(u, p)`.
    pub fn max_violation(&self, u: &[f64], p: &[f64]) -> f64 {
        let lhs = &self.g * DVector::from_column_slice(u);
        let rhs = &self.w + &self.s * DVector::from_column_slice(p);
        (lhs - rhs).iter().copied().fold(0.0, f64::max)
    }
}

/// Polyhedron rows `a' p <= b` in a normalized parameter frame.
struct Frame {
    center: [f64; N_PARAM],
    half: [f64; N_PARAM],
}

impl Frame {
    fn new(qp: &ParametricQp) -> Self {
        let mut center = [0.0; N_PARAM];
        let mut half = [0.0; N_PARAM];
        for i in 0..N_PARAM {
            center[i] = 0.5 * (qp.lower[i] + qp.upper[i]);
            half[i] = 0.5 * (qp.upper[i] - qp.lower[i]);
        }
        Self { center, half }
    }

    /// Maps `a' p <= b` into normalized coordinates, unit-norm row.
    fn to_normalized(&self, a: &[f64], b: f64) -> Option<(Vec<f64>, f64)> {
        let an: Vec<f64> = a.iter().zip(&self.half).map(|(ai, hi)| ai * hi).collect();
        let bn = b - a
            .iter()
            .zip(&self.center)
            .map(|(ai, ci)| ai * ci)
            .sum::<f64>();
        let norm = an.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < CONSTANT_ROW_TOL {
            return None;
        }
        Some((an.iter().map(|v| v / norm).collect(), bn / norm))
    }
}

const INTERIOR_TOL: f64 = 1e-6;
/// Rows whose normalized coefficients fall below this are treated as
/// constant; exact zeros come out of the KKT algebra as ~1e-12 noise.
const CONSTANT_ROW_TOL: f64 = 1e-7;

/// Largest ball radius inside `{a_i' q <= b_i}` (unit rows), optionally
/// restricted to the hyperplane of row `on`. `None` when empty.
pub(crate) fn chebyshev(
    rows: &[(Vec<f64>, f64)],
    on: Option<usize>,
    skip: &[bool],
) -> Option<(f64, Vec<f64>)> {
    // variables [q; r], maximize r with r <= 1
    let n = N_PARAM + 1;
    let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut push_row = |a: &[f64], with_r: bool, rhs: f64, b: &mut Vec<f64>| {
        let row = b.len();
        for (j, v) in a.iter().enumerate() {
            if *v != 0.0 {
                ri.push(row);
                ci.push(j);
                vals.push(*v);
            }
        }
        if with_r {
            ri.push(row);
            ci.push(N_PARAM);
            vals.push(1.0);
        }
        b.push(rhs);
    };
    let mut n_eq = 0;
    if let Some(j) = on {
        push_row(&rows[j].0, false, rows[j].1, &mut b);
        n_eq = 1;
    }
    for (i, (a, bi)) in rows.iter().enumerate() {
        if !skip[i] && Some(i) != on {
            push_row(a, true, *bi, &mut b);
        }
    }
    let mut unit_r = [0.0; N_PARAM + 1];
    unit_r[N_PARAM] = 1.0;
    push_row(&unit_r, false, 1.0, &mut b);
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut c = vec![0.0; n];
    c[N_PARAM] = -1.0;
    let mut cones = Vec::new();
    if n_eq > 0 {
        cones.push(ZeroConeT(n_eq));
    }
    cones.push(NonnegativeConeT(m - n_eq));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .presolve_enable(false)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p, &c, &a, &b, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = &solver.solution.x;
            Some((x[N_PARAM], x[..N_PARAM].to_vec()))
        }
        _ => None,
    }
}

/// Enumerates the critical regions of `qp`.
pub fn enumerate_regions(
    qp: &ParametricQp,
    opts: &BuildOptions,
) -> Result<(Vec<CriticalRegion>, BuildStats)> {
    let nu = qp.n_u();
    let pairs = qp.n_rows() / 2;
    let frame = Frame::new(qp);
    let h_inv =
        qp.h.clone()
            .cholesky()
            .ok_or_else(|| CueingError::Config("explicit QP Hessian not positive definite".into()))?
            .inverse();

    // box rows, shared by every region
    let mut box_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..N_PARAM {
        let mut a = vec![0.0; N_PARAM];
        a[i] = 1.0;
        box_rows.push((a.clone(), qp.upper[i]));
        a[i] = -1.0;
        box_rows.push((a, -qp.lower[i]));
    }

    let mut stats = BuildStats::default();
    let mut regions = Vec::new();
    let mut combo: Vec<usize> = Vec::new();
    for size in 0..=nu.min(pairs) {
        combo.clear();
        combo.extend(0..size);
        loop {
            for signs in 0u32..(1 << size) {
                let active: Vec<usize> = combo
                    .iter()
                    .enumerate()
                    .map(|(bit, pair)| 2 * pair + ((signs >> bit) & 1) as usize)
                    .collect();
                stats.candidates += 1;
                match region_for(qp, &h_inv, &active, &box_rows, &frame) {
                    Candidate::RankDeficient => stats.rank_deficient += 1,
                    Candidate::Empty => stats.empty += 1,
                    Candidate::Region(r) => {
                        regions.push(*r);
                        if regions.len() > opts.region_cap {
                            return Err(CueingError::RegionCap {
                                cap: opts.region_cap,
                            });
                        }
                    }
                }
            }
            if !next_combination(&mut combo, pairs) {
                break;
            }
        }
    }
    if stats.rank_deficient > 0 {
        log::info!(
            "{} axis: skipped {} rank-deficient active sets",
            qp.axis.name(),
            stats.rank_deficient
        );
    }
    stats.regions = regions.len();
    Ok((regions, stats))
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

enum Candidate {
    RankDeficient,
    Empty,
    Region(Box<CriticalRegion>),
}

fn region_for(
    qp: &ParametricQp,
    h_inv: &DMatrix<f64>,
    active: &[usize],
    box_rows: &[(Vec<f64>, f64)],
    frame: &Frame,
) -> Candidate {
    let nu = qp.n_u();
    let q = active.len();
    let m = qp.n_rows();

    // U(p) = fu p + gu, lambda(p) = fl p + gl
    let (fu, gu, fl, gl) = if q == 0 {
        (
            -(h_inv * &qp.f),
            DVector::zeros(nu),
            DMatrix::zeros(0, N_PARAM),
            DVector::zeros(0),
        )
    } else {
        let ga = DMatrix::from_fn(q, nu, |i, j| qp.g[(active[i], j)]);
        let wa = DVector::from_fn(q, |i, _| qp.w[active[i]]);
        let sa = DMatrix::from_fn(q, N_PARAM, |i, j| qp.s[(active[i], j)]);
        let schur = &ga * h_inv * ga.transpose();
        let Some(chol) = schur.clone().cholesky() else {
            return Candidate::RankDeficient;
        };
        let diag_min = chol
            .l()
            .diagonal()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let diag_max = chol.l().diagonal().iter().copied().fold(0.0, f64::max);
        if diag_min <= 1e-5 * diag_max {
            return Candidate::RankDeficient;
        }
        let schur_inv = chol.inverse();
        let fl = -(&schur_inv * (&sa + &ga * h_inv * &qp.f));
        let gl = -(&schur_inv * &wa);
        let fu = -(h_inv * (&qp.f + ga.transpose() * &fl));
        let gu = -(h_inv * (ga.transpose() * &gl));
        (fu, gu, fl, gl)
    };

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut is_active = vec![false; m];
    for &i in active {
        is_active[i] = true;
    }
    for i in 0..m {
        if is_active[i] {
            continue;
        }
        let gi = qp.g.row(i);
        let a: Vec<f64> = (0..N_PARAM)
            .map(|j| (gi * fu.column(j))[0] - qp.s[(i, j)])
            .collect();
        let b = qp.w[i] - (gi * &gu)[0];
        rows.push((a, b));
    }
    for j in 0..q {
        let a: Vec<f64> = (0..N_PARAM).map(|k| -fl[(j, k)]).collect();
        rows.push((a, gl[j]));
    }
    rows.extend(box_rows.iter().cloned());

    // normalized frame; constant rows either hold everywhere or nowhere
    let mut orig: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut norm_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, b) in rows {
        match frame.to_normalized(&a, b) {
            Some(nr) => {
                orig.push((a, b));
                norm_rows.push(nr);
            }
            None => {
                let bn = b - a.iter().zip(&frame.center).map(|(x, c)| x * c).sum::<f64>();
                if bn < -CONSTANT_ROW_TOL {
                    return Candidate::Empty;
                }
            }
        }
    }
    let mut skip = vec![false; norm_rows.len()];
    match chebyshev(&norm_rows, None, &skip) {
        Some((r, _)) if r > INTERIOR_TOL => {}
        _ => return Candidate::Empty,
    }
    // drop rows that do not support a facet, one at a time so duplicates
    // keep exactly one copy
    for j in 0..norm_rows.len() {
        let keep =
            matches!(chebyshev(&norm_rows, Some(j), &skip), Some((r, _)) if r > INTERIOR_TOL);
        if !keep {
            skip[j] = true;
        }
    }

    let mut h_rows = Vec::new();
    let mut k = Vec::new();
    for (i, (a, b)) in orig.iter().enumerate() {
        if skip[i] {
            continue;
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        h_rows.extend(a.iter().map(|v| v / norm));
        k.push(b / norm);
    }
    let n_rows = k.len();
    Candidate::Region(Box::new(CriticalRegion {
        h: DMatrix::from_row_slice(n_rows, N_PARAM, &h_rows),
        k: DVector::from_vec(k),
        f: fu,
        g: gu,
        active: active.to_vec(),
    }))
}

/// Builds the region table of one axis.
pub fn build_region_table(
    model: &LinearizedAxisModel,
    weights: &ExplicitWeights,
    c: &ConstraintSet,
    opts: &BuildOptions,
) -> Result<(RegionTable, BuildStats)> {
    let qp = ParametricQp::new(model, weights, c, opts)?;
    let (regions, stats) = enumerate_regions(&qp, opts)?;
    let meta = TableMeta::new(model, weights, c, opts);
    Ok((
        RegionTable {
            axis: model.axis,
            horizon: opts.horizon,
            lower: qp.lower,
            upper: qp.upper,
            meta,
            regions,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_in_order() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        let mut empty: Vec<usize> = vec![];
        assert!(!next_combination(&mut empty, 3));
    }
}
