//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' H x + g' x
//!     subject to  n_i' x >= b_i,   i = 0..m
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani: start from the
//! unconstrained minimum and add violated constraints one at a time, keeping
//! `J = L^{-T} Q` and the triangular factor `R` of the active normals up to
//! date with Givens rotations. Constraints are supplied through
//! [`QpConstraints`] so callers with structured rows can evaluate slacks
//! without forming the dense matrix.

use nalgebra::{DMatrix, DVector};

/// Inequality rows `n_i' x >= b_i`.
pub trait QpConstraints {
    fn len(&self) -> usize;

    fn dim(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `n_i' x - b_i` for every row into `out`.
    fn slacks(&self, x: &[f64], out: &mut [f64]);

    /// Writes the normal `n_i` into `out` (length `dim`).
    fn normal(&self, i: usize, out: &mut [f64]);

    fn bound(&self, i: usize) -> f64;
}

/// Rows stored as a dense row-major matrix.
#[derive(Clone, Debug, Default)]
pub struct DenseConstraints {
    dim: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
}

impl DenseConstraints {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Adds `normal' x >= bound`.
    pub fn push_ge(&mut self, normal: &[f64], bound: f64) {
        assert_eq!(normal.len(), self.dim);
        self.rows.extend_from_slice(normal);
        self.rhs.push(bound);
    }

    /// Adds `normal' x <= bound`.
    pub fn push_le(&mut self, normal: &[f64], bound: f64) {
        assert_eq!(normal.len(), self.dim);
        self.rows.extend(normal.iter().map(|v| -v));
        self.rhs.push(-bound);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

impl QpConstraints for DenseConstraints {
    fn len(&self) -> usize {
        self.rhs.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn slacks(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x) - self.rhs[i];
        }
    }

    fn normal(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }

    fn bound(&self, i: usize) -> f64 {
        self.rhs[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// Pivot limit reached before all constraints were satisfied.
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    /// Active row indices in the order they were added.
    pub active: Vec<usize>,
    pub objective: f64,
    /// Number of active-set changes (additions plus removals).
    pub pivots: usize,
    pub status: QpStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    /// A row counts as satisfied when its slack is at least `-feas_tol`.
    pub feas_tol: f64,
    pub max_pivots: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-10,
            max_pivots: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("QP Hessian is not positive definite")]
pub struct NotPositiveDefinite;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / r, b / r, r)
    }
}

/// Solves the QP. `h` must be symmetric positive definite.
pub fn solve<C: QpConstraints + ?Sized>(
    h: &DMatrix<f64>,
    g: &[f64],
    cons: &C,
    opts: &QpOptions,
) -> Result<QpSolution, NotPositiveDefinite> {
    solve_hinted(h, g, cons, opts, &[])
}

/// Like [`solve`], but violated rows listed in `hint` are added before any
/// other row. A good guess of the final active set cuts the add/drop churn;
/// the optimum does not depend on the hint.
pub fn solve_hinted<C: QpConstraints + ?Sized>(
    h: &DMatrix<f64>,
    g: &[f64],
    cons: &C,
    opts: &QpOptions,
    hint: &[usize],
) -> Result<QpSolution, NotPositiveDefinite> {
    let n = g.len();
    assert_eq!(h.nrows(), n);
    assert_eq!(cons.dim(), n);
    let m = cons.len();

    let chol = h.clone().cholesky().ok_or(NotPositiveDefinite)?;
    let mut jm = inverse_transpose_of_lower(chol.l_dirty(), n);

    let g_vec = DVector::from_column_slice(g);
    let mut x: Vec<f64> = (-chol.solve(&g_vec)).as_slice().to_vec();

    // R is upper triangular, column-major n x n; only q columns in use
    let mut r_mat = vec![0.0; n * n];
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];

    let mut slack = vec![0.0; m];
    let mut np = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut pivots = 0usize;

    let finish = |x: Vec<f64>, active: Vec<usize>, u: Vec<f64>, pivots, status| {
        let mut multipliers = vec![0.0; m];
        for (&i, &ui) in active.iter().zip(&u) {
            multipliers[i] = ui;
        }
        let hx = h * DVector::from_column_slice(&x);
        let objective = 0.5 * dot(hx.as_slice(), &x) + dot(g, &x);
        QpSolution {
            x,
            multipliers,
            active,
            objective,
            pivots,
            status,
        }
    };

    loop {
        if m == 0 {
            break;
        }
        cons.slacks(&x, &mut slack);
        let mut p = usize::MAX;
        let mut worst = -opts.feas_tol;
        for &i in hint {
            if i < m && !is_active[i] && slack[i] < worst {
                worst = slack[i];
                p = i;
            }
        }
        if p == usize::MAX {
            for (i, &s) in slack.iter().enumerate() {
                if !is_active[i] && s < worst {
                    worst = s;
                    p = i;
                }
            }
        }
        if p == usize::MAX {
            break;
        }
        cons.normal(p, &mut np);
        // nonzero span of the normal
        let lo = np.iter().position(|v| *v != 0.0).unwrap_or(0);
        let hi = np.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
        let span = lo..hi.max(lo);
        let np_norm = dot(&np, &np).sqrt();
        let mut s_p = slack[p];
        let mut u_p = 0.0;

        loop {
            if pivots >= opts.max_pivots {
                return Ok(finish(x, active, u, pivots, QpStatus::IterationLimit));
            }
            let q = active.len();
            // d = J' n_p
            for (j, dj) in d.iter_mut().enumerate() {
                *dj = dot(&jm[j * n + span.start..j * n + span.end], &np[span.clone()]);
            }
            // z = J2 d2
            z.iter_mut().for_each(|v| *v = 0.0);
            for j in q..n {
                let dj = d[j];
                if dj != 0.0 {
                    let col = &jm[j * n..(j + 1) * n];
                    for (zi, ci) in z.iter_mut().zip(col) {
                        *zi += dj * ci;
                    }
                }
            }
            // r = R^{-1} d1, column oriented
            r[..q].copy_from_slice(&d[..q]);
            for i in (0..q).rev() {
                let col = &r_mat[i * n..i * n + i + 1];
                let ri = r[i] / col[i];
                r[i] = ri;
                for (rk, c) in r[..i].iter_mut().zip(&col[..i]) {
                    *rk -= c * ri;
                }
            }

            let mut t_dual = f64::INFINITY;
            let mut drop_at = usize::MAX;
            for j in 0..q {
                if r[j] > 0.0 {
                    let ratio = u[j] / r[j];
                    if ratio < t_dual {
                        t_dual = ratio;
                        drop_at = j;
                    }
                }
            }
            let z_norm = dot(&z, &z).sqrt();
            let t_primal = if z_norm <= 1e-13 * np_norm.max(1.0) {
                f64::INFINITY
            } else {
                -s_p / dot(&z, &np)
            };

            if t_dual.is_infinite() && t_primal.is_infinite() {
                return Ok(finish(x, active, u, pivots, QpStatus::Infeasible));
            }

            if t_primal.is_infinite() {
                // dual step only, then drop the blocking constraint
                for j in 0..q {
                    u[j] -= t_dual * r[j];
                }
                u_p += t_dual;
                let dropped = active[drop_at];
                is_active[dropped] = false;
                drop_constraint(&mut jm, &mut r_mat, &mut active, &mut u, drop_at, n);
                pivots += 1;
                continue;
            }

            let t = t_primal.min(t_dual);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += t * zi;
            }
            for j in 0..q {
                u[j] -= t * r[j];
            }
            u_p += t;

            if t_primal <= t_dual {
                // full step: p joins the active set
                add_constraint(&mut jm, &mut r_mat, &mut d, &mut r, q, n);
                active.push(p);
                u.push(u_p);
                is_active[p] = true;
                pivots += 1;
                break;
            }

            let dropped = active[drop_at];
            is_active[dropped] = false;
            drop_constraint(&mut jm, &mut r_mat, &mut active, &mut u, drop_at, n);
            pivots += 1;
            s_p = dot(&np, &x) - cons.bound(p);
        }
    }

    Ok(finish(x, active, u, pivots, QpStatus::Optimal))
}

/// `L^{-T}` of the lower Cholesky factor stored in the lower triangle of
/// `l` (the upper triangle is ignored), column-major.
fn inverse_transpose_of_lower(l: &DMatrix<f64>, n: usize) -> Vec<f64> {
    // rows of L^{-1} are the columns of J; solve row by row:
    // J[:, i] = (e_i - sum_{k<i} L[i,k] J[:, k]) / L[i,i]
    let mut jm = vec![0.0; n * n];
    for i in 0..n {
        let (done, rest) = jm.split_at_mut(i * n);
        let col = &mut rest[..n];
        col[i] = 1.0;
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != 0.0 {
                let prev = &done[k * n..k * n + k + 1];
                for (c, p) in col[..=k].iter_mut().zip(prev) {
                    *c -= lik * p;
                }
            }
        }
        let inv = 1.0 / l[(i, i)];
        for c in &mut col[..=i] {
            *c *= inv;
        }
    }
    jm
}

/// Reflects `d = J' n_p` so that entries below `q` vanish (one Householder
/// reflection applied to the trailing columns of `J`) and appends the
/// resulting column to `R`.
fn add_constraint(
    jm: &mut [f64],
    r_mat: &mut [f64],
    d: &mut [f64],
    w: &mut [f64],
    q: usize,
    n: usize,
) {
    let tail = &mut d[q..n];
    let norm = dot(tail, tail).sqrt();
    if tail.len() > 1 && norm > 0.0 {
        let alpha = if tail[0] > 0.0 { -norm } else { norm };
        tail[0] -= alpha;
        let beta = 2.0 / dot(tail, tail);
        w.iter_mut().for_each(|v| *v = 0.0);
        for (j, vj) in (q..n).zip(tail.iter()) {
            if *vj != 0.0 {
                for (wi, ji) in w.iter_mut().zip(&jm[j * n..(j + 1) * n]) {
                    *wi += vj * ji;
                }
            }
        }
        for (j, vj) in (q..n).zip(tail.iter()) {
            let c = beta * vj;
            if c != 0.0 {
                for (ji, wi) in jm[j * n..(j + 1) * n].iter_mut().zip(w.iter()) {
                    *ji -= c * wi;
                }
            }
        }
        tail.iter_mut().for_each(|v| *v = 0.0);
        tail[0] = alpha;
    }
    r_mat[q * n..q * n + q + 1].copy_from_slice(&d[..=q]);
}

/// Removes active constraint at position `k` and restores the triangular
/// shape of `R`.
fn drop_constraint(
    jm: &mut [f64],
    r_mat: &mut [f64],
    active: &mut Vec<usize>,
    u: &mut Vec<f64>,
    k: usize,
    n: usize,
) {
    let q = active.len();
    for col in k..q - 1 {
        let (dst, src) = r_mat.split_at_mut((col + 1) * n);
        dst[col * n..col * n + n].copy_from_slice(&src[..n]);
    }
    for v in &mut r_mat[(q - 1) * n..q * n] {
        *v = 0.0;
    }
    active.remove(k);
    u.remove(k);
    for j in k..q - 1 {
        let a = r_mat[j * n + j];
        let b = r_mat[j * n + j + 1];
        let (c, s, rr) = givens(a, b);
        if s == 0.0 {
            continue;
        }
        r_mat[j * n + j] = rr;
        r_mat[j * n + j + 1] = 0.0;
        for col in j + 1..q - 1 {
            let va = r_mat[col * n + j];
            let vb = r_mat[col * n + j + 1];
            r_mat[col * n + j] = c * va + s * vb;
            r_mat[col * n + j + 1] = -s * va + c * vb;
        }
        let (left, right) = jm.split_at_mut((j + 1) * n);
        let col_a = &mut left[j * n..];
        let col_b = &mut right[..n];
        for (a, b) in col_a.iter_mut().zip(col_b.iter_mut()) {
            let (va, vb) = (*a, *b);
            *a = c * va + s * vb;
            *b = -s * va + c * vb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn unconstrained() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let sol = solve(
            &h,
            &[-2.0, -4.0],
            &DenseConstraints::new(2),
            &QpOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn quadprog_reference_problem() {
        // minimize 1/2 x² + 1/2 y² + x  s.t.  x + 2y >= 1
        let h = DMatrix::identity(2, 2);
        let mut c = DenseConstraints::new(2);
        c.push_ge(&[1.0, 2.0], 1.0);
        let sol = solve(&h, &[1.0, 0.0], &c, &QpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], -0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.x[1], 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.multipliers[0], 0.4, epsilon = 1e-14);
    }

    #[test]
    fn infeasible_detected() {
        let h = DMatrix::identity(1, 1);
        let mut c = DenseConstraints::new(1);
        c.push_ge(&[1.0], 1.0);
        c.push_le(&[1.0], 0.0);
        let sol = solve(&h, &[0.0], &c, &QpOptions::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn indefinite_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(solve(
            &h,
            &[0.0, 0.0],
            &DenseConstraints::new(2),
            &QpOptions::default()
        )
        .is_err());
    }

    /// Brute force: for every subset of rows taken as equalities solve the
    /// equality-constrained QP; the cheapest primal-feasible candidate is the
    /// optimum of a strictly convex QP.
    fn brute_force(h: &DMatrix<f64>, g: &[f64], c: &DenseConstraints) -> Option<(Vec<f64>, f64)> {
        let n = g.len();
        let m = c.len();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0u32..(1 << m) {
            let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            if rows.len() > n {
                continue;
            }
            let k = rows.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(h);
            for i in 0..n {
                rhs[i] = -g[i];
            }
            for (a, &ri) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + a, j)] = c.row(ri)[j];
                    kkt[(j, n + a)] = c.row(ri)[j];
                }
                rhs[n + a] = c.bound(ri);
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                continue;
            };
            let x: Vec<f64> = sol.as_slice()[..n].to_vec();
            let mut sl = vec![0.0; m];
            c.slacks(&x, &mut sl);
            if sl.iter().any(|s| *s < -1e-9) {
                continue;
            }
            let hx = h * DVector::from_column_slice(&x);
            let f = 0.5 * dot(hx.as_slice(), &x) + dot(g, &x);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
        best
    }

    fn arb_qp() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>, DenseConstraints)> {
        (2usize..5, 1usize..7).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-2.0f64..2.0, n),
                prop::collection::vec(-1.0f64..1.0, m * n),
                prop::collection::vec(-1.0f64..0.5, m),
            )
                .prop_map(move |(a, g, rows, b)| {
                    let a = DMatrix::from_row_slice(n, n, &a);
                    let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
                    let mut c = DenseConstraints::new(n);
                    for i in 0..m {
                        c.push_ge(&rows[i * n..(i + 1) * n], b[i]);
                    }
                    (h, g, c)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_brute_force((h, g, c) in arb_qp()) {
            let sol = solve(&h, &g, &c, &QpOptions::default()).unwrap();
            let oracle = brute_force(&h, &g, &c);
            match oracle {
                None => prop_assert_eq!(sol.status, QpStatus::Infeasible),
                Some((xo, fo)) => {
                    prop_assert_eq!(sol.status, QpStatus::Optimal);
                    prop_assert!((sol.objective - fo).abs() <= 1e-8 * (1.0 + fo.abs()));
                    for (a, b) in sol.x.iter().zip(&xo) {
                        prop_assert!((a - b).abs() <= 1e-6);
                    }
                    // KKT: H x + g = sum lambda_i n_i, lambda >= 0
                    let hx = &h * DVector::from_column_slice(&sol.x);
                    let n = g.len();
                    for j in 0..n {
                        let mut grad = hx[j] + g[j];
                        for i in 0..c.len() {
                            grad -= sol.multipliers[i] * c.row(i)[j];
                        }
                        prop_assert!(grad.abs() <= 1e-8);
                    }
                    prop_assert!(sol.multipliers.iter().all(|l| *l >= -1e-12));
                }
            }
        }
    }
}
