use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::linear::LinearizedAxisModel;
use super::mpqp::{BuildOptions, ExplicitWeights, ParametricQp, N_PARAM};
use crate::constraints::ConstraintSet;
use crate::model::Axis;

/// Tolerance for point location, in parameter units (rows are unit norm).
pub const LOCATE_TOL: f64 = 1e-9;

/// One polyhedron `H p <= k` with its affine law `U = F p + G`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalRegion {
    pub h: DMatrix<f64>,
    pub k: DVector<f64>,
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    /// Active constraint rows of the parametric QP (not serialized).
    pub active: Vec<usize>,
}

impl CriticalRegion {
    /// Largest row violation `max_i (H_i p - k_i)`; nonpositive inside.
    pub fn margin(&self, p: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.h.nrows() {
            let mut v = -self.k[i];
            for j in 0..N_PARAM {
                v += self.h[(i, j)] * p[j];
            }
            worst = worst.max(v);
        }
        worst
    }

    pub fn law(&self, p: &[f64]) -> Vec<f64> {
        (&self.f * DVector::from_column_slice(p) + &self.g)
            .as_slice()
            .to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub weights: ExplicitWeights,
    pub dt: f64,
    pub f_ref_max: f64,
    /// SHA-256 of everything the table depends on.
    pub model_hash: [u8; 32],
}

impl TableMeta {
    pub fn new(
        model: &LinearizedAxisModel,
        weights: &ExplicitWeights,
        c: &ConstraintSet,
        opts: &BuildOptions,
    ) -> Self {
        Self {
            weights: *weights,
            dt: model.dt,
            f_ref_max: opts.f_ref_max,
            model_hash: model_hash(model, weights, c, opts),
        }
    }
}

/// Hash of the model, weights, limits and build options behind a table.
pub fn model_hash(
    model: &LinearizedAxisModel,
    weights: &ExplicitWeights,
    c: &ConstraintSet,
    opts: &BuildOptions,
) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update([model.axis.tag()]);
    hasher.update((opts.horizon as u64).to_le_bytes());
    let values = [
        model.dt,
        model.g,
        weights.w_f,
        weights.w_u,
        weights.w_reg,
        c.omega_max(model.axis),
        c.theta_max,
        c.v_max,
        c.s_axis_max,
        c.a_rot_max,
        c.a_tran_max,
        opts.f_ref_max,
    ];
    for v in values.iter().chain(model.a.iter()).chain(model.b.iter()) {
        hasher.update(v.to_le_bytes());
    }
    for v in model.c.iter().chain(model.d.iter()) {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(digest.as_slice());
    out
}

/// Piecewise-affine explicit controller of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionTable {
    pub axis: Axis,
    pub horizon: usize,
    pub lower: [f64; N_PARAM],
    pub upper: [f64; N_PARAM],
    pub meta: TableMeta,
    pub regions: Vec<CriticalRegion>,
}

/// Successful table lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct TableHit {
    pub region: usize,
    /// `horizon × [a_rot, a_tran]`, flattened.
    pub inputs: Vec<f64>,
}

impl RegionTable {
    pub fn n_u(&self) -> usize {
        2 * self.horizon
    }

    pub fn in_bounds(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Locates the region containing `p` and evaluates its law. Among
    /// containing regions the one with the smallest margin wins; regions
    /// within [`LOCATE_TOL`] of each other tie and the lowest index is kept.
    pub fn query(&self, p: &[f64]) -> Option<TableHit> {
        self.locate(p, None)
    }

    fn locate(&self, p: &[f64], exclude: Option<usize>) -> Option<TableHit> {
        if p.len() != N_PARAM || p.iter().any(|v| !v.is_finite()) || !self.in_bounds(p) {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, region) in self.regions.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            let margin = region.margin(p);
            if margin > LOCATE_TOL {
                continue;
            }
            match best {
                Some((_, bm)) if margin >= bm - LOCATE_TOL => {}
                _ => best = Some((i, margin)),
            }
        }
        best.map(|(region, _)| TableHit {
            region,
            inputs: self.regions[region].law(p),
        })
    }

    pub fn total_rows(&self) -> usize {
        self.regions.iter().map(|r| r.h.nrows()).sum()
    }
}

/// Result of comparing the table with the dense QP solver on random
/// parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub sampled: usize,
    pub feasible: usize,
    pub covered: usize,
    pub max_input_error: f64,
    pub max_rel_cost_error: f64,
    pub max_table_violation: f64,
}

impl OracleReport {
    pub fn coverage(&self) -> f64 {
        if self.feasible == 0 {
            1.0
        } else {
            self.covered as f64 / self.feasible as f64
        }
    }
}

/// Samples uniformly in the parameter box until `feasible_target` feasible
/// parameters have been seen and compares the table law with the dense QP
/// solution at each one.
pub fn check_against_oracle(
    table: &RegionTable,
    qp: &ParametricQp,
    feasible_target: usize,
    seed: u64,
) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();
    let max_samples = feasible_target.saturating_mul(200).max(1000);
    while report.feasible < feasible_target && report.sampled < max_samples {
        let p: Vec<f64> = (0..N_PARAM)
            .map(|i| rng.gen_range(table.lower[i]..=table.upper[i]))
            .collect();
        report.sampled += 1;
        let Some(u_star) = qp.solve_dense(&p) else {
            continue;
        };
        report.feasible += 1;
        let Some(hit) = table.query(&p) else {
            continue;
        };
        report.covered += 1;
        let err = hit
            .inputs
            .iter()
            .zip(&u_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        report.max_input_error = report.max_input_error.max(err);
        let c_table = qp.cost(&hit.inputs, &p);
        let c_star = qp.cost(&u_star, &p);
        let rel = (c_table - c_star).abs() / c_star.abs().max(1e-12);
        report.max_rel_cost_error = report.max_rel_cost_error.max(rel);
        report.max_table_violation = report
            .max_table_violation
            .max(qp.max_violation(&hit.inputs, &p));
    }
    report
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub facets: usize,
    pub adjacent_pairs: usize,
    pub points: usize,
    pub max_jump: f64,
}

/// Checks that adjacent laws agree on shared facets. For every region facet
/// `points_per_facet` points are drawn from a ball inside the facet; the
/// neighbor is the region found just across the facet.
pub fn check_continuity(
    table: &RegionTable,
    points_per_facet: usize,
    seed: u64,
) -> ContinuityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ContinuityReport::default();
    let mut pairs = std::collections::BTreeSet::new();
    let half: Vec<f64> = (0..N_PARAM)
        .map(|i| 0.5 * (table.upper[i] - table.lower[i]))
        .collect();
    let center: Vec<f64> = (0..N_PARAM)
        .map(|i| 0.5 * (table.upper[i] + table.lower[i]))
        .collect();
    let to_orig =
        |q: &[f64]| -> Vec<f64> { (0..N_PARAM).map(|i| center[i] + half[i] * q[i]).collect() };

    for (ri, region) in table.regions.iter().enumerate() {
        // rows in the normalized frame
        let rows: Vec<(Vec<f64>, f64)> = (0..region.h.nrows())
            .map(|i| {
                let a: Vec<f64> = (0..N_PARAM).map(|j| region.h[(i, j)] * half[j]).collect();
                let b = region.k[i]
                    - (0..N_PARAM)
                        .map(|j| region.h[(i, j)] * center[j])
                        .sum::<f64>();
                let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                (a.iter().map(|v| v / n).collect(), b / n)
            })
            .collect();
        let skip = vec![false; rows.len()];
        for j in 0..rows.len() {
            let Some((radius, c)) = super::mpqp::chebyshev(&rows, Some(j), &skip) else {
                continue;
            };
            if radius <= 1e-6 {
                continue;
            }
            // points outside the box have no neighbor
            let normal = &rows[j].0;
            let mut probe = c.clone();
            for (pv, nv) in probe.iter_mut().zip(normal) {
                *pv += 1e-6 * nv;
            }
            if probe.iter().any(|v| v.abs() > 1.0) {
                continue;
            }
            report.facets += 1;
            for _ in 0..points_per_facet {
                let mut dir: Vec<f64> = (0..N_PARAM).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let along: f64 = dir.iter().zip(normal).map(|(a, b)| a * b).sum();
                for (d, nv) in dir.iter_mut().zip(normal) {
                    *d -= along * nv;
                }
                let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let scale = 0.9 * radius * rng.gen_range(0.0..1.0) / len;
                let q: Vec<f64> = c.iter().zip(&dir).map(|(ci, di)| ci + scale * di).collect();
                let outside: Vec<f64> = q
                    .iter()
                    .zip(normal)
                    .map(|(qi, ni)| qi + 1e-7 * ni)
                    .collect();
                let p = to_orig(&q);
                let Some(nb) = table.locate(&to_orig(&outside), Some(ri)) else {
                    continue;
                };
                let ours = region.law(&p);
                let theirs = table.regions[nb.region].law(&p);
                let jump = ours
                    .iter()
                    .zip(&theirs)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                report.max_jump = report.max_jump.max(jump);
                report.points += 1;
                pairs.insert((ri.min(nb.region), ri.max(nb.region)));
            }
        }
    }
    report.adjacent_pairs = pairs.len();
    report
}
