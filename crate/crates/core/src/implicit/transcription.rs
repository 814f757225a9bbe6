//! Multiple-shooting form of the optimal control problem.
//!
//! Decision vector `z = [u_0, ..., u_{N-1}, x_1, ..., x_N]`; `x_0` is fixed.
//! Defects `x_{k+1} - RK4(x_k, u_k)`, inequality rows `g(z) <= 0`.

use nalgebra::DMatrix;

use super::config::{OcpConfig, StageWeights};
use crate::constraints::ConstraintRows;
use crate::model::{
    discrete_implicit, rk4_implicit, sx, ControlInput, InputMatrix, PlatformState, SpecificForce,
    StateMatrix, NU, NX,
};

#[derive(Clone, Debug)]
pub struct Transcription {
    pub horizon: usize,
    x0: [f64; NX],
    f_ref: Vec<SpecificForce>,
    weights: Vec<StageWeights>,
    w_f: f64,
    w_u: f64,
    g: f64,
    tau: f64,
    dt: f64,
    a: StateMatrix,
    b: InputMatrix,
    rows: ConstraintRows,
}

pub fn transcribe(
    cfg: &OcpConfig,
    x0: &PlatformState,
    f_ref: &[SpecificForce],
    weights: &[StageWeights],
) -> Transcription {
    assert_eq!(f_ref.len(), cfg.horizon + 1);
    assert_eq!(weights.len(), cfg.horizon);
    let (a, b) = discrete_implicit(cfg.model.tau_act, cfg.model.dt);
    Transcription {
        horizon: cfg.horizon,
        x0: x0.to_array(),
        f_ref: f_ref.to_vec(),
        weights: weights.to_vec(),
        w_f: cfg.w_f,
        w_u: cfg.w_u,
        g: cfg.model.g,
        tau: cfg.model.tau_act,
        dt: cfg.model.dt,
        a,
        b,
        rows: ConstraintRows::new(&cfg.constraints, &cfg.braking),
    }
}

impl Transcription {
    pub fn n_vars(&self) -> usize {
        self.horizon * (NU + NX)
    }

    pub fn n_defects(&self) -> usize {
        self.horizon * NX
    }

    fn n_state_rows(&self) -> usize {
        let lin = self
            .rows
            .linear
            .iter()
            .filter(|r| !r.is_input_row())
            .count();
        2 * lin + self.rows.norm.len()
    }

    fn n_input_rows(&self) -> usize {
        2 * self.rows.linear.iter().filter(|r| r.is_input_row()).count()
    }

    pub fn n_inequalities(&self) -> usize {
        self.horizon * (self.n_state_rows() + self.n_input_rows())
    }

    fn u_at(z: &[f64], k: usize) -> [f64; NU] {
        z[NU * k..NU * k + NU].try_into().unwrap()
    }

    fn x_offset(&self, k: usize) -> usize {
        NU * self.horizon + NX * (k - 1)
    }

    fn x_at(&self, z: &[f64], k: usize) -> [f64; NX] {
        if k == 0 {
            self.x0
        } else {
            let o = self.x_offset(k);
            z[o..o + NX].try_into().unwrap()
        }
    }

    /// Decision vector of an input sequence and its forward simulation.
    pub fn from_inputs(&self, inputs: &[ControlInput]) -> Vec<f64> {
        let mut z: Vec<f64> = inputs.iter().flat_map(|u| u.to_array()).collect();
        let mut x = self.x0;
        for u in inputs {
            x = rk4_implicit(&x, &u.to_array(), self.tau, self.dt);
            z.extend_from_slice(&x);
        }
        z
    }

    pub fn inputs(&self, z: &[f64]) -> Vec<ControlInput> {
        (0..self.horizon)
            .map(|k| ControlInput::from_array(&Self::u_at(z, k)))
            .collect()
    }

    pub fn defects(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_defects());
        for k in 0..self.horizon {
            let next = rk4_implicit(&self.x_at(z, k), &Self::u_at(z, k), self.tau, self.dt);
            let x1 = self.x_at(z, k + 1);
            out.extend((0..NX).map(|i| x1[i] - next[i]));
        }
        out
    }

    pub fn defect_jacobian(&self, _z: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n_defects(), self.n_vars());
        for k in 0..self.horizon {
            let r0 = NX * k;
            for i in 0..NX {
                j[(r0 + i, self.x_offset(k + 1) + i)] = 1.0;
                for c in 0..NU {
                    j[(r0 + i, NU * k + c)] = -self.b[(i, c)];
                }
                if k > 0 {
                    for c in 0..NX {
                        j[(r0 + i, self.x_offset(k) + c)] = -self.a[(i, c)];
                    }
                }
            }
        }
        j
    }

    pub fn inequalities(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_inequalities());
        for k in 1..=self.horizon {
            let x = self.x_at(z, k);
            for r in self.rows.linear.iter().filter(|r| !r.is_input_row()) {
                let v = r.eval(&x, &[0.0; NU]);
                out.push(v - r.upper);
                out.push(r.lower - v);
            }
            for r in &self.rows.norm {
                let (a, b) = r.components(&x);
                out.push(a * a + b * b - r.limit * r.limit);
            }
        }
        for k in 0..self.horizon {
            let u = Self::u_at(z, k);
            for r in self.rows.linear.iter().filter(|r| r.is_input_row()) {
                let v = r.eval(&[0.0; NX], &u);
                out.push(v - r.upper);
                out.push(r.lower - v);
            }
        }
        out
    }

    pub fn inequality_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n_inequalities(), self.n_vars());
        let mut row = 0;
        for k in 1..=self.horizon {
            let x = self.x_at(z, k);
            let o = self.x_offset(k);
            for r in self.rows.linear.iter().filter(|r| !r.is_input_row()) {
                for c in 0..NX {
                    j[(row, o + c)] = r.state[c];
                    j[(row + 1, o + c)] = -r.state[c];
                }
                row += 2;
            }
            for r in &self.rows.norm {
                let (a, b) = r.components(&x);
                for c in 0..NX {
                    j[(row, o + c)] = 2.0 * (a * r.long[c] + b * r.lat[c]);
                }
                row += 1;
            }
        }
        for k in 0..self.horizon {
            for r in self.rows.linear.iter().filter(|r| r.is_input_row()) {
                for c in 0..NU {
                    j[(row, NU * k + c)] = r.input[c];
                    j[(row + 1, NU * k + c)] = -r.input[c];
                }
                row += 2;
            }
        }
        j
    }

    fn forces(&self, x: &[f64; NX]) -> (f64, f64) {
        let (st, ct) = x[sx::THETA_LONG].sin_cos();
        (
            x[sx::A_TRAN_LONG] + self.g * st,
            x[sx::A_TRAN_LAT] - self.g * ct * x[sx::THETA_LAT].sin(),
        )
    }

    pub fn cost(&self, z: &[f64]) -> f64 {
        let mut j = 0.0;
        for k in 1..=self.horizon {
            let x = self.x_at(z, k);
            let (fl, ft) = self.forces(&x);
            let r = &self.f_ref[k];
            let w = &self.weights[k - 1];
            j += self.w_f * ((fl - r.f_long).powi(2) + (ft - r.f_lat).powi(2));
            j += w.s_long * x[sx::S_LONG].powi(2) + w.s_lat * x[sx::S_LAT].powi(2);
            j += w.omega_long * x[sx::OMEGA_LONG].powi(2) + w.omega_lat * x[sx::OMEGA_LAT].powi(2);
        }
        j + self.w_u * z[..NU * self.horizon].iter().map(|v| v * v).sum::<f64>()
    }

    pub fn cost_gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.n_vars()];
        for (i, v) in z[..NU * self.horizon].iter().enumerate() {
            grad[i] = 2.0 * self.w_u * v;
        }
        for k in 1..=self.horizon {
            let x = self.x_at(z, k);
            let o = self.x_offset(k);
            let (fl, ft) = self.forces(&x);
            let r = &self.f_ref[k];
            let w = &self.weights[k - 1];
            let el = 2.0 * self.w_f * (fl - r.f_long);
            let et = 2.0 * self.w_f * (ft - r.f_lat);
            let (st, ct) = x[sx::THETA_LONG].sin_cos();
            let (sl, cl) = x[sx::THETA_LAT].sin_cos();
            grad[o + sx::A_TRAN_LONG] += el;
            grad[o + sx::THETA_LONG] += el * self.g * ct + et * self.g * st * sl;
            grad[o + sx::A_TRAN_LAT] += et;
            grad[o + sx::THETA_LAT] -= et * self.g * ct * cl;
            grad[o + sx::S_LONG] += 2.0 * w.s_long * x[sx::S_LONG];
            grad[o + sx::S_LAT] += 2.0 * w.s_lat * x[sx::S_LAT];
            grad[o + sx::OMEGA_LONG] += 2.0 * w.omega_long * x[sx::OMEGA_LONG];
            grad[o + sx::OMEGA_LAT] += 2.0 * w.omega_lat * x[sx::OMEGA_LAT];
        }
        grad
    }
}
