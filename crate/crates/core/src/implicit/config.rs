use serde::{Deserialize, Serialize};

use crate::constraints::{BrakingParams, ConstraintSet};
use crate::error::{CueingError, Result};
use crate::model::{Axis, ModelParams, PlatformState};

/// Coefficients of the adaptive washout weights. Each array is
/// `[w1, w2, w3, w4, w5]` in `w1 + w2·r + w3·r² + w4·r⁴` with `r = |x|/w5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveWeightParams {
    /// Displacement weight, `x` in m.
    pub w_s: [f64; 5],
    /// Tilt-rate weight, `x` in deg/s.
    pub w_omega: [f64; 5],
}

impl Default for AdaptiveWeightParams {
    fn default() -> Self {
        Self {
            w_s: [0.01, 20.0, 20.0, 20.0, 0.5],
            w_omega: [0.0001, 0.7, 0.7, 0.7, 3.0],
        }
    }
}

impl AdaptiveWeightParams {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_s", &self.w_s), ("w_omega", &self.w_omega)] {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CueingError::Config(format!(
                    "{name} coefficients must be finite and >= 0"
                )));
            }
            if w[4] <= 0.0 {
                return Err(CueingError::Config(format!("{name} scale w5 must be > 0")));
            }
        }
        Ok(())
    }
}

fn polynomial(x: f64, w: &[f64; 5]) -> f64 {
    let r = x.abs() / w[4];
    let r2 = r * r;
    w[0] + w[1] * r + w[2] * r2 + w[3] * r2 * r2
}

/// Washout weight on displacement `s` (m).
pub fn adaptive_weight_displacement(s: f64, p: &AdaptiveWeightParams) -> f64 {
    polynomial(s, &p.w_s)
}

/// Washout weight on tilt rate `omega_deg` (deg/s).
pub fn adaptive_weight_tiltrate(omega_deg: f64, p: &AdaptiveWeightParams) -> f64 {
    polynomial(omega_deg, &p.w_omega)
}

/// Washout weights of one stage. The tilt-rate weights multiply `omega²`
/// with omega in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageWeights {
    pub s_long: f64,
    pub s_lat: f64,
    pub omega_long: f64,
    pub omega_lat: f64,
}

impl StageWeights {
    pub fn at_state(x: &PlatformState, p: &AdaptiveWeightParams) -> Self {
        Self {
            s_long: adaptive_weight_displacement(x.s_long, p),
            s_lat: adaptive_weight_displacement(x.s_lat, p),
            omega_long: adaptive_weight_tiltrate(x.omega_long.to_degrees(), p),
            omega_lat: adaptive_weight_tiltrate(x.omega_lat.to_degrees(), p),
        }
    }

    pub fn s(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Long => self.s_long,
            Axis::Lat => self.s_lat,
        }
    }

    pub fn omega(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Long => self.omega_long,
            Axis::Lat => self.omega_lat,
        }
    }
}

/// Where the adaptive weights are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightEvaluation {
    /// At the measured state, held over the horizon and all SQP iterations.
    #[default]
    Measured,
    /// Per stage, at the previous tick's predicted trajectory.
    PredictedStages,
}

/// Weights at the measured state, one copy per stage.
pub fn adaptive_weight_mode(cfg: &OcpConfig, x0: &PlatformState) -> Vec<StageWeights> {
    vec![StageWeights::at_state(x0, &cfg.adaptive); cfg.horizon]
}

/// Weights of stage `k = 1..=N` evaluated at `states[k]`.
pub fn adaptive_weights_along(cfg: &OcpConfig, states: &[PlatformState]) -> Vec<StageWeights> {
    (1..=cfg.horizon)
        .map(|k| StageWeights::at_state(&states[k.min(states.len() - 1)], &cfg.adaptive))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpConfig {
    /// Plant model; its `dt` is the shooting interval.
    pub model: ModelParams,
    pub horizon: usize,
    /// Specific-force tracking weight per axis.
    pub w_f: f64,
    /// Weight on every commanded input.
    pub w_u: f64,
    pub adaptive: AdaptiveWeightParams,
    pub weight_evaluation: WeightEvaluation,
    pub constraints: ConstraintSet,
    pub braking: BrakingParams,
    pub max_sqp_iters: usize,
    pub kkt_tol: f64,
    /// Linear penalty on braking-row relaxation when the QP is infeasible.
    pub slack_penalty: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            horizon: 50,
            w_f: 1.0,
            w_u: 1e-3,
            adaptive: AdaptiveWeightParams::default(),
            weight_evaluation: WeightEvaluation::Measured,
            constraints: ConstraintSet::default(),
            braking: BrakingParams::default(),
            max_sqp_iters: 200,
            kkt_tol: 1e-6,
            slack_penalty: 1e4,
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.constraints.validate()?;
        self.braking.validate()?;
        self.adaptive.validate()?;
        if self.horizon == 0 {
            return Err(CueingError::Config("horizon must be >= 1".into()));
        }
        if !(self.w_f.is_finite() && self.w_f >= 0.0) {
            return Err(CueingError::Config(format!(
                "w_f must be >= 0, got {}",
                self.w_f
            )));
        }
        if !(self.w_u.is_finite() && self.w_u > 0.0) {
            return Err(CueingError::Config(format!(
                "w_u must be > 0, got {}",
                self.w_u
            )));
        }
        if self.max_sqp_iters == 0 {
            return Err(CueingError::Config("max_sqp_iters must be >= 1".into()));
        }
        if !(self.kkt_tol.is_finite() && self.kkt_tol > 0.0) {
            return Err(CueingError::Config(format!(
                "kkt_tol must be > 0, got {}",
                self.kkt_tol
            )));
        }
        if !(self.slack_penalty.is_finite() && self.slack_penalty > 0.0) {
            return Err(CueingError::Config("slack_penalty must be > 0".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.model.dt
    }

    /// Prediction time `horizon · dt`.
    pub fn look_ahead(&self) -> f64 {
        self.horizon as f64 * self.model.dt
    }
}
