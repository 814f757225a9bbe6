//! Continuous-time dynamics of the 4-DoF platform (pitch-surge and sway-roll),
//! the specific-force output map and the fixed-step RK4 integrator shared by
//! the plant and the OCP transcription.
//!
//! Two model variants exist. The explicit variant has eight states and takes
//! the platform accelerations directly as inputs. The implicit variant adds
//! four realized-acceleration states that follow the commanded inputs through
//! a first-order lag with time constant `tau_act`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{CueingError, Result};

/// Default gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// State dimension of the implicit (actuator-lag) model.
pub const NX: usize = 12;
/// State dimension of the explicit model.
pub const NX_EXPLICIT: usize = 8;
/// Input dimension, shared by both models.
pub const NU: usize = 4;

pub type StateVec = SVector<f64, NX>;
pub type InputVec = SVector<f64, NU>;
pub type StateMatrix = SMatrix<f64, NX, NX>;
pub type InputMatrix = SMatrix<f64, NX, NU>;

/// Positions in the 12-element state vector.
pub mod sx {
    pub const OMEGA_LONG: usize = 0;
    pub const THETA_LONG: usize = 1;
    pub const V_LONG: usize = 2;
    pub const S_LONG: usize = 3;
    pub const OMEGA_LAT: usize = 4;
    pub const THETA_LAT: usize = 5;
    pub const V_LAT: usize = 6;
    pub const S_LAT: usize = 7;
    pub const A_TRAN_LONG: usize = 8;
    pub const A_ROT_LONG: usize = 9;
    pub const A_TRAN_LAT: usize = 10;
    pub const A_ROT_LAT: usize = 11;
}

/// Positions in the 4-element input vector.
pub mod su {
    pub const A_ROT_LONG: usize = 0;
    pub const A_TRAN_LONG: usize = 1;
    pub const A_ROT_LAT: usize = 2;
    pub const A_TRAN_LAT: usize = 3;
}

/// Motion axis of the platform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Pitch-surge.
    Long,
    /// Sway-roll.
    Lat,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Long, Axis::Lat];

    pub fn tag(self) -> u8 {
        match self {
            Axis::Long => 0,
            Axis::Lat => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Axis> {
        match tag {
            0 => Some(Axis::Long),
            1 => Some(Axis::Lat),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Long => "long",
            Axis::Lat => "lat",
        }
    }

    /// State indices `[omega, theta, v, s, a_tran, a_rot]` for this axis.
    pub fn state_indices(self) -> [usize; 6] {
        match self {
            Axis::Long => [
                sx::OMEGA_LONG,
                sx::THETA_LONG,
                sx::V_LONG,
                sx::S_LONG,
                sx::A_TRAN_LONG,
                sx::A_ROT_LONG,
            ],
            Axis::Lat => [
                sx::OMEGA_LAT,
                sx::THETA_LAT,
                sx::V_LAT,
                sx::S_LAT,
                sx::A_TRAN_LAT,
                sx::A_ROT_LAT,
            ],
        }
    }

    /// Input indices `[a_rot, a_tran]` for this axis.
    pub fn input_indices(self) -> [usize; 2] {
        match self {
            Axis::Long => [su::A_ROT_LONG, su::A_TRAN_LONG],
            Axis::Lat => [su::A_ROT_LAT, su::A_TRAN_LAT],
        }
    }
}

/// Which of the two platform models a state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Eight states, accelerations are inputs.
    Explicit,
    /// Twelve states, commanded accelerations pass through a first-order lag.
    Implicit,
}

/// Platform kinematic state. Angles in rad, rates in rad/s.
///
/// The four acceleration fields are only meaningful for the implicit
/// variant; the explicit model leaves them untouched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    pub omega_long: f64,
    pub theta_long: f64,
    pub v_long: f64,
    pub s_long: f64,
    pub omega_lat: f64,
    pub theta_lat: f64,
    pub v_lat: f64,
    pub s_lat: f64,
    pub a_tran_long: f64,
    pub a_rot_long: f64,
    pub a_tran_lat: f64,
    pub a_rot_lat: f64,
}

impl PlatformState {
    pub fn to_array(&self) -> [f64; NX] {
        [
            self.omega_long,
            self.theta_long,
            self.v_long,
            self.s_long,
            self.omega_lat,
            self.theta_lat,
            self.v_lat,
            self.s_lat,
            self.a_tran_long,
            self.a_rot_long,
            self.a_tran_lat,
            self.a_rot_lat,
        ]
    }

    pub fn from_array(a: &[f64; NX]) -> Self {
        Self {
            omega_long: a[0],
            theta_long: a[1],
            v_long: a[2],
            s_long: a[3],
            omega_lat: a[4],
            theta_lat: a[5],
            v_lat: a[6],
            s_lat: a[7],
            a_tran_long: a[8],
            a_rot_long: a[9],
            a_tran_lat: a[10],
            a_rot_lat: a[11],
        }
    }

    pub fn to_vector(&self) -> StateVec {
        StateVec::from(self.to_array())
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut a = [0.0; NX];
        a.copy_from_slice(&v[..NX]);
        Self::from_array(&a)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// The 8-state explicit view: acceleration fields zeroed.
    pub fn explicit_part(&self) -> Self {
        Self {
            a_tran_long: 0.0,
            a_rot_long: 0.0,
            a_tran_lat: 0.0,
            a_rot_lat: 0.0,
            ..*self
        }
    }

    /// `[omega, theta, v, s]` of one axis, the explicit controller's state.
    pub fn axis_kinematics(&self, axis: Axis) -> [f64; 4] {
        match axis {
            Axis::Long => [self.omega_long, self.theta_long, self.v_long, self.s_long],
            Axis::Lat => [self.omega_lat, self.theta_lat, self.v_lat, self.s_lat],
        }
    }
}

/// Platform acceleration inputs: realized accelerations for the explicit
/// model, commanded accelerations for the implicit one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub a_rot_long: f64,
    pub a_tran_long: f64,
    pub a_rot_lat: f64,
    pub a_tran_lat: f64,
}

impl ControlInput {
    pub fn new(a_rot_long: f64, a_tran_long: f64, a_rot_lat: f64, a_tran_lat: f64) -> Self {
        Self {
            a_rot_long,
            a_tran_long,
            a_rot_lat,
            a_tran_lat,
        }
    }

    pub fn to_array(&self) -> [f64; NU] {
        [
            self.a_rot_long,
            self.a_tran_long,
            self.a_rot_lat,
            self.a_tran_lat,
        ]
    }

    pub fn from_array(a: &[f64; NU]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Specific force sensed on the platform, m/s².
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecificForce {
    pub f_long: f64,
    pub f_lat: f64,
}

impl SpecificForce {
    pub fn new(f_long: f64, f_lat: f64) -> Self {
        Self { f_long, f_lat }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Long => self.f_long,
            Axis::Lat => self.f_lat,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Actuator lag time constant, s.
    pub tau_act: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            g: GRAVITY,
            tau_act: 0.1,
            dt: 0.01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(CueingError::Config(format!(
                "g must be > 0, got {}",
                self.g
            )));
        }
        if !(self.tau_act.is_finite() && self.tau_act > 0.0) {
            return Err(CueingError::Config(format!(
                "tau_act must be > 0, got {}",
                self.tau_act
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(CueingError::Config(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Right-hand side of the 8-state integrator chain, per axis
/// `d(omega) = a_rot, d(theta) = omega, d(v) = a_tran, d(s) = v`.
pub fn derivatives_explicit(x: &PlatformState, u: &ControlInput) -> Result<PlatformState> {
    if !x.is_finite() {
        return Err(CueingError::NonFinite("state"));
    }
    if !u.is_finite() {
        return Err(CueingError::NonFinite("input"));
    }
    Ok(PlatformState {
        omega_long: u.a_rot_long,
        theta_long: x.omega_long,
        v_long: u.a_tran_long,
        s_long: x.v_long,
        omega_lat: u.a_rot_lat,
        theta_lat: x.omega_lat,
        v_lat: u.a_tran_lat,
        s_lat: x.v_lat,
        ..PlatformState::default()
    })
}

/// Right-hand side of the 12-state model: the integrator chains are driven
/// by the realized-acceleration states, which lag the commanded input.
pub fn derivatives_implicit(
    x: &PlatformState,
    u_cmd: &ControlInput,
    p: &ModelParams,
) -> Result<PlatformState> {
    if !(p.tau_act.is_finite() && p.tau_act > 0.0) {
        return Err(CueingError::Config(format!(
            "tau_act must be > 0, got {}",
            p.tau_act
        )));
    }
    if !x.is_finite() {
        return Err(CueingError::NonFinite("state"));
    }
    if !u_cmd.is_finite() {
        return Err(CueingError::NonFinite("input"));
    }
    let d = rhs_implicit(&x.to_array(), &u_cmd.to_array(), p.tau_act);
    Ok(PlatformState::from_array(&d))
}

pub(crate) fn rhs_implicit(x: &[f64; NX], u: &[f64; NU], tau: f64) -> [f64; NX] {
    let inv_tau = 1.0 / tau;
    [
        x[sx::A_ROT_LONG],
        x[sx::OMEGA_LONG],
        x[sx::A_TRAN_LONG],
        x[sx::V_LONG],
        x[sx::A_ROT_LAT],
        x[sx::OMEGA_LAT],
        x[sx::A_TRAN_LAT],
        x[sx::V_LAT],
        (u[su::A_TRAN_LONG] - x[sx::A_TRAN_LONG]) * inv_tau,
        (u[su::A_ROT_LONG] - x[sx::A_ROT_LONG]) * inv_tau,
        (u[su::A_TRAN_LAT] - x[sx::A_TRAN_LAT]) * inv_tau,
        (u[su::A_ROT_LAT] - x[sx::A_ROT_LAT]) * inv_tau,
    ]
}

fn rhs_explicit(x: &[f64; NX], u: &[f64; NU]) -> [f64; NX] {
    let mut d = [0.0; NX];
    d[sx::OMEGA_LONG] = u[su::A_ROT_LONG];
    d[sx::THETA_LONG] = x[sx::OMEGA_LONG];
    d[sx::V_LONG] = u[su::A_TRAN_LONG];
    d[sx::S_LONG] = x[sx::V_LONG];
    d[sx::OMEGA_LAT] = u[su::A_ROT_LAT];
    d[sx::THETA_LAT] = x[sx::OMEGA_LAT];
    d[sx::V_LAT] = u[su::A_TRAN_LAT];
    d[sx::S_LAT] = x[sx::V_LAT];
    d
}

/// Gravity components sensed on a tilted platform: `(g_long, g_lat)`.
pub fn gravitational_tilt(theta_long: f64, theta_lat: f64, g: f64) -> (f64, f64) {
    (
        g * theta_long.sin(),
        -g * theta_long.cos() * theta_lat.sin(),
    )
}

/// Specific force of the 12-state model, using its realized translational
/// accelerations.
pub fn specific_force(x: &PlatformState, g: f64) -> SpecificForce {
    specific_force_parts(x.theta_long, x.theta_lat, x.a_tran_long, x.a_tran_lat, g)
}

/// Specific force of the 8-state model, where the translational
/// accelerations are the current input.
pub fn specific_force_with_input(x: &PlatformState, u: &ControlInput, g: f64) -> SpecificForce {
    specific_force_parts(x.theta_long, x.theta_lat, u.a_tran_long, u.a_tran_lat, g)
}

pub(crate) fn specific_force_parts(
    theta_long: f64,
    theta_lat: f64,
    a_tran_long: f64,
    a_tran_lat: f64,
    g: f64,
) -> SpecificForce {
    let (g_long, g_lat) = gravitational_tilt(theta_long, theta_lat, g);
    SpecificForce {
        f_long: a_tran_long + g_long,
        f_lat: a_tran_lat + g_lat,
    }
}

/// One classical RK4 step of the selected model over `p.dt`.
pub fn integrate_step(
    x: &PlatformState,
    u: &ControlInput,
    p: &ModelParams,
    variant: Variant,
) -> Result<PlatformState> {
    p.validate()?;
    if !x.is_finite() {
        return Err(CueingError::NonFinite("state"));
    }
    if !u.is_finite() {
        return Err(CueingError::NonFinite("input"));
    }
    let next = match variant {
        Variant::Implicit => rk4_implicit(&x.to_array(), &u.to_array(), p.tau_act, p.dt),
        Variant::Explicit => rk4(&x.to_array(), &u.to_array(), p.dt, rhs_explicit),
    };
    if next.iter().any(|v| !v.is_finite()) {
        return Err(CueingError::IntegrationBlowup);
    }
    Ok(PlatformState::from_array(&next))
}

pub fn rk4_implicit(x: &[f64; NX], u: &[f64; NU], tau: f64, dt: f64) -> [f64; NX] {
    rk4(x, u, dt, |x, u| rhs_implicit(x, u, tau))
}

fn rk4<F>(x: &[f64; NX], u: &[f64; NU], dt: f64, f: F) -> [f64; NX]
where
    F: Fn(&[f64; NX], &[f64; NU]) -> [f64; NX],
{
    let stage = |base: &[f64; NX], k: &[f64; NX], h: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    };
    let k1 = f(x, u);
    let k2 = f(&stage(x, &k1, 0.5 * dt), u);
    let k3 = f(&stage(x, &k2, 0.5 * dt), u);
    let k4 = f(&stage(x, &k3, dt), u);
    let mut out = *x;
    for i in 0..NX {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Discrete-time matrices `(A_d, B_d)` of one RK4 step of the implicit model.
///
/// The model is linear, so RK4 is a linear map and applying it to unit
/// vectors recovers it exactly.
pub fn discrete_implicit(tau: f64, dt: f64) -> (StateMatrix, InputMatrix) {
    let mut a = StateMatrix::zeros();
    let mut b = InputMatrix::zeros();
    let zero_u = [0.0; NU];
    let zero_x = [0.0; NX];
    for j in 0..NX {
        let mut e = [0.0; NX];
        e[j] = 1.0;
        let col = rk4_implicit(&e, &zero_u, tau, dt);
        a.set_column(j, &StateVec::from(col));
    }
    for j in 0..NU {
        let mut e = [0.0; NU];
        e[j] = 1.0;
        let col = rk4_implicit(&zero_x, &e, tau, dt);
        b.set_column(j, &StateVec::from(col));
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    #[test]
    fn explicit_derivative_equilibrium_and_channels() {
        let zero = PlatformState::default();
        let d = derivatives_explicit(&zero, &ControlInput::default()).unwrap();
        assert_eq!(d, PlatformState::default());

        let d = derivatives_explicit(&zero, &ControlInput::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            d,
            PlatformState {
                omega_long: 1.0,
                ..Default::default()
            }
        );

        let x = PlatformState {
            v_long: 2.0,
            ..Default::default()
        };
        let d = derivatives_explicit(&x, &ControlInput::default()).unwrap();
        assert_eq!(
            d,
            PlatformState {
                s_long: 2.0,
                ..Default::default()
            }
        );
    }

    #[test]
    fn explicit_derivative_rejects_nan() {
        let x = PlatformState {
            theta_lat: f64::NAN,
            ..Default::default()
        };
        assert!(matches!(
            derivatives_explicit(&x, &ControlInput::default()),
            Err(CueingError::NonFinite(_))
        ));
        let u = ControlInput::new(0.0, f64::INFINITY, 0.0, 0.0);
        assert!(derivatives_explicit(&PlatformState::default(), &u).is_err());
    }

    #[test]
    fn implicit_lag_rows() {
        let p = ModelParams {
            tau_act: 0.1,
            ..Default::default()
        };
        let d = derivatives_implicit(
            &PlatformState::default(),
            &ControlInput::new(0.0, 1.0, 0.0, 0.0),
            &p,
        )
        .unwrap();
        assert_abs_diff_eq!(d.a_tran_long, 10.0, epsilon = 1e-12);

        let x = PlatformState {
            a_tran_long: 0.3,
            a_rot_long: -0.2,
            a_tran_lat: 1.1,
            a_rot_lat: 0.05,
            ..Default::default()
        };
        let u = ControlInput::new(-0.2, 0.3, 0.05, 1.1);
        let d = derivatives_implicit(&x, &u, &p).unwrap();
        assert_eq!(
            [d.a_tran_long, d.a_rot_long, d.a_tran_lat, d.a_rot_lat],
            [0.0; 4]
        );
        // chains are driven by realized, not commanded, accelerations
        assert_eq!(d.omega_long, -0.2);
        assert_eq!(d.v_lat, 1.1);

        let d =
            derivatives_implicit(&PlatformState::default(), &ControlInput::default(), &p).unwrap();
        assert_eq!(d, PlatformState::default());
    }

    #[test]
    fn implicit_rejects_bad_tau() {
        let p = ModelParams {
            tau_act: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            derivatives_implicit(&PlatformState::default(), &ControlInput::default(), &p),
            Err(CueingError::Config(_))
        ));
    }

    #[test]
    fn tilt_values() {
        assert_eq!(gravitational_tilt(0.0, 0.0, GRAVITY), (0.0, -0.0));
        let (gl, ga) = gravitational_tilt(deg(30.0), 0.0, GRAVITY);
        assert_abs_diff_eq!(gl, 4.905, epsilon = 1e-12);
        assert_abs_diff_eq!(ga, 0.0, epsilon = 1e-15);

        // scalar oracle, evaluated independently in degrees
        let (t_long, t_lat) = (10.0_f64, 5.0_f64);
        let pi = std::f64::consts::PI;
        let oracle_long = 9.81 * (t_long * pi / 180.0).sin();
        let oracle_lat = -9.81 * (t_long * pi / 180.0).cos() * (t_lat * pi / 180.0).sin();
        let (gl, ga) = gravitational_tilt(deg(t_long), deg(t_lat), GRAVITY);
        assert_abs_diff_eq!(gl, oracle_long, epsilon = 1e-14);
        assert_abs_diff_eq!(ga, oracle_lat, epsilon = 1e-14);
        assert_abs_diff_eq!(gl, 1.703_488_6, epsilon = 1e-6);
        assert_abs_diff_eq!(ga, -0.842_008_5, epsilon = 1e-6);
    }

    #[test]
    fn specific_force_values() {
        let f = specific_force(&PlatformState::default(), GRAVITY);
        assert_eq!(f.f_long, 0.0);
        assert_eq!(f.f_lat, 0.0);

        let x = PlatformState {
            theta_long: deg(30.0),
            ..Default::default()
        };
        assert_abs_diff_eq!(specific_force(&x, GRAVITY).f_long, 4.905, epsilon = 1e-12);

        let x = PlatformState {
            a_tran_long: 1.5,
            a_tran_lat: -0.5,
            ..Default::default()
        };
        let f = specific_force(&x, GRAVITY);
        assert_eq!((f.f_long, f.f_lat), (1.5, -0.5));

        let f = specific_force_with_input(
            &PlatformState::default(),
            &ControlInput::new(0.0, 1.5, 0.0, -0.5),
            GRAVITY,
        );
        assert_eq!((f.f_long, f.f_lat), (1.5, -0.5));
    }

    #[test]
    fn rk4_double_integrator_exact() {
        let p = ModelParams {
            dt: 0.01,
            ..Default::default()
        };
        let u = ControlInput::new(0.0, 0.7, 0.0, 0.0);
        let mut x = PlatformState::default();
        for _ in 0..100 {
            x = integrate_step(&x, &u, &p, Variant::Explicit).unwrap();
        }
        assert_abs_diff_eq!(x.s_long, 0.5 * 0.7 * 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x.v_long, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn rk4_lag_matches_closed_form() {
        // RK4 error on the lag grows like (dt/tau)^5; 1e-8 holds for tau >= 0.25
        // at dt = 0.01, the default tau = 0.1 stays within 1e-6 per unit command.
        for (tau, tol) in [(0.5, 1e-8), (0.25, 1e-8), (0.1, 1e-6)] {
            let p = ModelParams {
                dt: 0.01,
                tau_act: tau,
                ..Default::default()
            };
            let u = ControlInput::new(0.0, 1.0, 0.0, 0.0);
            let mut x = PlatformState::default();
            for k in 1..=100 {
                x = integrate_step(&x, &u, &p, Variant::Implicit).unwrap();
                let t = k as f64 * p.dt;
                let oracle = 1.0 - (-t / tau).exp();
                assert_abs_diff_eq!(x.a_tran_long, oracle, epsilon = tol);
            }
        }
    }

    #[test]
    fn rk4_convergence_order() {
        // smooth input, reference from dt/64
        let run = |dt: f64| {
            let p = ModelParams {
                dt,
                tau_act: 0.1,
                ..Default::default()
            };
            let steps = (1.0 / dt).round() as usize;
            let mut x = PlatformState::default();
            for k in 0..steps {
                let t = k as f64 * dt;
                // piecewise-constant input sampled on the coarsest grid
                let tc = (t / 0.04).floor() * 0.04;
                let u = ControlInput::new(0.3 * tc.sin(), (2.0 * tc).cos(), -0.2, 0.5 * tc);
                x = integrate_step(&x, &u, &p, Variant::Implicit).unwrap();
            }
            x.to_array()
        };
        let reference = run(0.04 / 64.0);
        let err = |dt: f64| {
            run(dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn rk4_zero_is_fixed_point() {
        let p = ModelParams::default();
        for variant in [Variant::Explicit, Variant::Implicit] {
            let x = integrate_step(
                &PlatformState::default(),
                &ControlInput::default(),
                &p,
                variant,
            )
            .unwrap();
            assert_eq!(x, PlatformState::default());
        }
    }

    #[test]
    fn rk4_blowup_reported() {
        let p = ModelParams::default();
        let x = PlatformState {
            v_long: f64::MAX,
            ..Default::default()
        };
        let u = ControlInput::new(0.0, f64::MAX, 0.0, 0.0);
        assert!(matches!(
            integrate_step(&x, &u, &p, Variant::Explicit),
            Err(CueingError::IntegrationBlowup)
        ));
    }

    #[test]
    fn discrete_matrices_reproduce_rk4() {
        let (a, b) = discrete_implicit(0.1, 0.01);
        let x = [
            0.1, -0.2, 0.3, 0.01, 0.02, 0.05, -0.3, 0.2, 1.0, -0.5, 0.25, 0.4,
        ];
        let u = [0.3, -1.0, 2.0, 0.5];
        let direct = rk4_implicit(&x, &u, 0.1, 0.01);
        let lin = a * StateVec::from(x) + b * InputVec::from(u);
        for i in 0..NX {
            assert_abs_diff_eq!(direct[i], lin[i], epsilon = 1e-15);
        }
    }
}
