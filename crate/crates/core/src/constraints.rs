//! Bound, workspace-envelope and braking constraints shared by both
//! controllers.
//!
//! Everything is stored in SI units (rad, rad/s, m, m/s, m/s²). The braking
//! maps extrapolate the current position or tilt over a braking time, so the
//! controller starts decelerating before the platform reaches its limits.

use serde::{Deserialize, Serialize};

use crate::error::{CueingError, Result};
use crate::model::{sx, Axis, ControlInput, PlatformState, NU, NX};

/// Absolute feasibility tolerance in SI units.
pub const FEAS_TOL: f64 = 1e-6;

/// How the braking displacement is confined to the workspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// `sqrt(s_br_long² + s_br_lat²) <= s_thresh`.
    Norm,
    /// `|s_br_long|, |s_br_lat| <= s_thresh` separately.
    Boxed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSet {
    /// Pitch tilt-rate limit, rad/s.
    pub omega_long_max: f64,
    /// Roll tilt-rate limit, rad/s.
    pub omega_lat_max: f64,
    /// Tilt angle limit, rad.
    pub theta_max: f64,
    /// Platform velocity limit, m/s.
    pub v_max: f64,
    /// Per-axis displacement limit used by the explicit controller, m.
    pub s_axis_max: f64,
    /// Realized translational acceleration limit, m/s².
    pub a_tran_max: f64,
    /// Realized rotational acceleration limit, rad/s².
    pub a_rot_max: f64,
    /// Commanded translational acceleration limit, m/s².
    pub a_cmd_tran_max: f64,
    /// Commanded rotational acceleration limit, rad/s².
    pub a_cmd_rot_max: f64,
    /// Radius of the circular displacement envelope, m.
    pub s_envelope_max: f64,
    pub envelope_mode: EnvelopeMode,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            omega_long_max: 3.0_f64.to_radians(),
            omega_lat_max: 2.6_f64.to_radians(),
            theta_max: 30.0_f64.to_radians(),
            v_max: 7.2,
            s_axis_max: 0.35,
            a_tran_max: 9.81,
            a_rot_max: 3.0,
            a_cmd_tran_max: 5.0,
            a_cmd_rot_max: 3.0,
            s_envelope_max: 0.5,
            envelope_mode: EnvelopeMode::Norm,
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        let limits = [
            ("omega_long_max", self.omega_long_max),
            ("omega_lat_max", self.omega_lat_max),
            ("theta_max", self.theta_max),
            ("v_max", self.v_max),
            ("s_axis_max", self.s_axis_max),
            ("a_tran_max", self.a_tran_max),
            ("a_rot_max", self.a_rot_max),
            ("a_cmd_tran_max", self.a_cmd_tran_max),
            ("a_cmd_rot_max", self.a_cmd_rot_max),
            ("s_envelope_max", self.s_envelope_max),
        ];
        for (name, v) in limits {
            if !(v.is_finite() && v > 0.0) {
                return Err(CueingError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.s_axis_max > self.s_envelope_max {
            return Err(CueingError::Config(format!(
                "s_axis_max ({}) exceeds s_envelope_max ({})",
                self.s_axis_max, self.s_envelope_max
            )));
        }
        Ok(())
    }

    pub fn omega_max(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Long => self.omega_long_max,
            Axis::Lat => self.omega_lat_max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrakingParams {
    pub c_v: f64,
    pub c_w: f64,
    pub c_u: f64,
    /// Displacement braking horizon, s.
    pub t_brk_p: f64,
    /// Tilt braking horizon, s.
    pub t_brk_theta: f64,
    /// Braking displacement threshold, m.
    pub s_thresh: f64,
    /// Braking tilt threshold, rad.
    pub theta_thresh: f64,
}

impl Default for BrakingParams {
    fn default() -> Self {
        Self {
            c_v: 1.0,
            c_w: 1.0,
            c_u: 0.45,
            t_brk_p: 2.5,
            t_brk_theta: 0.5,
            s_thresh: 0.5,
            theta_thresh: 30.0_f64.to_radians(),
        }
    }
}

impl BrakingParams {
    pub fn validate(&self) -> Result<()> {
        let params = [
            ("c_v", self.c_v),
            ("c_w", self.c_w),
            ("c_u", self.c_u),
            ("t_brk_p", self.t_brk_p),
            ("t_brk_theta", self.t_brk_theta),
            ("s_thresh", self.s_thresh),
            ("theta_thresh", self.theta_thresh),
        ];
        for (name, v) in params {
            if !(v.is_finite() && v > 0.0) {
                return Err(CueingError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Coefficients `(s, v, a_tran)` of the affine displacement braking map.
    pub fn displacement_coeffs(&self) -> [f64; 3] {
        [
            1.0,
            self.c_v * self.t_brk_p,
            0.5 * self.c_u * self.t_brk_p * self.t_brk_p,
        ]
    }

    /// Coefficients `(theta, omega, a_rot)` of the affine tilt braking map.
    pub fn tilt_coeffs(&self) -> [f64; 3] {
        [
            1.0,
            self.c_w * self.t_brk_theta,
            0.5 * self.c_u * self.t_brk_theta * self.t_brk_theta,
        ]
    }
}

/// Braking displacement `(s_br_long, s_br_lat)`.
pub fn braking_displacement(x: &PlatformState, b: &BrakingParams) -> (f64, f64) {
    let [cs, cv, ca] = b.displacement_coeffs();
    (
        cs * x.s_long + cv * x.v_long + ca * x.a_tran_long,
        cs * x.s_lat + cv * x.v_lat + ca * x.a_tran_lat,
    )
}

/// Braking tilt `(theta_br_long, theta_br_lat)`.
pub fn braking_tilt(x: &PlatformState, b: &BrakingParams) -> (f64, f64) {
    let [ct, cw, ca] = b.tilt_coeffs();
    (
        ct * x.theta_long + cw * x.omega_long + ca * x.a_rot_long,
        ct * x.theta_lat + cw * x.omega_lat + ca * x.a_rot_lat,
    )
}

pub fn envelope_norm(s_long: f64, s_lat: f64) -> f64 {
    s_long.hypot(s_lat)
}

/// Identifies one constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    TiltRate(Axis),
    Tilt(Axis),
    Velocity(Axis),
    RealizedTranAccel(Axis),
    RealizedRotAccel(Axis),
    CommandTranAccel(Axis),
    CommandRotAccel(Axis),
    /// Displacement envelope on the current position.
    Envelope,
    /// Displacement envelope on the braking position.
    BrakingEnvelope,
    /// Per-axis braking displacement, only in [`EnvelopeMode::Boxed`].
    BrakingDisplacement(Axis),
    /// Per-axis displacement, only in [`EnvelopeMode::Boxed`].
    Displacement(Axis),
    BrakingTilt(Axis),
}

/// A two-sided affine row `lower <= coeffs · [x; u] <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub kind: RowKind,
    pub state: [f64; NX],
    pub input: [f64; NU],
    pub lower: f64,
    pub upper: f64,
}

impl LinearRow {
    pub fn eval(&self, x: &[f64; NX], u: &[f64; NU]) -> f64 {
        self.state.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            + self.input.iter().zip(u).map(|(c, v)| c * v).sum::<f64>()
    }

    /// True when the row only involves the input.
    pub fn is_input_row(&self) -> bool {
        self.state.iter().all(|c| *c == 0.0)
    }
}

/// A norm row `sqrt(q_long² + q_lat²) <= limit` where `q_axis` is affine in
/// the state.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRow {
    pub kind: RowKind,
    pub long: [f64; NX],
    pub lat: [f64; NX],
    pub limit: f64,
}

impl NormRow {
    pub fn components(&self, x: &[f64; NX]) -> (f64, f64) {
        let dot = |c: &[f64; NX]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        (dot(&self.long), dot(&self.lat))
    }
}

/// Matrix form of every constraint, used by the solvers and as a second
/// evaluation route for [`check_feasible`].
#[derive(Clone, Debug)]
pub struct ConstraintRows {
    pub linear: Vec<LinearRow>,
    pub norm: Vec<NormRow>,
}

impl ConstraintRows {
    pub fn new(c: &ConstraintSet, b: &BrakingParams) -> Self {
        let mut linear = Vec::new();
        let state_row = |kind, entries: &[(usize, f64)], limit: f64| {
            let mut state = [0.0; NX];
            for &(i, v) in entries {
                state[i] = v;
            }
            LinearRow {
                kind,
                state,
                input: [0.0; NU],
                lower: -limit,
                upper: limit,
            }
        };
        let [ds, dv, da] = b.displacement_coeffs();
        let [tt, tw, ta] = b.tilt_coeffs();
        for axis in Axis::BOTH {
            let [omega, theta, v, s, a_tran, a_rot] = axis.state_indices();
            linear.push(state_row(
                RowKind::TiltRate(axis),
                &[(omega, 1.0)],
                c.omega_max(axis),
            ));
            linear.push(state_row(RowKind::Tilt(axis), &[(theta, 1.0)], c.theta_max));
            linear.push(state_row(RowKind::Velocity(axis), &[(v, 1.0)], c.v_max));
            linear.push(state_row(
                RowKind::RealizedTranAccel(axis),
                &[(a_tran, 1.0)],
                c.a_tran_max,
            ));
            linear.push(state_row(
                RowKind::RealizedRotAccel(axis),
                &[(a_rot, 1.0)],
                c.a_rot_max,
            ));
            linear.push(state_row(
                RowKind::BrakingTilt(axis),
                &[(theta, tt), (omega, tw), (a_rot, ta)],
                b.theta_thresh,
            ));
            if c.envelope_mode == EnvelopeMode::Boxed {
                linear.push(state_row(
                    RowKind::Displacement(axis),
                    &[(s, 1.0)],
                    c.s_envelope_max,
                ));
                linear.push(state_row(
                    RowKind::BrakingDisplacement(axis),
                    &[(s, ds), (v, dv), (a_tran, da)],
                    b.s_thresh,
                ));
            }
        }
        for axis in Axis::BOTH {
            let [a_rot, a_tran] = axis.input_indices();
            let mut input = [0.0; NU];
            input[a_tran] = 1.0;
            linear.push(LinearRow {
                kind: RowKind::CommandTranAccel(axis),
                state: [0.0; NX],
                input,
                lower: -c.a_cmd_tran_max,
                upper: c.a_cmd_tran_max,
            });
            let mut input = [0.0; NU];
            input[a_rot] = 1.0;
            linear.push(LinearRow {
                kind: RowKind::CommandRotAccel(axis),
                state: [0.0; NX],
                input,
                lower: -c.a_cmd_rot_max,
                upper: c.a_cmd_rot_max,
            });
        }

        let mut norm = Vec::new();
        if c.envelope_mode == EnvelopeMode::Norm {
            let mut long = [0.0; NX];
            let mut lat = [0.0; NX];
            long[sx::S_LONG] = 1.0;
            lat[sx::S_LAT] = 1.0;
            norm.push(NormRow {
                kind: RowKind::Envelope,
                long,
                lat,
                limit: c.s_envelope_max,
            });
            let mut long = [0.0; NX];
            let mut lat = [0.0; NX];
            long[sx::S_LONG] = ds;
            long[sx::V_LONG] = dv;
            long[sx::A_TRAN_LONG] = da;
            lat[sx::S_LAT] = ds;
            lat[sx::V_LAT] = dv;
            lat[sx::A_TRAN_LAT] = da;
            norm.push(NormRow {
                kind: RowKind::BrakingEnvelope,
                long,
                lat,
                limit: b.s_thresh,
            });
        }
        debug_assert!(linear.iter().filter(|r| r.is_input_row()).all(|r| r
            .input
            .iter()
            .filter(|c| **c != 0.0)
            .count()
            == 1));
        Self { linear, norm }
    }
}

/// One violated constraint row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: RowKind,
    /// Signed value of the constrained quantity (a norm for envelope rows).
    pub value: f64,
    /// The bound that was exceeded.
    pub limit: f64,
    /// Amount by which the bound is exceeded, always > tol.
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn max_margin(&self) -> f64 {
        self.violations.iter().map(|v| v.margin).fold(0.0, f64::max)
    }
}

/// Evaluates every constraint at a state/input pair, using the named fields
/// and braking maps directly (not the matrix rows).
pub fn check_feasible(
    x: &PlatformState,
    u_cmd: &ControlInput,
    c: &ConstraintSet,
    b: &BrakingParams,
    tol: f64,
) -> ViolationReport {
    let mut report = ViolationReport::default();
    let mut check = |kind: RowKind, value: f64, limit: f64| {
        let margin = value.abs() - limit;
        if margin > tol {
            report.violations.push(Violation {
                kind,
                value,
                limit,
                margin,
            });
        }
    };
    let (s_br_long, s_br_lat) = braking_displacement(x, b);
    let (th_br_long, th_br_lat) = braking_tilt(x, b);
    for axis in Axis::BOTH {
        let (omega, theta, v, a_tran, a_rot, cmd_tran, cmd_rot, th_br) = match axis {
            Axis::Long => (
                x.omega_long,
                x.theta_long,
                x.v_long,
                x.a_tran_long,
                x.a_rot_long,
                u_cmd.a_tran_long,
                u_cmd.a_rot_long,
                th_br_long,
            ),
            Axis::Lat => (
                x.omega_lat,
                x.theta_lat,
                x.v_lat,
                x.a_tran_lat,
                x.a_rot_lat,
                u_cmd.a_tran_lat,
                u_cmd.a_rot_lat,
                th_br_lat,
            ),
        };
        check(RowKind::TiltRate(axis), omega, c.omega_max(axis));
        check(RowKind::Tilt(axis), theta, c.theta_max);
        check(RowKind::Velocity(axis), v, c.v_max);
        check(RowKind::RealizedTranAccel(axis), a_tran, c.a_tran_max);
        check(RowKind::RealizedRotAccel(axis), a_rot, c.a_rot_max);
        check(RowKind::BrakingTilt(axis), th_br, b.theta_thresh);
        check(RowKind::CommandTranAccel(axis), cmd_tran, c.a_cmd_tran_max);
        check(RowKind::CommandRotAccel(axis), cmd_rot, c.a_cmd_rot_max);
    }
    match c.envelope_mode {
        EnvelopeMode::Norm => {
            check(
                RowKind::Envelope,
                envelope_norm(x.s_long, x.s_lat),
                c.s_envelope_max,
            );
            check(
                RowKind::BrakingEnvelope,
                envelope_norm(s_br_long, s_br_lat),
                b.s_thresh,
            );
        }
        EnvelopeMode::Boxed => {
            check(
                RowKind::Displacement(Axis::Long),
                x.s_long,
                c.s_envelope_max,
            );
            check(RowKind::Displacement(Axis::Lat), x.s_lat, c.s_envelope_max);
            check(
                RowKind::BrakingDisplacement(Axis::Long),
                s_br_long,
                b.s_thresh,
            );
            check(
                RowKind::BrakingDisplacement(Axis::Lat),
                s_br_lat,
                b.s_thresh,
            );
        }
    }
    report
}

/// Same check as [`check_feasible`], evaluated through [`ConstraintRows`].
pub fn check_feasible_rows(
    x: &PlatformState,
    u_cmd: &ControlInput,
    rows: &ConstraintRows,
    tol: f64,
) -> ViolationReport {
    let xa = x.to_array();
    let ua = u_cmd.to_array();
    let mut report = ViolationReport::default();
    for row in &rows.linear {
        let value = row.eval(&xa, &ua);
        let margin = (value - row.upper).max(row.lower - value);
        if margin > tol {
            report.violations.push(Violation {
                kind: row.kind,
                value,
                limit: if value > row.upper {
                    row.upper
                } else {
                    -row.lower
                },
                margin,
            });
        }
    }
    for row in &rows.norm {
        let (ql, qa) = row.components(&xa);
        let value = envelope_norm(ql, qa);
        let margin = value - row.limit;
        if margin > tol {
            report.violations.push(Violation {
                kind: row.kind,
                value,
                limit: row.limit,
                margin,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b() -> BrakingParams {
        BrakingParams::default()
    }

    #[test]
    fn braking_displacement_values() {
        let x = PlatformState {
            s_long: 0.2,
            s_lat: -0.1,
            ..Default::default()
        };
        assert_eq!(braking_displacement(&x, &b()), (0.2, -0.1));

        let x = PlatformState {
            v_long: 0.1,
            ..Default::default()
        };
        assert_abs_diff_eq!(braking_displacement(&x, &b()).0, 0.25, epsilon = 1e-15);

        let x = PlatformState {
            s_long: 0.1,
            v_long: 0.1,
            a_tran_long: 0.1,
            ..Default::default()
        };
        let oracle = 0.1 + 0.25 + 0.5 * 0.45 * 0.1 * 6.25;
        assert_abs_diff_eq!(braking_displacement(&x, &b()).0, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.490625, epsilon = 1e-15);
    }

    #[test]
    fn braking_tilt_values() {
        let x = PlatformState {
            theta_long: 0.1,
            theta_lat: -0.2,
            ..Default::default()
        };
        assert_eq!(braking_tilt(&x, &b()), (0.1, -0.2));

        let x = PlatformState {
            omega_long: 3.0_f64.to_radians(),
            ..Default::default()
        };
        assert_abs_diff_eq!(braking_tilt(&x, &b()).0.to_degrees(), 1.5, epsilon = 1e-12);

        let x = PlatformState {
            theta_lat: 0.05,
            omega_lat: -0.04,
            a_rot_lat: 0.3,
            ..Default::default()
        };
        let oracle = 0.05 + 1.0 * -0.04 * 0.5 + 0.5 * 0.45 * 0.3 * 0.25;
        assert_abs_diff_eq!(braking_tilt(&x, &b()).1, oracle, epsilon = 1e-15);
    }

    #[test]
    fn envelope_values() {
        assert_eq!(envelope_norm(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(envelope_norm(0.3, 0.4), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            envelope_norm(0.35, 0.35),
            0.494_974_746_830_583_3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn explicit_box_corners_inside_envelope() {
        let c = ConstraintSet::default();
        for (sl, sa) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let n = envelope_norm(sl * c.s_axis_max, sa * c.s_axis_max);
            assert!(n < c.s_envelope_max, "corner norm {n}");
        }
    }

    #[test]
    fn feasible_at_rest() {
        let r = check_feasible(
            &PlatformState::default(),
            &ControlInput::default(),
            &ConstraintSet::default(),
            &b(),
            FEAS_TOL,
        );
        assert!(r.is_empty());
    }

    #[test]
    fn tilt_rate_violation_margin() {
        let x = PlatformState {
            omega_long: 4.0_f64.to_radians(),
            ..Default::default()
        };
        let r = check_feasible(
            &x,
            &ControlInput::default(),
            &ConstraintSet::default(),
            &b(),
            FEAS_TOL,
        );
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].kind, RowKind::TiltRate(Axis::Long));
        assert_abs_diff_eq!(r.violations[0].margin.to_degrees(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn envelope_boundary_not_reported() {
        let x = PlatformState {
            s_long: 0.3,
            s_lat: 0.4,
            ..Default::default()
        };
        let r = check_feasible(
            &x,
            &ControlInput::default(),
            &ConstraintSet::default(),
            &b(),
            FEAS_TOL,
        );
        assert!(r.is_empty());
        let (bl, ba) = braking_displacement(&x, &b());
        assert_abs_diff_eq!(envelope_norm(bl, ba) - b().s_thresh, 0.0, epsilon = 1e-15);

        // just past the boundary the braking and plain envelope rows trip
        let x = PlatformState {
            s_long: 0.301,
            s_lat: 0.4,
            ..Default::default()
        };
        let r = check_feasible(
            &x,
            &ControlInput::default(),
            &ConstraintSet::default(),
            &b(),
            FEAS_TOL,
        );
        let kinds: Vec<_> = r.violations.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![RowKind::Envelope, RowKind::BrakingEnvelope]);
    }

    #[test]
    fn command_bounds_reported() {
        let u = ControlInput::new(0.0, 5.5, -3.5, 0.0);
        let r = check_feasible(
            &PlatformState::default(),
            &u,
            &ConstraintSet::default(),
            &b(),
            FEAS_TOL,
        );
        let kinds: Vec<_> = r.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![
                RowKind::CommandTranAccel(Axis::Long),
                RowKind::CommandRotAccel(Axis::Lat)
            ]
        );
    }

    #[test]
    fn validation() {
        let mut c = ConstraintSet::default();
        assert!(c.validate().is_ok());
        c.s_axis_max = 0.6;
        assert!(c.validate().is_err());
        let c = ConstraintSet {
            v_max: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut bp = b();
        bp.c_u = -1.0;
        assert!(bp.validate().is_err());
    }

    fn arb_state() -> impl Strategy<Value = PlatformState> {
        prop::array::uniform12(-1.0f64..1.0).prop_map(|a| {
            let mut s = PlatformState::from_array(&a);
            s.omega_long *= 0.08;
            s.omega_lat *= 0.08;
            s.theta_long *= 0.6;
            s.theta_lat *= 0.6;
            s.s_long *= 0.6;
            s.s_lat *= 0.6;
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matrix_rows_agree_with_direct_maps(
            x in arb_state(),
            u in prop::array::uniform4(-6.0f64..6.0),
            boxed in any::<bool>(),
        ) {
            let mut c = ConstraintSet::default();
            if boxed {
                c.envelope_mode = EnvelopeMode::Boxed;
            }
            let u = ControlInput::from_array(&u);
            let rows = ConstraintRows::new(&c, &b());
            let direct = check_feasible(&x, &u, &c, &b(), FEAS_TOL);
            let matrix = check_feasible_rows(&x, &u, &rows, FEAS_TOL);
            prop_assert_eq!(direct.len(), matrix.len());
            for v in &direct.violations {
                let m = matrix.violations.iter().find(|m| m.kind == v.kind);
                prop_assert!(m.is_some());
                prop_assert!((m.unwrap().margin - v.margin).abs() <= 1e-12);
            }
            let xa = x.to_array();
            let (bl, ba) = braking_displacement(&x, &b());
            let (tl, ta) = braking_tilt(&x, &b());
            for row in &rows.linear {
                let val = row.eval(&xa, &u.to_array());
                match row.kind {
                    RowKind::BrakingTilt(Axis::Long) => prop_assert!((val - tl).abs() <= 1e-12),
                    RowKind::BrakingTilt(Axis::Lat) => prop_assert!((val - ta).abs() <= 1e-12),
                    RowKind::BrakingDisplacement(Axis::Long) => prop_assert!((val - bl).abs() <= 1e-12),
                    RowKind::BrakingDisplacement(Axis::Lat) => prop_assert!((val - ba).abs() <= 1e-12),
                    _ => {}
                }
            }
        }

        #[test]
        fn braking_displacement_increases_with_velocity(
            x in arb_state(),
            dv in 1e-3f64..1.0,
        ) {
            let faster = PlatformState { v_long: x.v_long + dv, v_lat: x.v_lat + dv, ..x };
            let (l0, a0) = braking_displacement(&x, &b());
            let (l1, a1) = braking_displacement(&faster, &b());
            prop_assert!(l1 > l0);
            prop_assert!(a1 > a0);
        }
    }
}
