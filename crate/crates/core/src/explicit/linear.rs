use nalgebra::{Matrix4, Matrix4x2, RowVector2, RowVector4, Vector2, Vector4};

use crate::error::{CueingError, Result};
use crate::model::{Axis, ModelParams};

/// Discrete-time, small-angle model of one axis.
///
/// State `[omega, theta, v, s]`, input `[a_rot, a_tran]`, output
/// `f = a_tran + g·theta` (long) or `f = a_tran - g·theta` (lat).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedAxisModel {
    pub axis: Axis,
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    pub c: RowVector4<f64>,
    pub d: RowVector2<f64>,
    pub dt: f64,
    pub g: f64,
}

impl LinearizedAxisModel {
    pub fn step(&self, x: &Vector4<f64>, u: &Vector2<f64>) -> Vector4<f64> {
        self.a * x + self.b * u
    }

    pub fn output(&self, x: &Vector4<f64>, u: &Vector2<f64>) -> f64 {
        (self.c * x)[0] + (self.d * u)[0]
    }
}

/// Exact zero-order-hold discretization of the per-axis integrator chains
/// with the small-angle output map. The chains are nilpotent, so the matrix
/// exponential series terminates after the quadratic term.
pub fn linearize_and_discretize(
    p: &ModelParams,
    dt: f64,
    axis: Axis,
) -> Result<LinearizedAxisModel> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CueingError::Config(format!("dt must be > 0, got {dt}")));
    }
    if !(p.g.is_finite() && p.g > 0.0) {
        return Err(CueingError::Config(format!("g must be > 0, got {}", p.g)));
    }
    // continuous: omega' = a_rot, theta' = omega, v' = a_tran, s' = v
    let mut ac = Matrix4::zeros();
    ac[(1, 0)] = 1.0;
    ac[(3, 2)] = 1.0;
    let mut bc = Matrix4x2::zeros();
    bc[(0, 0)] = 1.0;
    bc[(2, 1)] = 1.0;
    debug_assert_eq!(ac * ac, Matrix4::zeros());

    let a = Matrix4::identity() + ac * dt;
    let b = bc * dt + ac * bc * (0.5 * dt * dt);
    let sign = match axis {
        Axis::Long => 1.0,
        Axis::Lat => -1.0,
    };
    Ok(LinearizedAxisModel {
        axis,
        a,
        b,
        c: RowVector4::new(0.0, sign * p.g, 0.0, 0.0),
        d: RowVector2::new(0.0, 1.0),
        dt,
        g: p.g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{integrate_step, ControlInput, PlatformState, Variant};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zoh_entries() {
        let m = linearize_and_discretize(&ModelParams::default(), 0.25, Axis::Long).unwrap();
        assert_eq!(m.a[(1, 0)], 0.25);
        assert_eq!(m.a[(3, 2)], 0.25);
        // one step of unit a_tran from rest
        let x1 = m.step(&Vector4::zeros(), &Vector2::new(0.0, 1.0));
        assert_abs_diff_eq!(x1[3], 0.031_25, epsilon = 1e-15);
        assert_abs_diff_eq!(x1[2], 0.25, epsilon = 1e-15);
        let eig = m.a.complex_eigenvalues();
        for e in eig.iter() {
            assert_abs_diff_eq!(e.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_small_angle() {
        let long = linearize_and_discretize(&ModelParams::default(), 0.25, Axis::Long).unwrap();
        let lat = linearize_and_discretize(&ModelParams::default(), 0.25, Axis::Lat).unwrap();
        let x = Vector4::new(0.0, 0.1, 0.0, 0.0);
        assert_abs_diff_eq!(long.output(&x, &Vector2::zeros()), 0.981, epsilon = 1e-12);
        assert_abs_diff_eq!(lat.output(&x, &Vector2::zeros()), -0.981, epsilon = 1e-12);
        assert_eq!(long.output(&Vector4::zeros(), &Vector2::new(0.3, 1.5)), 1.5);
    }

    #[test]
    fn matches_continuous_model() {
        // exact discretization agrees with RK4 of the 8-state model under a held input
        let p = ModelParams {
            dt: 0.25,
            ..Default::default()
        };
        let m = linearize_and_discretize(&p, 0.25, Axis::Lat).unwrap();
        let x0 = PlatformState {
            omega_lat: 0.02,
            theta_lat: -0.1,
            v_lat: 0.3,
            s_lat: 0.1,
            ..Default::default()
        };
        let u = ControlInput::new(0.0, 0.0, 0.4, -1.2);
        let x1 = integrate_step(&x0, &u, &p, Variant::Explicit).unwrap();
        let lin = m.step(
            &Vector4::from(x0.axis_kinematics(Axis::Lat)),
            &Vector2::new(0.4, -1.2),
        );
        for (a, b) in x1.axis_kinematics(Axis::Lat).iter().zip(lin.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_dt() {
        assert!(linearize_and_discretize(&ModelParams::default(), 0.0, Axis::Long).is_err());
    }
}
