//! Explicit MPC: offline critical-region tables of the per-axis linear MPC
//! and their online lookup.

pub mod io;
pub mod linear;
pub mod mpqp;
pub mod table;

pub use io::{from_bytes, load_table, save_table, to_bytes, LoadedTable};
pub use linear::{linearize_and_discretize, LinearizedAxisModel};
pub use mpqp::{
    build_region_table, enumerate_regions, BuildOptions, BuildStats, ExplicitWeights, ParametricQp,
    N_PARAM,
};
pub use table::{
    check_against_oracle, check_continuity, model_hash, ContinuityReport, CriticalRegion,
    OracleReport, RegionTable, TableHit, TableMeta,
};

use crate::model::{Axis, ControlInput, PlatformState, SpecificForce};

/// Parameter vector `[omega, theta, v, s, f_ref]` of one axis.
pub fn axis_parameter(x: &PlatformState, f_ref: &SpecificForce, axis: Axis) -> [f64; N_PARAM] {
    let k = x.axis_kinematics(axis);
    [k[0], k[1], k[2], k[3], f_ref.get(axis)]
}

/// Region tables of both axes.
#[derive(Clone, Debug)]
pub struct ExplicitController {
    pub long: RegionTable,
    pub lat: RegionTable,
}

impl ExplicitController {
    pub fn new(long: RegionTable, lat: RegionTable) -> crate::Result<Self> {
        if long.axis != Axis::Long || lat.axis != Axis::Lat {
            return Err(crate::CueingError::Config(
                "tables assigned to the wrong axes".into(),
            ));
        }
        if long.horizon != lat.horizon || long.meta.dt != lat.meta.dt {
            return Err(crate::CueingError::Config(
                "axis tables disagree on horizon or step".into(),
            ));
        }
        Ok(Self { long, lat })
    }

    pub fn horizon(&self) -> usize {
        self.long.horizon
    }

    pub fn dt(&self) -> f64 {
        self.long.meta.dt
    }

    /// Input sequence of both axes, `None` if either lookup fails.
    pub fn evaluate(&self, x: &PlatformState, f_ref: &SpecificForce) -> Option<Vec<ControlInput>> {
        let long = self.long.query(&axis_parameter(x, f_ref, Axis::Long))?;
        let lat = self.lat.query(&axis_parameter(x, f_ref, Axis::Lat))?;
        Some(
            (0..self.horizon())
                .map(|k| {
                    ControlInput::new(
                        long.inputs[2 * k],
                        long.inputs[2 * k + 1],
                        lat.inputs[2 * k],
                        lat.inputs[2 * k + 1],
                    )
                })
                .collect(),
        )
    }
}
