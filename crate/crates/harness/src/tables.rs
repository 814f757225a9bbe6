//! Explicit tables: build, save, load.

use std::path::Path;

use anyhow::{Context, Result};
use cueing_core::explicit::{
    build_region_table, linearize_and_discretize, load_table, model_hash, save_table, BuildStats,
    ExplicitController, LinearizedAxisModel, ParametricQp, RegionTable,
};
use cueing_core::model::Axis;

use crate::config::RunConfig;

pub fn axis_model(cfg: &RunConfig, axis: Axis) -> Result<LinearizedAxisModel> {
    Ok(linearize_and_discretize(&cfg.model, cfg.explicit.dt, axis)?)
}

pub fn dense_qp(cfg: &RunConfig, axis: Axis) -> Result<ParametricQp> {
    let e = &cfg.explicit;
    Ok(ParametricQp::new(
        &axis_model(cfg, axis)?,
        &e.weights,
        &cfg.constraints,
        &e.build,
    )?)
}

pub fn build_axis(cfg: &RunConfig, axis: Axis) -> Result<(RegionTable, BuildStats)> {
    let e = &cfg.explicit;
    let m = axis_model(cfg, axis)?;
    Ok(build_region_table(
        &m,
        &e.weights,
        &cfg.constraints,
        &e.build,
    )?)
}

fn table_path(cfg: &RunConfig, axis: Axis) -> Option<&Path> {
    match axis {
        Axis::Long => cfg.explicit.table_long.as_deref(),
        Axis::Lat => cfg.explicit.table_lat.as_deref(),
    }
}

/// Loads a table file when it exists and matches the configuration,
/// otherwise builds the table (and writes it when a path is configured).
fn load_or_build(cfg: &RunConfig, axis: Axis) -> Result<RegionTable> {
    let e = &cfg.explicit;
    let hash = model_hash(
        &axis_model(cfg, axis)?,
        &e.weights,
        &cfg.constraints,
        &e.build,
    );
    if let Some(path) = table_path(cfg, axis) {
        if path.exists() {
            match load_table(path, Some(&hash), false) {
                Ok(t) => return Ok(t.table),
                Err(err) => log::warn!("{}: {err}, rebuilding", path.display()),
            }
        }
    }
    let (table, stats) = build_axis(cfg, axis)?;
    log::info!("{} table: {} regions", axis.name(), stats.regions);
    if let Some(path) = table_path(cfg, axis) {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        save_table(&table, path)?;
    }
    Ok(table)
}

pub fn controller(cfg: &RunConfig) -> Result<ExplicitController> {
    Ok(ExplicitController::new(
        load_or_build(cfg, Axis::Long)?,
        load_or_build(cfg, Axis::Lat)?,
    )?)
}

/// Builds both tables and writes them to `dir` (or the configured paths).
pub fn build_and_save(
    cfg: &RunConfig,
    dir: &Path,
) -> Result<Vec<(Axis, BuildStats, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for axis in Axis::BOTH {
        let (table, stats) = build_axis(cfg, axis)?;
        let path = table_path(cfg, axis)
            .map(Path::to_path_buf)
            .unwrap_or_else(|| dir.join(format!("table_{}.mcat", axis.name())));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        save_table(&table, &path)?;
        out.push((axis, stats, path));
    }
    Ok(out)
}
