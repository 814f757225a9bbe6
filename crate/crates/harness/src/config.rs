//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cueing_core::constraints::{BrakingParams, ConstraintSet};
use cueing_core::explicit::{BuildOptions, ExplicitWeights};
use cueing_core::implicit::{AdaptiveWeightParams, OcpConfig, WarmStartMode, WeightEvaluation};
use cueing_core::model::ModelParams;
use cueing_core::scenarios::{Scenario, ScenarioGrid, ScenarioKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Online controller settings. Model, limits and braking maps come from the
/// top-level sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpSection {
    pub horizon: usize,
    pub w_f: f64,
    pub w_u: f64,
    pub adaptive: AdaptiveWeightParams,
    pub weight_evaluation: WeightEvaluation,
    pub max_sqp_iters: usize,
    pub kkt_tol: f64,
    pub slack_penalty: f64,
}

impl Default for OcpSection {
    fn default() -> Self {
        let d = OcpConfig::default();
        Self {
            horizon: d.horizon,
            w_f: d.w_f,
            w_u: d.w_u,
            adaptive: d.adaptive,
            weight_evaluation: d.weight_evaluation,
            max_sqp_iters: d.max_sqp_iters,
            kkt_tol: d.kkt_tol,
            slack_penalty: d.slack_penalty,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplicitSection {
    /// Step of the explicit prediction model, s.
    pub dt: f64,
    pub weights: ExplicitWeights,
    pub build: BuildOptions,
    /// Table files. Missing files are built and written.
    pub table_long: Option<PathBuf>,
    pub table_lat: Option<PathBuf>,
}

impl Default for ExplicitSection {
    fn default() -> Self {
        Self {
            dt: 0.25,
            weights: ExplicitWeights::default(),
            build: BuildOptions::default(),
            table_long: None,
            table_lat: None,
        }
    }
}

/// What the controller sees of the future reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preview {
    /// True samples over the horizon.
    #[default]
    Horizon,
    /// Current sample held over the horizon.
    Hold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Plant actuator lag differs from the model's.
    pub mismatch: bool,
    /// Plant `tau_act` = model `tau_act` times this factor when `mismatch`.
    pub mismatch_factor: f64,
    pub preview: Preview,
    /// Extra samples appended after the reference ends, held at the last value.
    pub tail: f64,
    /// Re-solve iteration-capped ticks without the cap to measure the
    /// cost of stopping early.
    pub uncapped_resolve: bool,
    /// Cap used for those re-solves.
    pub uncapped_iters: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            mismatch: false,
            mismatch_factor: 1.5,
            preview: Preview::Horizon,
            tail: 0.0,
            uncapped_resolve: true,
            uncapped_iters: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub grid: Option<ScenarioGrid>,
    #[serde(rename = "scenario")]
    pub list: Vec<Scenario>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            grid: Some(ScenarioGrid::default()),
            list: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub modes: Vec<WarmStartMode>,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub model: ModelParams,
    pub constraints: ConstraintSet,
    pub braking: BrakingParams,
    pub ocp: OcpSection,
    pub explicit: ExplicitSection,
    pub simulation: SimulationSection,
    pub scenarios: ScenarioSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("out"),
            modes: WarmStartMode::ALL.to_vec(),
            threads: 0,
            model: ModelParams::default(),
            constraints: ConstraintSet::default(),
            braking: BrakingParams::default(),
            ocp: OcpSection::default(),
            explicit: ExplicitSection::default(),
            simulation: SimulationSection::default(),
            scenarios: ScenarioSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [&mut self.explicit.table_long, &mut self.explicit.table_lat]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for sc in &mut self.scenarios.list {
            if let Some(p) = &mut sc.trace {
                fix(p);
            }
        }
    }

    pub fn ocp_config(&self) -> OcpConfig {
        let o = &self.ocp;
        OcpConfig {
            model: self.model,
            horizon: o.horizon,
            w_f: o.w_f,
            w_u: o.w_u,
            adaptive: o.adaptive,
            weight_evaluation: o.weight_evaluation,
            constraints: self.constraints,
            braking: self.braking,
            max_sqp_iters: o.max_sqp_iters,
            kkt_tol: o.kkt_tol,
            slack_penalty: o.slack_penalty,
        }
    }

    /// Plant parameters, with the actuator lag scaled under mismatch.
    pub fn plant_model(&self) -> ModelParams {
        let mut p = self.model;
        if self.simulation.mismatch {
            p.tau_act *= self.simulation.mismatch_factor;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.ocp_config().validate()?;
        if self.modes.is_empty() {
            bail!("no warm-start modes selected");
        }
        let mut seen = self.modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modes.len() {
            bail!("duplicate warm-start mode in {:?}", self.modes);
        }
        let e = &self.explicit;
        if !(e.dt.is_finite() && e.dt > 0.0) {
            bail!("explicit.dt must be > 0");
        }
        let look_ahead = e.dt * e.build.horizon as f64;
        let implicit = self.ocp_config().look_ahead();
        if (look_ahead - implicit).abs() > 1e-9 {
            bail!(
                "explicit look-ahead {look_ahead} s differs from the implicit horizon {implicit} s"
            );
        }
        let s = &self.simulation;
        if !(s.mismatch_factor.is_finite() && s.mismatch_factor > 0.0) {
            bail!("simulation.mismatch_factor must be > 0");
        }
        if !(s.tail.is_finite() && s.tail >= 0.0) {
            bail!("simulation.tail must be >= 0");
        }
        if s.uncapped_iters < self.ocp.max_sqp_iters {
            bail!("simulation.uncapped_iters is below ocp.max_sqp_iters");
        }
        if self.scenarios()?.is_empty() {
            bail!("no scenarios configured");
        }
        Ok(())
    }

    /// Grid scenarios followed by the explicit list.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = match &self.scenarios.grid {
            Some(g) => g.expand()?,
            None => Vec::new(),
        };
        for sc in &self.scenarios.list {
            sc.validate()?;
            if sc.kind == ScenarioKind::Trace && sc.trace.as_ref().is_some_and(|p| !p.exists()) {
                bail!(
                    "trace file {} not found",
                    sc.trace.as_ref().unwrap().display()
                );
            }
            out.push(sc.clone());
        }
        let mut names: Vec<String> = out.iter().map(Scenario::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            bail!("scenario names are not unique");
        }
        Ok(out)
    }

    /// SHA-256 of the canonical JSON form. Worker count and output
    /// directory are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::default().scenarios().unwrap().len(), 81);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[ocp]\nhorizon = 10\nfoo = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[constraints]\nomega_max = 1").is_err());
        let cfg: RunConfig =
            toml::from_str("seed = 3\n[ocp]\nhorizon = 25\n[explicit]\ndt = 0.125").unwrap();
        assert_eq!(cfg.seed, 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn look_ahead_must_match() {
        let cfg: RunConfig = toml::from_str("[ocp]\nhorizon = 25").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
