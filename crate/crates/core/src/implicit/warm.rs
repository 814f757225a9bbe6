use serde::{Deserialize, Serialize};

use super::config::OcpConfig;
use super::sqp::SolveResult;
use crate::explicit::ExplicitController;
use crate::model::{discrete_implicit, ControlInput, PlatformState, SpecificForce, NU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarmStartMode {
    NoGuess,
    ShiftOwnFirst,
    ExplicitFirst,
    ExplicitAll,
}

impl WarmStartMode {
    pub const ALL: [WarmStartMode; 4] = [
        WarmStartMode::NoGuess,
        WarmStartMode::ShiftOwnFirst,
        WarmStartMode::ExplicitFirst,
        WarmStartMode::ExplicitAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WarmStartMode::NoGuess => "NO_GUESS",
            WarmStartMode::ShiftOwnFirst => "SHIFT_OWN_FIRST",
            WarmStartMode::ExplicitFirst => "EXPLICIT_FIRST",
            WarmStartMode::ExplicitAll => "EXPLICIT_ALL",
        }
    }

    pub fn needs_table(self) -> bool {
        matches!(
            self,
            WarmStartMode::ExplicitFirst | WarmStartMode::ExplicitAll
        )
    }
}

impl std::fmt::Display for WarmStartMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WarmStartMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown warm-start mode {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub inputs: Vec<ControlInput>,
    /// Forward simulation of `inputs` from the current state, `N + 1` entries.
    pub states: Vec<PlatformState>,
    /// The requested mode was unavailable and zeros were used.
    pub fallback: bool,
}

/// Spreads `short` over `n` steps: step `k` takes entry `floor(k · len / n)`.
pub fn upsample<T: Copy>(short: &[T], n: usize) -> Vec<T> {
    assert!(!short.is_empty());
    (0..n).map(|k| short[k * short.len() / n]).collect()
}

/// Forward simulation of an input sequence with the prediction model.
pub fn simulate_inputs(
    cfg: &OcpConfig,
    x0: &PlatformState,
    inputs: &[ControlInput],
) -> Vec<PlatformState> {
    let (a, b) = discrete_implicit(cfg.model.tau_act, cfg.model.dt);
    let mut x = x0.to_vector();
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(*x0);
    for u in inputs {
        x = a * x + b * nalgebra::SVector::<f64, NU>::from(u.to_array());
        out.push(PlatformState::from_slice(x.as_slice()));
    }
    out
}

fn clip(cfg: &OcpConfig, u: ControlInput) -> ControlInput {
    let c = &cfg.constraints;
    let rot = |v: f64| v.clamp(-c.a_cmd_rot_max, c.a_cmd_rot_max);
    let tran = |v: f64| v.clamp(-c.a_cmd_tran_max, c.a_cmd_tran_max);
    ControlInput::new(
        rot(u.a_rot_long),
        tran(u.a_tran_long),
        rot(u.a_rot_lat),
        tran(u.a_tran_lat),
    )
}

/// Initial guess for one tick. The explicit tables are queried at the
/// current state with the current reference sample.
pub fn build_warm_start(
    mode: WarmStartMode,
    prev: Option<&SolveResult>,
    table: Option<&ExplicitController>,
    x0: &PlatformState,
    f_ref: &SpecificForce,
    cfg: &OcpConfig,
) -> WarmStart {
    let n = cfg.horizon;
    let guess = match mode {
        WarmStartMode::NoGuess => Some(vec![ControlInput::default(); n]),
        WarmStartMode::ShiftOwnFirst => prev.map(|p| vec![p.first_input(); n]),
        WarmStartMode::ExplicitFirst => table
            .and_then(|t| t.evaluate(x0, f_ref))
            .map(|seq| vec![seq[0]; n]),
        WarmStartMode::ExplicitAll => table
            .and_then(|t| t.evaluate(x0, f_ref))
            .map(|seq| upsample(&seq, n)),
    };
    let fallback = guess.is_none();
    let inputs: Vec<ControlInput> = guess
        .unwrap_or_else(|| vec![ControlInput::default(); n])
        .into_iter()
        .map(|u| clip(cfg, u))
        .collect();
    let states = simulate_inputs(cfg, x0, &inputs);
    WarmStart {
        inputs,
        states,
        fallback,
    }
}
