//! Online nonlinear MPC over the 12-state model.

pub mod condensed;
mod config;
mod sqp;
mod transcription;
mod warm;

pub use config::*;
pub use sqp::{ImplicitSolver, SolveResult, SolveStatus};
pub use transcription::{transcribe, Transcription};
pub use warm::{build_warm_start, simulate_inputs, upsample, WarmStart, WarmStartMode};
