//! Closed-loop benchmark of the hybrid motion-cueing controller: scenario
//! runs under each warm-start mode, metrics, reports and invariant checks.

pub mod closed_loop;
pub mod config;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod suite;
pub mod tables;
pub mod verify;

pub use closed_loop::{run_closed_loop, Controller, RunLog, TickLog};
pub use config::RunConfig;
pub use report::{build_report, emit_report, RunReport};
