//! Simulation and benchmark harness.
//!
//! * [`design`]: the two-dimensional target/source regression functions and samplers.
//! * [`hist`]: the privatised histogram baseline.
//! * [`metrics`]: accuracy, F1 and Monte Carlo excess risk.
//! * [`sweep`]: scenarios, method runners and sweeps over `ε`, `γ` and `m`.
//! * [`realdata`]: the adaptive policies on ingested multi-site data.

pub mod design;
pub mod hist;
pub mod metrics;
pub mod realdata;
pub mod sweep;

pub use design::{eta_source, eta_target, generate_sample, Role};
pub use hist::dt_hist_classifier;
pub use sweep::{run_replicate, run_scenario, run_sweep, EvalReport, Method, SimScenario, SourceLayout, Sweep, SweepVariable};
