//! Heavy-traffic analysis and simulation of open multiclass queueing
//! networks under static buffer priority.
//!
//! The analytic side turns a network and a priority policy into the
//! matrices `A`, `Q`, `R`, `w`, the vectors `u⁽ᵏ⁾` and, per station, the
//! heavy-traffic constant `d_k` of its lowest-priority class. The
//! simulator estimates the same queue-length laws by independent
//! replications.

pub mod analysis;
pub mod config;
pub mod distribution;
pub mod error;
pub mod heavy_traffic;
pub mod linalg;
pub mod network;
pub mod optimizer;
pub mod presets;
pub mod primitives;
pub mod reflection;
pub mod sim;
pub mod stats;

pub use analysis::{analyze, AnalysisOptions, AnalysisReport, AssumptionFailure};
pub use distribution::{DistributionSpec, Family};
pub use error::{Diagnostic, Error, Result};
pub use network::{ClassSpec, NetworkSpec, PriorityPolicy, StabilityConstraint};
pub use sim::{run_experiment, SimConfig, SimulationResult};
