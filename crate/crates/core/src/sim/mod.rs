//! Discrete-event simulation of static buffer priority networks.

mod calendar;
mod engine;
mod experiment;
pub mod rng;

pub use engine::run_replication;
pub use experiment::{run_experiment, JointResult, SimulationResult};

use serde::Serialize;

pub const DEFAULT_HIST_CAP: usize = 1000;
/// Low-class histogram caps are this multiple of the analytic mean.
pub const HIST_CAP_MULTIPLE: f64 = 20.0;
const MIN_HIST_CAP: usize = 20;
pub const DEFAULT_WARMUP_FRAC: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// External arrivals per replication, warm-up included.
    pub arrivals: u64,
    pub replications: usize,
    pub seed: u64,
    /// Fraction of the arrival budget discarded before recording starts.
    pub warmup_frac: f64,
    /// Class pairs (0-based) whose joint queue-length law is recorded.
    pub joint_pairs: Vec<(usize, usize)>,
    /// Largest tracked queue length per class; longer queues go to an
    /// overflow bin. Missing entries use [`DEFAULT_HIST_CAP`]; see
    /// [`hist_caps_for`] for caps scaled to the analytic means.
    pub hist_caps: Vec<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            arrivals: 1_000_000,
            replications: 10,
            seed: 1,
            warmup_frac: DEFAULT_WARMUP_FRAC,
            joint_pairs: Vec::new(),
            hist_caps: Vec::new(),
        }
    }
}

/// Time-weighted statistics from one replication, per user class.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationStats {
    pub seed: u64,
    pub window_start: f64,
    pub window_end: f64,
    pub time_avg: Vec<f64>,
    /// Fraction of the window during which every class at least as high as
    /// the class is empty.
    pub idle_frac: Vec<f64>,
    /// `hist[k][n]` = fraction of time with `Z_k = n`; the last bin is
    /// `Z_k > cap`.
    pub hist: Vec<Vec<f64>>,
    /// Per joint pair, fraction of time spent in each (bin, bin) cell.
    pub joint: Vec<Vec<((usize, usize), f64)>>,
    pub departure_rate: Vec<f64>,
    /// Mean time in network of jobs that exited during the window.
    pub mean_sojourn: f64,
    pub sojourn_count: u64,
    /// Largest relative gap between served time and drawn requirement.
    pub max_service_residual: f64,
    pub events: u64,
}

/// Histogram caps of `HIST_CAP_MULTIPLE` times the mean estimate for low
/// classes (at least 20) and [`DEFAULT_HIST_CAP`] for the rest.
pub fn hist_caps_for(
    num_classes: usize,
    constants: &[crate::heavy_traffic::LowClassConstants],
) -> Vec<usize> {
    let mut caps = vec![DEFAULT_HIST_CAP; num_classes];
    for c in constants {
        caps[c.class] = ((HIST_CAP_MULTIPLE * c.mean_estimate).ceil() as usize).max(MIN_HIST_CAP);
    }
    caps
}
