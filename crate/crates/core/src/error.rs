use std::fmt;

use thiserror::Error;

/// A single validation finding, addressed by a config-style field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network specification ({} problem(s)); first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    InvalidSpec(Vec<Diagnostic>),

    #[error("priority policy does not match the network: {0}")]
    PolicyMismatch(String),

    #[error("{what} is singular (smallest pivot {pivot:e})")]
    Singular { what: String, pivot: f64 },

    #[error("matrix dimension {dim} exceeds the principal-minor enumeration guard {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("internal consistency check failed: {what} (residual {residual:e})")]
    InternalConsistency { what: String, residual: f64 },

    #[error("service mean of class {class} becomes nonpositive at r = {r} (family valid for r < {r_max})")]
    NegativeServiceMean { class: usize, r: f64, r_max: f64 },

    #[error("base network is not at unit load: station {station} has intensity {rho}")]
    NotUnitLoad { station: usize, rho: f64 },

    #[error("network does not match the two-station five-class re-entrant line: {0}")]
    TopologyMismatch(String),

    #[error("invalid distribution parameters: {0}")]
    DistributionParameterInvalid(String),

    #[error("nonpositive simulation horizon: {0}")]
    NonpositiveHorizon(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("joint distribution has zero entropy; IQR is undefined")]
    DegenerateJoint,

    #[error("histogram supports differ: {0}")]
    BinningMismatch(String),

    #[error("mean must be positive, got {0}")]
    NonpositiveMean(f64),

    #[error("policy enumeration would produce {count} policies, above the limit {limit}")]
    CombinatorialGuard { count: u128, limit: u128 },

    #[error("heavy-traffic assumption failed: {0}")]
    Assumption(crate::analysis::AssumptionFailure),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
