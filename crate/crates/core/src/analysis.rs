//! End-to-end analytic pipeline for one network and one priority policy.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heavy_traffic::{constants_from_bundle, cycle_time_estimate, LowClassConstants};
use crate::network::{
    canonicalize, check_stability_constraints, idle_probabilities, overloaded_stations,
    solve_traffic, traffic_intensities, validate_spec, CanonicalIndexing, ConstraintCheck,
    NetworkSpec, PriorityPolicy,
};
use crate::primitives::Primitives;
use crate::reflection::{build_bundle, MatrixBundle, DEFAULT_MINOR_GUARD};

/// Conditions the heavy-traffic theory needs but cannot certify.
pub const ASSUMED: &[&str] = &[
    "unique stationary distribution (positive Harris recurrence)",
    "uniform moment bounds on high-priority queue lengths",
    "finite (3+delta)-th moments of the unitized primitives",
];

/// Why a policy cannot be analysed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssumptionFailure {
    /// `A_H` is singular.
    SingularHighBlock { pivot: f64 },
    /// The reflection matrix has a nonpositive principal minor. The witness
    /// lists 0-based station indices.
    NotPMatrix { witness: Vec<usize>, minor: f64 },
    PMatrixIndeterminate { witness: Vec<usize>, minor: f64 },
    /// Some station has `ρ ≥ 1` (0-based indices).
    Overloaded { stations: Vec<usize> },
}

impl AssumptionFailure {
    /// Short tag for tables.
    pub fn tag(&self) -> &'static str {
        match self {
            AssumptionFailure::SingularHighBlock { .. } => "singular_A_H",
            AssumptionFailure::NotPMatrix { .. } => "R_not_P_matrix",
            AssumptionFailure::PMatrixIndeterminate { .. } => "R_P_matrix_indeterminate",
            AssumptionFailure::Overloaded { .. } => "overloaded",
        }
    }
}

fn one_based(set: &[usize]) -> String {
    let items: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

impl fmt::Display for AssumptionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssumptionFailure::SingularHighBlock { pivot } => {
                write!(f, "A_H is singular (smallest pivot {pivot:e})")
            }
            AssumptionFailure::NotPMatrix { witness, minor } => write!(
                f,
                "R is not a P-matrix: principal minor on stations {} is {minor:e}",
                one_based(witness)
            ),
            AssumptionFailure::PMatrixIndeterminate { witness, minor } => write!(
                f,
                "P-matrix property of R is numerically indeterminate: minor on stations {} is {minor:e}",
                one_based(witness)
            ),
            AssumptionFailure::Overloaded { stations } => {
                write!(f, "stations {} have rho >= 1", one_based(stations))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub minor_guard: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            minor_guard: DEFAULT_MINOR_GUARD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub policy: PriorityPolicy,
    pub indexing: CanonicalIndexing,
    /// Per user class.
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    /// Exact `P(Z_{H(k)} = 0)` per user class.
    pub beta: Vec<f64>,
    pub stability: Vec<ConstraintCheck>,
    pub bundle: MatrixBundle,
    /// One entry per low class, in station order; empty on failure.
    pub constants: Vec<LowClassConstants>,
    pub cycle_time: Option<f64>,
    pub failure: Option<AssumptionFailure>,
}

impl AnalysisReport {
    /// Mean-queue estimate for a user class, if it is a low class.
    pub fn mean_estimate(&self, class: usize) -> Option<f64> {
        self.constants
            .iter()
            .find(|c| c.class == class)
            .map(|c| c.mean_estimate)
    }
}

pub fn analyze(
    spec: &NetworkSpec,
    policy: &PriorityPolicy,
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let diagnostics = validate_spec(spec);
    if !diagnostics.is_empty() {
        return Err(Error::InvalidSpec(diagnostics));
    }
    let indexing = canonicalize(spec, policy)?;
    let lambda = solve_traffic(spec)?;
    let rho = traffic_intensities(spec, &lambda);
    let beta = idle_probabilities(spec, &lambda, &indexing);
    let stability = check_stability_constraints(spec, &lambda);
    let prim = Primitives::canonical(spec, &lambda, &indexing);
    let bundle = build_bundle(&prim, &indexing, options.minor_guard)?;

    let overloaded = overloaded_stations(&rho);
    let failure = bundle.failure.clone().or_else(|| {
        (!overloaded.is_empty()).then(|| AssumptionFailure::Overloaded {
            stations: overloaded,
        })
    });
    let (constants, cycle_time) = if failure.is_none() {
        let constants = constants_from_bundle(&prim, &indexing, &bundle);
        let ct = cycle_time_estimate(spec, &constants);
        (constants, Some(ct))
    } else {
        (Vec::new(), None)
    };
    Ok(AnalysisReport {
        policy: policy.clone(),
        indexing,
        lambda,
        rho,
        beta,
        stability,
        bundle,
        constants,
        cycle_time,
        failure,
    })
}
