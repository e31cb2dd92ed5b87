//! TOML network configuration.
//!
//! Classes, stations and policy entries are 1-based in the file. Stations
//! must be listed in heavy-traffic scale order: the slack of station `j`
//! vanishes like `r^j`.
//!
//! ```toml
//! name = "two-station five-class re-entrant line"
//! routing = [
//!   [0, 1, 0, 0, 0],
//!   [0, 0, 1, 0, 0],
//!   [0, 0, 0, 1, 0],
//!   [0, 0, 0, 0, 1],
//!   [0, 0, 0, 0, 0],
//! ]
//! policy = [[5, 3, 1], [2, 4]]
//!
//! [[stations]]
//! name = "station 1"
//!
//! [[stations]]
//! name = "station 2"
//!
//! [[classes]]
//! station = 1
//! arrival_rate = 1.0
//! mean_service = 0.48
//! arrival = { family = "gamma", shape = 0.75 }
//! service = { family = "gamma", shape = 0.95 }
//!
//! # ... classes 2 to 5 without `arrival`
//!
//! [[stability_constraints]]
//! name = "virtual station"
//! classes = [2, 5]
//!
//! [sim]
//! arrivals = 20_000_000
//! reps = 10
//! seed = 7
//! warmup_frac = 0.1
//! joint = [[1, 4]]
//! hist_cap = 1000
//!
//! [optimize]
//! weights = [1, 1, 1, 1, 1]
//! max_policies = 1_000_000
//! ```

use serde::Deserialize;

use crate::distribution::{DistributionSpec, Family};
use crate::error::{Diagnostic, Error, Result};
use crate::network::{
    canonicalize, validate_spec, ClassSpec, NetworkSpec, PriorityPolicy, StabilityConstraint,
};
use crate::optimizer::DEFAULT_POLICY_LIMIT;
use crate::sim::{SimConfig, DEFAULT_WARMUP_FRAC};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    family: Family,
    scv: Option<f64>,
    shape: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStation {
    name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    station: usize,
    #[serde(default)]
    arrival_rate: f64,
    mean_service: f64,
    arrival: Option<RawDist>,
    service: RawDist,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    name: String,
    classes: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    arrivals: Option<u64>,
    reps: Option<usize>,
    seed: Option<u64>,
    warmup_frac: Option<f64>,
    #[serde(default)]
    joint: Vec<[usize; 2]>,
    hist_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimize {
    weights: Option<Vec<f64>>,
    max_policies: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    stations: Vec<RawStation>,
    classes: Vec<RawClass>,
    routing: Vec<Vec<f64>>,
    policy: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    stability_constraints: Vec<RawConstraint>,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    optimize: RawOptimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSettings {
    /// Per-class weights (0-based), if the objective is a weighted queue sum.
    pub weights: Option<Vec<f64>>,
    pub max_policies: u128,
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub name: Option<String>,
    pub spec: NetworkSpec,
    pub policy: Option<PriorityPolicy>,
    pub sim: SimConfig,
    pub optimize: OptimizeSettings,
}

impl Config {
    /// The configured policy, or an error naming the missing field.
    pub fn require_policy(&self) -> Result<&PriorityPolicy> {
        self.policy.as_ref().ok_or_else(|| {
            Error::InvalidSpec(vec![Diagnostic::new("policy", "this command needs a priority policy")])
        })
    }
}

fn convert_dist(raw: &RawDist, path: &str, out: &mut Vec<Diagnostic>) -> DistributionSpec {
    let scv = match (raw.family, raw.scv, raw.shape) {
        (_, Some(_), Some(_)) => {
            out.push(Diagnostic::new(path, "give either scv or shape, not both"));
            f64::NAN
        }
        (Family::Gamma, None, Some(a)) => 1.0 / a,
        (_, None, Some(_)) => {
            out.push(Diagnostic::new(path, "shape is only meaningful for the gamma family"));
            f64::NAN
        }
        (_, Some(c), None) => c,
        (Family::Exponential, None, None) => 1.0,
        (Family::Deterministic, None, None) => 0.0,
        (_, None, None) => {
            out.push(Diagnostic::new(path, "scv (or shape for gamma) is required"));
            f64::NAN
        }
    };
    DistributionSpec {
        family: raw.family,
        scv,
    }
}

fn one_based(label: usize, count: usize, path: String, out: &mut Vec<Diagnostic>) -> Option<usize> {
    if label == 0 || label > count {
        out.push(Diagnostic::new(path, format!("index {label} is outside 1..={count}")));
        None
    } else {
        Some(label - 1)
    }
}

/// Parses TOML text into a validated configuration.
pub fn parse(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let j = raw.stations.len();
    let k = raw.classes.len();
    let mut diags = Vec::new();

    let classes: Vec<ClassSpec> = raw
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let path = format!("classes[{}]", i + 1);
            ClassSpec {
                station: one_based(c.station, j, format!("{path}.station"), &mut diags).unwrap_or(0),
                arrival_rate: c.arrival_rate,
                mean_service: c.mean_service,
                arrival_dist: c
                    .arrival
                    .as_ref()
                    .map(|d| convert_dist(d, &format!("{path}.arrival"), &mut diags)),
                service_dist: convert_dist(&c.service, &format!("{path}.service"), &mut diags),
            }
        })
        .collect();
    let stability_constraints = raw
        .stability_constraints
        .iter()
        .enumerate()
        .map(|(i, sc)| StabilityConstraint {
            name: sc.name.clone(),
            classes: sc
                .classes
                .iter()
                .enumerate()
                .filter_map(|(n, &c)| {
                    one_based(c, k, format!("stability_constraints[{}].classes[{}]", i + 1, n + 1), &mut diags)
                })
                .collect(),
        })
        .collect();
    let policy = raw.policy.as_ref().map(|stations| {
        PriorityPolicy::new(
            stations
                .iter()
                .enumerate()
                .map(|(s, order)| {
                    order
                        .iter()
                        .enumerate()
                        .filter_map(|(n, &c)| one_based(c, k, format!("policy[{}][{}]", s + 1, n + 1), &mut diags))
                        .collect()
                })
                .collect(),
        )
    });
    let spec = NetworkSpec {
        station_names: raw
            .stations
            .iter()
            .enumerate()
            .map(|(s, st)| st.name.clone().unwrap_or_else(|| format!("station {}", s + 1)))
            .collect(),
        classes,
        routing: raw.routing,
        stability_constraints,
    };

    let joint_pairs: Vec<(usize, usize)> = raw
        .sim
        .joint
        .iter()
        .enumerate()
        .filter_map(|(n, [a, b])| {
            let path = format!("sim.joint[{}]", n + 1);
            let a = one_based(*a, k, path.clone(), &mut diags)?;
            let b = one_based(*b, k, path.clone(), &mut diags)?;
            if a == b {
                diags.push(Diagnostic::new(path, "a joint pair needs two distinct classes"));
                return None;
            }
            Some((a, b))
        })
        .collect();
    let defaults = SimConfig::default();
    let sim = SimConfig {
        arrivals: raw.sim.arrivals.unwrap_or(defaults.arrivals),
        replications: raw.sim.reps.unwrap_or(defaults.replications),
        seed: raw.sim.seed.unwrap_or(defaults.seed),
        warmup_frac: raw.sim.warmup_frac.unwrap_or(DEFAULT_WARMUP_FRAC),
        joint_pairs,
        hist_caps: raw.sim.hist_cap.map(|c| vec![c; k]).unwrap_or_default(),
    };
    if !(0.0..1.0).contains(&sim.warmup_frac) {
        diags.push(Diagnostic::new("sim.warmup_frac", "must lie in [0, 1)"));
    }
    if let Some(w) = &raw.optimize.weights {
        if w.len() != k {
            diags.push(Diagnostic::new(
                "optimize.weights",
                format!("expected {k} weights, got {}", w.len()),
            ));
        }
    }
    let optimize = OptimizeSettings {
        weights: raw.optimize.weights,
        max_policies: raw
            .optimize
            .max_policies
            .map(u128::from)
            .unwrap_or(DEFAULT_POLICY_LIMIT),
    };

    if diags.is_empty() {
        diags = validate_spec(&spec);
    }
    if diags.is_empty() {
        if let Some(p) = &policy {
            if let Err(e) = canonicalize(&spec, p) {
                diags.push(Diagnostic::new("policy", e.to_string()));
            }
        }
    }
    if !diags.is_empty() {
        return Err(Error::InvalidSpec(diags));
    }
    Ok(Config {
        name: raw.name,
        spec,
        policy,
        sim,
        optimize,
    })
}

pub fn load(path: &std::path::Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}
