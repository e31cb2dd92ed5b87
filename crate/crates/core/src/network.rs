//! Network data model, priority policies, canonical class indexing and the
//! first-order traffic quantities (λ, ρ, β).
//!
//! Classes and stations are 0-based internally. Everything user-facing
//! (diagnostic paths, policy display, CSV labels) is 1-based, matching the
//! usual way re-entrant lines are written down.

use std::collections::BTreeSet;
use std::fmt;

use crate::distribution::DistributionSpec;
use crate::error::{Diagnostic, Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Shown next to any reported traffic intensity.
pub const BUSY_FRACTION_CAVEAT: &str = "rho_j is the nominal load; in a multiclass network it \
     need not equal the long-run fraction of time station j is busy";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    /// Station serving this class (0-based).
    pub station: usize,
    pub arrival_rate: f64,
    pub mean_service: f64,
    /// Required exactly when `arrival_rate > 0`.
    pub arrival_dist: Option<DistributionSpec>,
    pub service_dist: DistributionSpec,
}

/// A set of classes whose total load `Σ λ_k m_k` must stay below one,
/// e.g. a virtual station of a re-entrant line.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConstraint {
    pub name: String,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    pub load: f64,
    pub satisfied: bool,
}

/// An open multiclass network with single-server stations.
///
/// Station order doubles as heavy-traffic scale order: station `j`
/// (1-based) is the one whose slack vanishes like `r^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub station_names: Vec<String>,
    pub classes: Vec<ClassSpec>,
    /// `routing[k][l]` is the probability a class-k completion becomes class l.
    pub routing: Vec<Vec<f64>>,
    pub stability_constraints: Vec<StabilityConstraint>,
}

impl NetworkSpec {
    pub fn num_stations(&self) -> usize {
        self.station_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn station_of(&self, class: usize) -> usize {
        self.classes[class].station
    }

    /// Classes served at `station`, in label order.
    pub fn classes_at(&self, station: usize) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|&k| self.classes[k].station == station)
            .collect()
    }

    pub fn arrival_rates(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.arrival_rate).collect()
    }

    pub fn mean_services(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.mean_service).collect()
    }

    /// `c²_{e,k}`; zero for classes without external arrivals.
    pub fn scv_arrival(&self, class: usize) -> f64 {
        let c = &self.classes[class];
        match c.arrival_dist {
            Some(d) if c.arrival_rate > 0.0 => d.scv,
            _ => 0.0,
        }
    }

    pub fn scv_service(&self, class: usize) -> f64 {
        self.classes[class].service_dist.scv
    }

    pub fn routing_matrix(&self) -> Matrix {
        let k = self.num_classes();
        Matrix::from_fn(k, k, |i, j| self.routing[i][j])
    }

    /// Same network with the given service means.
    pub fn with_means(&self, means: &[f64]) -> NetworkSpec {
        let mut out = self.clone();
        for (c, &m) in out.classes.iter_mut().zip(means) {
            c.mean_service = m;
        }
        out
    }
}

/// Returns one diagnostic per violated model invariant; empty means valid.
pub fn validate_spec(spec: &NetworkSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let j = spec.num_stations();
    let k = spec.num_classes();
    if j == 0 {
        out.push(Diagnostic::new("stations", "at least one station is required"));
    }
    if k == 0 {
        out.push(Diagnostic::new("classes", "at least one class is required"));
    }

    for (i, c) in spec.classes.iter().enumerate() {
        let path = format!("classes[{}]", i + 1);
        if c.station >= j {
            out.push(Diagnostic::new(
                format!("{path}.station"),
                format!("station {} does not exist (1..={j})", c.station + 1),
            ));
        }
        if !(c.mean_service > 0.0 && c.mean_service.is_finite()) {
            out.push(Diagnostic::new(
                format!("{path}.mean_service"),
                format!("must be positive and finite, got {}", c.mean_service),
            ));
        }
        if !(c.arrival_rate >= 0.0 && c.arrival_rate.is_finite()) {
            out.push(Diagnostic::new(
                format!("{path}.arrival_rate"),
                format!("must be nonnegative and finite, got {}", c.arrival_rate),
            ));
        }
        if c.arrival_rate > 0.0 {
            match &c.arrival_dist {
                None => out.push(Diagnostic::new(
                    format!("{path}.arrival"),
                    "an inter-arrival distribution is required when arrival_rate > 0",
                )),
                Some(d) => {
                    if let Err(msg) = d.validate() {
                        out.push(Diagnostic::new(format!("{path}.arrival"), msg));
                    }
                }
            }
        }
        if let Err(msg) = c.service_dist.validate() {
            out.push(Diagnostic::new(format!("{path}.service"), msg));
        }
    }
    if k > 0 && !spec.classes.iter().any(|c| c.arrival_rate > 0.0) {
        out.push(Diagnostic::new(
            "classes",
            "at least one class needs a positive arrival_rate",
        ));
    }
    for s in 0..j {
        if !spec.classes.iter().any(|c| c.station == s) {
            out.push(Diagnostic::new(
                format!("stations[{}]", s + 1),
                "station has no classes",
            ));
        }
    }

    let mut routing_ok = spec.routing.len() == k;
    if !routing_ok {
        out.push(Diagnostic::new(
            "routing",
            format!("expected {k} rows, got {}", spec.routing.len()),
        ));
    }
    for (r, row) in spec.routing.iter().enumerate() {
        let path = format!("routing[{}]", r + 1);
        if row.len() != k {
            routing_ok = false;
            out.push(Diagnostic::new(
                path,
                format!("expected {k} entries, got {}", row.len()),
            ));
            continue;
        }
        if let Some((c, &p)) = row
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= 1.0))
        {
            routing_ok = false;
            out.push(Diagnostic::new(
                format!("{path}[{}]", c + 1),
                format!("probability must lie in [0, 1], got {p}"),
            ));
            continue;
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 + 1e-12 {
            routing_ok = false;
            out.push(Diagnostic::new(
                path,
                format!("row sums to {sum}, which exceeds 1"),
            ));
        }
    }
    // For a nonnegative substochastic P the spectral radius is an eigenvalue,
    // so I - P is invertible exactly when the network is open.
    if routing_ok && k > 0 {
        let p = spec.routing_matrix();
        let i_minus_p = Matrix::identity(k, k) - p;
        if linalg::inverse(&i_minus_p, "I-P").is_err() {
            out.push(Diagnostic::new(
                "routing",
                "I-P singular: some jobs never leave the network (closed network)",
            ));
        }
    }

    for (i, sc) in spec.stability_constraints.iter().enumerate() {
        if let Some(&bad) = sc.classes.iter().find(|&&c| c >= k) {
            out.push(Diagnostic::new(
                format!("stability_constraints[{}]", i + 1),
                format!("unknown class {}", bad + 1),
            ));
        }
    }
    out
}

/// Per-station strict priority orders, highest priority first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PriorityPolicy {
    pub stations: Vec<Vec<usize>>,
}

impl PriorityPolicy {
    pub fn new(stations: Vec<Vec<usize>>) -> Self {
        Self { stations }
    }

    /// Builds a policy from 1-based class labels, e.g. `[[5, 3, 1], [2, 4]]`.
    pub fn from_labels<S: AsRef<[usize]>>(labels: &[S]) -> Self {
        Self::new(
            labels
                .iter()
                .map(|s| s.as_ref().iter().map(|&l| l - 1).collect())
                .collect(),
        )
    }

    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.stations
            .iter()
            .map(|s| s.iter().map(|&c| c + 1).collect())
            .collect()
    }
}

impl fmt::Display for PriorityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.stations.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "(")?;
            for (n, c) in s.iter().enumerate() {
                if n > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", c + 1)?;
            }
            write!(f, ")")?;
        }
        write!(f, "}}")
    }
}

/// Relabeling that puts each station's lowest-priority class first.
///
/// Canonical class `j < J` is the lowest-priority class of station `j`.
/// High-priority classes follow, ordered by station and then by ascending
/// priority, so `k+` of a high class is the next canonical index whenever
/// it exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalIndexing {
    to_canonical: Vec<usize>,
    to_user: Vec<usize>,
    num_low: usize,
    station: Vec<usize>,
    successor: Vec<Option<usize>>,
    at_least_as_high: Vec<Vec<usize>>,
}

impl CanonicalIndexing {
    pub fn num_classes(&self) -> usize {
        self.to_user.len()
    }

    pub fn num_low(&self) -> usize {
        self.num_low
    }

    pub fn canonical(&self, user: usize) -> usize {
        self.to_canonical[user]
    }

    pub fn user(&self, canonical: usize) -> usize {
        self.to_user[canonical]
    }

    /// User labels in canonical order.
    pub fn user_order(&self) -> &[usize] {
        &self.to_user
    }

    pub fn is_low(&self, canonical: usize) -> bool {
        canonical < self.num_low
    }

    pub fn station(&self, canonical: usize) -> usize {
        self.station[canonical]
    }

    /// `k+`: the class directly above `k` at its station (canonical).
    pub fn successor(&self, canonical: usize) -> Option<usize> {
        self.successor[canonical]
    }

    /// `H(k)`: classes at `k`'s station with priority at least that of `k`.
    pub fn at_least_as_high(&self, canonical: usize) -> &[usize] {
        &self.at_least_as_high[canonical]
    }

    /// `H₊(k) = H(k) \ {k}`.
    pub fn strictly_higher(&self, canonical: usize) -> Vec<usize> {
        self.at_least_as_high[canonical]
            .iter()
            .copied()
            .filter(|&c| c != canonical)
            .collect()
    }

    pub fn low_classes(&self) -> std::ops::Range<usize> {
        0..self.num_low
    }

    pub fn high_classes(&self) -> std::ops::Range<usize> {
        self.num_low..self.to_user.len()
    }
}

pub fn canonicalize(spec: &NetworkSpec, policy: &PriorityPolicy) -> Result<CanonicalIndexing> {
    let j = spec.num_stations();
    let k = spec.num_classes();
    if policy.stations.len() != j {
        return Err(Error::PolicyMismatch(format!(
            "policy has {} station lists, network has {j} stations",
            policy.stations.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for (s, order) in policy.stations.iter().enumerate() {
        for &c in order {
            if c >= k {
                return Err(Error::PolicyMismatch(format!(
                    "station {} lists unknown class {}",
                    s + 1,
                    c + 1
                )));
            }
            if spec.station_of(c) != s {
                return Err(Error::PolicyMismatch(format!(
                    "class {} is served at station {}, not station {}",
                    c + 1,
                    spec.station_of(c) + 1,
                    s + 1
                )));
            }
            if !seen.insert(c) {
                return Err(Error::PolicyMismatch(format!("class {} listed twice", c + 1)));
            }
        }
        if order.is_empty() {
            return Err(Error::PolicyMismatch(format!(
                "station {} has an empty priority list",
                s + 1
            )));
        }
    }
    if seen.len() != k {
        let missing: Vec<String> = (0..k)
            .filter(|c| !seen.contains(c))
            .map(|c| (c + 1).to_string())
            .collect();
        return Err(Error::PolicyMismatch(format!(
            "classes missing from the policy: {}",
            missing.join(", ")
        )));
    }

    let mut to_user: Vec<usize> = policy
        .stations
        .iter()
        .map(|order| *order.last().expect("nonempty"))
        .collect();
    for order in &policy.stations {
        to_user.extend(order[..order.len() - 1].iter().rev());
    }
    let mut to_canonical = vec![0; k];
    for (c, &u) in to_user.iter().enumerate() {
        to_canonical[u] = c;
    }

    let mut successor = vec![None; k];
    let mut at_least_as_high = vec![Vec::new(); k];
    for order in &policy.stations {
        for (rank, &u) in order.iter().enumerate() {
            let c = to_canonical[u];
            if rank > 0 {
                successor[c] = Some(to_canonical[order[rank - 1]]);
            }
            let mut h: Vec<usize> = order[..=rank].iter().map(|&x| to_canonical[x]).collect();
            h.sort_unstable();
            at_least_as_high[c] = h;
        }
    }
    let station = to_user.iter().map(|&u| spec.station_of(u)).collect();

    Ok(CanonicalIndexing {
        to_canonical,
        to_user,
        num_low: j,
        station,
        successor,
        at_least_as_high,
    })
}

/// Solves `λ = α + Pᵀλ`.
pub fn solve_traffic(spec: &NetworkSpec) -> Result<Vec<f64>> {
    let k = spec.num_classes();
    let a = Matrix::identity(k, k) - spec.routing_matrix().transpose();
    let alpha = Vector::from_vec(spec.arrival_rates());
    let lambda = linalg::solve_vec(&a, &alpha, "I-P")?;
    let residual = (&a * &lambda - &alpha).amax();
    let scale = lambda.amax().max(f64::MIN_POSITIVE);
    if residual > 1e-10 * scale {
        return Err(Error::InternalConsistency {
            what: "traffic equation residual".into(),
            residual,
        });
    }
    Ok(lambda.iter().copied().collect())
}

/// `ρ_j = Σ_{k∈C(j)} λ_k m_k`.
pub fn traffic_intensities(spec: &NetworkSpec, lambda: &[f64]) -> Vec<f64> {
    let mut rho = vec![0.0; spec.num_stations()];
    for (k, c) in spec.classes.iter().enumerate() {
        rho[c.station] += lambda[k] * c.mean_service;
    }
    rho
}

/// Stations with `ρ_j ≥ 1` (0-based).
pub fn overloaded_stations(rho: &[f64]) -> Vec<usize> {
    (0..rho.len()).filter(|&j| rho[j] >= 1.0).collect()
}

/// Exact probabilities `β_k = P(Z_{H(k)} = 0) = 1 − Σ_{l∈H(k)} λ_l m_l`,
/// indexed by user class.
pub fn idle_probabilities(
    spec: &NetworkSpec,
    lambda: &[f64],
    indexing: &CanonicalIndexing,
) -> Vec<f64> {
    (0..spec.num_classes())
        .map(|u| {
            let c = indexing.canonical(u);
            1.0 - indexing
                .at_least_as_high(c)
                .iter()
                .map(|&h| {
                    let l = indexing.user(h);
                    lambda[l] * spec.classes[l].mean_service
                })
                .sum::<f64>()
        })
        .collect()
}

pub fn check_stability_constraints(spec: &NetworkSpec, lambda: &[f64]) -> Vec<ConstraintCheck> {
    spec.stability_constraints
        .iter()
        .map(|sc| {
            let load: f64 = sc
                .classes
                .iter()
                .map(|&k| lambda[k] * spec.classes[k].mean_service)
                .sum();
            ConstraintCheck {
                name: sc.name.clone(),
                load,
                satisfied: load < 1.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn policy_a() -> PriorityPolicy {
        PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[2, 4]])
    }

    #[test]
    fn reentrant_line_is_valid() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        assert!(validate_spec(&spec).is_empty(), "{:?}", validate_spec(&spec));
    }

    #[test]
    fn oversubscribed_routing_row_is_flagged() {
        let mut spec = presets::two_station_five_class(0.96, 0.99);
        spec.routing[1] = vec![0.0, 0.0, 0.6, 0.6, 0.0];
        let d = validate_spec(&spec);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].path, "routing[2]");
    }

    #[test]
    fn closed_routing_is_rejected() {
        let mut spec = presets::two_station_five_class(0.96, 0.99);
        for (i, row) in spec.routing.iter_mut().enumerate() {
            *row = (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        }
        let d = validate_spec(&spec);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("I-P singular"));
    }

    #[test]
    fn other_invariants_are_reported() {
        let mut spec = presets::two_station_five_class(0.96, 0.99);
        spec.classes[2].mean_service = 0.0;
        spec.classes[0].arrival_dist = None;
        spec.classes[4].station = 7;
        let paths: Vec<String> = validate_spec(&spec).into_iter().map(|d| d.path).collect();
        assert!(paths.contains(&"classes[3].mean_service".to_string()));
        assert!(paths.contains(&"classes[1].arrival".to_string()));
        assert!(paths.contains(&"classes[5].station".to_string()));
    }

    #[test]
    fn canonical_order_of_reentrant_line() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        let ix = canonicalize(&spec, &policy_a()).unwrap();
        // L = {1, 4}, H = {3, 5, 2} in user labels.
        assert_eq!(ix.user_order(), &[0, 3, 2, 4, 1]);
        assert_eq!(ix.num_low(), 2);
        assert_eq!(ix.successor(ix.canonical(2)), Some(ix.canonical(4)));
        assert_eq!(ix.successor(ix.canonical(0)), Some(ix.canonical(2)));
        assert_eq!(ix.successor(ix.canonical(4)), None);
        assert_eq!(ix.successor(ix.canonical(1)), None);
        let h3: Vec<usize> = ix
            .at_least_as_high(ix.canonical(2))
            .iter()
            .map(|&c| ix.user(c) + 1)
            .collect();
        assert_eq!(h3, vec![3, 5]);

        let other = PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[4, 2]]);
        let ix = canonicalize(&spec, &other).unwrap();
        assert_eq!(ix.user(1), 1);
    }

    #[test]
    fn canonical_indexing_invariants() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        for policy in [
            policy_a(),
            PriorityPolicy::from_labels(&[[1, 3, 5].as_slice(), &[4, 2]]),
        ] {
            let ix = canonicalize(&spec, &policy).unwrap();
            for c in 0..5 {
                assert_eq!(ix.canonical(ix.user(c)), c);
                if let Some(s) = ix.successor(c) {
                    assert_eq!(ix.station(s), ix.station(c));
                }
                assert!(ix.at_least_as_high(c).contains(&c));
            }
            for j in ix.low_classes() {
                assert_eq!(ix.station(j), j);
                assert_eq!(ix.at_least_as_high(j).len(), spec.classes_at(j).len());
            }
        }
    }

    #[test]
    fn single_class_network() {
        let spec = presets::mm1(0.5);
        let ix = canonicalize(&spec, &PriorityPolicy::new(vec![vec![0]])).unwrap();
        assert_eq!(ix.num_low(), 1);
        assert!(ix.high_classes().is_empty());
        assert_eq!(ix.successor(0), None);
    }

    #[test]
    fn policy_mismatch_is_an_error() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        let wrong_station = PriorityPolicy::from_labels(&[[5, 3, 2].as_slice(), &[1, 4]]);
        assert!(matches!(
            canonicalize(&spec, &wrong_station),
            Err(Error::PolicyMismatch(_))
        ));
        let unknown = PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[2, 9]]);
        assert!(canonicalize(&spec, &unknown).is_err());
        let missing = PriorityPolicy::from_labels(&[[5, 3].as_slice(), &[2, 4]]);
        assert!(canonicalize(&spec, &missing).is_err());
    }

    #[test]
    fn traffic_of_reentrant_line() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        let lambda = solve_traffic(&spec).unwrap();
        for l in &lambda {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let rho = traffic_intensities(&spec, &lambda);
        assert!((rho[0] - 0.96).abs() < 1e-14);
        assert!((rho[1] - 0.99).abs() < 1e-14);
    }

    #[test]
    fn traffic_of_tandem_with_split() {
        let mut spec = presets::mm1(0.5);
        spec.station_names.push("second".into());
        spec.classes.push(ClassSpec {
            station: 1,
            arrival_rate: 0.0,
            mean_service: 0.5,
            arrival_dist: None,
            service_dist: DistributionSpec::exponential(),
        });
        spec.routing = vec![vec![0.0, 0.5], vec![0.0, 0.0]];
        let lambda = solve_traffic(&spec).unwrap();
        assert!((lambda[0] - 1.0).abs() < 1e-15);
        assert!((lambda[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn idle_probabilities_of_reentrant_line() {
        let spec = presets::two_station_five_class(0.96, 0.99);
        let lambda = solve_traffic(&spec).unwrap();
        let ix = canonicalize(&spec, &policy_a()).unwrap();
        let beta = idle_probabilities(&spec, &lambda, &ix);
        assert!((beta[0] - 0.04).abs() < 1e-12);
        assert!((beta[4] - 0.76).abs() < 1e-12);
        assert!((beta[2] - (1.0 - 0.48)).abs() < 1e-12);
        assert!((beta[3] - 0.01).abs() < 1e-12);
        assert!((beta[1] - 0.67).abs() < 1e-12);
    }

    #[test]
    fn virtual_station_constraint() {
        let mut spec = presets::two_station_five_class(0.96, 0.99);
        spec.stability_constraints.push(StabilityConstraint {
            name: "virtual station {2,5}".into(),
            classes: vec![1, 4],
        });
        let lambda = solve_traffic(&spec).unwrap();
        let checks = check_stability_constraints(&spec, &lambda);
        assert!((checks[0].load - (0.33 + 0.24)).abs() < 1e-12);
        assert!(checks[0].satisfied);
    }

    #[test]
    fn policy_display_is_one_based() {
        assert_eq!(policy_a().to_string(), "{(5,3,1),(2,4)}");
    }
}
