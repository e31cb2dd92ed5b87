//! Ready-made networks used by the examples, the CLI configs and the tests.

use crate::distribution::DistributionSpec;
use crate::network::{ClassSpec, NetworkSpec, PriorityPolicy, StabilityConstraint};

/// Unit-load service means of the two-station five-class re-entrant line,
/// indexed by class label 1..=5. Station 1 serves classes 1, 3, 5 and
/// station 2 serves classes 2, 4.
pub const REENTRANT_UNIT_MEANS: [f64; 5] = [1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0, 2.0 / 3.0, 1.0 / 4.0];
pub const REENTRANT_STATIONS: [usize; 5] = [0, 1, 0, 1, 0];
/// Gamma shapes: external arrivals, then classes 1..=5.
pub const REENTRANT_ARRIVAL_SHAPE: f64 = 0.75;
pub const REENTRANT_SERVICE_SHAPES: [f64; 5] = [0.95, 0.6, 0.95, 0.6, 0.95];

/// The re-entrant line 1 → 2 → 3 → 4 → 5 → exit with unit arrival rate,
/// gamma primitives and per-station loads `(rho1, rho2)`.
pub fn two_station_five_class(rho1: f64, rho2: f64) -> NetworkSpec {
    let rho = [rho1, rho2];
    let classes = (0..5)
        .map(|k| {
            let station = REENTRANT_STATIONS[k];
            ClassSpec {
                station,
                arrival_rate: if k == 0 { 1.0 } else { 0.0 },
                mean_service: rho[station] * REENTRANT_UNIT_MEANS[k],
                arrival_dist: (k == 0)
                    .then(|| DistributionSpec::gamma_shape(REENTRANT_ARRIVAL_SHAPE)),
                service_dist: DistributionSpec::gamma_shape(REENTRANT_SERVICE_SHAPES[k]),
            }
        })
        .collect();
    let routing = (0..5)
        .map(|i| (0..5).map(|j| if j == i + 1 { 1.0 } else { 0.0 }).collect())
        .collect();
    NetworkSpec {
        station_names: vec!["station 1".into(), "station 2".into()],
        classes,
        routing,
        stability_constraints: vec![StabilityConstraint {
            name: "virtual station {2,5}".into(),
            classes: vec![1, 4],
        }],
    }
}

/// Last-buffer-first-serve at station 1, first-buffer-first-serve at station 2.
pub fn reentrant_policy_lbfs_fbfs() -> PriorityPolicy {
    PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[2, 4]])
}

/// Pure last-buffer-first-serve.
pub fn reentrant_policy_lbfs() -> PriorityPolicy {
    PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[4, 2]])
}

fn single_queue(rho: f64, arrival: DistributionSpec, service: DistributionSpec) -> NetworkSpec {
    NetworkSpec {
        station_names: vec!["server".into()],
        classes: vec![ClassSpec {
            station: 0,
            arrival_rate: 1.0,
            mean_service: rho,
            arrival_dist: Some(arrival),
            service_dist: service,
        }],
        routing: vec![vec![0.0]],
        stability_constraints: Vec::new(),
    }
}

/// M/M/1 with unit arrival rate and load `rho`.
pub fn mm1(rho: f64) -> NetworkSpec {
    single_queue(
        rho,
        DistributionSpec::exponential(),
        DistributionSpec::exponential(),
    )
}

/// M/D/1 with unit arrival rate and load `rho`.
pub fn md1(rho: f64) -> NetworkSpec {
    single_queue(
        rho,
        DistributionSpec::exponential(),
        DistributionSpec::deterministic(),
    )
}

/// D/D/1 with unit arrival rate and load `rho`.
pub fn dd1(rho: f64) -> NetworkSpec {
    single_queue(
        rho,
        DistributionSpec::deterministic(),
        DistributionSpec::deterministic(),
    )
}

/// One station, two externally fed exponential classes; class 1 is meant
/// to be given preemptive priority over class 2.
pub fn two_class_priority_station(
    arrival_rates: [f64; 2],
    mean_services: [f64; 2],
) -> NetworkSpec {
    NetworkSpec {
        station_names: vec!["server".into()],
        classes: (0..2)
            .map(|k| ClassSpec {
                station: 0,
                arrival_rate: arrival_rates[k],
                mean_service: mean_services[k],
                arrival_dist: Some(DistributionSpec::exponential()),
                service_dist: DistributionSpec::exponential(),
            })
            .collect(),
        routing: vec![vec![0.0; 2]; 2],
        stability_constraints: Vec::new(),
    }
}
