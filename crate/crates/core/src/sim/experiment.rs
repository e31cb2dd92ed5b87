//! Independent replications and their aggregation.

use rayon::prelude::*;
use serde::Serialize;

use super::rng::replication_seed;
use super::{run_replication, ReplicationStats, SimConfig};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PriorityPolicy};
use crate::stats::{ci, iqr, ConfidenceInterval, JointPmf};

#[derive(Debug, Clone)]
pub struct JointResult {
    /// User classes (0-based).
    pub pair: (usize, usize),
    /// Time-weighted law pooled over replications.
    pub pooled: JointPmf,
    pub pooled_iqr: f64,
    /// Interval over per-replication IQR values.
    pub iqr_ci: ConfidenceInterval,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    #[serde(skip)]
    pub replications: Vec<ReplicationStats>,
    pub seeds: Vec<u64>,
    pub arrivals: u64,
    pub time_avg: Vec<ConfidenceInterval>,
    pub idle_frac: Vec<ConfidenceInterval>,
    pub departure_rate: Vec<ConfidenceInterval>,
    /// Mean time in network of jobs leaving during the window.
    pub cycle_time: ConfidenceInterval,
    /// Cycle time via Little's law, `Σ_k Z̄_k / Σ_k α_k`.
    pub little_cycle_time: ConfidenceInterval,
    /// Per class, time-weighted pmf pooled over replications.
    pub hist: Vec<Vec<f64>>,
    #[serde(skip)]
    pub joint: Vec<JointResult>,
}

pub fn run_experiment(
    spec: &NetworkSpec,
    policy: &PriorityPolicy,
    config: &SimConfig,
) -> Result<SimulationResult> {
    if config.replications < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: config.replications,
        });
    }
    let seeds: Vec<u64> = (0..config.replications)
        .map(|i| replication_seed(config.seed, i))
        .collect();
    let replications = seeds
        .par_iter()
        .map(|&s| run_replication(spec, policy, config, s))
        .collect::<Result<Vec<_>>>()?;

    let k = spec.num_classes();
    let per_class = |f: &dyn Fn(&ReplicationStats, usize) -> f64| -> Result<Vec<ConfidenceInterval>> {
        (0..k)
            .map(|c| ci(&replications.iter().map(|r| f(r, c)).collect::<Vec<_>>()))
            .collect()
    };
    let time_avg = per_class(&|r, c| r.time_avg[c])?;
    let idle_frac = per_class(&|r, c| r.idle_frac[c])?;
    let departure_rate = per_class(&|r, c| r.departure_rate[c])?;
    let total_alpha: f64 = spec.arrival_rates().iter().sum();
    let cycle_time = ci(&replications.iter().map(|r| r.mean_sojourn).collect::<Vec<_>>())?;
    let little_cycle_time = ci(&replications
        .iter()
        .map(|r| r.time_avg.iter().sum::<f64>() / total_alpha)
        .collect::<Vec<_>>())?;

    let n = replications.len() as f64;
    let hist = (0..k)
        .map(|c| {
            let len = replications[0].hist[c].len();
            (0..len)
                .map(|b| replications.iter().map(|r| r.hist[c][b]).sum::<f64>() / n)
                .collect()
        })
        .collect();

    let joint = config
        .joint_pairs
        .iter()
        .enumerate()
        .map(|(p, &pair)| {
            let pooled = JointPmf::from_weights(
                replications.iter().flat_map(|r| r.joint[p].iter().copied()),
            )?;
            let pooled_iqr = iqr(&pooled)?;
            let per_rep = replications
                .iter()
                .map(|r| iqr(&JointPmf::from_weights(r.joint[p].iter().copied())?))
                .collect::<Result<Vec<_>>>()?;
            Ok(JointResult {
                pair,
                pooled,
                pooled_iqr,
                iqr_ci: ci(&per_rep)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulationResult {
        replications,
        seeds,
        arrivals: config.arrivals,
        time_avg,
        idle_frac,
        departure_rate,
        cycle_time,
        little_cycle_time,
        hist,
        joint,
    })
}
