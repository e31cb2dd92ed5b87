//! Exhaustive static-priority policy search on the heavy-traffic cycle-time
//! estimate.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{analyze, AnalysisOptions};
use crate::error::{Error, Result};
use crate::heavy_traffic::weighted_queue_estimate;
use crate::network::{NetworkSpec, PriorityPolicy};

pub const DEFAULT_POLICY_LIMIT: u128 = 1_000_000;
/// Relative tolerance under which two estimates count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// `∏_j |C(j)|!`, saturating.
pub fn policy_count(spec: &NetworkSpec) -> u128 {
    (0..spec.num_stations())
        .map(|j| (1..=spec.classes_at(j).len() as u128).fold(1u128, |a, b| a.saturating_mul(b)))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// All policies of the network in lexicographic order (station 1 varies
/// slowest, classes compared by index).
pub fn enumerate_policies(spec: &NetworkSpec, limit: u128) -> Result<Vec<PriorityPolicy>> {
    let count = policy_count(spec);
    if count > limit {
        return Err(Error::CombinatorialGuard { count, limit });
    }
    let per_station: Vec<Vec<Vec<usize>>> = (0..spec.num_stations())
        .map(|j| permutations(&spec.classes_at(j)))
        .collect();
    let mut out = vec![Vec::new()];
    for choices in &per_station {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<usize>>| {
                choices.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(PriorityPolicy::new).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Estimate { value: f64 },
    /// The policy violates a heavy-traffic assumption or its analysis
    /// could not be completed.
    Excluded { tag: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPolicy {
    pub policy: PriorityPolicy,
    pub outcome: Outcome,
    /// 1-based tie group among ranked policies; `None` when excluded.
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRanking {
    /// Ranked policies ascending by estimate, then excluded ones in
    /// enumeration order.
    pub entries: Vec<RankedPolicy>,
    pub num_groups: usize,
}

impl PolicyRanking {
    pub fn best(&self) -> Vec<&RankedPolicy> {
        self.entries.iter().filter(|e| e.group == Some(1)).collect()
    }

    pub fn group(&self, id: usize) -> Vec<&RankedPolicy> {
        self.entries.iter().filter(|e| e.group == Some(id)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RankOptions {
    /// Per-class weights on mean queue lengths. `None` ranks by the
    /// cycle-time estimate.
    pub weights: Option<Vec<f64>>,
    pub max_policies: u128,
    pub analysis: AnalysisOptions,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            weights: None,
            max_policies: DEFAULT_POLICY_LIMIT,
            analysis: AnalysisOptions::default(),
        }
    }
}

fn evaluate(spec: &NetworkSpec, policy: &PriorityPolicy, opts: &RankOptions) -> Outcome {
    match analyze(spec, policy, &opts.analysis) {
        Ok(report) => match (&report.failure, report.cycle_time) {
            (Some(f), _) => Outcome::Excluded {
                tag: f.tag().to_string(),
                message: f.to_string(),
            },
            (None, Some(ct)) => Outcome::Estimate {
                value: match &opts.weights {
                    Some(w) => weighted_queue_estimate(&report.constants, w),
                    None => ct,
                },
            },
            (None, None) => unreachable!("successful analysis always has a cycle time"),
        },
        Err(e) => Outcome::Excluded {
            tag: "analysis_error".to_string(),
            message: e.to_string(),
        },
    }
}

pub fn rank_policies(spec: &NetworkSpec, opts: &RankOptions) -> Result<PolicyRanking> {
    if let Some(w) = &opts.weights {
        if w.len() != spec.num_classes() {
            return Err(Error::Config(format!(
                "{} weights given for {} classes",
                w.len(),
                spec.num_classes()
            )));
        }
    }
    let policies = enumerate_policies(spec, opts.max_policies)?;
    let outcomes: Vec<Outcome> = policies.par_iter().map(|p| evaluate(spec, p, opts)).collect();

    let (mut ranked, excluded): (Vec<_>, Vec<_>) = policies
        .into_iter()
        .zip(outcomes)
        .map(|(policy, outcome)| RankedPolicy {
            policy,
            outcome,
            group: None,
        })
        .partition(|e| matches!(e.outcome, Outcome::Estimate { .. }));
    let value = |e: &RankedPolicy| match e.outcome {
        Outcome::Estimate { value } => value,
        Outcome::Excluded { .. } => f64::NAN,
    };
    ranked.sort_by(|a, b| value(a).total_cmp(&value(b)));

    let mut num_groups = 0;
    let mut anchor = f64::NAN;
    for e in ranked.iter_mut() {
        let v = value(e);
        if num_groups == 0 || (v - anchor).abs() > TIE_TOL * anchor.abs().max(v.abs()) {
            num_groups += 1;
            anchor = v;
        }
        e.group = Some(num_groups);
    }
    ranked.extend(excluded);
    Ok(PolicyRanking {
        entries: ranked,
        num_groups,
    })
}
