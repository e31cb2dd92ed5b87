mod common;

use sbpnet_core::analysis::{analyze, AnalysisOptions};
use sbpnet_core::heavy_traffic::{closed_form_d, compute_constants};
use sbpnet_core::network::PriorityPolicy;
use sbpnet_core::optimizer::{rank_policies, Outcome, RankOptions};
use sbpnet_core::presets;

fn means(rho1: f64, rho2: f64) -> (f64, f64) {
    let c = compute_constants(
        &presets::two_station_five_class(rho1, rho2),
        &presets::reentrant_policy_lbfs_fbfs(),
    )
    .unwrap();
    (c[0].mean_estimate, c[1].mean_estimate)
}

#[test]
fn reentrant_mean_estimates_match_reference_values() {
    for (rho1, class1) in [(0.90, 7.53), (0.96, 20.08), (0.99, 82.83)] {
        let (m1, m4) = means(rho1, 0.99);
        assert!((m1 - class1).abs() <= 0.01, "rho1 = {rho1}: {m1}");
        assert!((m4 - 167.75).abs() <= 0.01, "{m4}");
    }
}

#[test]
fn pipeline_agrees_with_hand_derived_constants() {
    for rho1 in [0.9, 0.96, 0.99] {
        let spec = presets::two_station_five_class(rho1, 0.99);
        let (d1, d4) = closed_form_d(&spec).unwrap();
        let c = compute_constants(&spec, &presets::reentrant_policy_lbfs_fbfs()).unwrap();
        assert!((c[0].d - d1).abs() < 1e-9 * d1);
        assert!((c[1].d - d4).abs() < 1e-9 * d4);
    }
    let (d1, d4) = closed_form_d(&presets::two_station_five_class(0.96, 0.99)).unwrap();
    assert!((d4 - 1.6775).abs() < 1e-12);
    assert!((d1 - 0.803_157_894_736_84).abs() < 1e-12);
}

#[test]
fn policy_ranking_matches_reference_table() {
    let spec = presets::two_station_five_class(0.96, 0.99);
    let r = rank_policies(&spec, &RankOptions::default()).unwrap();
    let expected = [
        134.862, 134.862, 157.891, 157.891, 180.920, 180.920, 187.828, 187.828, 217.947, 217.947,
        217.947, 217.947,
    ];
    let truncated = |x: f64| (x * 1000.0 + 1e-6).floor();
    for (e, printed) in r.entries.iter().zip(expected) {
        let value = match e.outcome {
            Outcome::Estimate { value } => value,
            Outcome::Excluded { .. } => panic!("{} excluded", e.policy),
        };
        assert!((value - printed).abs() < 2e-3, "{value} vs {printed}");
        // The reference column is the sum of the per-class means, each cut
        // to three decimals (after absorbing round-off in the last digits).
        let c = compute_constants(&spec, &e.policy).unwrap();
        let cut: f64 = c.iter().map(|c| truncated(c.mean_estimate)).sum();
        assert_eq!(cut, (printed * 1000.0_f64).round(), "{}", e.policy);
    }
    let groups: Vec<usize> = (1..=r.num_groups).map(|g| r.group(g).len()).collect();
    assert_eq!(groups, vec![2, 2, 2, 2, 4]);
    // Policies with the same low-priority classes differ only in the order
    // of high-priority classes and must share a group.
    let lows = |e: &sbpnet_core::optimizer::RankedPolicy| -> Vec<usize> {
        e.policy.stations.iter().map(|s| *s.last().unwrap()).collect()
    };
    for a in &r.entries {
        for b in &r.entries {
            if lows(a) == lows(b) {
                assert_eq!(a.group, b.group, "{} vs {}", a.policy, b.policy);
            }
        }
    }
}

#[test]
fn high_priority_swaps_give_identical_estimates() {
    let spec = presets::two_station_five_class(0.96, 0.99);
    let a = analyze(&spec, &PriorityPolicy::from_labels(&[[5, 3, 1].as_slice(), &[2, 4]]), &AnalysisOptions::default()).unwrap();
    let b = analyze(&spec, &PriorityPolicy::from_labels(&[[3, 5, 1].as_slice(), &[2, 4]]), &AnalysisOptions::default()).unwrap();
    let (x, y) = (a.cycle_time.unwrap(), b.cycle_time.unwrap());
    assert!((x - y).abs() <= 1e-12 * x, "{x} vs {y}");
}

#[test]
fn single_class_exponential_queue_is_exact() {
    for rho in [0.2, 0.5, 0.9, 0.99] {
        let c = compute_constants(&presets::mm1(rho), &PriorityPolicy::new(vec![vec![0]])).unwrap();
        let exact = common::mm1_mean(rho);
        assert!((c[0].mean_estimate - exact).abs() <= 1e-12 * exact.max(1.0));
    }
}

#[test]
fn ranking_is_invariant_under_relabeling() {
    let spec = presets::two_station_five_class(0.96, 0.99);
    let perm = [2, 0, 4, 1, 3];
    let mut relabeled = spec.clone();
    for k in 0..5 {
        relabeled.classes[perm[k]] = spec.classes[k].clone();
        for l in 0..5 {
            relabeled.routing[perm[k]][perm[l]] = spec.routing[k][l];
        }
    }
    let a = rank_policies(&spec, &RankOptions::default()).unwrap();
    let b = rank_policies(&relabeled, &RankOptions::default()).unwrap();
    let key = |r: &sbpnet_core::optimizer::PolicyRanking, map: &dyn Fn(usize) -> usize| {
        let mut v: Vec<(Vec<Vec<usize>>, usize)> = r
            .entries
            .iter()
            .map(|e| {
                let p: Vec<Vec<usize>> = e.policy.stations.iter().map(|s| s.iter().map(|&c| map(c)).collect()).collect();
                (p, e.group.unwrap())
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(key(&a, &|c| perm[c]), key(&b, &|c| c));
}
