//! Subcommand implementations. Each returns the process exit status.

use std::fmt;
use std::io;
use std::path::Path;

use serde_json::{json, Value};

use sbpnet_core::analysis::{self, AnalysisOptions, AnalysisReport, ASSUMED};
use sbpnet_core::config::{self, Config};
use sbpnet_core::heavy_traffic::Geometric;
use sbpnet_core::linalg::{to_rows, Matrix};
use sbpnet_core::network::{PriorityPolicy, BUSY_FRACTION_CAVEAT};
use sbpnet_core::optimizer::{rank_policies, Outcome, RankOptions};
use sbpnet_core::sim::{hist_caps_for, run_experiment, SimConfig, SimulationResult};
use sbpnet_core::stats::{geometric_reference, hist_compare};
use sbpnet_core::Error;

use crate::output::{num, opt, sha256_hex, unix_now, OutDir, RunInfo};
use crate::EXIT_ASSUMPTION;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(io::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Status = Result<u8, Failure>;

#[derive(Debug, Default)]
pub struct SimOverrides {
    pub arrivals: Option<u64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub warmup_frac: Option<f64>,
    /// 1-based class pairs.
    pub joint: Vec<(usize, usize)>,
}

fn load(path: &Path, command: &str) -> Result<(Config, RunInfo), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
    let cfg = config::parse(&text)?;
    let run = RunInfo {
        command: command.to_string(),
        config_path: path.to_path_buf(),
        config_sha256: sha256_hex(&bytes),
        started: unix_now(),
    };
    Ok((cfg, run))
}

fn label(class: usize) -> String {
    (class + 1).to_string()
}

pub fn validate(path: &Path) -> Status {
    let (cfg, _) = load(path, "validate")?;
    let policy = cfg
        .policy
        .as_ref()
        .map(|p| p.to_string())
        .unwrap_or_else(|| "none".into());
    println!(
        "ok: {} stations, {} classes, policy {policy}",
        cfg.spec.num_stations(),
        cfg.spec.num_classes()
    );
    Ok(0)
}

fn matrix(m: Option<&Matrix>) -> Value {
    m.map(|m| json!(to_rows(m))).unwrap_or(Value::Null)
}

fn matrices_json(report: &AnalysisReport) -> Value {
    let ix = &report.indexing;
    let b = &report.bundle;
    let u: Vec<Value> = b
        .u
        .iter()
        .enumerate()
        .map(|(k, u)| json!({ "class": ix.user(k) + 1, "u": u.iter().copied().collect::<Vec<f64>>() }))
        .collect();
    json!({
        "status": report.failure.as_ref().map(|f| f.tag()).unwrap_or("ok"),
        "failure": report.failure.as_ref().map(|f| json!({ "detail": f.to_string(), "data": f })),
        "policy": report.policy.to_string(),
        "canonical_order": ix.user_order().iter().map(|&c| c + 1).collect::<Vec<_>>(),
        "num_low": ix.num_low(),
        "lambda": report.lambda,
        "rho": report.rho,
        "rho_note": BUSY_FRACTION_CAVEAT,
        "beta": report.beta,
        "stability_constraints": report.stability.iter().map(|c| json!({
            "name": c.name, "load": c.load, "satisfied": c.satisfied,
        })).collect::<Vec<_>>(),
        "B": to_rows(&b.b),
        "A": to_rows(&b.blocks.a),
        "Q": matrix(b.q.as_ref()),
        "R": matrix(b.r.as_ref()),
        "w": matrix(b.w.as_ref()),
        "u": u,
        "p_matrix": b.p_verdict,
        "diagnostics": {
            "A_H_condition_1": b.high_block_condition,
            "w_identity_residual": b.w_identity_residual,
            "station_identity_residual": b.station_identity_residual,
            "reflection_residuals": b.reflection_residuals,
        },
        "assumed_not_verified": ASSUMED,
    })
}

fn constants_rows(report: &AnalysisReport) -> Vec<Vec<String>> {
    let ix = &report.indexing;
    let mut rows: Vec<Vec<String>> = (0..ix.num_classes())
        .map(|c| {
            let user = ix.user(c);
            let role = if ix.is_low(c) { "L" } else { "H" };
            match report.constants.iter().find(|k| k.canonical == c) {
                Some(k) => vec![
                    label(user),
                    label(c),
                    role.into(),
                    num(k.sigma2),
                    num(k.one_minus_wkk),
                    num(k.mean_estimate),
                    num(k.geom_p),
                ],
                None => vec![label(user), label(c), role.into(), String::new(), String::new(), String::new(), String::new()],
            }
        })
        .collect();
    rows.push(vec![
        "cycle_time_estimate".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        opt(report.cycle_time),
        String::new(),
    ]);
    rows
}

pub fn analyze(path: &Path, out: &Path, strict: bool) -> Status {
    let (cfg, run) = load(path, "analyze")?;
    let policy = cfg.require_policy()?;
    let report = analysis::analyze(&cfg.spec, policy, &AnalysisOptions::default())?;
    let mut dir = OutDir::create(out)?;
    dir.json("matrices.json", &matrices_json(&report))?;
    dir.csv(
        "constants.csv",
        &["class_label", "canonical_index", "role", "sigma2", "one_minus_wkk", "mean_estimate", "geom_p"],
        &constants_rows(&report),
    )?;
    dir.manifest(&run, json!({ "policy": policy.to_string() }))?;

    println!("policy {}", report.policy);
    for (j, rho) in report.rho.iter().enumerate() {
        println!("station {}: rho = {}", j + 1, num(*rho));
    }
    for c in &report.stability {
        let verdict = if c.satisfied { "ok" } else { "VIOLATED" };
        println!("constraint {}: load = {} ({verdict})", c.name, num(c.load));
    }
    match &report.failure {
        None => {
            for k in &report.constants {
                println!("class {}: mean estimate {}", label(k.class), num(k.mean_estimate));
            }
            println!("cycle time estimate {}", opt(report.cycle_time));
            Ok(0)
        }
        Some(f) => {
            println!("assumption failure [{}]: {f}", f.tag());
            Ok(if strict { EXIT_ASSUMPTION } else { 0 })
        }
    }
}

fn sim_config(cfg: &Config, report: &AnalysisReport, o: &SimOverrides, joint: bool) -> Result<SimConfig, Failure> {
    let k = cfg.spec.num_classes();
    let mut sim = cfg.sim.clone();
    sim.arrivals = o.arrivals.unwrap_or(sim.arrivals);
    sim.replications = o.reps.unwrap_or(sim.replications);
    sim.seed = o.seed.unwrap_or(sim.seed);
    sim.warmup_frac = o.warmup_frac.unwrap_or(sim.warmup_frac);
    if !o.joint.is_empty() {
        sim.joint_pairs = o
            .joint
            .iter()
            .map(|&(a, b)| {
                if a > k || b > k {
                    Err(Error::Config(format!("--joint {a},{b}: classes are 1..={k}")))
                } else {
                    Ok((a - 1, b - 1))
                }
            })
            .collect::<Result<_, _>>()?;
    } else if sim.joint_pairs.is_empty() {
        let low: Vec<usize> = report.indexing.low_classes().map(|c| report.indexing.user(c)).collect();
        for (n, &a) in low.iter().enumerate() {
            for &b in &low[n + 1..] {
                sim.joint_pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    if !joint {
        sim.joint_pairs.clear();
    }
    if sim.hist_caps.is_empty() {
        sim.hist_caps = hist_caps_for(k, &report.constants);
    }
    Ok(sim)
}

fn sim_parameters(sim: &SimConfig, result: &SimulationResult, policy: &PriorityPolicy) -> Value {
    json!({
        "policy": policy.to_string(),
        "arrivals": sim.arrivals,
        "replications": sim.replications,
        "master_seed": sim.seed,
        "replication_seeds": result.seeds,
        "warmup_frac": sim.warmup_frac,
        "joint_pairs": sim.joint_pairs.iter().map(|&(a, b)| [a + 1, b + 1]).collect::<Vec<_>>(),
        "hist_caps": sim.hist_caps,
    })
}

fn hist_rows(pmf: &[f64], reference: Option<&[f64]>) -> Vec<Vec<String>> {
    let cap = pmf.len() - 2;
    pmf.iter()
        .enumerate()
        .map(|(n, p)| {
            let value = if n <= cap { n.to_string() } else { format!(">{cap}") };
            vec![value, num(*p), reference.map(|r| num(r[n])).unwrap_or_default()]
        })
        .collect()
}

pub fn simulate(path: &Path, out: &Path, strict: bool, o: &SimOverrides) -> Status {
    let (cfg, run) = load(path, "simulate")?;
    let policy = cfg.require_policy()?.clone();
    let report = analysis::analyze(&cfg.spec, &policy, &AnalysisOptions::default())?;
    let sim = sim_config(&cfg, &report, o, true)?;
    let result = run_experiment(&cfg.spec, &policy, &sim)?;
    let mut dir = OutDir::create(out)?;

    let k = cfg.spec.num_classes();
    let mut rows: Vec<Vec<String>> = (0..k)
        .map(|c| {
            vec![
                label(c),
                num(result.time_avg[c].mean),
                num(result.time_avg[c].half_width),
                num(result.idle_frac[c].mean),
                num(result.idle_frac[c].half_width),
                num(report.beta[c]),
                opt(report.mean_estimate(c)),
            ]
        })
        .collect();
    for j in &result.joint {
        let tag = format!("{}_{}", j.pair.0 + 1, j.pair.1 + 1);
        let blank = || vec![String::new(); 4];
        let mut row = vec![format!("iqr_{tag}"), num(j.iqr_ci.mean), num(j.iqr_ci.half_width)];
        row.extend(blank());
        rows.push(row);
        let mut row = vec![format!("iqr_pooled_{tag}"), num(j.pooled_iqr), String::new()];
        row.extend(blank());
        rows.push(row);
    }
    dir.csv(
        "summary.csv",
        &["class", "mean", "ci", "idle_frac", "idle_ci", "beta_exact", "mean_estimate"],
        &rows,
    )?;

    for c in 0..k {
        let pmf = &result.hist[c];
        let reference = report
            .mean_estimate(c)
            .and_then(|m| Geometric::with_mean(m).ok())
            .map(|g| geometric_reference(&g, pmf.len() - 2));
        dir.csv(
            &format!("hist_{}.csv", label(c)),
            &["value", "probability", "geom_reference"],
            &hist_rows(pmf, reference.as_deref()),
        )?;
        if let Some(reference) = reference {
            let cmp = hist_compare(pmf, &reference)?;
            let mut rows = vec![vec!["total_variation".into(), num(cmp.total_variation)]];
            for t in &cmp.tails {
                let q = format!("q{}", (t.level * 100.0).round());
                rows.push(vec![format!("{q}_threshold"), t.threshold.to_string()]);
                rows.push(vec![format!("{q}_tail_empirical"), num(t.empirical)]);
                rows.push(vec![format!("{q}_tail_reference"), num(t.reference)]);
                rows.push(vec![format!("{q}_tail_ratio"), num(t.ratio)]);
            }
            dir.csv(&format!("hist_report_{}.csv", label(c)), &["metric", "value"], &rows)?;
        }
    }

    for j in &result.joint {
        let rows: Vec<Vec<String>> = j
            .pooled
            .cells()
            .map(|(x, y, p)| vec![x.to_string(), y.to_string(), num(p)])
            .collect();
        dir.csv(
            &format!("joint_{}_{}.csv", j.pair.0 + 1, j.pair.1 + 1),
            &["x", "y", "probability"],
            &rows,
        )?;
    }

    dir.csv(
        "cycletime.csv",
        &["metric", "mean", "ci"],
        &[
            vec!["sojourn".into(), num(result.cycle_time.mean), num(result.cycle_time.half_width)],
            vec![
                "littles_law".into(),
                num(result.little_cycle_time.mean),
                num(result.little_cycle_time.half_width),
            ],
            vec!["heavy_traffic_estimate".into(), opt(report.cycle_time), String::new()],
        ],
    )?;
    dir.manifest(&run, sim_parameters(&sim, &result, &policy))?;

    println!(
        "{} replications x {} arrivals (warm-up {}), policy {policy}",
        sim.replications, sim.arrivals, sim.warmup_frac
    );
    for c in 0..k {
        println!(
            "class {}: mean {} +- {}, estimate {}",
            label(c),
            num(result.time_avg[c].mean),
            num(result.time_avg[c].half_width),
            opt(report.mean_estimate(c))
        );
    }
    for j in &result.joint {
        println!(
            "IQR({},{}) = {} +- {} (pooled {})",
            j.pair.0 + 1,
            j.pair.1 + 1,
            num(j.iqr_ci.mean),
            num(j.iqr_ci.half_width),
            num(j.pooled_iqr)
        );
    }
    println!(
        "cycle time {} +- {}",
        num(result.cycle_time.mean),
        num(result.cycle_time.half_width)
    );
    match &report.failure {
        Some(f) => {
            println!("assumption failure [{}]: {f}", f.tag());
            Ok(if strict { EXIT_ASSUMPTION } else { 0 })
        }
        None => Ok(0),
    }
}

pub fn idle_check(path: &Path, out: &Path, o: &SimOverrides) -> Status {
    let (cfg, run) = load(path, "idle-check")?;
    let policy = cfg.require_policy()?.clone();
    let report = analysis::analyze(&cfg.spec, &policy, &AnalysisOptions::default())?;
    let sim = sim_config(&cfg, &report, o, false)?;
    let result = run_experiment(&cfg.spec, &policy, &sim)?;
    let mut dir = OutDir::create(out)?;
    let mut failures = 0;
    let rows: Vec<Vec<String>> = (0..cfg.spec.num_classes())
        .map(|c| {
            let beta = report.beta[c];
            let est = result.idle_frac[c];
            let gap = (est.mean - beta).abs();
            let pass = gap <= 3.0 * est.half_width || gap <= 1e-9;
            if !pass {
                failures += 1;
            }
            println!(
                "class {}: beta {} idle {} +- {} {}",
                label(c),
                num(beta),
                num(est.mean),
                num(est.half_width),
                if pass { "pass" } else { "FAIL" }
            );
            vec![label(c), num(beta), num(est.mean), num(est.half_width), pass.to_string()]
        })
        .collect();
    dir.csv("idle_check.csv", &["class", "beta_exact", "idle_sim", "ci", "pass"], &rows)?;
    dir.manifest(&run, sim_parameters(&sim, &result, &policy))?;
    println!("{failures} class(es) outside 3 half-widths");
    Ok(0)
}

pub fn optimize(path: &Path, out: &Path, max_policies: Option<u64>) -> Status {
    let (cfg, run) = load(path, "optimize")?;
    let opts = RankOptions {
        weights: cfg.optimize.weights.clone(),
        max_policies: max_policies.map(u128::from).unwrap_or(cfg.optimize.max_policies),
        ..RankOptions::default()
    };
    let ranking = rank_policies(&cfg.spec, &opts)?;
    let rows: Vec<Vec<String>> = ranking
        .entries
        .iter()
        .map(|e| {
            let value = match &e.outcome {
                Outcome::Estimate { value } => num(*value),
                Outcome::Excluded { tag, .. } => tag.clone(),
            };
            vec![e.policy.to_string(), value, e.group.map(|g| g.to_string()).unwrap_or_default()]
        })
        .collect();
    let mut dir = OutDir::create(out)?;
    dir.csv("ranking.csv", &["policy", "estimate_or_tag", "group_id"], &rows)?;
    dir.manifest(
        &run,
        json!({
            "objective": if opts.weights.is_some() { "weighted_mean_queue" } else { "cycle_time" },
            "weights": opts.weights,
            "max_policies": opts.max_policies.to_string(),
        }),
    )?;
    for e in &ranking.entries {
        match &e.outcome {
            Outcome::Estimate { value } => {
                println!("{:>3}  {}  {}", e.group.unwrap_or(0), e.policy, num(*value))
            }
            Outcome::Excluded { tag, message } => println!("  -  {}  {tag}: {message}", e.policy),
        }
    }
    println!("high-priority orderings within a group tie in the limit; simulate to separate them");
    Ok(0)
}
