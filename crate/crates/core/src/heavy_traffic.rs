//! Limit constants and the steady-state approximations built from them.
//!
//! For each low-priority class `k` (station `k` in canonical order) the
//! scaled queue length is approximately exponential with mean
//! `d_k / (1 − ρ_k)`, where `d_k = σ_k² / (2 (1 − w_kk) μ_k)` and
//! `σ_k² = 2 q*(u⁽ᵏ⁾)`. Everything is evaluated at the network's own
//! parameters; the multi-scale slack `r^k b_k` is replaced by `1 − ρ_k`.

use serde::Serialize;

use crate::analysis::{analyze, AnalysisOptions};
use crate::error::{Error, Result};
use crate::network::{solve_traffic, traffic_intensities, CanonicalIndexing, NetworkSpec, PriorityPolicy};
use crate::primitives::Primitives;
use crate::reflection::MatrixBundle;

fn routed(prim: &Primitives, theta: &[f64], l: usize) -> (f64, f64) {
    let row = prim.routing.row(l);
    let mut first = 0.0;
    let mut second = 0.0;
    for (p, t) in row.iter().zip(theta) {
        first += p * t;
        second += p * t * t;
    }
    (first, second)
}

/// The quadratic variance functional `q*(θ)`.
pub fn qstar(prim: &Primitives, theta: &[f64]) -> f64 {
    let k = prim.num_classes();
    assert_eq!(theta.len(), k);
    let arrivals: f64 = (0..k)
        .filter(|&l| prim.alpha[l] > 0.0)
        .map(|l| prim.alpha[l] * prim.scv_arrival[l] * theta[l] * theta[l])
        .sum();
    let services: f64 = (0..k)
        .map(|l| {
            let (pt, pt2) = routed(prim, theta, l);
            let drift = -theta[l] + pt;
            prim.lambda[l] * (pt2 - pt * pt + prim.scv_service[l] * drift * drift)
        })
        .sum();
    0.5 * (arrivals + services)
}

/// `ζ̄_l(θ) = −θ_l + Σ_{l'} P_{ll'} θ_{l'}`.
pub fn zeta_bar(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    (0..prim.num_classes())
        .map(|l| -theta[l] + routed(prim, theta, l).0)
        .collect()
}

/// Second-order service/routing term `ζ̃_l(θ)`.
pub fn zeta_tilde(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    (0..prim.num_classes())
        .map(|l| {
            let (pt, pt2) = routed(prim, theta, l);
            let drift = -theta[l] + pt;
            0.5 * (pt2 - pt * pt + prim.scv_service[l] * drift * drift)
        })
        .collect()
}

pub fn zeta_star(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    zeta_bar(prim, theta)
        .into_iter()
        .zip(zeta_tilde(prim, theta))
        .map(|(a, b)| a + b)
        .collect()
}

/// `γ̄_l(θ_l) = θ_l` for externally fed classes, zero elsewhere.
pub fn gamma_bar(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    (0..prim.num_classes())
        .map(|l| if prim.alpha[l] > 0.0 { theta[l] } else { 0.0 })
        .collect()
}

/// `γ̃_l(θ_l) = ½ c²_{e,l} θ_l²` for externally fed classes, zero elsewhere.
pub fn gamma_tilde(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    (0..prim.num_classes())
        .map(|l| {
            if prim.alpha[l] > 0.0 {
                0.5 * prim.scv_arrival[l] * theta[l] * theta[l]
            } else {
                0.0
            }
        })
        .collect()
}

pub fn gamma_star(prim: &Primitives, theta: &[f64]) -> Vec<f64> {
    gamma_bar(prim, theta)
        .into_iter()
        .zip(gamma_tilde(prim, theta))
        .map(|(a, b)| a + b)
        .collect()
}

/// `Σ_E α_l γ*_l(θ_l) + Σ_K λ_l ζ*_l(θ)`, which equals `q*(θ)` because the
/// first-order terms cancel through the traffic equations.
pub fn qstar_decomposed(prim: &Primitives, theta: &[f64]) -> f64 {
    let g = gamma_star(prim, theta);
    let z = zeta_star(prim, theta);
    (0..prim.num_classes())
        .map(|l| prim.alpha[l] * g[l] + prim.lambda[l] * z[l])
        .sum()
}

/// `Σ_E α_l θ_l + Σ_K λ_l ζ̄_l(θ)`; zero for every θ.
pub fn traffic_identity(prim: &Primitives, theta: &[f64]) -> f64 {
    let z = zeta_bar(prim, theta);
    (0..prim.num_classes())
        .map(|l| prim.alpha[l] * theta[l] + prim.lambda[l] * z[l])
        .sum()
}

/// Limit constants of one low-priority class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowClassConstants {
    /// User class (0-based).
    pub class: usize,
    /// Canonical index, equal to the station index.
    pub canonical: usize,
    pub sigma2: f64,
    pub one_minus_wkk: f64,
    pub mu: f64,
    /// `1 − ρ` of the class's station.
    pub slack: f64,
    /// `σ² / (2 (1 − w_kk) μ)`: the mean estimate times the slack.
    pub d: f64,
    /// Approximate mean queue length `d / (1 − ρ)`.
    pub mean_estimate: f64,
    /// `P(Z = 0)` of the mean-matched geometric on {0, 1, …}.
    pub geom_p: f64,
}

/// Constants from an already built (and successful) matrix bundle.
pub fn constants_from_bundle(
    prim: &Primitives,
    ix: &CanonicalIndexing,
    bundle: &MatrixBundle,
) -> Vec<LowClassConstants> {
    let rho = prim.intensities();
    let mu = prim.rates();
    ix.low_classes()
        .map(|k| {
            let u: Vec<f64> = bundle.u[k].iter().copied().collect();
            let sigma2 = 2.0 * qstar(prim, &u);
            let one_minus_wkk = bundle.one_minus_wkk[k];
            let slack = 1.0 - rho[k];
            let d = sigma2 / (2.0 * one_minus_wkk * mu[k]);
            let mean_estimate = d / slack;
            LowClassConstants {
                class: ix.user(k),
                canonical: k,
                sigma2,
                one_minus_wkk,
                mu: mu[k],
                slack,
                d,
                mean_estimate,
                geom_p: 1.0 / (1.0 + mean_estimate),
            }
        })
        .collect()
}

/// Runs the full pipeline and returns the low-class constants, or the
/// assumption failure that prevents them.
pub fn compute_constants(spec: &NetworkSpec, policy: &PriorityPolicy) -> Result<Vec<LowClassConstants>> {
    let report = analyze(spec, policy, &AnalysisOptions::default())?;
    match report.failure {
        Some(f) => Err(Error::Assumption(f)),
        None => Ok(report.constants),
    }
}

/// The two hand-derived mean constants `(d₁, d₄)` of the re-entrant line
/// 1 → 2 → 3 → 4 → 5 under priorities (5,3,1) at station 1 and (2,4) at
/// station 2. Independent of the matrix pipeline; used to check it.
pub fn closed_form_d(spec: &NetworkSpec) -> Result<(f64, f64)> {
    let mismatch = |msg: &str| Err(Error::TopologyMismatch(msg.to_string()));
    if spec.num_stations() != 2 || spec.num_classes() != 5 {
        return mismatch("need 2 stations and 5 classes");
    }
    if (0..5).any(|k| spec.station_of(k) != [0, 1, 0, 1, 0][k]) {
        return mismatch("classes 1, 3, 5 must be at station 1 and classes 2, 4 at station 2");
    }
    for (i, row) in spec.routing.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let want = if j == i + 1 { 1.0 } else { 0.0 };
            if p != want {
                return mismatch("routing must be the deterministic chain 1 -> 2 -> 3 -> 4 -> 5");
            }
        }
    }
    if spec.classes[1..].iter().any(|c| c.arrival_rate != 0.0) {
        return mismatch("only class 1 may receive external arrivals");
    }
    let alpha = spec.classes[0].arrival_rate;
    let m: Vec<f64> = spec.mean_services();
    let (m1, m2, m3, m4, m5) = (m[0], m[1], m[2], m[3], m[4]);
    let ce = spec.scv_arrival(0);
    let cs: Vec<f64> = (0..5).map(|k| spec.scv_service(k)).collect();

    let g = m1 + m3 - m5 * m2 / m4;
    let d1 = alpha / (2.0 * g)
        * (g * g * ce
            + m1 * m1 * cs[0]
            + m3 * m3 * cs[2]
            + m5 * m5 * cs[4]
            + (m5 / m4).powi(2) * (m2 * m2 * cs[1] + m4 * m4 * cs[3]));
    let d4 = alpha / (2.0 * m4) * ((m2 + m4).powi(2) * ce + m2 * m2 * cs[1] + m4 * m4 * cs[3]);
    Ok((d1, d4))
}

/// Geometric law on {0, 1, 2, …} with a given mean, the integer-valued
/// counterpart of an exponential limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometric {
    mean: f64,
}

impl Geometric {
    pub fn with_mean(mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::NonpositiveMean(mean));
        }
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Ratio `M / (1 + M)` between consecutive probabilities.
    pub fn ratio(&self) -> f64 {
        self.mean / (1.0 + self.mean)
    }

    pub fn pmf(&self, n: u64) -> f64 {
        (1.0 / (1.0 + self.mean)) * self.ratio().powf(n as f64)
    }

    /// `P(Z > n)`.
    pub fn tail(&self, n: u64) -> f64 {
        self.ratio().powf(n as f64 + 1.0)
    }

    /// Smallest `n` with `P(Z ≤ n) ≥ q`.
    pub fn quantile(&self, q: f64) -> u64 {
        if q <= 0.0 {
            return 0;
        }
        // P(Z ≤ n) = 1 − ratio^{n+1} ≥ q  ⇔  n + 1 ≥ ln(1−q)/ln(ratio)
        let n = ((1.0 - q).ln() / self.ratio().ln()).ceil() - 1.0;
        let mut n = n.max(0.0) as u64;
        while 1.0 - self.tail(n) < q {
            n += 1;
        }
        while n > 0 && 1.0 - self.tail(n - 1) >= q {
            n -= 1;
        }
        n
    }
}

/// Little's-law cycle time with high-priority queues dropped:
/// `Σ_{k∈L} E[Z_k] / Σ_E α_l`.
pub fn cycle_time_estimate(spec: &NetworkSpec, constants: &[LowClassConstants]) -> f64 {
    let total_arrival: f64 = spec.arrival_rates().iter().sum();
    constants.iter().map(|c| c.mean_estimate).sum::<f64>() / total_arrival
}

/// `Σ_k weight_k E[Z_k]` over low classes; `weights` is indexed by user class.
pub fn weighted_queue_estimate(constants: &[LowClassConstants], weights: &[f64]) -> f64 {
    constants
        .iter()
        .map(|c| weights[c.class] * c.mean_estimate)
        .sum()
}

fn unit_load_check(spec: &NetworkSpec, lambda: &[f64]) -> Result<()> {
    for (j, rho) in traffic_intensities(spec, lambda).into_iter().enumerate() {
        if (rho - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitLoad { station: j + 1, rho });
        }
    }
    Ok(())
}

/// A family `m^{(r)}_k = m_k + r^{s(k)} m*_k` whose station `j` has slack
/// exactly `r^j b_j` (stations numbered from 1).
#[derive(Debug, Clone)]
pub struct MultiScaleFamily {
    base: NetworkSpec,
    perturbation: Vec<f64>,
    b: Vec<f64>,
}

/// Puts the whole perturbation on the low-priority classes:
/// `m*_k = −b_{s(k)} / λ_k` for `k ∈ L`, zero otherwise.
pub fn build_multiscale_family(
    base: &NetworkSpec,
    policy: &PriorityPolicy,
    b: &[f64],
) -> Result<MultiScaleFamily> {
    let lambda = solve_traffic(base)?;
    unit_load_check(base, &lambda)?;
    if b.len() != base.num_stations() || b.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Config(format!(
            "b must have {} positive entries",
            base.num_stations()
        )));
    }
    let ix = crate::network::canonicalize(base, policy)?;
    let mut perturbation = vec![0.0; base.num_classes()];
    for j in ix.low_classes() {
        let k = ix.user(j);
        perturbation[k] = -b[j] / lambda[k];
    }
    Ok(MultiScaleFamily {
        base: base.clone(),
        perturbation,
        b: b.to_vec(),
    })
}

impl MultiScaleFamily {
    pub fn perturbation(&self) -> &[f64] {
        &self.perturbation
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn base(&self) -> &NetworkSpec {
        &self.base
    }

    /// Supremum of `r` for which every member mean stays positive.
    pub fn max_r(&self) -> f64 {
        self.base
            .classes
            .iter()
            .zip(&self.perturbation)
            .filter(|(_, &p)| p < 0.0)
            .map(|(c, &p)| (c.mean_service / -p).powf(1.0 / (c.station + 1) as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn member(&self, r: f64) -> Result<NetworkSpec> {
        let means: Vec<f64> = self
            .base
            .classes
            .iter()
            .zip(&self.perturbation)
            .map(|(c, &p)| c.mean_service + r.powi(c.station as i32 + 1) * p)
            .collect();
        if let Some(k) = means.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::NegativeServiceMean {
                class: k + 1,
                r,
                r_max: self.max_r(),
            });
        }
        Ok(self.base.with_means(&means))
    }
}

/// Networks obtained by scaling unit-load service means station by station:
/// `m_k = ρ_{s(k)} m̄_k`.
#[derive(Debug, Clone)]
pub struct LoadProfileFamily {
    base: NetworkSpec,
}

impl LoadProfileFamily {
    pub fn new(base: &NetworkSpec) -> Result<Self> {
        let lambda = solve_traffic(base)?;
        unit_load_check(base, &lambda)?;
        Ok(Self { base: base.clone() })
    }

    pub fn member(&self, rho: &[f64]) -> NetworkSpec {
        let means: Vec<f64> = self
            .base
            .classes
            .iter()
            .map(|c| rho[c.station] * c.mean_service)
            .collect();
        self.base.with_means(&means)
    }
}

pub fn build_load_profile(base: &NetworkSpec, rho: &[f64]) -> Result<NetworkSpec> {
    Ok(LoadProfileFamily::new(base)?.member(rho))
}
