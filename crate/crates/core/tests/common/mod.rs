//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the analytic pipeline.

#![allow(dead_code)]

use sbpnet_core::distribution::DistributionSpec;
use sbpnet_core::network::{ClassSpec, NetworkSpec, PriorityPolicy};
use sbpnet_core::sim::rng::splitmix64;

pub fn mm1_mean(rho: f64) -> f64 {
    rho / (1.0 - rho)
}

/// Pollaczek–Khinchine number in system for M/D/1.
pub fn md1_mean(rho: f64) -> f64 {
    rho + rho * rho / (2.0 * (1.0 - rho))
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(j, _)| j != c)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// All principal minors, keyed by their 0-based index sets in mask order.
pub fn principal_minors(m: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let n = m.len();
    (1u32..(1u32 << n))
        .map(|mask| {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sub: Vec<Vec<f64>> = set
                .iter()
                .map(|&i| set.iter().map(|&j| m[i][j]).collect())
                .collect();
            let d = cofactor_det(&sub);
            (set, d)
        })
        .collect()
}

/// Stationary mean queue lengths of a preemptive two-class M/M/1 priority
/// station (class 1 high), from the CTMC truncated at `cap` jobs per class
/// and solved by Gauss–Seidel.
pub fn priority_ctmc_means(alpha: [f64; 2], mu: [f64; 2], cap: usize) -> (f64, f64) {
    let n = cap + 1;
    let idx = |a: usize, b: usize| a * n + b;
    let out_rate = |a: usize, b: usize| {
        let mut r = 0.0;
        if a < cap {
            r += alpha[0];
        }
        if b < cap {
            r += alpha[1];
        }
        if a > 0 {
            r += mu[0];
        } else if b > 0 {
            r += mu[1];
        }
        r
    };
    let mut pi = vec![1.0 / (n * n) as f64; n * n];
    for _ in 0..100_000 {
        let mut delta = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                let mut inflow = 0.0;
                if a > 0 {
                    inflow += pi[idx(a - 1, b)] * alpha[0];
                }
                if b > 0 {
                    inflow += pi[idx(a, b - 1)] * alpha[1];
                }
                if a < cap {
                    inflow += pi[idx(a + 1, b)] * mu[0];
                }
                if a == 0 && b < cap {
                    inflow += pi[idx(0, b + 1)] * mu[1];
                }
                let new = inflow / out_rate(a, b);
                delta = delta.max((new - pi[idx(a, b)]).abs());
                pi[idx(a, b)] = new;
            }
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        if delta < 1e-14 {
            break;
        }
    }
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for a in 0..n {
        for b in 0..n {
            l1 += a as f64 * pi[idx(a, b)];
            l2 += b as f64 * pi[idx(a, b)];
        }
    }
    (l1, l2)
}

/// Deterministic pseudo-random source for instance generation.
pub struct Draw(u64);

impl Draw {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(1);
        splitmix64(self.0)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn shuffle(&mut self, items: &mut [usize]) {
        for i in (1..items.len()).rev() {
            items.swap(i, self.below(i + 1));
        }
    }
}

/// A random open network with `J ≤ 3` stations, `K ≤ 8` classes, station
/// loads in [0.5, 0.95], and a random static priority policy.
pub fn random_instance(seed: u64) -> (NetworkSpec, PriorityPolicy) {
    let mut d = Draw::new(seed);
    let j = 1 + d.below(3);
    let k = j + d.below(8 - j + 1);
    let mut station: Vec<usize> = (0..k).map(|c| if c < j { c } else { d.below(j) }).collect();
    d.shuffle(&mut station);
    let dist = |d: &mut Draw| match d.below(4) {
        0 => DistributionSpec::exponential(),
        1 => DistributionSpec::deterministic(),
        2 => DistributionSpec::hyperexponential2(d.uniform(1.0, 4.0)),
        _ => DistributionSpec::gamma(d.uniform(0.1, 3.0)),
    };
    let mut routing = vec![vec![0.0; k]; k];
    for row in routing.iter_mut() {
        let exit = d.uniform(0.1, 1.0);
        let targets = d.below(3);
        let weights: Vec<(usize, f64)> = (0..targets).map(|_| (d.below(k), d.uniform(0.1, 1.0))).collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        for (l, w) in weights {
            row[l] += (1.0 - exit) * w / total;
        }
    }
    let mut classes: Vec<ClassSpec> = (0..k)
        .map(|c| {
            let external = c == 0 || d.below(2) == 0;
            ClassSpec {
                station: station[c],
                arrival_rate: if external { d.uniform(0.2, 2.0) } else { 0.0 },
                mean_service: d.uniform(0.1, 1.0),
                arrival_dist: external.then(|| dist(&mut d)),
                service_dist: dist(&mut d),
            }
        })
        .collect();

    // λ by fixed-point iteration on λ = α + Pᵀλ (row sums ≤ 0.9).
    let mut lambda: Vec<f64> = classes.iter().map(|c| c.arrival_rate).collect();
    for _ in 0..2000 {
        lambda = (0..k)
            .map(|l| classes[l].arrival_rate + (0..k).map(|i| routing[i][l] * lambda[i]).sum::<f64>())
            .collect();
    }
    for s in 0..j {
        let target = d.uniform(0.5, 0.95);
        let load: f64 = (0..k)
            .filter(|&c| station[c] == s)
            .map(|c| lambda[c] * classes[c].mean_service)
            .sum();
        if load > 0.0 {
            for c in classes.iter_mut().filter(|c| c.station == s) {
                c.mean_service *= target / load;
            }
        }
    }
    let policy = PriorityPolicy::new(
        (0..j)
            .map(|s| {
                let mut at: Vec<usize> = (0..k).filter(|&c| station[c] == s).collect();
                d.shuffle(&mut at);
                at
            })
            .collect(),
    );
    let spec = NetworkSpec {
        station_names: (1..=j).map(|s| format!("s{s}")).collect(),
        classes,
        routing,
        stability_constraints: Vec::new(),
    };
    (spec, policy)
}

/// Worst residuals of the structural identities on one instance. `None`
/// entries could not be evaluated because `A_H` is singular.
#[derive(Debug, Clone, Default)]
pub struct Structural {
    pub p_verdict_agrees: Option<bool>,
    pub w_identity: Option<f64>,
    pub u_alternative: Option<f64>,
    pub station_identity: Option<f64>,
    pub reflection_tilde: Option<f64>,
    pub reflection_bar: Option<f64>,
    pub qstar_min: f64,
    pub decomposition: f64,
    pub traffic_identity: f64,
}

impl Structural {
    /// Checks every evaluated residual against the suite tolerances.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.p_verdict_agrees == Some(false) {
            out.push("P-matrix verdict differs from brute force".to_string());
        }
        let mut limit = |name: &str, v: Option<f64>, tol: f64| {
            if let Some(v) = v {
                if !(v <= tol) {
                    out.push(format!("{name} residual {v:e} > {tol:e}"));
                }
            }
        };
        limit("w fixed point", self.w_identity, 1e-10);
        limit("u alternative", self.u_alternative, 1e-8);
        limit("station identity", self.station_identity, 1e-8);
        limit("R tilde", self.reflection_tilde, 1e-8);
        limit("R bar", self.reflection_bar, 1e-8);
        limit("q* decomposition", Some(self.decomposition), 1e-12);
        limit("traffic identity", Some(self.traffic_identity), 1e-12);
        if self.qstar_min < -1e-12 {
            out.push(format!("q* negative: {:e}", self.qstar_min));
        }
        out
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn structural(spec: &NetworkSpec, policy: &PriorityPolicy) -> Structural {
    use sbpnet_core::heavy_traffic::{qstar, qstar_decomposed, traffic_identity};
    use sbpnet_core::linalg::Matrix;
    use sbpnet_core::network::{canonicalize, solve_traffic};
    use sbpnet_core::primitives::Primitives;
    use sbpnet_core::reflection::*;

    let ix = canonicalize(spec, policy).expect("policy matches");
    let lambda = solve_traffic(spec).expect("open network");
    let prim = Primitives::canonical(spec, &lambda, &ix);
    let k = prim.num_classes();
    let j = prim.num_stations;
    let mut s = Structural::default();

    let mut d = Draw::new(k as u64 * 1000 + j as u64);
    let mut thetas: Vec<Vec<f64>> = (0..5).map(|_| (0..k).map(|_| d.uniform(-3.0, 3.0)).collect()).collect();

    let blocks = build_a_blocks(&prim, &successor_matrix(&ix));
    if invert_high_block(&blocks).is_ok() {
        let (q, r) = build_q_r(&prim, &blocks).expect("Q and R");
        let rows: Vec<Vec<f64>> = (0..j).map(|a| (0..j).map(|b| r[(a, b)]).collect()).collect();
        let brute = principal_minors(&rows);
        let tol_of = |set: &[usize]| -> f64 {
            let h: f64 = set
                .iter()
                .map(|&a| set.iter().map(|&b| rows[a][b] * rows[a][b]).sum::<f64>().sqrt())
                .product();
            1e-12 * h
        };
        let smallest = |pred: &dyn Fn(f64, f64) -> bool| {
            brute
                .iter()
                .filter(|(set, m)| pred(*m, tol_of(set)))
                .min_by(|a, b| a.0.cmp(&b.0))
                .map(|(set, _)| set.clone())
        };
        let negative = smallest(&|m, t| m <= -t && m < 0.0);
        let near_zero = smallest(&|m, t| m > -t && m <= t);
        let verdict = check_p_matrix(&r, DEFAULT_MINOR_GUARD).expect("small R");
        s.p_verdict_agrees = Some(match (&verdict, negative, near_zero) {
            (PMatrixVerdict::NotPMatrix { witness, .. }, Some(w), _) => *witness == w,
            (PMatrixVerdict::Indeterminate { witness, .. }, None, Some(w)) => *witness == w,
            (PMatrixVerdict::PMatrix, None, None) => true,
            _ => false,
        });

        let w = build_w(&q).expect("w");
        let mut worst = 0.0_f64;
        for kk in 0..j {
            for i in 0..j {
                let rhs = q[(i, kk)] + (0..kk).map(|l| q[(i, l)] * w[(l, kk)]).sum::<f64>();
                worst = worst.max(rel(w[(i, kk)], rhs));
            }
        }
        s.w_identity = Some(worst);

        let mu = prim.rates();
        let mut u_res = 0.0_f64;
        let mut st_res = 0.0_f64;
        for kk in 0..j {
            let u = build_u(&prim, &blocks, &q, &w, kk).expect("u");
            let alt = alternative_u(&prim, &q, &low_part(&w, kk)).expect("alternative u");
            let scale = u.amax().max(1.0);
            u_res = u_res.max((&u - &alt).amax() / scale);
            let flow: Vec<f64> = (0..k)
                .map(|l| (u[l] - (0..k).map(|m| prim.routing[(l, m)] * u[m]).sum::<f64>()) * mu[l])
                .collect();
            let fscale = flow.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
            for l in 0..k {
                st_res = st_res.max((flow[l] - flow[prim.station[l]]).abs() / fscale);
            }
            thetas.push(u.iter().copied().collect());
        }
        s.u_alternative = Some(u_res);
        s.station_identity = Some(st_res);

        let mu_low = Matrix::from_fn(j, j, |a, b| if a == b { mu[a] } else { 0.0 });
        let m_low = Matrix::from_fn(j, j, |a, b| if a == b { prim.mean[a] } else { 0.0 });
        let tilde = reflection_tilde(&blocks).expect("R tilde");
        let bar = reflection_bar(&prim).expect("R bar");
        let diff = |x: &Matrix, y: &Matrix| (x - y).amax() / x.amax().max(1e-300);
        s.reflection_tilde = Some(diff(&tilde, &(&r * &mu_low)));
        s.reflection_bar = Some(diff(&bar, &(&m_low * &tilde)));
    }

    s.qstar_min = f64::INFINITY;
    for theta in &thetas {
        let q = qstar(&prim, theta);
        s.qstar_min = s.qstar_min.min(q);
        s.decomposition = s.decomposition.max(rel(q, qstar_decomposed(&prim, theta)));
        let scale = theta.iter().fold(1.0_f64, |a, t| a.max(t.abs()))
            * prim.lambda.iter().sum::<f64>().max(1.0);
        s.traffic_identity = s.traffic_identity.max(traffic_identity(&prim, theta).abs() / scale);
    }
    s
}
