//! Confidence intervals, joint queue-length distributions with the
//! information quality ratio, and histogram-vs-reference comparison.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::heavy_traffic::Geometric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl ConfidenceInterval {
    /// Whether `value` lies within `k` half-widths of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.half_width
    }
}

/// Two-sided 97.5% Student-t quantile with `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.975)
}

/// Student-t 95% interval across independent replication values.
pub fn ci(samples: &[f64]) -> Result<ConfidenceInterval> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half_width = t_quantile_975(n - 1) * (var / n as f64).sqrt();
    Ok(ConfidenceInterval { mean, half_width, n })
}

/// A normalized joint pmf on pairs of bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    cells: BTreeMap<(usize, usize), f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl JointPmf {
    /// Normalizes nonnegative weights (e.g. time spent in each cell).
    pub fn from_weights<I: IntoIterator<Item = ((usize, usize), f64)>>(weights: I) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for (cell, w) in weights {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::BinningMismatch(format!("invalid weight {w} in cell {cell:?}")));
            }
            if w > 0.0 {
                *cells.entry(cell).or_insert(0.0) += w;
            }
        }
        let total: f64 = cells.values().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateJoint);
        }
        let nx = cells.keys().map(|c| c.0).max().unwrap_or(0) + 1;
        let ny = cells.keys().map(|c| c.1).max().unwrap_or(0) + 1;
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        for (&(x, y), w) in cells.iter_mut() {
            *w /= total;
            px[x] += *w;
            py[y] += *w;
        }
        Ok(Self { cells, px, py })
    }

    /// Product of two marginals.
    pub fn product(px: &[f64], py: &[f64]) -> Result<Self> {
        Self::from_weights(
            px.iter()
                .enumerate()
                .flat_map(|(x, &a)| py.iter().enumerate().map(move |(y, &b)| ((x, y), a * b))),
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().map(|(&(x, y), &p)| (x, y, p))
    }

    pub fn marginal_x(&self) -> &[f64] {
        &self.px
    }

    pub fn marginal_y(&self) -> &[f64] {
        &self.py
    }

    pub fn transpose(&self) -> Self {
        Self {
            cells: self.cells.iter().map(|(&(x, y), &p)| ((y, x), p)).collect(),
            px: self.py.clone(),
            py: self.px.clone(),
        }
    }

    /// Mutual information `I(X;Y)` in nats.
    pub fn mutual_information(&self) -> f64 {
        self.cells()
            .map(|(x, y, p)| p * (p / (self.px[x] * self.py[y])).ln())
            .sum()
    }

    /// Joint entropy `H(X,Y)` in nats, with `0 log 0 = 0`.
    pub fn joint_entropy(&self) -> f64 {
        -self.cells().map(|(_, _, p)| p * p.ln()).sum::<f64>()
    }
}

/// Information quality ratio `I(X;Y) / H(X,Y)`: zero iff independent, one
/// when either variable determines the other.
pub fn iqr(joint: &JointPmf) -> Result<f64> {
    let h = joint.joint_entropy();
    if h <= 0.0 {
        return Err(Error::DegenerateJoint);
    }
    Ok(joint.mutual_information() / h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatio {
    pub level: f64,
    /// Reference quantile `q` at `level`; the ratio compares `P(Z > q)`.
    pub threshold: usize,
    pub empirical: f64,
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistComparison {
    pub total_variation: f64,
    pub tails: Vec<TailRatio>,
}

/// Compares two pmfs on the same bins (`p[n] = P(Z = n)`, last bin may be
/// an overflow bucket).
pub fn hist_compare(empirical: &[f64], reference: &[f64]) -> Result<HistComparison> {
    if empirical.len() != reference.len() {
        return Err(Error::BinningMismatch(format!(
            "{} empirical bins vs {} reference bins",
            empirical.len(),
            reference.len()
        )));
    }
    let total_variation = 0.5
        * empirical
            .iter()
            .zip(reference)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    let tail_after = |pmf: &[f64], n: usize| pmf[n + 1..].iter().sum::<f64>();
    let tails = [0.9, 0.99]
        .into_iter()
        .filter_map(|level| {
            let mut acc = 0.0;
            let threshold = reference.iter().position(|&p| {
                acc += p;
                acc >= level
            })?;
            if threshold + 1 >= reference.len() {
                return None;
            }
            let empirical = tail_after(empirical, threshold);
            let reference = tail_after(reference, threshold);
            Some(TailRatio {
                level,
                threshold,
                empirical,
                reference,
                ratio: empirical / reference,
            })
        })
        .collect();
    Ok(HistComparison {
        total_variation,
        tails,
    })
}

/// Geometric reference pmf on bins `0..=cap` plus an overflow bin holding
/// `P(Z > cap)`.
pub fn geometric_reference(geom: &Geometric, cap: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=cap as u64).map(|n| geom.pmf(n)).collect();
    out.push(geom.tail(cap as u64));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_width() {
        let c = ci(&[3.0; 7]).unwrap();
        assert_eq!(c.mean, 3.0);
        assert_eq!(c.half_width, 0.0);
    }

    #[test]
    fn two_sample_interval() {
        // s = √2, so the half-width is t₁ · √2 / √2 = t₁ = 12.7062…
        let c = ci(&[0.0, 2.0]).unwrap();
        assert_eq!(c.mean, 1.0);
        assert!((c.half_width - 12.706_204_736).abs() < 1e-6);
    }

    #[test]
    fn one_sample_is_an_error() {
        assert!(matches!(
            ci(&[1.0]),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn iqr_of_independent_pair_is_zero() {
        let j = JointPmf::product(&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.1, 0.2]).unwrap();
        assert!(iqr(&j).unwrap().abs() < 1e-14);
    }

    #[test]
    fn iqr_of_diagonal_is_one() {
        for n in [2, 5] {
            let j = JointPmf::from_weights((0..n).map(|i| ((i, i), 1.0 + i as f64))).unwrap();
            assert!((iqr(&j).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn iqr_of_single_atom_is_undefined() {
        let j = JointPmf::from_weights([((3, 4), 2.0)]).unwrap();
        assert!(matches!(iqr(&j), Err(Error::DegenerateJoint)));
    }

    #[test]
    fn joint_marginals_are_consistent() {
        let j = JointPmf::from_weights([((0, 0), 1.0), ((0, 2), 2.0), ((1, 1), 1.0)]).unwrap();
        assert!((j.marginal_x().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(j.marginal_y(), &[0.25, 0.25, 0.5]);
        let total: f64 = j.cells().map(|c| c.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pmfs_compare_equal() {
        let g = Geometric::with_mean(4.0).unwrap();
        let p = geometric_reference(&g, 200);
        let r = hist_compare(&p, &p).unwrap();
        assert_eq!(r.total_variation, 0.0);
        assert_eq!(r.tails.len(), 2);
        for t in &r.tails {
            assert!((t.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_tv_matches_series() {
        // p_n = ½(½)ⁿ and q_n = ⅓(⅔)ⁿ cross once: p_n ≥ q_n iff n ≤ 1, so
        // TV = Σ_{n≤1}(p_n − q_n) = (½ + ¼) − (⅓ + 2/9) = 7/36.
        let cap = 400;
        let p = geometric_reference(&Geometric::with_mean(1.0).unwrap(), cap);
        let q = geometric_reference(&Geometric::with_mean(2.0).unwrap(), cap);
        let r = hist_compare(&p, &q).unwrap();
        assert!((r.total_variation - 7.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_bins_are_rejected() {
        assert!(matches!(
            hist_compare(&[0.5, 0.5], &[1.0]),
            Err(Error::BinningMismatch(_))
        ));
    }
}
