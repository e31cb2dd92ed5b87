//! Matrix objects of the multi-scale analysis: the successor matrix `B`,
//! `A = (I − Pᵀ) diag(μ) (I − B)` and its low/high blocks, `Q`, the
//! reflection matrix `R = I − Qᵀ`, the `w` recursion and the `u⁽ᵏ⁾` vectors,
//! together with the structural checks they depend on.
//!
//! Everything here works in canonical class order (low classes first), so
//! a low class index doubles as its station index.

use serde::Serialize;

use crate::analysis::AssumptionFailure;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::network::CanonicalIndexing;
use crate::primitives::Primitives;

/// Largest dimension for which all principal minors are enumerated.
pub const DEFAULT_MINOR_GUARD: usize = 20;
/// Relative tolerance (against the Hadamard bound) for minor positivity.
pub const MINOR_TOL: f64 = 1e-12;
pub const W_IDENTITY_TOL: f64 = 1e-10;
pub const CROSS_CHECK_TOL: f64 = 1e-8;

/// `B_{k,k+} = 1`; rows of station-top classes are zero.
pub fn successor_matrix(ix: &CanonicalIndexing) -> Matrix {
    let k = ix.num_classes();
    let mut b = Matrix::zeros(k, k);
    for c in 0..k {
        if let Some(s) = ix.successor(c) {
            b[(c, s)] = 1.0;
        }
    }
    b
}

#[derive(Debug, Clone)]
pub struct ABlocks {
    pub a: Matrix,
    pub low: Matrix,
    pub high: Matrix,
    pub low_high: Matrix,
    pub high_low: Matrix,
}

pub fn build_a_blocks(prim: &Primitives, b: &Matrix) -> ABlocks {
    let k = prim.num_classes();
    let j = prim.num_stations;
    let eye = Matrix::identity(k, k);
    let mu = Matrix::from_diagonal(&Vector::from_vec(prim.rates()));
    let a = (&eye - prim.routing.transpose()) * mu * (&eye - b);
    let lo: Vec<usize> = (0..j).collect();
    let hi: Vec<usize> = (j..k).collect();
    ABlocks {
        low: linalg::select(&a, &lo, &lo),
        high: linalg::select(&a, &hi, &hi),
        low_high: linalg::select(&a, &lo, &hi),
        high_low: linalg::select(&a, &hi, &lo),
        a,
    }
}

/// Inverts `A_H`, returning the inverse and its 1-norm condition number.
pub fn invert_high_block(blocks: &ABlocks) -> std::result::Result<(Matrix, f64), AssumptionFailure> {
    match linalg::inverse(&blocks.high, "A_H") {
        Ok(inv) => {
            let cond = linalg::condition_1(&blocks.high, &inv);
            Ok((inv, cond))
        }
        Err(Error::Singular { pivot, .. }) => Err(AssumptionFailure::SingularHighBlock { pivot }),
        Err(_) => unreachable!("inverse only fails with Singular"),
    }
}

/// `Q = P_L − P_{LH} A_H^{−T} A_{LH}ᵀ` and `R = I − Qᵀ`.
pub fn build_q_r(prim: &Primitives, blocks: &ABlocks) -> Result<(Matrix, Matrix)> {
    let k = prim.num_classes();
    let j = prim.num_stations;
    let lo: Vec<usize> = (0..j).collect();
    let hi: Vec<usize> = (j..k).collect();
    let p_l = linalg::select(&prim.routing, &lo, &lo);
    let p_lh = linalg::select(&prim.routing, &lo, &hi);
    let q = if hi.is_empty() {
        p_l
    } else {
        let x = linalg::solve(&blocks.high.transpose(), &blocks.low_high.transpose(), "A_H")?;
        p_l - p_lh * x
    };
    let r = Matrix::identity(j, j) - q.transpose();
    Ok((q, r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PMatrixVerdict {
    PMatrix,
    /// `witness` is the lexicographically smallest index set whose minor is
    /// negative beyond tolerance.
    NotPMatrix { witness: Vec<usize>, minor: f64 },
    /// Some minor lies within tolerance of zero and none is clearly negative.
    Indeterminate { witness: Vec<usize>, minor: f64 },
}

impl PMatrixVerdict {
    pub fn is_p_matrix(&self) -> bool {
        matches!(self, PMatrixVerdict::PMatrix)
    }
}

/// Exhaustive principal-minor test. Index sets in the verdict are 0-based.
pub fn check_p_matrix(r: &Matrix, guard: usize) -> Result<PMatrixVerdict> {
    let n = r.nrows();
    assert_eq!(n, r.ncols(), "P-matrix test needs a square matrix");
    if n > guard {
        return Err(Error::DimensionTooLarge { dim: n, limit: guard });
    }
    let mut negative: Option<(Vec<usize>, f64)> = None;
    let mut near_zero: Option<(Vec<usize>, f64)> = None;
    let keep_smallest = |slot: &mut Option<(Vec<usize>, f64)>, set: Vec<usize>, minor: f64| {
        if slot.as_ref().is_none_or(|(w, _)| set < *w) {
            *slot = Some((set, minor));
        }
    };
    for mask in 1u32..(1u32 << n) {
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = linalg::select(r, &set, &set);
        let minor = linalg::determinant(&sub);
        let hadamard: f64 = (0..set.len()).map(|i| sub.row(i).norm()).product();
        let tol = MINOR_TOL * hadamard;
        if minor <= -tol && minor < 0.0 {
            keep_smallest(&mut negative, set, minor);
        } else if minor <= tol {
            keep_smallest(&mut near_zero, set, minor);
        }
    }
    Ok(match (negative, near_zero) {
        (Some((witness, minor)), _) => PMatrixVerdict::NotPMatrix { witness, minor },
        (None, Some((witness, minor))) => PMatrixVerdict::Indeterminate { witness, minor },
        (None, None) => PMatrixVerdict::PMatrix,
    })
}

/// Builds `w` column by column and verifies the fixed-point identity
/// `w_{ik} = Q_{ik} + Σ_{l<k} Q_{il} w_{lk}`.
pub fn build_w(q: &Matrix) -> Result<Matrix> {
    let n = q.nrows();
    let mut w = Matrix::zeros(n, n);
    for k in 0..n {
        if k == 0 {
            w.set_column(0, &q.column(0));
            continue;
        }
        let lead = Matrix::identity(k, k) - q.view((0, 0), (k, k));
        let rhs = q.view((0, k), (k, 1)).into_owned();
        let head = linalg::solve(&lead, &rhs, "leading block of I-Q")?;
        let tail = q.view((k, k), (n - k, 1)) + q.view((k, 0), (n - k, k)) * &head;
        w.view_mut((0, k), (k, 1)).copy_from(&head);
        w.view_mut((k, k), (n - k, 1)).copy_from(&tail);
    }
    let residual = w_identity_residual(q, &w);
    let scale = linalg::max_abs(q).max(linalg::max_abs(&w)).max(1.0);
    if residual > W_IDENTITY_TOL * scale {
        return Err(Error::InternalConsistency {
            what: "w fixed-point identity".into(),
            residual,
        });
    }
    Ok(w)
}

pub fn w_identity_residual(q: &Matrix, w: &Matrix) -> f64 {
    let n = q.nrows();
    let mut worst = 0.0_f64;
    for k in 0..n {
        for i in 0..n {
            let sum: f64 = (0..k).map(|l| q[(i, l)] * w[(l, k)]).sum();
            worst = worst.max((w[(i, k)] - q[(i, k)] - sum).abs());
        }
    }
    worst
}

/// Low part of `u⁽ᵏ⁾`: `(w_{1:k−1,k}, 1, 0, …, 0)`.
pub fn low_part(w: &Matrix, k: usize) -> Vector {
    let n = w.nrows();
    Vector::from_fn(n, |i, _| {
        if i < k {
            w[(i, k)]
        } else if i == k {
            1.0
        } else {
            0.0
        }
    })
}

/// `u⁽ᵏ⁾ = (u_L, −A_H^{−T} A_{LH}ᵀ u_L)` in canonical order, cross-checked
/// against `(I − P)⁻¹ M Cᵀ diag(μ_L) (I − Q) u_L`.
pub fn build_u(
    prim: &Primitives,
    blocks: &ABlocks,
    q: &Matrix,
    w: &Matrix,
    k: usize,
) -> Result<Vector> {
    let u_low = low_part(w, k);
    let u_high = if blocks.high.nrows() == 0 {
        Vector::zeros(0)
    } else {
        let rhs = -(blocks.low_high.transpose() * &u_low);
        linalg::solve_vec(&blocks.high.transpose(), &rhs, "A_H")?
    };
    let u = Vector::from_iterator(
        u_low.len() + u_high.len(),
        u_low.iter().chain(u_high.iter()).copied(),
    );
    let alt = alternative_u(prim, q, &u_low)?;
    let residual = (&u - &alt).amax();
    if residual > CROSS_CHECK_TOL * u.amax().max(1.0) {
        return Err(Error::InternalConsistency {
            what: format!("u vector {} disagrees with its alternative expression", k + 1),
            residual,
        });
    }
    Ok(u)
}

/// `(I − P)⁻¹ M Cᵀ diag(μ_L) (I − Q) u_L`.
pub fn alternative_u(prim: &Primitives, q: &Matrix, u_low: &Vector) -> Result<Vector> {
    let k = prim.num_classes();
    let j = prim.num_stations;
    let mu = prim.rates();
    let mu_low = Matrix::from_diagonal(&Vector::from_fn(j, |i, _| mu[i]));
    let m = Matrix::from_diagonal(&Vector::from_vec(prim.mean.clone()));
    let rhs = m * prim.constituency().transpose() * mu_low * (Matrix::identity(j, j) - q) * u_low;
    linalg::solve_vec(&(Matrix::identity(k, k) - &prim.routing), &rhs, "I-P")
}

/// Largest violation of the station identity: every class `l` satisfies
/// `(u_l − Σ P_{ll'} u_{l'}) μ_l = (u_s − Σ P_{sl'} u_{l'}) μ_s` with `s` the
/// low class of `l`'s station. Returned relative to the magnitude of the
/// terms involved.
pub fn station_identity_residual(prim: &Primitives, u: &Vector) -> f64 {
    let mu = prim.rates();
    let pu = &prim.routing * u;
    let flow: Vec<f64> = (0..prim.num_classes())
        .map(|l| (u[l] - pu[l]) * mu[l])
        .collect();
    let scale = flow.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    (0..prim.num_classes())
        .map(|l| (flow[l] - flow[prim.station[l]]).abs())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionResiduals {
    /// `max |R̃ − R diag(μ_L)|`, relative to `max |R̃|`.
    pub tilde: f64,
    /// `max |R̄ − diag(m_L) R̃|`, relative to `max |R̄|`.
    pub bar: f64,
}

/// `R̃ = A_L − A_{LH} A_H⁻¹ A_{HL}`.
pub fn reflection_tilde(blocks: &ABlocks) -> Result<Matrix> {
    if blocks.high.nrows() == 0 {
        return Ok(blocks.low.clone());
    }
    let x = linalg::solve(&blocks.high, &blocks.high_low, "A_H")?;
    Ok(&blocks.low - &blocks.low_high * x)
}

/// `R̄ = (I + G)⁻¹` with `G = C M (I − Pᵀ)⁻¹ Pᵀ [diag(μ_L); 0]`.
pub fn reflection_bar(prim: &Primitives) -> Result<Matrix> {
    let k = prim.num_classes();
    let j = prim.num_stations;
    let mu = prim.rates();
    let embed = Matrix::from_fn(k, j, |r, c| if r == c { mu[r] } else { 0.0 });
    let m = Matrix::from_diagonal(&Vector::from_vec(prim.mean.clone()));
    let pt = prim.routing.transpose();
    let inner = linalg::solve(&(Matrix::identity(k, k) - &pt), &(pt * embed), "I-P")?;
    let g = prim.constituency() * m * inner;
    linalg::inverse(&(Matrix::identity(j, j) + g), "I+G")
}

pub fn reflection_equivalence(
    prim: &Primitives,
    blocks: &ABlocks,
    r: &Matrix,
) -> Result<ReflectionResiduals> {
    let j = prim.num_stations;
    let mu = prim.rates();
    let mu_low = Matrix::from_diagonal(&Vector::from_fn(j, |i, _| mu[i]));
    let m_low = Matrix::from_diagonal(&Vector::from_fn(j, |i, _| prim.mean[i]));
    let tilde = reflection_tilde(blocks)?;
    let bar = reflection_bar(prim)?;
    let res_tilde = linalg::max_abs(&(&tilde - r * mu_low)) / linalg::max_abs(&tilde).max(1e-300);
    let res_bar = linalg::max_abs(&(&bar - m_low * &tilde)) / linalg::max_abs(&bar).max(1e-300);
    Ok(ReflectionResiduals {
        tilde: res_tilde,
        bar: res_bar,
    })
}

/// All matrix objects for one network and policy.
///
/// When an assumption fails, `failure` is set and the objects downstream of
/// the failing step are absent.
#[derive(Debug, Clone)]
pub struct MatrixBundle {
    pub b: Matrix,
    pub blocks: ABlocks,
    pub high_block_condition: Option<f64>,
    pub q: Option<Matrix>,
    pub r: Option<Matrix>,
    pub p_verdict: Option<PMatrixVerdict>,
    pub w: Option<Matrix>,
    /// `1 − w_kk` per low class.
    pub one_minus_wkk: Vec<f64>,
    /// `u⁽ᵏ⁾` per low class, canonical order.
    pub u: Vec<Vector>,
    pub w_identity_residual: Option<f64>,
    pub station_identity_residual: Option<f64>,
    pub reflection_residuals: Option<ReflectionResiduals>,
    pub failure: Option<AssumptionFailure>,
}

impl MatrixBundle {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs the whole matrix pipeline. Assumption failures are recorded in the
/// bundle; only internal inconsistencies and guard violations are errors.
pub fn build_bundle(prim: &Primitives, ix: &CanonicalIndexing, minor_guard: usize) -> Result<MatrixBundle> {
    let b = successor_matrix(ix);
    let blocks = build_a_blocks(prim, &b);
    let mut bundle = MatrixBundle {
        b,
        blocks,
        high_block_condition: None,
        q: None,
        r: None,
        p_verdict: None,
        w: None,
        one_minus_wkk: Vec::new(),
        u: Vec::new(),
        w_identity_residual: None,
        station_identity_residual: None,
        reflection_residuals: None,
        failure: None,
    };
    match invert_high_block(&bundle.blocks) {
        Ok((_, cond)) => bundle.high_block_condition = Some(cond),
        Err(f) => {
            bundle.failure = Some(f);
            return Ok(bundle);
        }
    }
    let (q, r) = build_q_r(prim, &bundle.blocks)?;
    let verdict = check_p_matrix(&r, minor_guard)?;
    bundle.reflection_residuals = Some(reflection_equivalence(prim, &bundle.blocks, &r)?);
    bundle.q = Some(q.clone());
    bundle.r = Some(r);
    bundle.p_verdict = Some(verdict.clone());
    match verdict {
        PMatrixVerdict::PMatrix => {}
        PMatrixVerdict::NotPMatrix { witness, minor } => {
            bundle.failure = Some(AssumptionFailure::NotPMatrix { witness, minor });
            return Ok(bundle);
        }
        PMatrixVerdict::Indeterminate { witness, minor } => {
            bundle.failure = Some(AssumptionFailure::PMatrixIndeterminate { witness, minor });
            return Ok(bundle);
        }
    }
    let w = build_w(&q)?;
    bundle.w_identity_residual = Some(w_identity_residual(&q, &w));
    bundle.one_minus_wkk = (0..w.nrows()).map(|k| 1.0 - w[(k, k)]).collect();
    let mut station_residual = 0.0_f64;
    for k in 0..prim.num_stations {
        let u = build_u(prim, &bundle.blocks, &q, &w, k)?;
        station_residual = station_residual.max(station_identity_residual(prim, &u));
        bundle.u.push(u);
    }
    if station_residual > CROSS_CHECK_TOL {
        return Err(Error::InternalConsistency {
            what: "station identity of the u vectors".into(),
            residual: station_residual,
        });
    }
    bundle.station_identity_residual = Some(station_residual);
    bundle.w = Some(w);
    Ok(bundle)
}
