//! Minimum-norm interpolation, ridge, and the head/tail decomposition of the
//! interpolant over an index split.
//!
//! Unless stated otherwise, designs and estimators are in ambient
//! coordinates and signals `β*` in eigen-coordinates, as in
//! [`ModelSpec`](crate::sampler::ModelSpec).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::linalg::{self, GramPinv};
use crate::seed::Rng;
use crate::spectrum::{FeatureSplit, Spectrum};
use crate::{Error, Result};

/// Default interpolation tolerance relative to `‖y‖`.
pub const INTERP_TOL: f64 = 1e-8;

fn ser_vec<S: Serializer>(v: &DVector<f64>, s: S) -> core::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Interpolated,
    /// `y = 0`; the solution is `0`.
    ZeroResponse,
    /// The Gram matrix lost rank under the cutoff. The returned vector is the
    /// minimum-norm least-squares solution.
    RankDeficient {
        rank: usize,
        required: usize,
    },
    /// Full rank, but the residual exceeds the requested tolerance.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub beta: DVector<f64>,
    pub status: SolveStatus,
    /// `‖Xβ − y‖ / ‖y‖` (0 when `y = 0`).
    pub relative_residual: f64,
    /// `XXᵀ` and its pseudoinverse when `N ≤ p`.
    pub gram: Option<DMatrix<f64>>,
    pub pinv: Option<GramPinv>,
}

impl MinNormSolution {
    /// The solution vector, or `RankDeficient` when interpolation was not
    /// achieved through a full-rank Gram matrix.
    pub fn require_interpolation(&self) -> Result<&DVector<f64>> {
        match self.status {
            SolveStatus::RankDeficient { rank, required } => {
                Err(Error::RankDeficient { rank, required })
            }
            _ => Ok(&self.beta),
        }
    }
}

/// `argmin{‖β‖₂ : Xβ = y}` through the pseudoinverse of `XXᵀ`, followed by
/// one step of iterative refinement.
pub fn min_norm_interpolant(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<MinNormSolution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::param("tol", "must be non-negative"));
    }
    let y_norm = y.norm();
    if n > p {
        // Under-parametrized: min-norm least squares through XᵀX.
        let pinv = GramPinv::new(linalg::inner_gram(x), n);
        let beta = pinv.apply(&x.tr_mul(y));
        let rel = rel_residual(x, &beta, y, y_norm);
        return Ok(MinNormSolution {
            beta,
            status: SolveStatus::RankDeficient {
                rank: pinv.rank(),
                required: n,
            },
            relative_residual: rel,
            gram: None,
            pinv: None,
        });
    }
    let gram = linalg::outer_gram(x);
    let pinv = GramPinv::new(gram.clone(), p);
    if y_norm == 0.0 {
        return Ok(MinNormSolution {
            beta: DVector::zeros(p),
            status: SolveStatus::ZeroResponse,
            relative_residual: 0.0,
            gram: Some(gram),
            pinv: Some(pinv),
        });
    }
    let mut beta = x.tr_mul(&pinv.apply(y));
    let r = y - x * &beta;
    beta += x.tr_mul(&pinv.apply(&r));
    let rel = rel_residual(x, &beta, y, y_norm);
    let status = if !pinv.is_full_rank() {
        SolveStatus::RankDeficient {
            rank: pinv.rank(),
            required: n,
        }
    } else if rel > tol {
        SolveStatus::Inaccurate
    } else {
        SolveStatus::Interpolated
    };
    Ok(MinNormSolution {
        beta,
        status,
        relative_residual: rel,
        gram: Some(gram),
        pinv: Some(pinv),
    })
}

fn rel_residual(x: &DMatrix<f64>, beta: &DVector<f64>, y: &DVector<f64>, y_norm: f64) -> f64 {
    if y_norm == 0.0 {
        return 0.0;
    }
    (x * beta - y).norm() / y_norm
}

/// `argmin ‖y − Xβ‖² + λ‖β‖²`. Solved in the `N × N` dual when `N < p`.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be finite and non-negative"));
    }
    if lambda == 0.0 {
        return min_norm_interpolant(x, y, INTERP_TOL).map(|s| s.beta);
    }
    if n < p {
        let mut k = linalg::outer_gram(x);
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let chol = k.cholesky().ok_or(Error::RankDeficient {
            rank: 0,
            required: n,
        })?;
        Ok(x.tr_mul(&chol.solve(y)))
    } else {
        let mut k = linalg::inner_gram(x);
        for j in 0..p {
            k[(j, j)] += lambda;
        }
        let chol = k.cholesky().ok_or(Error::RankDeficient {
            rank: 0,
            required: p,
        })?;
        Ok(chol.solve(&x.tr_mul(y)))
    }
}

/// `β̂` split along `V_J ⊕ V_{Jᶜ}` with numerical diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorResult {
    #[serde(serialize_with = "ser_vec")]
    pub beta_hat: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub beta_head: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub beta_tail: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub residual: DVector<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimatorResult {
    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

/// Tail block `X_{Jᶜ}X_{Jᶜ}ᵀ`, derived from a full Gram matrix when one is
/// available and the head is the smaller block.
fn tail_gram(
    x_eig: &DMatrix<f64>,
    split: &FeatureSplit,
    full_gram: Option<&DMatrix<f64>>,
) -> DMatrix<f64> {
    match full_gram {
        Some(g) if split.head_dim() <= split.tail_dim() => {
            let xh = linalg::select_columns(x_eig, &split.head0());
            g - linalg::outer_gram(&xh)
        }
        _ => linalg::outer_gram(&linalg::select_columns(x_eig, &split.tail0())),
    }
}

/// Splits `β̂` into its `V_J` and `V_{Jᶜ}` components and checks
/// `β̂_tail = X_{Jᶜ}ᵀ(X_{Jᶜ}X_{Jᶜ}ᵀ)⁻¹(y − X_J β̂_head)`.
///
/// Diagnostics: `identity_residual` (absolute), `identity_rel_error`
/// (relative to `‖β̂‖`), `tail_condition`, `tail_rank`, `interp_rel_residual`.
pub fn decompose(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_hat: &DVector<f64>,
    split: &FeatureSplit,
    spectrum: &Spectrum,
) -> Result<EstimatorResult> {
    decompose_with_gram(x, y, beta_hat, split, spectrum, None)
}

/// [`decompose`] reusing a precomputed `XXᵀ`.
pub fn decompose_with_gram(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_hat: &DVector<f64>,
    split: &FeatureSplit,
    spectrum: &Spectrum,
    gram: Option<&DMatrix<f64>>,
) -> Result<EstimatorResult> {
    let (n, p) = x.shape();
    if p != spectrum.p() || split.p() != p {
        return Err(Error::DimensionMismatch {
            expected: spectrum.p(),
            found: p,
        });
    }
    if beta_hat.len() != p || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: beta_hat.len(),
        });
    }
    if split.tail_dim() == 0 {
        return Err(Error::TailEmpty);
    }
    let x_eig = spectrum.design_to_eigen(x);
    let b_eig = spectrum.to_eigen(beta_hat);
    let mask = split.mask();
    let head_eig = DVector::from_fn(p, |j, _| if mask[j] { b_eig[j] } else { 0.0 });
    let tail_eig = DVector::from_fn(p, |j, _| if mask[j] { 0.0 } else { b_eig[j] });

    let gc = tail_gram(&x_eig, split, gram);
    let pinv = GramPinv::new(gc, split.tail_dim().max(n));
    if !pinv.is_full_rank() {
        return Err(Error::TailRankDeficient);
    }
    let tail_cols = split.tail0();
    let xt = linalg::select_columns(&x_eig, &tail_cols);
    let r = y - &x_eig * &head_eig;
    let a_r = xt.tr_mul(&pinv.apply(&r));
    let mut err_sq = 0.0;
    for (i, &j) in tail_cols.iter().enumerate() {
        err_sq += (tail_eig[j] - a_r[i]).powi(2);
    }
    let identity_residual = err_sq.sqrt();
    let b_norm = beta_hat.norm();

    let beta_head = spectrum.from_eigen(&head_eig);
    let beta_tail = beta_hat - &beta_head;
    let residual = y - x * beta_hat;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("identity_residual".into(), identity_residual);
    diagnostics.insert(
        "identity_rel_error".into(),
        if b_norm > 0.0 {
            identity_residual / b_norm
        } else {
            identity_residual
        },
    );
    diagnostics.insert("tail_condition".into(), pinv.condition());
    diagnostics.insert("tail_rank".into(), pinv.rank() as f64);
    let y_norm = y.norm();
    diagnostics.insert(
        "interp_rel_residual".into(),
        if y_norm > 0.0 {
            residual.norm() / y_norm
        } else {
            residual.norm()
        },
    );
    Ok(EstimatorResult {
        beta_hat: beta_hat.clone(),
        beta_head,
        beta_tail,
        residual,
        diagnostics,
    })
}

/// Outcome of the head-optimality verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgminReport {
    pub objective_at_head: f64,
    pub min_perturbed_objective: f64,
    pub n_perturb: usize,
    /// `‖β_closed − β_head‖ / max(‖β_head‖, 1)` in eigen-coordinates.
    pub closed_form_rel_error: f64,
}

/// Checks that the `V_J` component of `β̂` minimizes
/// `β ↦ (y − X_Jβ)ᵀ(X_{Jᶜ}X_{Jᶜ}ᵀ)⁻¹(y − X_Jβ) + ‖β‖²` over `V_J`, against
/// `n_perturb` random perturbations of norm `radius` and against the normal
/// equations.
#[allow(clippy::too_many_arguments)]
pub fn head_argmin_check(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    split: &FeatureSplit,
    spectrum: &Spectrum,
    result: &EstimatorResult,
    n_perturb: usize,
    radius: f64,
    rng: &mut Rng,
) -> Result<ArgminReport> {
    let x_eig = spectrum.design_to_eigen(x);
    let head_idx = split.head0();
    let k = head_idx.len();
    let head_eig = spectrum.to_eigen(&result.beta_head);
    let b0 = DVector::from_iterator(k, head_idx.iter().map(|&j| head_eig[j]));
    let xj = linalg::select_columns(&x_eig, &head_idx);
    let pinv = GramPinv::new(
        tail_gram(&x_eig, split, None),
        split.tail_dim().max(x.nrows()),
    );
    if !pinv.is_full_rank() {
        return Err(Error::TailRankDeficient);
    }
    let objective = |b: &DVector<f64>| -> f64 {
        let r = y - &xj * b;
        r.dot(&pinv.apply(&r)) + b.norm_squared()
    };

    let f0 = objective(&b0);
    let mut fmin = f64::INFINITY;
    for _ in 0..n_perturb {
        let mut d = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        let nd = d.norm();
        if nd > 0.0 {
            d *= radius / nd;
        }
        fmin = fmin.min(objective(&(&b0 + d)));
    }
    let slack = 1e-9 * f0.abs().max(1.0);
    if n_perturb > 0 && fmin < f0 - slack {
        return Err(Error::PropositionViolation(format!(
            "perturbed objective {fmin} below head objective {f0}"
        )));
    }

    let closed_form_rel_error = if k == 0 {
        0.0
    } else {
        let gx = pinv.apply_mat(&xj);
        let mut h = xj.tr_mul(&gx);
        for i in 0..k {
            h[(i, i)] += 1.0;
        }
        let rhs = xj.tr_mul(&pinv.apply(y));
        let sol = h
            .cholesky()
            .ok_or_else(|| Error::PropositionViolation("normal equations not SPD".into()))?
            .solve(&rhs);
        (sol - &b0).norm() / b0.norm().max(1.0)
    };
    if closed_form_rel_error > 1e-8 {
        return Err(Error::PropositionViolation(format!(
            "closed-form head differs from projection by {closed_form_rel_error:e}"
        )));
    }
    Ok(ArgminReport {
        objective_at_head: f0,
        min_perturbed_objective: if n_perturb == 0 { f0 } else { fmin },
        n_perturb,
        closed_form_rel_error,
    })
}

/// Excess risk `‖Σ^{1/2}(β̂ − β*)‖²` with its head/tail parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct RiskBreakdown {
    pub total: f64,
    pub head: f64,
    pub tail: f64,
    pub bias: f64,
    pub variance: f64,
}

impl RiskBreakdown {
    /// `|total − head − tail| / total` (0 for a zero risk).
    pub fn pythagoras_defect(&self) -> f64 {
        let d = (self.total - self.head - self.tail).abs();
        if self.total > 0.0 {
            d / self.total
        } else {
            d
        }
    }
}

/// `β̂` in ambient coordinates, `β*` in eigen-coordinates.
pub fn excess_risk(
    spectrum: &Spectrum,
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
    split: &FeatureSplit,
) -> Result<RiskBreakdown> {
    let p = spectrum.p();
    if beta_hat.len() != p || beta_star.len() != p || split.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: beta_hat.len(),
        });
    }
    let diff = spectrum.to_eigen(beta_hat) - beta_star;
    let mask = split.mask();
    let mut out = RiskBreakdown::default();
    for ((&s, &d), &in_head) in spectrum.sigmas().iter().zip(diff.iter()).zip(&mask) {
        let c = s * d * d;
        out.total += c;
        if in_head {
            out.head += c;
        } else {
            out.tail += c;
        }
    }
    Ok(out)
}

/// Conditional bias and variance of the min-norm interpolant given `X`:
/// `‖Σ^{1/2}(Xᵀ(XXᵀ)⁻¹X − I)β*‖²` and `σ_ξ²‖Σ^{1/2}Xᵀ(XXᵀ)⁻¹‖²_HS`.
pub fn bias_variance_terms(
    x: &DMatrix<f64>,
    spectrum: &Spectrum,
    beta_star: &DVector<f64>,
    sigma_xi: f64,
) -> Result<(f64, f64)> {
    let x_eig = spectrum.design_to_eigen(x);
    let pinv = GramPinv::new(linalg::outer_gram(&x_eig), x.nrows().max(x.ncols()));
    bias_variance_with(&x_eig, &pinv, spectrum, beta_star, sigma_xi)
}

/// [`bias_variance_terms`] for a design already in eigen-coordinates with
/// its Gram pseudoinverse.
pub fn bias_variance_with(
    x_eig: &DMatrix<f64>,
    pinv: &GramPinv,
    spectrum: &Spectrum,
    beta_star: &DVector<f64>,
    sigma_xi: f64,
) -> Result<(f64, f64)> {
    let (n, p) = x_eig.shape();
    if p != spectrum.p() || beta_star.len() != p {
        return Err(Error::DimensionMismatch {
            expected: spectrum.p(),
            found: p,
        });
    }
    if !pinv.is_full_rank() {
        return Err(Error::RankDeficient {
            rank: pinv.rank(),
            required: n,
        });
    }
    let sig = spectrum.sigmas();
    let proj = x_eig.tr_mul(&pinv.apply(&(x_eig * beta_star)));
    let bias: f64 = sig
        .iter()
        .zip(proj.iter().zip(beta_star.iter()))
        .map(|(s, (a, b))| s * (a - b) * (a - b))
        .sum();
    let variance = if sigma_xi == 0.0 {
        0.0
    } else {
        sigma_xi * sigma_xi * pinv.weighted_hs(x_eig, sig)
    };
    Ok((bias, variance))
}

/// Head/tail eigen-coordinates of `β̂` as plain vectors, for reporting.
pub fn split_coordinates(
    spectrum: &Spectrum,
    beta_hat: &DVector<f64>,
    split: &FeatureSplit,
) -> (Vec<f64>, Vec<f64>) {
    let b = spectrum.to_eigen(beta_hat);
    let mask = split.mask();
    let mut head = Vec::new();
    let mut tail = Vec::new();
    for (v, m) in b.iter().zip(mask) {
        if m {
            head.push(*v);
        } else {
            tail.push(*v);
        }
    }
    (head, tail)
}
