//! Closed-form rates and bounds, with all absolute constants dropped unless
//! exposed as an explicit knob.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::sampler::{DesignFamily, ModelSpec, NoiseFamily};
use crate::spectrum::{self, FeatureSplit, GeometryConstants, Spectrum};
use crate::{Error, Result};

/// Signal and spectrum aggregates over one split.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitSums {
    n: f64,
    head_dim: f64,
    tr_head: f64,
    tr_tail: f64,
    tr2_tail: f64,
    /// `‖Σ_tail^{1/2}β*_tail‖`.
    tail_bias: f64,
    /// `‖Σ_head^{-1/2}β*_head‖`.
    head_inv: f64,
    /// `‖β*_head‖`.
    head_norm: f64,
}

impl SplitSums {
    fn new(m: &ModelSpec, split: &FeatureSplit) -> Result<Self> {
        m.validate()?;
        if split.p() != m.p() {
            return Err(Error::DimensionMismatch {
                expected: m.p(),
                found: split.p(),
            });
        }
        if split.tail_dim() == 0 {
            return Err(Error::TailEmpty);
        }
        let mask = split.mask();
        let mut s = SplitSums {
            n: m.n as f64,
            head_dim: split.head_dim() as f64,
            tr_head: 0.0,
            tr_tail: 0.0,
            tr2_tail: 0.0,
            tail_bias: 0.0,
            head_inv: 0.0,
            head_norm: 0.0,
        };
        for ((&sig, &b), &h) in m.spectrum.sigmas().iter().zip(&m.beta_star).zip(&mask) {
            if h {
                s.tr_head += sig;
                s.head_inv += b * b / sig;
                s.head_norm += b * b;
            } else {
                s.tr_tail += sig;
                s.tr2_tail += sig * sig;
                s.tail_bias += sig * b * b;
            }
        }
        s.tail_bias = s.tail_bias.sqrt();
        s.head_inv = s.head_inv.sqrt();
        s.head_norm = s.head_norm.sqrt();
        Ok(s)
    }

    /// `sqrt(N Tr(Σ_tail²)) / Tr(Σ_tail)`.
    fn tail_noise(&self) -> f64 {
        (self.n * self.tr2_tail).sqrt() / self.tr_tail
    }

    /// The four rate terms in their canonical order.
    fn four_terms(&self, sigma_xi: f64) -> [f64; 4] {
        [
            sigma_xi * (self.head_dim / self.n).sqrt(),
            sigma_xi * self.tail_noise(),
            self.tail_bias,
            self.head_inv * self.tr_tail / self.n,
        ]
    }
}

fn max4(t: &[f64; 4]) -> f64 {
    t.iter().copied().fold(0.0, f64::max)
}

fn k_star_split(m: &ModelSpec, g: &GeometryConstants) -> Result<(usize, FeatureSplit)> {
    g.validate()?;
    let k = spectrum::k_star(&m.spectrum, m.n, g).ok_or(Error::NoBenignSplit)?;
    Ok((k, FeatureSplit::head(k, m.p())?))
}

/// The rate `r*` at `k = k*_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RStar {
    pub k_star: usize,
    /// `σ_ξ√(k*/N)`, `σ_ξ√(N Tr Σ²_tail)/Tr Σ_tail`, `‖Σ_tail^{1/2}β*_tail‖`,
    /// `‖Σ_head^{-1/2}β*_head‖ Tr(Σ_tail)/N`.
    pub terms: [f64; 4],
    pub value: f64,
}

pub fn rate_r_star(m: &ModelSpec, g: &GeometryConstants) -> Result<RStar> {
    let (k, split) = k_star_split(m, g)?;
    let terms = SplitSums::new(m, &split)?.four_terms(m.sigma_xi);
    Ok(RStar {
        k_star: k,
        terms,
        value: max4(&terms),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquareCase {
    /// `σ₁N < κ_DM ℓ*²`: the whole head is shrunk.
    I,
    /// `σ₁N ≥ κ_DM ℓ*²`: the head splits into `J1` (estimated) and `J2`.
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareTerm {
    pub case: SquareCase,
    /// `max(terms)`.
    pub value: f64,
    pub terms: Vec<f64>,
    /// Preconditions that failed. The value is still computed.
    pub violations: Vec<String>,
    /// `|J1| + N Σ_{J2}σ_j / Tr(Σ_tail)` in case ii.
    pub deviation_exponent: Option<f64>,
    pub j1: Vec<usize>,
    pub j2: Vec<usize>,
}

/// `‖Σ_{J,thres}^{-1/2}β*_J‖`. Summed like `head_inv` so the two agree
/// exactly when no head eigenvalue is below the threshold.
fn thresholded_head_norm(
    m: &ModelSpec,
    split: &FeatureSplit,
    g: &GeometryConstants,
) -> Result<f64> {
    let thr = spectrum::j1_threshold(&m.spectrum, split, m.n, g)?;
    let mut acc = 0.0;
    for ((&sig, &b), in_head) in m
        .spectrum
        .sigmas()
        .iter()
        .zip(&m.beta_star)
        .zip(split.mask())
    {
        if in_head {
            acc += b * b / sig.max(thr);
        }
    }
    Ok(acc.sqrt())
}

/// `□` for an arbitrary split. Case i has three terms, case ii four.
pub fn square_term(
    m: &ModelSpec,
    split: &FeatureSplit,
    g: &GeometryConstants,
    case_override: Option<SquareCase>,
) -> Result<SquareTerm> {
    g.validate()?;
    let sums = SplitSums::new(m, split)?;
    let s = &m.spectrum;
    let n = m.n;
    let w2 = spectrum::mean_width_sq(s, split, g)?;
    let sigma1 = s.op_norm();
    let case = case_override.unwrap_or(if sigma1 * (n as f64) < g.kappa_dm * w2 {
        SquareCase::I
    } else {
        SquareCase::II
    });

    let mut violations = Vec::new();
    let d_star = spectrum::dvoretsky_dimension(s, split, g)?;
    if n as f64 > g.kappa_dm * d_star {
        violations.push(format!(
            "N = {n} exceeds kappa_dm * d* = {:.4}",
            g.kappa_dm * d_star
        ));
    }
    let (j1, j2) = spectrum::split_j1_j2(s, split, n, g)?;
    let sum_j2: f64 = j2.iter().map(|&j| s.sigma(j)).sum();
    if split.head_dim() as f64 > g.kappa_iso * n as f64 && split.head_dim() > 0 {
        let fp = spectrum::fixed_point_rn(s, split, n, g)?;
        let limit = (w2 * g.kappa_dm / n as f64).sqrt();
        if fp.r_n > limit {
            violations.push(format!(
                "R_N = {:.4e} exceeds l* sqrt(kappa_dm/N) = {limit:.4e}",
                fp.r_n
            ));
        }
        let cap = g.kappa_dm * w2 * (1.0 - j1.len() as f64 / n as f64);
        if sum_j2 > cap {
            violations.push(format!(
                "sum over J2 = {sum_j2:.4e} exceeds kappa_dm l*^2 (1 - |J1|/N) = {cap:.4e}"
            ));
        }
    }

    let sx = m.sigma_xi;
    let (terms, deviation_exponent) = match case {
        SquareCase::I => (
            alloc::vec![
                sx * (sums.tr_head / sums.tr_tail).sqrt(),
                (n as f64 * sigma1 / sums.tr_tail).sqrt() * sums.tail_bias,
                sums.head_norm * (sums.tr_tail / n as f64).sqrt(),
            ],
            None,
        ),
        SquareCase::II => {
            let thres_norm = thresholded_head_norm(m, split, g)?;
            (
                alloc::vec![
                    sx * (j1.len() as f64 / n as f64).sqrt(),
                    sx * (sum_j2 / sums.tr_tail).sqrt(),
                    sums.tail_bias,
                    thres_norm * sums.tr_tail / n as f64,
                ],
                Some(j1.len() as f64 + n as f64 * sum_j2 / sums.tr_tail),
            )
        }
    };
    Ok(SquareTerm {
        case,
        value: terms.iter().copied().fold(0.0, f64::max),
        terms,
        violations,
        deviation_exponent,
        j1,
        j2,
    })
}

impl SquareTerm {
    /// Full upper rate for the split: `max(□, price of overfitting)`.
    pub fn upper_rate(&self, price: &OverfitPrice) -> f64 {
        self.value.max(price.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverfitPrice {
    /// `constant · σ_ξ sqrt(N Tr Σ²_tail) / Tr Σ_tail`.
    pub noise: f64,
    /// `‖Σ_tail^{1/2}β*_tail‖`.
    pub bias: f64,
    pub value: f64,
    pub constant: f64,
}

/// Constant used by the theory in front of the noise part.
pub const PAPER_PRICE_CONSTANT: f64 = 17.0;

pub fn price_of_overfitting(
    m: &ModelSpec,
    split: &FeatureSplit,
    constant: f64,
) -> Result<OverfitPrice> {
    let sums = SplitSums::new(m, split)?;
    let noise = constant * m.sigma_xi * sums.tail_noise();
    Ok(OverfitPrice {
        noise,
        bias: sums.tail_bias,
        value: noise + sums.tail_bias,
        constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub k_star: usize,
    /// `max(b, 4/κ_DM, 24)`, the multiplier in the prefactor `c_lb/b²`.
    pub b_effective: f64,
    pub c_lb: f64,
    /// Squares of the four rate terms at `k*`.
    pub terms_sq: [f64; 4],
    /// Whether `k*` at `b_effective` exists and is below `N/4`.
    pub conditions_met: bool,
}

/// `(c_lb/b²) max{σ_ξ²k*/N, σ_ξ²N Tr Σ²_tail/Tr² Σ_tail, ‖Σ_tail^{1/2}β*_tail‖²,
/// ‖Σ_head^{-1/2}β*_head‖²(Tr Σ_tail/N)²}` with the terms taken at `k*_b`.
pub fn lower_bound_value(m: &ModelSpec, g: &GeometryConstants, c_lb: f64) -> Result<LowerBound> {
    if !(c_lb >= 0.0) {
        return Err(Error::param("c_lb", "must be non-negative"));
    }
    let r = rate_r_star(m, g)?;
    if r.k_star as f64 >= m.n as f64 / 4.0 {
        return Err(Error::RegimeViolation(format!(
            "k* = {} is not below N/4 = {}",
            r.k_star,
            m.n as f64 / 4.0
        )));
    }
    let b_eff = g.b.max(4.0 / g.kappa_dm).max(24.0);
    let strict = spectrum::k_star(&m.spectrum, m.n, &g.with_b(b_eff));
    let terms_sq = r.terms.map(|t| t * t);
    Ok(LowerBound {
        value: c_lb / (b_eff * b_eff) * max4(&terms_sq),
        k_star: r.k_star,
        b_effective: b_eff,
        c_lb,
        terms_sq,
        conditions_met: strict.is_some_and(|k| (k as f64) < m.n as f64 / 4.0),
    })
}

/// The four quantities whose vanishing defines benign overfitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoQuantities {
    pub n: usize,
    pub k_star: usize,
    /// `k*/N`, `N Tr Σ²_tail / Tr² Σ_tail`, `‖Σ_tail^{1/2}β*_tail‖`,
    /// `‖Σ_head^{-1/2}β*_head‖ Tr(Σ_tail)/N`.
    pub values: [f64; 4],
    /// `σ₁N ≥ Tr(Σ_tail)`.
    pub side_condition: bool,
}

pub fn bo_quantities(m: &ModelSpec, g: &GeometryConstants) -> Result<BoQuantities> {
    let (k, split) = k_star_split(m, g)?;
    let s = SplitSums::new(m, &split)?;
    Ok(BoQuantities {
        n: m.n,
        k_star: k,
        values: [
            k as f64 / s.n,
            s.n * s.tr2_tail / (s.tr_tail * s.tr_tail),
            s.tail_bias,
            s.head_inv * s.tr_tail / s.n,
        ],
        side_condition: m.spectrum.op_norm() * s.n >= s.tr_tail,
    })
}

/// Values at or below this count as zero in trend verdicts.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoClassification {
    /// `None` where no `k*_b` exists.
    pub instances: Vec<Option<BoQuantities>>,
    /// Per quantity: strictly decreasing along the sequence, or identically
    /// zero.
    pub vanishing: [bool; 4],
    pub side_condition: bool,
    pub benign: bool,
}

/// Trend verdict over a sequence of models with strictly increasing `N`
/// (at least three points).
pub fn bo_classify(models: &[ModelSpec], g: &GeometryConstants) -> Result<BoClassification> {
    if models.len() < 3 {
        return Err(Error::param("models", "need at least three points"));
    }
    if models.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::param("models", "N must be strictly increasing"));
    }
    let mut instances = Vec::with_capacity(models.len());
    for m in models {
        match bo_quantities(m, g) {
            Ok(q) => instances.push(Some(q)),
            Err(Error::NoBenignSplit) => instances.push(None),
            Err(e) => return Err(e),
        }
    }
    let mut vanishing = [false; 4];
    let all_present = instances.iter().all(Option::is_some);
    if all_present {
        let qs: Vec<[f64; 4]> = instances.iter().flatten().map(|q| q.values).collect();
        for (i, v) in vanishing.iter_mut().enumerate() {
            let zero = qs.iter().all(|q| q[i].abs() <= ZERO_TOL);
            let decreasing = qs.windows(2).all(|w| w[1][i] < w[0][i]);
            *v = zero || decreasing;
        }
    }
    let side_condition = all_present && instances.iter().flatten().all(|q| q.side_condition);
    Ok(BoClassification {
        benign: all_present && side_condition && vanishing.iter().all(|&v| v),
        instances,
        vanishing,
        side_condition,
    })
}

/// Parameters of the three-block family `a` / `b·j^{-α}` / `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub k0: usize,
    pub k: usize,
    pub p: usize,
    pub a: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub violations: Vec<String>,
    /// `c / (bN/(k0^α p))`, `(k/k0)^α / (p/N)`, `k0/N`, `N/(p−k)`.
    pub ratios: BTreeMap<String, f64>,
}

/// Builds `σ_j = a` (`j ≤ k0`), `b j^{-α}` (`k0 < j ≤ k`), `c` (`j > k`).
pub fn example_family(fp: &FamilyParams) -> Result<(Spectrum, FamilyReport)> {
    let FamilyParams {
        k0,
        k,
        p,
        a,
        b_coef,
        c_coef,
        alpha,
        n,
    } = *fp;
    if k > p || k0 > k {
        return Err(Error::param("k", "blocks must satisfy k0 <= k <= p"));
    }
    let sigmas: Vec<f64> = (1..=p)
        .map(|j| {
            if j <= k0 {
                a
            } else if j <= k {
                b_coef * (j as f64).powf(-alpha)
            } else {
                c_coef
            }
        })
        .collect();
    let spectrum = Spectrum::new(sigmas)?;

    let mut violations = Vec::new();
    if !(k0 < n && n < k && k < p) {
        violations.push(format!("need k0 < N < k < p, got {k0}, {n}, {k}, {p}"));
    }
    let k0f = (k0.max(1)) as f64;
    if !(a > b_coef / k0f.powf(alpha)) {
        violations.push(format!("a = {a} must exceed b / k0^alpha"));
    }
    let (nf, pf) = (n as f64, p as f64);
    let mut ratios = BTreeMap::new();
    let c_ratio = c_coef / (b_coef * nf / (k0f.powf(alpha) * pf));
    ratios.insert("c_over_target".into(), c_ratio);
    let spread = (k as f64 / k0f).powf(alpha) / (pf / nf);
    ratios.insert("spread_over_p_by_n".into(), spread);
    if spread > 1.0 {
        violations.push(format!(
            "(k/k0)^alpha must not exceed p/N (ratio {spread:.3})"
        ));
    }
    ratios.insert("k0_over_n".into(), k0f / nf);
    ratios.insert("n_over_tail_dim".into(), nf / (p - k).max(1) as f64);
    Ok((spectrum, FamilyReport { violations, ratios }))
}

/// Constant-free versions of the two classical upper rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRates {
    /// `‖β*‖√σ₁ max((r₀/N)^{1/4}, √(r₀/N)) + σ_ξ(√(k*/N) + √(N/R_{k*}))`.
    pub bllt: f64,
    /// Sum of the four rate terms at `k*`.
    pub tsigler: f64,
}

pub fn baseline_rates(m: &ModelSpec, g: &GeometryConstants) -> Result<BaselineRates> {
    let r = rate_r_star(m, g)?;
    let s = &m.spectrum;
    let nf = m.n as f64;
    let beta_norm = m.beta_star.iter().map(|b| b * b).sum::<f64>().sqrt();
    let r0 = s.trace() / s.op_norm();
    let ranks = spectrum::effective_ranks(s, &FeatureSplit::head(r.k_star, s.p())?)?;
    let bllt = beta_norm * s.op_norm().sqrt() * (r0 / nf).powf(0.25).max((r0 / nf).sqrt())
        + m.sigma_xi * ((r.k_star as f64 / nf).sqrt() + (nf / ranks.big_r).sqrt());
    Ok(BaselineRates {
        bllt,
        tsigler: r.terms.iter().sum(),
    })
}

/// Noise and head-signal comparisons between case ii of `□` and the
/// contiguous-head rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDomination {
    /// `√(|J1|/N) + √(Σ_{J2}σ_j / Tr Σ_tail)`.
    pub noise_split: f64,
    /// `2√(|J|/N)`.
    pub noise_head: f64,
    pub thres_norm: f64,
    pub head_inv_norm: f64,
}

impl TermDomination {
    pub fn holds(&self) -> bool {
        self.noise_split <= self.noise_head && self.thres_norm <= self.head_inv_norm
    }
}

/// Fails with `Precondition` when case ii does not apply.
pub fn term_domination(
    m: &ModelSpec,
    split: &FeatureSplit,
    g: &GeometryConstants,
) -> Result<TermDomination> {
    let sq = square_term(m, split, g, None)?;
    if sq.case != SquareCase::II {
        return Err(Error::Precondition("case ii does not apply".into()));
    }
    let sums = SplitSums::new(m, split)?;
    let nf = m.n as f64;
    let sum_j2: f64 = sq.j2.iter().map(|&j| m.spectrum.sigma(j)).sum();
    let thres_norm = thresholded_head_norm(m, split, g)?;
    Ok(TermDomination {
        noise_split: (sq.j1.len() as f64 / nf).sqrt() + (sum_j2 / sums.tr_tail).sqrt(),
        noise_head: 2.0 * (sums.head_dim / nf).sqrt(),
        thres_norm,
        head_inv_norm: sums.head_inv,
    })
}

/// Multipliers for constant-bearing quantities in [`RateReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateKnobs {
    pub price_constant: f64,
    pub c_lb: f64,
}

impl Default for RateKnobs {
    fn default() -> Self {
        RateKnobs {
            price_constant: 1.0,
            c_lb: 1.0,
        }
    }
}

/// Every rate for one model at one split (default `{1..k*_b}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub k_star: usize,
    pub r_star: f64,
    pub r_star_terms: [f64; 4],
    pub square_case: SquareCase,
    pub square: f64,
    pub square_terms: Vec<f64>,
    pub square_violations: Vec<String>,
    pub overfit_price: f64,
    pub price_constant: f64,
    /// `None` when `k* ≥ N/4`.
    pub lower_bound: Option<f64>,
    pub bllt_rate: f64,
    pub tsigler_rate: f64,
    pub bo_quantities: [f64; 4],
    pub bo_side_condition: bool,
}

pub fn rate_report(
    m: &ModelSpec,
    g: &GeometryConstants,
    split: Option<&FeatureSplit>,
    knobs: &RateKnobs,
) -> Result<RateReport> {
    let r = rate_r_star(m, g)?;
    let default_split = FeatureSplit::head(r.k_star, m.p())?;
    let split = split.unwrap_or(&default_split);
    let sq = square_term(m, split, g, None)?;
    let price = price_of_overfitting(m, split, knobs.price_constant)?;
    let lower = match lower_bound_value(m, g, knobs.c_lb) {
        Ok(lb) => Some(lb.value),
        Err(Error::RegimeViolation(_)) => None,
        Err(e) => return Err(e),
    };
    let base = baseline_rates(m, g)?;
    let bo = bo_quantities(m, g)?;
    Ok(RateReport {
        k_star: r.k_star,
        r_star: r.value,
        r_star_terms: r.terms,
        square_case: sq.case,
        square: sq.value,
        square_terms: sq.terms,
        square_violations: sq.violations,
        overfit_price: price.value,
        price_constant: knobs.price_constant,
        lower_bound: lower,
        bllt_rate: base.bllt,
        tsigler_rate: base.tsigler,
        bo_quantities: bo.values,
        bo_side_condition: bo.side_condition,
    })
}

/// Two unit spikes over a flat tail of total trace `√N`, signal `e₁`.
pub fn spike_model(n: usize, p: usize, sigma_xi: f64) -> Result<ModelSpec> {
    let k0 = 2;
    if p <= k0 {
        return Err(Error::param("p", "must exceed the two spikes"));
    }
    let level = (n as f64).sqrt() / (p - k0) as f64;
    let mut sigmas = alloc::vec![1.0; k0];
    sigmas.resize(p, level);
    let mut beta = alloc::vec![0.0; p];
    beta[0] = 1.0;
    Ok(ModelSpec {
        spectrum: Spectrum::new(sigmas)?,
        beta_star: beta,
        sigma_xi,
        n,
        design_family: DesignFamily::Gaussian,
        noise_family: NoiseFamily::Gaussian,
    })
}

/// `Σ = I_p`, zero signal.
pub fn isotropic_model(n: usize, p: usize, sigma_xi: f64) -> Result<ModelSpec> {
    Ok(ModelSpec {
        spectrum: Spectrum::new(alloc::vec![1.0; p])?,
        beta_star: alloc::vec![0.0; p],
        sigma_xi,
        n,
        design_family: DesignFamily::Gaussian,
        noise_family: NoiseFamily::Gaussian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spike_example() -> ModelSpec {
        let mut sig = vec![1.0, 1.0];
        sig.resize(1000, 0.01);
        let mut beta = vec![0.0; 1000];
        beta[0] = 1.0;
        ModelSpec {
            spectrum: Spectrum::new(sig).unwrap(),
            beta_star: beta,
            sigma_xi: 1.0,
            n: 50,
            design_family: DesignFamily::Gaussian,
            noise_family: NoiseFamily::Gaussian,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn r_star_spike() {
        let r = rate_r_star(&spike_example(), &GeometryConstants::default()).unwrap();
        assert_eq!(r.k_star, 2);
        assert!(close(r.terms[0], 0.2, 1e-12));
        assert!(close(r.terms[1], 0.22383, 1e-4), "{}", r.terms[1]);
        assert_eq!(r.terms[2], 0.0);
        assert!(close(r.terms[3], 0.1996, 1e-12));
        assert_eq!(r.value, r.terms[1]);
    }

    #[test]
    fn r_star_zero_and_isotropic() {
        let g = GeometryConstants::default();
        let mut m = spike_example();
        m.beta_star = vec![0.0; 1000];
        m.sigma_xi = 0.0;
        assert_eq!(rate_r_star(&m, &g).unwrap().value, 0.0);

        let iso = isotropic_model(25, 400, 2.0).unwrap();
        let r = rate_r_star(&iso, &g).unwrap();
        assert_eq!(r.k_star, 0);
        assert!(close(r.value, 2.0 * (25.0f64 / 400.0).sqrt(), 1e-12));
    }

    #[test]
    fn no_benign_split() {
        let mut m = isotropic_model(100, 3, 1.0).unwrap();
        m.spectrum = Spectrum::new(vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(
            rate_r_star(&m, &GeometryConstants::default()),
            Err(Error::NoBenignSplit)
        );
    }

    #[test]
    fn square_term_spike() {
        let m = spike_example();
        let g = GeometryConstants::default();
        let split = FeatureSplit::head(2, 1000).unwrap();
        let sq = square_term(&m, &split, &g, None).unwrap();
        assert_eq!(sq.case, SquareCase::II);
        assert_eq!(sq.j2, Vec::<usize>::new());
        assert!(close(sq.value, 0.2, 1e-12));
        let price = price_of_overfitting(&m, &split, 1.0).unwrap();
        assert!(close(sq.upper_rate(&price), 0.22383, 1e-4));
        // J2 = ∅ at k*: terms 1, 3, 4 coincide with the r* terms.
        let r = rate_r_star(&m, &g).unwrap();
        assert_eq!(sq.terms[0], r.terms[0]);
        assert_eq!(sq.terms[2], r.terms[2]);
        assert!(close(sq.terms[3], r.terms[3], 1e-15));
        assert_eq!(sq.terms[1], 0.0);
        assert_eq!(sq.deviation_exponent, Some(2.0));
    }

    #[test]
    fn square_term_zero_signal_keeps_noise_terms() {
        let mut m = spike_example();
        m.beta_star = vec![0.0; 1000];
        let g = GeometryConstants::default();
        let split = FeatureSplit::from_indices(vec![1, 2, 3], 1000).unwrap();
        let sq = square_term(&m, &split, &g, None).unwrap();
        assert_eq!(sq.case, SquareCase::II);
        assert!(sq.terms[0] > 0.0 && sq.terms[1] > 0.0);
        assert_eq!((sq.terms[2], sq.terms[3]), (0.0, 0.0));
        let sq = square_term(&m, &split, &g, Some(SquareCase::I)).unwrap();
        assert_eq!(sq.terms.len(), 3);
        assert!(sq.terms[0] > 0.0);
        assert_eq!((sq.terms[1], sq.terms[2]), (0.0, 0.0));
    }

    #[test]
    fn square_case_i_when_head_is_weak() {
        let m = isotropic_model(10, 400, 1.0).unwrap();
        let split = FeatureSplit::head(1, 400).unwrap();
        let sq = square_term(&m, &split, &GeometryConstants::default(), None).unwrap();
        assert_eq!(sq.case, SquareCase::I);
    }

    #[test]
    fn price_examples() {
        let m = spike_example();
        let split = FeatureSplit::head(2, 1000).unwrap();
        let p = price_of_overfitting(&m, &split, 1.0).unwrap();
        assert!(close(p.value, 0.22383, 1e-4));
        assert_eq!(p.bias, 0.0);
        let p17 = price_of_overfitting(&m, &split, PAPER_PRICE_CONSTANT).unwrap();
        assert!(close(p17.noise, 17.0 * p.noise, 1e-15));

        let iso = isotropic_model(20, 500, 1.5).unwrap();
        let p = price_of_overfitting(&iso, &FeatureSplit::head(0, 500).unwrap(), 1.0).unwrap();
        assert!(close(p.noise, 1.5 * (20.0f64 / 500.0).sqrt(), 1e-12));

        let mut quiet = iso.clone();
        quiet.sigma_xi = 0.0;
        let p = price_of_overfitting(&quiet, &FeatureSplit::head(0, 500).unwrap(), 1.0).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn lower_bound_examples() {
        let g = GeometryConstants::default();
        let lb = lower_bound_value(&spike_example(), &g, 1.0).unwrap();
        assert_eq!(lb.b_effective, 24.0);
        assert!(
            close(lb.value, 0.22383f64.powi(2) / 576.0, 1e-3),
            "{}",
            lb.value
        );
        assert!(!lb.conditions_met);
        let r = rate_r_star(&spike_example(), &g).unwrap();
        assert!(close(lb.value, r.value * r.value / 576.0, 1e-14));

        let mut m = spike_example();
        m.beta_star = vec![0.0; 1000];
        m.sigma_xi = 0.0;
        assert_eq!(lower_bound_value(&m, &g, 1.0).unwrap().value, 0.0);

        // k* = 2 is not below N/4 when N = 8.
        let mut m = spike_example();
        m.n = 8;
        assert!(matches!(
            lower_bound_value(&m, &g, 1.0),
            Err(Error::RegimeViolation(_))
        ));
    }

    #[test]
    fn bo_classify_examples() {
        let g = GeometryConstants::default();
        let iso: Vec<ModelSpec> = [50, 100, 200]
            .iter()
            .map(|&n| isotropic_model(n, 2 * n, 1.0).unwrap())
            .collect();
        let c = bo_classify(&iso, &g).unwrap();
        assert!(!c.benign);
        assert!(c.instances.iter().all(Option::is_none));

        let spikes: Vec<ModelSpec> = [50, 100, 200, 400]
            .iter()
            .map(|&n| spike_model(n, n * n, 1.0).unwrap())
            .collect();
        let c = bo_classify(&spikes, &g).unwrap();
        assert!(c.benign, "{c:?}");

        let tail_signal: Vec<ModelSpec> = [50, 100, 200, 400]
            .iter()
            .map(|&n| {
                let mut m = spike_model(n, n * n, 1.0).unwrap();
                let level = m.spectrum.sigma(n * n);
                m.beta_star = vec![0.0; n * n];
                m.beta_star[n * n - 1] = 1.0 / level.sqrt();
                m
            })
            .collect();
        let c = bo_classify(&tail_signal, &g).unwrap();
        assert!(!c.vanishing[2]);
        assert!(!c.benign);

        assert!(bo_classify(&spikes[..2], &g).is_err());
        let reversed: Vec<ModelSpec> = spikes.iter().rev().cloned().collect();
        assert!(bo_classify(&reversed, &g).is_err());
    }

    #[test]
    fn example_family_reports() {
        let fp = FamilyParams {
            k0: 4,
            k: 400,
            p: 10_000,
            a: 1.0,
            b_coef: 0.5,
            c_coef: 1.25e-3,
            alpha: 1.0,
            n: 100,
        };
        let (s, rep) = example_family(&fp).unwrap();
        assert_eq!(s.p(), 10_000);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(close(rep.ratios["c_over_target"], 1.0, 1e-12));

        let (_, rep) = example_family(&FamilyParams { k0: 100, ..fp }).unwrap();
        assert!(!rep.violations.is_empty());

        assert!(matches!(
            example_family(&FamilyParams { c_coef: 1.0, ..fp }),
            Err(Error::SpectrumNotSorted { .. })
        ));
    }

    #[test]
    fn baselines() {
        let g = GeometryConstants::default();
        let mut m = spike_example();
        let b = baseline_rates(&m, &g).unwrap();
        let r = rate_r_star(&m, &g).unwrap();
        assert!(b.tsigler >= r.value);
        // β* lives in the head here.
        assert!(b.bllt >= r.terms[3]);
        m.beta_star = vec![0.0; 1000];
        m.sigma_xi = 0.0;
        let b = baseline_rates(&m, &g).unwrap();
        assert_eq!((b.bllt, b.tsigler), (0.0, 0.0));
    }

    #[test]
    fn term_domination_spike() {
        let m = spike_example();
        let g = GeometryConstants::default();
        let t = term_domination(&m, &FeatureSplit::head(3, 1000).unwrap(), &g).unwrap();
        assert!(t.holds());
        let iso = isotropic_model(10, 400, 1.0).unwrap();
        assert!(matches!(
            term_domination(&iso, &FeatureSplit::head(1, 400).unwrap(), &g),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rate_report_consistency() {
        let r = rate_report(
            &spike_example(),
            &GeometryConstants::default(),
            None,
            &RateKnobs::default(),
        )
        .unwrap();
        assert_eq!(r.r_star, max4(&r.r_star_terms));
        assert_eq!(r.square, r.square_terms.iter().copied().fold(0.0, f64::max));
        assert!(r.lower_bound.unwrap() <= r.r_star * r.r_star);
    }
}
