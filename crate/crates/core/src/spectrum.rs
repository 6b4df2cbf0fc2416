//! Functionals of the covariance spectrum.
//!
//! Everything here is a pure function of the ordered eigenvalues
//! `σ_1 ≥ … ≥ σ_p > 0` and of an index split `J ⊔ Jᶜ = {1..p}`.
//! Indices exposed by the API are 1-based; `k = 0` is the empty head.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg;
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Orthogonality tolerance for an explicit eigenbasis.
pub const BASIS_TOLERANCE: f64 = 1e-10;

/// Ordered eigenvalues of Σ with an optional eigenbasis `U` (`Σ = U D Uᵀ`).
///
/// Without a basis the canonical basis is implied and vectors/designs are
/// already in eigen-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    sigmas: Vec<f64>,
    basis: Option<DMatrix<f64>>,
}

impl Spectrum {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::BadSpectrum("spectrum is empty".into()));
        }
        for (i, &s) in sigmas.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::BadSpectrum(format!(
                    "eigenvalue {} = {s} is not strictly positive",
                    i + 1
                )));
            }
            if i > 0 && s > sigmas[i - 1] {
                return Err(Error::SpectrumNotSorted { index: i + 1 });
            }
        }
        Ok(Spectrum {
            sigmas,
            basis: None,
        })
    }

    /// Attaches an orthogonal eigenbasis (columns are eigenvectors).
    pub fn with_basis(mut self, basis: DMatrix<f64>) -> Result<Self> {
        let p = self.p();
        if basis.nrows() != p || basis.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: basis.nrows().max(basis.ncols()),
            });
        }
        let deviation = linalg::orthogonality_defect(&basis);
        if deviation > BASIS_TOLERANCE {
            return Err(Error::BasisNotOrthogonal { deviation });
        }
        self.basis = Some(basis);
        Ok(self)
    }

    /// Same spectrum with a random orthogonal basis (QR of a Gaussian matrix
    /// with sign-fixed R). Only used to exercise rotation invariance.
    pub fn with_random_rotation(self, rng: &mut Rng) -> Result<Self> {
        let p = self.p();
        let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..p {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        self.with_basis(q)
    }

    pub fn p(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// `σ_j` for a 1-based index.
    pub fn sigma(&self, j: usize) -> f64 {
        self.sigmas[j - 1]
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn trace(&self) -> f64 {
        self.sigmas.iter().sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.sigmas[0]
    }

    /// Coordinates of `v` in the eigenbasis (`Uᵀ v`).
    pub fn to_eigen(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(u) => u.tr_mul(v),
            None => v.clone(),
        }
    }

    /// Inverse of [`Spectrum::to_eigen`] (`U v`).
    pub fn from_eigen(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(u) => u * v,
            None => v.clone(),
        }
    }

    /// Design expressed in eigen-coordinates (`X U`).
    pub fn design_to_eigen(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            Some(u) => x * u,
            None => x.clone(),
        }
    }

    /// Eigenvalues restricted to a 0-based index list.
    pub fn gather(&self, idx0: &[usize]) -> Vec<f64> {
        idx0.iter().map(|&j| self.sigmas[j]).collect()
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        self.sigmas.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let sigmas = Vec::<f64>::deserialize(d)?;
        Spectrum::new(sigmas).map_err(serde::de::Error::custom)
    }
}

/// Parametric spectrum families addressable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumGenerator {
    /// Literal eigenvalues.
    Explicit { values: Vec<f64> },
    /// `σ_j = level`.
    Isotropic { p: usize, level: f64 },
    /// `σ_j = scale · ratio^j` for `j = 1..p`.
    Geometric { p: usize, ratio: f64, scale: f64 },
    /// `σ_j = scale · j^{-alpha}`.
    Polynomial { p: usize, alpha: f64, scale: f64 },
    /// `spikes` eigenvalues at `spike_level`, the rest at `flat_level`.
    SpikeFlat {
        p: usize,
        spikes: usize,
        spike_level: f64,
        flat_level: f64,
    },
}

impl SpectrumGenerator {
    pub fn build(&self) -> Result<Spectrum> {
        let sigmas: Vec<f64> = match *self {
            SpectrumGenerator::Explicit { ref values } => values.clone(),
            SpectrumGenerator::Isotropic { p, level } => alloc::vec![level; p],
            SpectrumGenerator::Geometric { p, ratio, scale } => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(Error::param("ratio", "must lie in (0, 1]"));
                }
                (1..=p).map(|j| scale * ratio.powi(j as i32)).collect()
            }
            SpectrumGenerator::Polynomial { p, alpha, scale } => {
                if alpha < 0.0 {
                    return Err(Error::param("alpha", "must be non-negative"));
                }
                (1..=p).map(|j| scale * (j as f64).powf(-alpha)).collect()
            }
            SpectrumGenerator::SpikeFlat {
                p,
                spikes,
                spike_level,
                flat_level,
            } => {
                if spikes > p {
                    return Err(Error::param("spikes", "exceeds p"));
                }
                (0..p)
                    .map(|j| if j < spikes { spike_level } else { flat_level })
                    .collect()
            }
        };
        Spectrum::new(sigmas)
    }
}

/// Index set `J ⊆ {1..p}` where estimation happens; `Jᶜ` is where the
/// interpolant overfits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSplit {
    p: usize,
    indices: Vec<usize>,
}

impl FeatureSplit {
    /// Contiguous head `J = {1..k}`.
    pub fn head(k: usize, p: usize) -> Result<Self> {
        if k > p {
            return Err(Error::BadSplit(format!("k = {k} exceeds p = {p}")));
        }
        Ok(FeatureSplit {
            p,
            indices: (1..=k).collect(),
        })
    }

    /// Arbitrary `J` given by 1-based indices (any order, no duplicates).
    pub fn from_indices(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::BadSplit(format!("duplicate index {}", w[0])));
            }
        }
        if let Some(&j) = indices.first() {
            if j == 0 {
                return Err(Error::BadSplit("indices are 1-based".to_string()));
            }
        }
        if let Some(&j) = indices.last() {
            if j > p {
                return Err(Error::BadSplit(format!("index {j} exceeds p = {p}")));
            }
        }
        Ok(FeatureSplit { p, indices })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Sorted 1-based indices of `J`.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn head_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn tail_dim(&self) -> usize {
        self.p - self.indices.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// `true` at 0-based positions belonging to `J`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = alloc::vec![false; self.p];
        for &j in &self.indices {
            m[j - 1] = true;
        }
        m
    }

    pub fn head0(&self) -> Vec<usize> {
        self.indices.iter().map(|j| j - 1).collect()
    }

    pub fn tail0(&self) -> Vec<usize> {
        let mask = self.mask();
        (0..self.p).filter(|&j| !mask[j]).collect()
    }

    /// Whether `J = {1..k}` for some `k`.
    pub fn is_contiguous_head(&self) -> bool {
        self.indices.iter().enumerate().all(|(i, &j)| j == i + 1)
    }

    fn check_p(&self, s: &Spectrum) -> Result<()> {
        if self.p != s.p() {
            return Err(Error::DimensionMismatch {
                expected: s.p(),
                found: self.p,
            });
        }
        Ok(())
    }

    fn tail_nonempty(&self, s: &Spectrum) -> Result<()> {
        self.check_p(s)?;
        if self.tail_dim() == 0 {
            return Err(Error::TailEmpty);
        }
        Ok(())
    }
}

/// How the Gaussian mean width `ℓ*(Σ_tail^{1/2} B₂)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LStarMethod {
    /// `sqrt(Tr Σ_tail)`, the upper end of `[sqrt(Tr/2), sqrt(Tr)]`.
    #[default]
    TraceSurrogate,
    /// Sample mean of `‖Σ_tail^{1/2} G‖₂` over `draws` Gaussian vectors.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Absolute constants that the theory leaves unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConstants {
    pub kappa_dm: f64,
    pub kappa_iso: f64,
    /// `c₀` in the `k**` / `R_N` fixed-point definitions.
    pub c0_fixedpoint: f64,
    /// Effective-dimension multiplier in `k*_b`.
    pub b: f64,
    pub lstar_method: LStarMethod,
}

impl Default for GeometryConstants {
    fn default() -> Self {
        GeometryConstants {
            kappa_dm: 1.0,
            kappa_iso: 0.25,
            c0_fixedpoint: 0.25,
            b: 4.0,
            lstar_method: LStarMethod::TraceSurrogate,
        }
    }
}

impl GeometryConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_dm > 0.0 && self.kappa_dm <= 1.0) {
            return Err(Error::param("kappa_dm", "must lie in (0, 1]"));
        }
        if !(self.kappa_iso > 0.0 && self.kappa_iso < 1.0) {
            return Err(Error::param("kappa_iso", "must lie in (0, 1)"));
        }
        if !(self.c0_fixedpoint > 0.0) {
            return Err(Error::param("c0_fixedpoint", "must be positive"));
        }
        if !(self.b > 0.0) {
            return Err(Error::param("b", "must be positive"));
        }
        if let LStarMethod::MonteCarlo { draws, .. } = self.lstar_method {
            if draws == 0 {
                return Err(Error::param("lstar_method.draws", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0_fixedpoint = c0;
        self
    }
}

/// `(r_k, R_k)`: `Tr/‖·‖_op` and `Tr²/Tr(·²)` of the tail block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRanks {
    pub r: f64,
    pub big_r: f64,
}

/// Regime of the complexity fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `|J| ≤ c₀N`: full isomorphy, `R_N = 0`.
    A,
    /// `k**` exists: `R_N = sqrt(σ_{k**})`.
    B,
    /// No admissible `k₀`: `R_N = sqrt(Tr(Σ_J)/(c₀N))`.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub r_n: f64,
    pub regime: Regime,
    /// `k**` (1-based within the head ordering) in regime B.
    pub k_double_star: Option<usize>,
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|s| s * s).sum()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues indexed by `Jᶜ`, in spectrum order.
pub fn tail_sigmas(s: &Spectrum, split: &FeatureSplit) -> Result<Vec<f64>> {
    split.check_p(s)?;
    Ok(s.gather(&split.tail0()))
}

/// Eigenvalues indexed by `J`, in spectrum order.
pub fn head_sigmas(s: &Spectrum, split: &FeatureSplit) -> Result<Vec<f64>> {
    split.check_p(s)?;
    Ok(s.gather(&split.head0()))
}

/// `Tr(Σ_{Jᶜ})`.
pub fn tail_trace(s: &Spectrum, split: &FeatureSplit) -> Result<f64> {
    split.tail_nonempty(s)?;
    Ok(tail_sigmas(s, split)?.iter().sum())
}

/// `Tr(Σ²_{Jᶜ})`.
pub fn tail_trace_sq(s: &Spectrum, split: &FeatureSplit) -> Result<f64> {
    split.tail_nonempty(s)?;
    Ok(sum_sq(&tail_sigmas(s, split)?))
}

pub fn effective_ranks(s: &Spectrum, split: &FeatureSplit) -> Result<EffectiveRanks> {
    split.tail_nonempty(s)?;
    let tail = tail_sigmas(s, split)?;
    let tr: f64 = tail.iter().sum();
    Ok(EffectiveRanks {
        r: tr / max_of(&tail),
        big_r: tr * tr / sum_sq(&tail),
    })
}

/// `ℓ*(Σ_tail^{1/2} B₂) = E‖Σ_tail^{1/2} G‖₂`.
pub fn gaussian_mean_width(
    s: &Spectrum,
    split: &FeatureSplit,
    g: &GeometryConstants,
) -> Result<f64> {
    split.tail_nonempty(s)?;
    let tail = tail_sigmas(s, split)?;
    let tr: f64 = tail.iter().sum();
    match g.lstar_method {
        LStarMethod::TraceSurrogate => Ok(tr.sqrt()),
        LStarMethod::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::param("lstar_method.draws", "must be positive"));
            }
            let mut rng = seed::rng(seed::derive(seed, seed::tag::WIDTH));
            let mut acc = 0.0;
            for _ in 0..draws {
                let q: f64 = tail
                    .iter()
                    .map(|&sig| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sig * z * z
                    })
                    .sum();
                acc += q.sqrt();
            }
            // Jensen: E‖Σ^{1/2}G‖ ≤ sqrt(Tr Σ); sampling noise cannot push past it.
            Ok((acc / draws as f64).min(tr.sqrt()))
        }
    }
}

/// `ℓ*²` evaluated with the configured method.
pub fn mean_width_sq(s: &Spectrum, split: &FeatureSplit, g: &GeometryConstants) -> Result<f64> {
    match g.lstar_method {
        LStarMethod::TraceSurrogate => tail_trace(s, split),
        LStarMethod::MonteCarlo { .. } => gaussian_mean_width(s, split, g).map(|w| w * w),
    }
}

/// Dvoretsky dimension of the tail ellipsoid: `ℓ*² / ‖Σ_tail‖_op`.
pub fn dvoretsky_dimension(
    s: &Spectrum,
    split: &FeatureSplit,
    g: &GeometryConstants,
) -> Result<f64> {
    let w2 = mean_width_sq(s, split, g)?;
    Ok(w2 / max_of(&tail_sigmas(s, split)?))
}

/// Tail sums `S_k = Σ_{j>k} σ_j` for `k = 0..p`, accumulated from the
/// smallest eigenvalue up.
fn suffix_sums(sigmas: &[f64]) -> Vec<f64> {
    let p = sigmas.len();
    let mut out = alloc::vec![0.0; p + 1];
    for k in (0..p).rev() {
        out[k] = out[k + 1] + sigmas[k];
    }
    out
}

/// `r_k(Σ)` for a contiguous head `{1..k}`, `k = 0..p-1`.
pub fn contiguous_effective_rank(s: &Spectrum, k: usize) -> Result<f64> {
    if k >= s.p() {
        return Err(Error::TailEmpty);
    }
    let tr: f64 = s.sigmas()[k..].iter().sum();
    Ok(tr / s.sigmas()[k])
}

/// `k*_b = min{k ≥ 0 : r_k(Σ) ≥ bN}`; `None` encodes `+∞`.
pub fn k_star(s: &Spectrum, n: usize, g: &GeometryConstants) -> Option<usize> {
    let target = g.b * n as f64;
    let sig = s.sigmas();
    let tails = suffix_sums(sig);
    (0..s.p()).find(|&k| tails[k] / sig[k] >= target)
}

/// `max{k₀ ≤ ⌊c₀N⌋ : Σ_{j=k₀}^{k} σ_j ≤ (c₀N − k₀ + 1)σ_{k₀}}` over the
/// contiguous head `{1..k}`.
pub fn k_double_star(
    s: &Spectrum,
    k: usize,
    n: usize,
    g: &GeometryConstants,
) -> Result<Option<usize>> {
    if k == 0 || k > s.p() {
        return Err(Error::BadSplit(format!("k = {k} outside 1..={}", s.p())));
    }
    Ok(k_double_star_of(
        &s.sigmas()[..k],
        g.c0_fixedpoint * n as f64,
    ))
}

/// Same scan on an arbitrary non-increasing head list.
fn k_double_star_of(head: &[f64], c0n: f64) -> Option<usize> {
    let k = head.len();
    let upper = (c0n.floor().max(0.0) as usize).min(k);
    if upper == 0 {
        return None;
    }
    let tails = suffix_sums(head);
    (1..=upper)
        .rev()
        .find(|&k0| tails[k0 - 1] <= (c0n - k0 as f64 + 1.0) * head[k0 - 1])
}

/// Upper estimate of `R_N(Σ_J^{1/2} B₂)` by regime.
pub fn fixed_point_rn(
    s: &Spectrum,
    split: &FeatureSplit,
    n: usize,
    g: &GeometryConstants,
) -> Result<FixedPoint> {
    split.check_p(s)?;
    let head = head_sigmas(s, split)?;
    if n == 0 {
        return Err(Error::param("N", "must be positive"));
    }
    let c0n = g.c0_fixedpoint * n as f64;
    if head.len() as f64 <= c0n {
        return Ok(FixedPoint {
            r_n: 0.0,
            regime: Regime::A,
            k_double_star: None,
        });
    }
    match k_double_star_of(&head, c0n) {
        Some(k0) => Ok(FixedPoint {
            r_n: head[k0 - 1].sqrt(),
            regime: Regime::B,
            k_double_star: Some(k0),
        }),
        None => {
            let tr: f64 = head.iter().sum();
            Ok(FixedPoint {
                r_n: (tr / c0n).sqrt(),
                regime: Regime::C,
                k_double_star: None,
            })
        }
    }
}

/// Whether `Σ_{j∈J} min(σ_j, R²) ≤ c₀R²N`.
pub fn fixed_point_inequality(head: &[f64], r: f64, n: usize, c0: f64) -> bool {
    let r2 = r * r;
    let lhs: f64 = head.iter().map(|&s| s.min(r2)).sum();
    lhs <= c0 * r2 * n as f64
}

/// `κ_DM ℓ*²(Σ_tail^{1/2}B₂) / N`, the level separating `J1` from `J2`.
pub fn j1_threshold(
    s: &Spectrum,
    split: &FeatureSplit,
    n: usize,
    g: &GeometryConstants,
) -> Result<f64> {
    Ok(g.kappa_dm * mean_width_sq(s, split, g)? / n as f64)
}

/// `J1 = {j ∈ J : σ_j ≥ threshold}` (ties included) and `J2 = J \ J1`, as
/// 1-based index lists.
pub fn split_j1_j2(
    s: &Spectrum,
    split: &FeatureSplit,
    n: usize,
    g: &GeometryConstants,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let thr = j1_threshold(s, split, n, g)?;
    Ok(split.indices().iter().partition(|&&j| s.sigma(j) >= thr))
}

/// Diagonal of `Σ_{J,thres}^{-1/2}` in the eigenbasis.
pub fn thresholded_inverse_weights(
    s: &Spectrum,
    split: &FeatureSplit,
    n: usize,
    g: &GeometryConstants,
) -> Result<Vec<f64>> {
    let thr = j1_threshold(s, split, n, g)?;
    let mask = split.mask();
    Ok(s.sigmas()
        .iter()
        .zip(mask)
        .map(|(&sig, in_head)| {
            if in_head {
                1.0 / sig.max(thr).sqrt()
            } else {
                0.0
            }
        })
        .collect())
}
