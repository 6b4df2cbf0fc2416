//! Event-membership checks for the random-matrix facts behind benign
//! overfitting.
//!
//! Each check evaluates one realization and returns a [`CheckReport`] with
//! `n_trials = 1`; reports merge associatively so a Monte Carlo run is a fold
//! over per-trial reports. Designs passed here are in eigen-coordinates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, GramPinv};
use crate::sampler::{NoiseFamily, Standardized};
use crate::seed::Rng;
use crate::{Error, Result};

/// Maximum number of rejected proposals in cone sampling.
pub const MAX_CONE_REJECTIONS: usize = 10_000;

/// Observed range of a named quantity across merged trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: f64,
    pub max: f64,
}

impl Extent {
    pub fn point(v: f64) -> Self {
        Extent { min: v, max: v }
    }

    pub fn merge(self, other: Extent) -> Extent {
        Extent {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub observed: BTreeMap<String, Extent>,
    pub threshold: BTreeMap<String, f64>,
    /// Every merged trial passed.
    pub pass: bool,
    pub passes: usize,
    pub n_trials: usize,
    pub pass_rate: f64,
}

impl CheckReport {
    pub fn single(name: &str, pass: bool) -> Self {
        Self::counted(name, usize::from(pass), 1)
    }

    pub fn counted(name: &str, passes: usize, n_trials: usize) -> Self {
        CheckReport {
            name: name.to_string(),
            observed: BTreeMap::new(),
            threshold: BTreeMap::new(),
            pass: passes == n_trials,
            passes,
            n_trials,
            pass_rate: if n_trials == 0 {
                0.0
            } else {
                passes as f64 / n_trials as f64
            },
        }
    }

    pub fn observe(mut self, key: &str, value: f64) -> Self {
        let e = Extent::point(value);
        self.observed
            .entry(key.to_string())
            .and_modify(|x| *x = x.merge(e))
            .or_insert(e);
        self
    }

    pub fn threshold(mut self, key: &str, value: f64) -> Self {
        self.threshold.insert(key.to_string(), value);
        self
    }

    /// Combines two reports of the same check. Order-independent.
    pub fn merge(mut self, other: CheckReport) -> Result<CheckReport> {
        if self.name != other.name {
            return Err(Error::param(
                "report",
                format!("cannot merge {} with {}", self.name, other.name),
            ));
        }
        for (k, v) in other.observed {
            self.observed
                .entry(k)
                .and_modify(|x| *x = x.merge(v))
                .or_insert(v);
        }
        for (k, v) in other.threshold {
            self.threshold.entry(k).or_insert(v);
        }
        self.passes += other.passes;
        self.n_trials += other.n_trials;
        self.pass = self.passes == self.n_trials;
        self.pass_rate = self.passes as f64 / self.n_trials as f64;
        Ok(self)
    }

    pub fn observed_max(&self, key: &str) -> Option<f64> {
        self.observed.get(key).map(|e| e.max)
    }

    pub fn observed_min(&self, key: &str) -> Option<f64> {
        self.observed.get(key).map(|e| e.min)
    }
}

/// Folds per-trial reports produced by `trial(i)` for `i in 0..n_trials`.
pub fn run_trials<F>(n_trials: usize, mut trial: F) -> Result<CheckReport>
where
    F: FnMut(usize) -> Result<CheckReport>,
{
    if n_trials == 0 {
        return Err(Error::param("n_trials", "must be positive"));
    }
    let mut acc = trial(0)?;
    for i in 1..n_trials {
        acc = acc.merge(trial(i)?)?;
    }
    Ok(acc)
}

/// Closed interval for eigenvalues of a normalized Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenBand {
    pub lower: f64,
    pub upper: f64,
}

impl EigenBand {
    pub const HALF_TO_THREE_HALVES: EigenBand = EigenBand {
        lower: 0.5,
        upper: 1.5,
    };

    /// `[(1−2δ)₊², (1+2δ)²]`: the squared singular-value distortion.
    pub fn from_delta(delta: f64) -> Self {
        let lo = (1.0 - 2.0 * delta).max(0.0);
        EigenBand {
            lower: lo * lo,
            upper: (1.0 + 2.0 * delta).powi(2),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

fn eig_extent(m: DMatrix<f64>) -> (f64, f64) {
    let ev = linalg::sym_eigenvalues(m);
    (ev[0], ev[ev.len() - 1])
}

/// Spectrum of `X₂X₂ᵀ / Tr(Σ_tail)` against `band`.
pub fn dm_embedding_check(x2: &DMatrix<f64>, tail_trace: f64, band: EigenBand) -> CheckReport {
    let mut g = linalg::outer_gram(x2);
    g /= tail_trace;
    let (lo, hi) = eig_extent(g);
    CheckReport::single("dm_embedding", band.contains(lo) && band.contains(hi))
        .observe("eig_min", lo)
        .observe("eig_max", hi)
        .threshold("lower", band.lower)
        .threshold("upper", band.upper)
}

/// `s₁(Σ_tail^{1/2}X₂ᵀ) ≤ c(sqrt(Tr Σ_tail²) + sqrt(N)‖Σ_tail‖_op)`.
pub fn dm_upper_check(x2: &DMatrix<f64>, tail_sigmas: &[f64], c: f64) -> Result<CheckReport> {
    if x2.ncols() != tail_sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: tail_sigmas.len(),
            found: x2.ncols(),
        });
    }
    let n = x2.nrows();
    let mut scaled = x2.clone();
    for (mut col, s) in scaled.column_iter_mut().zip(tail_sigmas) {
        col *= s.sqrt();
    }
    let (_, top) = eig_extent(linalg::outer_gram(&scaled));
    let observed = top.max(0.0).sqrt();
    let tr2: f64 = tail_sigmas.iter().map(|s| s * s).sum();
    let op = tail_sigmas.iter().copied().fold(0.0, f64::max);
    let bound = c * (tr2.sqrt() + (n as f64).sqrt() * op);
    Ok(CheckReport::single("dm_upper", observed <= bound)
        .observe("s1", observed)
        .observe(
            "ratio",
            if bound > 0.0 {
                observed / bound
            } else {
                f64::INFINITY
            },
        )
        .threshold("bound", bound)
        .threshold("c", c))
}

/// Eigenvalues of `Σ_head^{-1/2}X₁ᵀX₁Σ_head^{-1/2}/N` within `band`. Requires
/// `k ≤ κ_iso N`.
pub fn isomorphy_check(
    x1: &DMatrix<f64>,
    head_sigmas: &[f64],
    kappa_iso: f64,
    band: EigenBand,
) -> Result<CheckReport> {
    let (n, k) = x1.shape();
    if k != head_sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: head_sigmas.len(),
            found: k,
        });
    }
    if k as f64 > kappa_iso * n as f64 {
        return Err(Error::RegimeViolation(format!(
            "head dimension {k} exceeds kappa_iso * N = {}",
            kappa_iso * n as f64
        )));
    }
    if k == 0 {
        return Ok(CheckReport::single("isomorphy", true));
    }
    let mut w = x1.clone();
    for (mut col, s) in w.column_iter_mut().zip(head_sigmas) {
        col /= s.sqrt();
    }
    let mut gram = linalg::inner_gram(&w);
    gram /= n as f64;
    let (lo, hi) = eig_extent(gram);
    Ok(
        CheckReport::single("isomorphy", band.contains(lo) && band.contains(hi))
            .observe("eig_min", lo)
            .observe("eig_max", hi)
            .threshold("lower", band.lower)
            .threshold("upper", band.upper),
    )
}

/// Restricted isomorphy on the cone `{v : R_N‖v‖ ≤ ‖Σ_head^{1/2}v‖}`.
///
/// The top eigenvector is always tested; the remaining `n_dirs − 1`
/// directions are `Σ_head^{1/2}g` proposals kept when they fall in the cone.
pub fn restricted_cone_check(
    x1: &DMatrix<f64>,
    head_sigmas: &[f64],
    r_n: f64,
    n_dirs: usize,
    rng: &mut Rng,
) -> Result<CheckReport> {
    let (n, k) = x1.shape();
    if k != head_sigmas.len() || k == 0 {
        return Err(Error::DimensionMismatch {
            expected: head_sigmas.len(),
            found: k,
        });
    }
    let s_max = head_sigmas.iter().copied().fold(0.0, f64::max);
    if r_n * r_n > s_max {
        return Err(Error::ConeEmpty {
            r_n,
            limit: s_max.sqrt(),
        });
    }
    let top = head_sigmas.iter().enumerate().fold(
        0,
        |best, (j, &s)| if s > head_sigmas[best] { j } else { best },
    );

    let ratio = |v: &DVector<f64>| -> f64 {
        let w: f64 = v.iter().zip(head_sigmas).map(|(a, s)| s * a * a).sum();
        (x1 * v).norm_squared() / n as f64 / w
    };
    let in_cone = |v: &DVector<f64>| -> bool {
        let w: f64 = v.iter().zip(head_sigmas).map(|(a, s)| s * a * a).sum();
        r_n * r_n * v.norm_squared() <= w
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut tested = 0usize;
    let mut rejected = 0usize;
    let mut e = DVector::zeros(k);
    e[top] = 1.0;
    let mut v = e;
    loop {
        let q = ratio(&v);
        lo = lo.min(q);
        hi = hi.max(q);
        tested += 1;
        if tested >= n_dirs.max(1) {
            break;
        }
        loop {
            let cand = DVector::from_fn(k, |j, _| {
                let z: f64 = StandardNormal.sample(rng);
                head_sigmas[j].sqrt() * z
            });
            if in_cone(&cand) {
                v = cand;
                break;
            }
            rejected += 1;
            if rejected > MAX_CONE_REJECTIONS {
                return Err(Error::ConeEmpty {
                    r_n,
                    limit: s_max.sqrt(),
                });
            }
        }
    }
    let band = EigenBand::HALF_TO_THREE_HALVES;
    Ok(
        CheckReport::single("restricted_cone", band.contains(lo) && band.contains(hi))
            .observe("ratio_min", lo)
            .observe("ratio_max", hi)
            .observe("rejections", rejected as f64)
            .threshold("lower", band.lower)
            .threshold("upper", band.upper)
            .threshold("r_n", r_n),
    )
}

/// `max_i |‖P_tail X_i‖² / Tr(Σ_tail) − 1| ≤ δ`.
pub fn norm_concentration_check(x2: &DMatrix<f64>, tail_trace: f64, delta: f64) -> CheckReport {
    let worst = x2
        .row_iter()
        .map(|r| (r.norm_squared() / tail_trace - 1.0).abs())
        .fold(0.0, f64::max);
    CheckReport::single("norm_concentration", worst <= delta)
        .observe("max_deviation", worst)
        .threshold("delta", delta)
}

/// `Tr(DDᵀ) ≤ c N Tr(Σ_tail²)/Tr(Σ_tail)²` with
/// `D = Σ_tail^{1/2}X₂ᵀ(X₂X₂ᵀ)⁻¹`.
pub fn trace_bound_check(x2: &DMatrix<f64>, tail_sigmas: &[f64], c: f64) -> Result<CheckReport> {
    let (n, m) = x2.shape();
    if m != tail_sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: tail_sigmas.len(),
            found: m,
        });
    }
    let d = noise_operator(x2, tail_sigmas)?;
    let observed = d.norm_squared();
    let tr: f64 = tail_sigmas.iter().sum();
    let tr2: f64 = tail_sigmas.iter().map(|s| s * s).sum();
    let bound = c * n as f64 * tr2 / (tr * tr);
    Ok(CheckReport::single("trace_bound", observed <= bound)
        .observe("trace_ddt", observed)
        .threshold("bound", bound)
        .threshold("c", c))
}

/// `D = Σ_tail^{1/2}X₂ᵀ(X₂X₂ᵀ)⁻¹`, the map from noise to the tail part of the
/// interpolant measured in `Σ`-norm.
pub fn noise_operator(x2: &DMatrix<f64>, tail_sigmas: &[f64]) -> Result<DMatrix<f64>> {
    let (n, m) = x2.shape();
    let pinv = GramPinv::new(linalg::outer_gram(x2), n.max(m));
    if !pinv.is_full_rank() {
        return Err(Error::TailRankDeficient);
    }
    // (X₂X₂ᵀ)⁻¹X₂ is N×m; D is its transpose with rows scaled.
    let mut b = pinv.apply_mat(x2);
    for (mut col, s) in b.column_iter_mut().zip(tail_sigmas) {
        col *= s.sqrt();
    }
    Ok(b.transpose())
}

/// Fraction of noise draws with `‖Dξ‖ ≤ 1.5 σ_ξ sqrt(Tr DDᵀ)`.
pub fn noise_operator_check(
    d: &DMatrix<f64>,
    draws: usize,
    sigma_xi: f64,
    family: NoiseFamily,
    rng: &mut Rng,
) -> Result<CheckReport> {
    let tr = d.norm_squared();
    if !(tr > 0.0) {
        return Err(Error::Precondition("Tr(DDᵀ) must be positive".into()));
    }
    if draws == 0 {
        return Err(Error::param("draws", "must be positive"));
    }
    let law = Standardized::new(family.into())?;
    let n = d.ncols();
    let op = eig_extent(linalg::inner_gram(d)).1.max(0.0).sqrt();
    let bound = 1.5 * sigma_xi * tr.sqrt();
    let mut passes = 0;
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let xi = DVector::from_fn(n, |_, _| sigma_xi * law.draw(rng));
        let v = (d * xi).norm();
        if v <= bound {
            passes += 1;
        }
        if bound > 0.0 {
            worst = worst.max(v / bound);
        }
    }
    Ok(CheckReport::counted("noise_operator", passes, draws)
        .observe("max_ratio", worst)
        .observe("stable_rank", tr / (op * op))
        .threshold("bound", bound))
}

/// Check selection for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    DmEmbedding {
        #[serde(default)]
        delta: Option<f64>,
    },
    DmUpper {
        #[serde(default = "default_dm_upper_c")]
        c: f64,
    },
    Isomorphy,
    RestrictedCone {
        #[serde(default = "default_dirs")]
        n_dirs: usize,
    },
    NormConcentration {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    TraceBound {
        #[serde(default = "default_trace_c")]
        c: f64,
    },
    NoiseOperator {
        #[serde(default = "default_draws")]
        draws: usize,
    },
}

fn default_dm_upper_c() -> f64 {
    6.0
}
fn default_dirs() -> usize {
    100
}
fn default_delta() -> f64 {
    0.25
}
fn default_trace_c() -> f64 {
    20.0
}
fn default_draws() -> usize {
    200
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::DmEmbedding { .. } => "dm_embedding",
            CheckSpec::DmUpper { .. } => "dm_upper",
            CheckSpec::Isomorphy => "isomorphy",
            CheckSpec::RestrictedCone { .. } => "restricted_cone",
            CheckSpec::NormConcentration { .. } => "norm_concentration",
            CheckSpec::TraceBound { .. } => "trace_bound",
            CheckSpec::NoiseOperator { .. } => "noise_operator",
        }
    }
}

/// Inputs shared by all checks for one realized design.
pub struct CheckContext<'a> {
    /// Head block `X_J` in eigen-coordinates.
    pub x_head: &'a DMatrix<f64>,
    /// Tail block `X_{Jᶜ}` in eigen-coordinates.
    pub x_tail: &'a DMatrix<f64>,
    pub head_sigmas: &'a [f64],
    pub tail_sigmas: &'a [f64],
    pub r_n: f64,
    pub kappa_iso: f64,
    pub sigma_xi: f64,
    pub noise_family: NoiseFamily,
}

/// Runs one configured check on one realization.
pub fn run_check(spec: &CheckSpec, ctx: &CheckContext<'_>, rng: &mut Rng) -> Result<CheckReport> {
    let tr: f64 = ctx.tail_sigmas.iter().sum();
    match *spec {
        CheckSpec::DmEmbedding { delta } => {
            let band = delta.map_or(EigenBand::HALF_TO_THREE_HALVES, EigenBand::from_delta);
            Ok(dm_embedding_check(ctx.x_tail, tr, band))
        }
        CheckSpec::DmUpper { c } => dm_upper_check(ctx.x_tail, ctx.tail_sigmas, c),
        CheckSpec::Isomorphy => isomorphy_check(
            ctx.x_head,
            ctx.head_sigmas,
            ctx.kappa_iso,
            EigenBand::HALF_TO_THREE_HALVES,
        ),
        CheckSpec::RestrictedCone { n_dirs } => {
            restricted_cone_check(ctx.x_head, ctx.head_sigmas, ctx.r_n, n_dirs, rng)
        }
        CheckSpec::NormConcentration { delta } => {
            Ok(norm_concentration_check(ctx.x_tail, tr, delta))
        }
        CheckSpec::TraceBound { c } => trace_bound_check(ctx.x_tail, ctx.tail_sigmas, c),
        CheckSpec::NoiseOperator { draws } => {
            let d = noise_operator(ctx.x_tail, ctx.tail_sigmas)?;
            let sigma = if ctx.sigma_xi > 0.0 {
                ctx.sigma_xi
            } else {
                1.0
            };
            noise_operator_check(&d, draws, sigma, ctx.noise_family, rng)
        }
    }
}

/// Resolves a check name, or `all`, to canonical names.
pub fn parse_check_name(name: &str) -> Option<Vec<&'static str>> {
    const ALL: [&str; 7] = [
        "dm_embedding",
        "dm_upper",
        "isomorphy",
        "restricted_cone",
        "norm_concentration",
        "trace_bound",
        "noise_operator",
    ];
    if name == "all" {
        return Some(ALL.to_vec());
    }
    ALL.iter().find(|&&n| n == name).map(|&n| alloc::vec![n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use alloc::vec;

    fn gaussian(n: usize, p: usize, rng: &mut Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn merge_is_order_independent() {
        let a = CheckReport::single("x", true).observe("v", 1.0);
        let b = CheckReport::single("x", false).observe("v", 3.0);
        let c = CheckReport::single("x", true).observe("v", -2.0);
        let ab_c = a
            .clone()
            .merge(b.clone())
            .unwrap()
            .merge(c.clone())
            .unwrap();
        let c_ba = c.merge(b).unwrap().merge(a).unwrap();
        assert_eq!(ab_c, c_ba);
        assert_eq!(ab_c.passes, 2);
        assert_eq!(ab_c.pass_rate, 2.0 / 3.0);
        assert!(!ab_c.pass);
        assert_eq!(
            ab_c.observed["v"],
            Extent {
                min: -2.0,
                max: 3.0
            }
        );
        assert!(CheckReport::single("y", true)
            .merge(CheckReport::single("x", true))
            .is_err());
    }

    #[test]
    fn dm_embedding_isotropic() {
        let mut rng = seed::rng(1);
        let r = run_trials(100, |_| {
            Ok(dm_embedding_check(
                &gaussian(40, 4000, &mut rng),
                4000.0,
                EigenBand::from_delta(0.25),
            ))
        })
        .unwrap();
        assert!(r.pass_rate >= 0.95, "{}", r.pass_rate);
    }

    #[test]
    fn dm_embedding_single_row_and_vacuous_delta() {
        let mut rng = seed::rng(2);
        let r = run_trials(50, |_| {
            Ok(dm_embedding_check(
                &gaussian(1, 4000, &mut rng),
                4000.0,
                EigenBand::HALF_TO_THREE_HALVES,
            ))
        })
        .unwrap();
        assert!(r.pass);
        let band = EigenBand::from_delta(1.0);
        assert_eq!(band.lower, 0.0);
        let r = dm_embedding_check(&gaussian(5, 200, &mut rng), 200.0, band);
        assert!(r.pass);
    }

    #[test]
    fn dm_upper_examples() {
        let r = dm_upper_check(&DMatrix::zeros(3, 5), &[1.0; 5], 6.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.observed_max("s1"), Some(0.0));
        let mut rng = seed::rng(3);
        let r = run_trials(100, |_| {
            dm_upper_check(&gaussian(50, 2000, &mut rng), &[1.0; 2000], 6.0)
        })
        .unwrap();
        assert!(r.pass_rate >= 0.99);
        let r = dm_upper_check(&gaussian(2, 4, &mut rng), &[1.0; 4], 0.0).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn isomorphy_examples() {
        let mut rng = seed::rng(4);
        let r = isomorphy_check(
            &gaussian(10_000, 1, &mut rng),
            &[1.0],
            0.25,
            EigenBand {
                lower: 0.95,
                upper: 1.05,
            },
        )
        .unwrap();
        assert!(r.pass);

        // Constructed design with whitened Gram exactly I.
        let k = 3;
        let n = 16;
        let sig = [4.0, 2.0, 1.0];
        let mut x = DMatrix::zeros(n, k);
        for j in 0..k {
            x[(j, j)] = (n as f64).sqrt() * sig[j].sqrt();
        }
        let r = isomorphy_check(&x, &sig, 0.25, EigenBand::HALF_TO_THREE_HALVES).unwrap();
        assert!(r.pass);
        assert!((r.observed_min("eig_min").unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(
            isomorphy_check(
                &gaussian(10, 5, &mut rng),
                &[1.0; 5],
                0.25,
                EigenBand::HALF_TO_THREE_HALVES
            ),
            Err(Error::RegimeViolation(_))
        ));
    }

    #[test]
    fn restricted_cone_examples() {
        let mut rng = seed::rng(5);
        let sig = vec![4.0, 1.0, 0.5, 0.25];
        let z = gaussian(400, 4, &mut rng);
        let x = DMatrix::from_fn(400, 4, |i, j| z[(i, j)] * sig[j].sqrt());
        let r = restricted_cone_check(&x, &sig, 0.0, 50, &mut rng).unwrap();
        assert!(r.pass);
        let r = restricted_cone_check(&x, &sig, 1.9, 20, &mut rng).unwrap();
        assert_eq!(r.n_trials, 1);
        assert!(matches!(
            restricted_cone_check(&x, &[1.0; 4], 2.0, 10, &mut rng),
            Err(Error::ConeEmpty { .. })
        ));
    }

    #[test]
    fn norm_concentration_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let r = norm_concentration_check(&x, 2.0, 0.0);
        assert!(r.pass);
        assert!(r.observed_max("max_deviation").unwrap() < 1e-15);
        let mut rng = seed::rng(6);
        let r = run_trials(100, |_| {
            Ok(norm_concentration_check(
                &gaussian(50, 4000, &mut rng),
                4000.0,
                0.25,
            ))
        })
        .unwrap();
        assert!(r.pass_rate >= 0.95);
    }

    #[test]
    fn trace_bound_examples() {
        // Orthogonal rows of norm sqrt(m): Tr(DDᵀ) = N/m.
        let (n, m) = (2, 4);
        let x = DMatrix::from_row_slice(n, m, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0]);
        let r = trace_bound_check(&x, &[1.0; 4], 1.0).unwrap();
        assert!((r.observed_max("trace_ddt").unwrap() - 0.5).abs() < 1e-14);
        assert!(r.pass);
        assert!(!trace_bound_check(&x, &[1.0; 4], 0.0).unwrap().pass);

        let mut rng = seed::rng(7);
        let r = run_trials(100, |_| {
            trace_bound_check(&gaussian(40, 2000, &mut rng), &[1.0; 2000], 20.0)
        })
        .unwrap();
        assert!(r.pass_rate >= 0.95);
    }

    #[test]
    fn noise_operator_examples() {
        let mut rng = seed::rng(8);
        assert!(matches!(
            noise_operator_check(
                &DMatrix::zeros(3, 3),
                10,
                1.0,
                NoiseFamily::Gaussian,
                &mut rng
            ),
            Err(Error::Precondition(_))
        ));
        let n = 100;
        let d = DMatrix::identity(n, n) / (n as f64).sqrt();
        let r = noise_operator_check(&d, 1000, 1.0, NoiseFamily::Gaussian, &mut rng).unwrap();
        assert!(r.pass_rate >= 0.99);
        let r = noise_operator_check(&d, 1000, 1.0, NoiseFamily::StudentT { dof: 6.0 }, &mut rng)
            .unwrap();
        assert!(r.pass_rate >= 0.9);
        assert_eq!(r.n_trials, 1000);
    }

    #[test]
    fn check_names() {
        assert_eq!(parse_check_name("all").unwrap().len(), 7);
        assert_eq!(parse_check_name("isomorphy"), Some(vec!["isomorphy"]));
        assert_eq!(parse_check_name("bogus"), None);
        assert_eq!(CheckSpec::Isomorphy.name(), "isomorphy");
    }
}
