//! Seeded generation of designs, noise and responses.
//!
//! Rows are drawn in the eigenbasis as `Σ^{1/2} Z` with `Z` a vector of
//! i.i.d. standardized coordinates, then rotated when the spectrum carries a
//! basis.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT, Weibull};
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};
use crate::spectrum::Spectrum;
use crate::{Error, Result};

/// Law of the standardized design coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignFamily {
    #[default]
    Gaussian,
    /// Student-t with `dof > 4`, rescaled to unit variance.
    StudentT { dof: f64 },
    /// `±W` with `W ~ Weibull(1, shape)`, rescaled to unit variance.
    SymmetrizedWeibull { shape: f64 },
}

/// Law of the standardized noise coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    StudentT {
        dof: f64,
    },
}

impl From<NoiseFamily> for DesignFamily {
    fn from(n: NoiseFamily) -> Self {
        match n {
            NoiseFamily::Gaussian => DesignFamily::Gaussian,
            NoiseFamily::StudentT { dof } => DesignFamily::StudentT { dof },
        }
    }
}

fn check_dof(dof: f64) -> Result<()> {
    if dof.is_nan() || dof <= 4.0 {
        return Err(Error::BadMoment { dof });
    }
    Ok(())
}

impl DesignFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignFamily::Gaussian => Ok(()),
            DesignFamily::StudentT { dof } => check_dof(dof),
            DesignFamily::SymmetrizedWeibull { shape } => {
                if shape.is_finite() && shape > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("shape", format!("{shape} is not positive")))
                }
            }
        }
    }

    /// Whether the law has heavier-than-Gaussian tails.
    pub fn is_heavy_tailed(&self) -> bool {
        match *self {
            DesignFamily::Gaussian => false,
            DesignFamily::StudentT { .. } => true,
            DesignFamily::SymmetrizedWeibull { shape } => shape < 2.0,
        }
    }
}

impl NoiseFamily {
    pub fn validate(&self) -> Result<()> {
        DesignFamily::from(*self).validate()
    }
}

/// Unit-variance symmetric scalar sampler.
#[derive(Debug, Clone, Copy)]
pub enum Standardized {
    Gaussian,
    StudentT { dist: StudentT<f64>, scale: f64 },
    Weibull { dist: Weibull<f64>, scale: f64 },
}

impl Standardized {
    pub fn new(family: DesignFamily) -> Result<Self> {
        family.validate()?;
        Ok(match family {
            DesignFamily::Gaussian => Standardized::Gaussian,
            DesignFamily::StudentT { dof } => Standardized::StudentT {
                dist: StudentT::new(dof).map_err(|e| Error::param("dof", format!("{e}")))?,
                scale: ((dof - 2.0) / dof).sqrt(),
            },
            DesignFamily::SymmetrizedWeibull { shape } => Standardized::Weibull {
                dist: Weibull::new(1.0, shape)
                    .map_err(|e| Error::param("shape", format!("{e}")))?,
                // E W² = Γ(1 + 2/k) for unit scale.
                scale: 1.0 / libm::tgamma(1.0 + 2.0 / shape).sqrt(),
            },
        })
    }

    #[inline]
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            Standardized::Gaussian => StandardNormal.sample(rng),
            Standardized::StudentT { dist, scale } => dist.sample(rng) * scale,
            Standardized::Weibull { dist, scale } => {
                let w = dist.sample(rng) * scale;
                if rng.random::<bool>() {
                    w
                } else {
                    -w
                }
            }
        }
    }
}

/// One experiment instance: `y = Xβ* + ξ` with `X` rows `Σ^{1/2}Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub spectrum: Spectrum,
    /// Signal in eigen-coordinates.
    pub beta_star: Vec<f64>,
    pub sigma_xi: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub design_family: DesignFamily,
    #[serde(default)]
    pub noise_family: NoiseFamily,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta_star.len() != self.spectrum.p() {
            return Err(Error::DimensionMismatch {
                expected: self.spectrum.p(),
                found: self.beta_star.len(),
            });
        }
        if self.n == 0 {
            return Err(Error::param("N", "must be positive"));
        }
        if !(self.sigma_xi.is_finite() && self.sigma_xi >= 0.0) {
            return Err(Error::param("sigma_xi", "must be finite and non-negative"));
        }
        if self.beta_star.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("beta_star", "contains non-finite entries"));
        }
        self.design_family.validate()?;
        self.noise_family.validate()
    }

    pub fn p(&self) -> usize {
        self.spectrum.p()
    }

    pub fn beta_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_star)
    }

    /// Signal in the ambient coordinates of the design.
    pub fn beta_star_ambient(&self) -> DVector<f64> {
        self.spectrum.from_eigen(&self.beta_star())
    }

    /// Same model with `N` replaced.
    pub fn with_n(&self, n: usize) -> Self {
        ModelSpec { n, ..self.clone() }
    }
}

/// Moment parameters of the heavy-tailed theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTailSpec {
    /// `L_q`–`L_2` equivalence constant.
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub kappa_noise: f64,
    pub r_moment: f64,
}

impl HeavyTailSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.l >= 1.0) {
            return Err(Error::param("L", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::param("alpha", "must lie in (0, 2]"));
        }
        if !(self.r > 0.0) {
            return Err(Error::param("R", "must be positive"));
        }
        if !(self.kappa_noise >= 1.0) {
            return Err(Error::param("kappa_noise", "must be at least 1"));
        }
        if !(self.r_moment > 4.0) {
            return Err(Error::BadMoment { dof: self.r_moment });
        }
        Ok(())
    }

    /// Whether a noise law has finite moments of order `r_moment`.
    pub fn admits_noise(&self, family: NoiseFamily) -> bool {
        match family {
            NoiseFamily::Gaussian => true,
            NoiseFamily::StudentT { dof } => self.r_moment < dof,
        }
    }
}

/// One realized trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    /// `N × p` design in ambient coordinates.
    pub x: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

/// `N × p` design with rows `Σ^{1/2}Z`; deterministic in `seed`.
pub fn sample_design(m: &ModelSpec, seed: u64) -> Result<DMatrix<f64>> {
    m.validate()?;
    let law = Standardized::new(m.design_family)?;
    let mut rng = seed::rng(seed);
    let roots: Vec<f64> = m.spectrum.sigmas().iter().map(|s| s.sqrt()).collect();
    let (n, p) = (m.n, m.p());
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        for root in &roots {
            data.push(root * law.draw(&mut rng));
        }
    }
    let x_eig = DMatrix::from_row_slice(n, p, &data);
    Ok(match m.spectrum.basis() {
        Some(u) => x_eig * u.transpose(),
        None => x_eig,
    })
}

/// Noise vector with i.i.d. coordinates of standard deviation `σ_ξ`.
pub fn sample_noise(m: &ModelSpec, seed: u64) -> Result<DVector<f64>> {
    m.validate()?;
    if m.sigma_xi == 0.0 {
        return Ok(DVector::zeros(m.n));
    }
    let law = Standardized::new(m.noise_family.into())?;
    let mut rng = seed::rng(seed);
    Ok(DVector::from_fn(m.n, |_, _| {
        m.sigma_xi * law.draw(&mut rng)
    }))
}

/// Design, noise and response for one trial. Design and noise streams are
/// children of `seed`.
pub fn make_sample(m: &ModelSpec, seed: u64) -> Result<DataSample> {
    let x = sample_design(m, seed::derive(seed, seed::tag::DESIGN))?;
    let xi = sample_noise(m, seed::derive(seed, seed::tag::NOISE))?;
    let y = &x * m.beta_star_ambient() + &xi;
    Ok(DataSample { x, xi, y, seed })
}
