//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use benign_core::bounds::{self, RateKnobs};
use benign_core::checks::CheckSpec;
use benign_core::sampler::{DesignFamily, ModelSpec, NoiseFamily};
use benign_core::spectrum::SpectrumGenerator;
use benign_core::{FeatureSplit, GeometryConstants};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Where the models of an experiment come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// One fully specified model.
    Single(ModelSpec),
    /// A parametric family evaluated at each `N` in `n_values`.
    Sequence {
        family: Family,
        n_values: Vec<usize>,
    },
}

/// `p = round(p_factor · N^p_exponent)`.
pub fn family_dimension(p_factor: f64, p_exponent: f64, n: usize) -> usize {
    (p_factor * (n as f64).powf(p_exponent)).round() as usize
}

fn one() -> f64 {
    1.0
}

/// Signal in eigen-coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Zero,
    /// `scale · e_index` (1-based).
    Coordinate {
        index: usize,
        scale: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl Signal {
    pub fn build(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            Signal::Zero => Ok(vec![0.0; p]),
            Signal::Coordinate { index, scale } => {
                if *index == 0 || *index > p {
                    return Err(LabError::Config(format!(
                        "signal index {index} outside 1..={p}"
                    )));
                }
                let mut v = vec![0.0; p];
                v[index - 1] = *scale;
                Ok(v)
            }
            Signal::Explicit { values } => {
                if values.len() != p {
                    return Err(LabError::Config(format!(
                        "explicit signal has length {}, expected {p}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Two unit spikes over a flat tail of trace `√N`, signal `e₁`.
    Spike {
        p_factor: f64,
        #[serde(default = "one")]
        p_exponent: f64,
        sigma_xi: f64,
        #[serde(default)]
        design_family: DesignFamily,
        #[serde(default)]
        noise_family: NoiseFamily,
    },
    /// `Σ = I_p`, zero signal.
    Isotropic {
        p_factor: f64,
        #[serde(default = "one")]
        p_exponent: f64,
        sigma_xi: f64,
        #[serde(default)]
        design_family: DesignFamily,
        #[serde(default)]
        noise_family: NoiseFamily,
    },
    /// A fixed spectrum and signal; only `N` varies.
    Generator {
        spectrum: SpectrumGenerator,
        signal: Signal,
        sigma_xi: f64,
        #[serde(default)]
        design_family: DesignFamily,
        #[serde(default)]
        noise_family: NoiseFamily,
    },
}

impl Family {
    pub fn model(&self, n: usize) -> Result<ModelSpec> {
        let m = match self {
            Family::Spike {
                p_factor,
                p_exponent,
                sigma_xi,
                design_family,
                noise_family,
            } => ModelSpec {
                design_family: *design_family,
                noise_family: *noise_family,
                ..bounds::spike_model(n, family_dimension(*p_factor, *p_exponent, n), *sigma_xi)?
            },
            Family::Isotropic {
                p_factor,
                p_exponent,
                sigma_xi,
                design_family,
                noise_family,
            } => ModelSpec {
                design_family: *design_family,
                noise_family: *noise_family,
                ..bounds::isotropic_model(
                    n,
                    family_dimension(*p_factor, *p_exponent, n),
                    *sigma_xi,
                )?
            },
            Family::Generator {
                spectrum,
                signal,
                sigma_xi,
                design_family,
                noise_family,
            } => {
                let s = spectrum.build()?;
                let beta = signal.build(s.p())?;
                ModelSpec {
                    spectrum: s,
                    beta_star: beta,
                    sigma_xi: *sigma_xi,
                    n,
                    design_family: *design_family,
                    noise_family: *noise_family,
                }
            }
        };
        m.validate()?;
        Ok(m)
    }

    /// The same family with its distribution laws erased, for shape
    /// comparisons.
    fn shape(&self) -> Family {
        let mut f = self.clone();
        match &mut f {
            Family::Spike {
                design_family,
                noise_family,
                ..
            }
            | Family::Isotropic {
                design_family,
                noise_family,
                ..
            }
            | Family::Generator {
                design_family,
                noise_family,
                ..
            } => {
                *design_family = DesignFamily::Gaussian;
                *noise_family = NoiseFamily::Gaussian;
            }
        }
        f
    }
}

/// Index set `J` used for the head/tail decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    /// `J = {1..k*_b}` (the default).
    KStar,
    /// `J = {1..k}`.
    Head(usize),
    /// Arbitrary 1-based indices.
    Indices(Vec<usize>),
}

impl SplitSpec {
    /// `None` when `k*_b` does not exist.
    pub fn resolve(&self, m: &ModelSpec, g: &GeometryConstants) -> Result<Option<FeatureSplit>> {
        Ok(match self {
            SplitSpec::KStar => match benign_core::spectrum::k_star(&m.spectrum, m.n, g) {
                Some(k) => Some(FeatureSplit::head(k, m.p())?),
                None => None,
            },
            SplitSpec::Head(k) => Some(FeatureSplit::head(*k, m.p())?),
            SplitSpec::Indices(idx) => Some(FeatureSplit::from_indices(idx.clone(), m.p())?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub plotdata: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit {
            csv: true,
            json: true,
            plotdata: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default)]
    pub geometry: GeometryConstants,
    #[serde(default)]
    pub rates: RateKnobs,
    pub n_trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: Emit,
    /// Adds a `wall_time_ms` column. Off by default so outputs stay
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    /// Risk levels `t` for which the summary reports `P(risk_total > t)`.
    #[serde(default)]
    pub exceedance: Vec<f64>,
}

fn default_split() -> SplitSpec {
    SplitSpec::KStar
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| LabError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(LabError::Config("n_trials must be at least 1".into()));
        }
        self.geometry.validate()?;
        if self.exceedance.iter().any(|t| !t.is_finite()) {
            return Err(LabError::Config(
                "exceedance thresholds must be finite".into(),
            ));
        }
        match &self.model {
            ModelSource::Single(m) => m.validate()?,
            ModelSource::Sequence { family, n_values } => {
                if n_values.is_empty() {
                    return Err(LabError::Config("n_values is empty".into()));
                }
                if n_values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(LabError::Config(
                        "n_values must be strictly increasing".into(),
                    ));
                }
                for &n in n_values {
                    family.model(n)?;
                }
            }
        }
        Ok(())
    }

    /// One model per experiment point.
    pub fn models(&self) -> Result<Vec<ModelSpec>> {
        match &self.model {
            ModelSource::Single(m) => Ok(vec![m.clone()]),
            ModelSource::Sequence { family, n_values } => {
                n_values.iter().map(|&n| family.model(n)).collect()
            }
        }
    }

    /// Whether two configs describe the same experiment up to the design and
    /// noise laws.
    pub fn same_shape(&self, other: &ExperimentConfig) -> std::result::Result<(), String> {
        if self.master_seed != other.master_seed {
            return Err("master seeds differ".into());
        }
        if self.n_trials != other.n_trials {
            return Err("trial counts differ".into());
        }
        if self.split != other.split || self.geometry != other.geometry {
            return Err("split or geometry constants differ".into());
        }
        match (&self.model, &other.model) {
            (ModelSource::Single(a), ModelSource::Single(b)) => {
                if a.spectrum != b.spectrum
                    || a.beta_star != b.beta_star
                    || a.sigma_xi != b.sigma_xi
                    || a.n != b.n
                {
                    return Err("single models differ beyond their distribution laws".into());
                }
            }
            (
                ModelSource::Sequence {
                    family: fa,
                    n_values: na,
                },
                ModelSource::Sequence {
                    family: fb,
                    n_values: nb,
                },
            ) => {
                if na != nb {
                    return Err("n_values differ".into());
                }
                if fa.shape() != fb.shape() {
                    return Err("families differ beyond their distribution laws".into());
                }
            }
            _ => return Err("one config is a single model, the other a sequence".into()),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike_cfg() -> &'static str {
        r#"{
            "model": {"sequence": {
                "family": {"kind": "spike", "p_factor": 20, "sigma_xi": 1.0},
                "n_values": [20, 40, 80]
            }},
            "n_trials": 4,
            "master_seed": 7
        }"#
    }

    #[test]
    fn parses_family_config() {
        let cfg: ExperimentConfig = serde_json::from_str(spike_cfg()).unwrap();
        cfg.validate().unwrap();
        let ms = cfg.models().unwrap();
        assert_eq!(ms.len(), 3);
        assert_eq!(ms[1].p(), 800);
        assert_eq!(cfg.split, SplitSpec::KStar);
        assert!(cfg.emit.csv && !cfg.emit.plotdata);
    }

    #[test]
    fn rejects_bad_sequences() {
        let mut cfg: ExperimentConfig = serde_json::from_str(spike_cfg()).unwrap();
        if let ModelSource::Sequence { n_values, .. } = &mut cfg.model {
            *n_values = vec![40, 20];
        }
        assert!(matches!(cfg.validate(), Err(LabError::Config(_))));
        cfg.n_trials = 0;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n_trials": 1}"#).is_err());
    }

    #[test]
    fn shape_ignores_distribution_laws() {
        let a: ExperimentConfig = serde_json::from_str(spike_cfg()).unwrap();
        let mut b = a.clone();
        if let ModelSource::Sequence {
            family:
                Family::Spike {
                    design_family,
                    noise_family,
                    ..
                },
            ..
        } = &mut b.model
        {
            *design_family = DesignFamily::StudentT { dof: 6.0 };
            *noise_family = NoiseFamily::StudentT { dof: 6.0 };
        }
        assert!(a.same_shape(&b).is_ok());
        b.master_seed = 8;
        assert!(a.same_shape(&b).is_err());
    }

    #[test]
    fn generator_family_and_signal() {
        let f: Family = serde_json::from_str(
            r#"{"kind": "generator",
                "spectrum": {"kind": "geometric", "p": 50, "ratio": 0.9, "scale": 1.0},
                "signal": {"kind": "coordinate", "index": 2, "scale": 3.0},
                "sigma_xi": 0.5}"#,
        )
        .unwrap();
        let m = f.model(10).unwrap();
        assert_eq!(m.beta_star[1], 3.0);
        assert_eq!(m.p(), 50);
        let bad = Signal::Coordinate {
            index: 51,
            scale: 1.0,
        };
        assert!(bad.build(50).is_err());
    }
}
