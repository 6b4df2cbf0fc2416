//! Trial execution and aggregation.

use std::time::Instant;

use benign_core::bounds::{self, RateReport};
use benign_core::checks::{self, CheckContext, CheckReport, CheckSpec};
use benign_core::interpolant::{self, INTERP_TOL};
use benign_core::linalg;
use benign_core::sampler::{self, ModelSpec};
use benign_core::seed::{self, tag};
use benign_core::spectrum::{self as spec, FeatureSplit};
use benign_core::GeometryConstants;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};

/// One trial. `error` is set, and the numeric fields are NaN, when the trial
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub point_index: usize,
    pub trial_index: usize,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub head_dim: usize,
    pub risk_total: f64,
    pub risk_head: f64,
    pub risk_tail: f64,
    pub bias: f64,
    pub variance: f64,
    pub interp_residual: f64,
    pub identity_rel_error: f64,
    /// `name=1|0|err` pairs joined by `;`, in config order.
    pub check_flags: String,
    pub error: Option<String>,
    pub wall_time_ms: Option<f64>,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(
        point_index: usize,
        trial_index: usize,
        seed: u64,
        m: &ModelSpec,
        reason: String,
    ) -> Self {
        TrialRecord {
            point_index,
            trial_index,
            seed,
            n: m.n,
            p: m.p(),
            head_dim: 0,
            risk_total: f64::NAN,
            risk_head: f64::NAN,
            risk_tail: f64::NAN,
            bias: f64::NAN,
            variance: f64::NAN,
            interp_residual: f64::NAN,
            identity_rel_error: f64::NAN,
            check_flags: String::new(),
            error: Some(reason),
            wall_time_ms: None,
        }
    }
}

/// Per-point aggregate over the successful trials.
#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub point_index: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    /// Standard error of `mean`.
    pub std_err: f64,
    pub mean_head: f64,
    pub mean_tail: f64,
    pub mean_bias: f64,
    pub mean_variance: f64,
    /// `(t, fraction of trials with risk_total > t)`.
    pub exceedance: Vec<(f64, f64)>,
    pub rate: Option<RateReport>,
    pub rate_error: Option<String>,
    pub checks: Vec<CheckReport>,
    /// Check evaluations that errored instead of producing a verdict.
    pub check_errors: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub points: Vec<PointSummary>,
}

impl ExperimentResult {
    pub fn point_records(&self, point: usize) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.point_index == point)
    }

    /// Successful `risk_total` values of one point, in trial order.
    pub fn risks(&self, point: usize) -> Vec<f64> {
        self.point_records(point)
            .filter(|r| r.ok())
            .map(|r| r.risk_total)
            .collect()
    }
}

/// Nearest-rank quantile of unsorted data; NaN on empty input.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    nearest_rank(&v, q)
}

pub(crate) fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Builds a pool with `threads` workers, or rayon's default when 0.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::ThreadPool(e.to_string()))
}

struct TrialOutcome {
    record: TrialRecord,
    checks: Vec<std::result::Result<CheckReport, String>>,
}

/// Split used for a model: the configured one, or `J = ∅` when `k*_b` does
/// not exist.
pub fn split_for(cfg: &ExperimentConfig, m: &ModelSpec) -> Result<FeatureSplit> {
    match cfg.split.resolve(m, &cfg.geometry)? {
        Some(s) => Ok(s),
        None => Ok(FeatureSplit::head(0, m.p())?),
    }
}

/// Runs every configured check on one realized design. Failures become
/// `Err` entries instead of aborting.
fn run_checks(
    specs: &[CheckSpec],
    m: &ModelSpec,
    x_eig: &benign_core::DMatrix<f64>,
    split: &FeatureSplit,
    g: &GeometryConstants,
    check_seed: u64,
) -> Vec<std::result::Result<CheckReport, String>> {
    if specs.is_empty() {
        return Vec::new();
    }
    let prepared = (|| -> benign_core::Result<_> {
        let head = spec::head_sigmas(&m.spectrum, split)?;
        let tail = spec::tail_sigmas(&m.spectrum, split)?;
        let r_n = spec::fixed_point_rn(&m.spectrum, split, m.n, g)?.r_n;
        Ok((head, tail, r_n))
    })();
    let (head, tail, r_n) = match prepared {
        Ok(v) => v,
        Err(e) => return specs.iter().map(|_| Err(e.to_string())).collect(),
    };
    let x_head = linalg::select_columns(x_eig, &split.head0());
    let x_tail = linalg::select_columns(x_eig, &split.tail0());
    let ctx = CheckContext {
        x_head: &x_head,
        x_tail: &x_tail,
        head_sigmas: &head,
        tail_sigmas: &tail,
        r_n,
        kappa_iso: g.kappa_iso,
        sigma_xi: m.sigma_xi,
        noise_family: m.noise_family,
    };
    specs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = seed::rng(seed::derive(check_seed, i as u64));
            checks::run_check(c, &ctx, &mut rng).map_err(|e| e.to_string())
        })
        .collect()
}

fn flags(specs: &[CheckSpec], results: &[std::result::Result<CheckReport, String>]) -> String {
    specs
        .iter()
        .zip(results)
        .map(|(s, r)| {
            let v = match r {
                Ok(rep) if rep.pass => "1",
                Ok(_) => "0",
                Err(_) => "err",
            };
            format!("{}={v}", s.name())
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn run_trial(
    cfg: &ExperimentConfig,
    m: &ModelSpec,
    split: &FeatureSplit,
    point: usize,
    trial: usize,
) -> TrialOutcome {
    let started = Instant::now();
    let trial_seed = seed::derive_path(cfg.master_seed, &[point as u64, trial as u64]);
    let body = || -> benign_core::Result<TrialOutcome> {
        let data = sampler::make_sample(m, trial_seed)?;
        let sol = interpolant::min_norm_interpolant(&data.x, &data.y, INTERP_TOL)?;
        let beta_hat = sol.require_interpolation()?;
        let beta_star = m.beta_star();
        let risk = interpolant::excess_risk(&m.spectrum, beta_hat, &beta_star, split)?;
        let x_eig = m.spectrum.design_to_eigen(&data.x);
        let (bias, variance) = match &sol.pinv {
            Some(pinv) => {
                interpolant::bias_variance_with(&x_eig, pinv, &m.spectrum, &beta_star, m.sigma_xi)?
            }
            None => interpolant::bias_variance_terms(&data.x, &m.spectrum, &beta_star, m.sigma_xi)?,
        };
        let est = interpolant::decompose_with_gram(
            &data.x,
            &data.y,
            beta_hat,
            split,
            &m.spectrum,
            sol.gram.as_ref(),
        )?;
        let checks = run_checks(
            &cfg.checks,
            m,
            &x_eig,
            split,
            &cfg.geometry,
            seed::derive(trial_seed, tag::CHECK),
        );
        Ok(TrialOutcome {
            record: TrialRecord {
                point_index: point,
                trial_index: trial,
                seed: trial_seed,
                n: m.n,
                p: m.p(),
                head_dim: split.head_dim(),
                risk_total: risk.total,
                risk_head: risk.head,
                risk_tail: risk.tail,
                bias,
                variance,
                interp_residual: sol.relative_residual,
                identity_rel_error: est.diagnostic("identity_rel_error").unwrap_or(f64::NAN),
                check_flags: flags(&cfg.checks, &checks),
                error: None,
                wall_time_ms: None,
            },
            checks,
        })
    };
    let mut out = body().unwrap_or_else(|e| TrialOutcome {
        record: TrialRecord::failed(point, trial, trial_seed, m, e.to_string()),
        checks: Vec::new(),
    });
    if cfg.record_timing {
        out.record.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    out
}

fn summarize(
    cfg: &ExperimentConfig,
    point: usize,
    m: &ModelSpec,
    split: &FeatureSplit,
    outcomes: &[TrialOutcome],
) -> Result<PointSummary> {
    let ok: Vec<&TrialRecord> = outcomes
        .iter()
        .map(|o| &o.record)
        .filter(|r| r.ok())
        .collect();
    let col = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let risks = col(|r| r.risk_total);
    let mut sorted = risks.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |level| {
        if sorted.is_empty() {
            f64::NAN
        } else {
            nearest_rank(&sorted, level)
        }
    };
    let mu = mean(&risks);
    let std_err = if risks.len() > 1 {
        let var = risks.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / (risks.len() - 1) as f64;
        (var / risks.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    let exceedance = cfg
        .exceedance
        .iter()
        .map(|&t| {
            let hits = risks.iter().filter(|&&r| r > t).count();
            (
                t,
                if risks.is_empty() {
                    f64::NAN
                } else {
                    hits as f64 / risks.len() as f64
                },
            )
        })
        .collect();

    let rate_split = (split.head_dim() > 0).then_some(split);
    let (rate, rate_error) = match bounds::rate_report(m, &cfg.geometry, rate_split, &cfg.rates) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut merged: Vec<Option<CheckReport>> = vec![None; cfg.checks.len()];
    let mut errors = vec![0usize; cfg.checks.len()];
    for o in outcomes {
        for (i, r) in o.checks.iter().enumerate() {
            match r {
                Ok(rep) => {
                    merged[i] = Some(match merged[i].take() {
                        None => rep.clone(),
                        Some(acc) => acc.merge(rep.clone())?,
                    })
                }
                Err(_) => errors[i] += 1,
            }
        }
    }
    let check_errors = cfg
        .checks
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e > 0)
        .map(|(c, &e)| (c.name().to_string(), e))
        .collect();

    Ok(PointSummary {
        point_index: point,
        n: m.n,
        p: m.p(),
        n_ok: ok.len(),
        n_failed: outcomes.len() - ok.len(),
        mean: mu,
        median: q(0.5),
        q05: q(0.05),
        q95: q(0.95),
        std_err,
        mean_head: mean(&col(|r| r.risk_head)),
        mean_tail: mean(&col(|r| r.risk_tail)),
        mean_bias: mean(&col(|r| r.bias)),
        mean_variance: mean(&col(|r| r.variance)),
        exceedance,
        rate,
        rate_error,
        checks: merged.into_iter().flatten().collect(),
        check_errors,
    })
}

/// Runs `n_trials` trials at every model point. Output is identical for any
/// `threads` value; 0 uses rayon's default pool size.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let models = cfg.models()?;
    let splits = models
        .iter()
        .map(|m| split_for(cfg, m))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|p| (0..cfg.n_trials).map(move |t| (p, t)))
        .collect();

    let pool = thread_pool(threads)?;
    // Indexed collect keeps job order, so no re-sorting is needed.
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| run_trial(cfg, &models[p], &splits[p], p, t))
            .collect()
    });

    let failed: Vec<&TrialRecord> = outcomes
        .iter()
        .map(|o| &o.record)
        .filter(|r| !r.ok())
        .collect();
    if 2 * failed.len() > outcomes.len() {
        return Err(LabError::ExperimentFailed {
            failed: failed.len(),
            total: outcomes.len(),
            first_reason: failed[0].error.clone().unwrap_or_default(),
        });
    }

    let mut points = Vec::with_capacity(models.len());
    for (i, chunk) in outcomes.chunks(cfg.n_trials).enumerate() {
        points.push(summarize(cfg, i, &models[i], &splits[i], chunk)?);
    }
    Ok(ExperimentResult {
        records: outcomes.into_iter().map(|o| o.record).collect(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_quantiles() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.05), 1.0);
        assert_eq!(quantile(&v, 0.95), 5.0);
        assert_eq!(median(&[1.0, 2.0]), 1.0);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
