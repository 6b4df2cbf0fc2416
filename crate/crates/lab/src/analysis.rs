//! Sweeps over `N` and heavy-tail comparisons built on [`run_experiment`].

use benign_core::bounds::{self, BoClassification};
use benign_core::seed::{self, tag};
use rand::Rng as _;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelSource};
use crate::error::{LabError, Result};
use crate::experiment::{nearest_rank, run_experiment, ExperimentResult};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub median_risk: f64,
    /// `None` when `k*_b` does not exist.
    pub r_star: Option<f64>,
    /// `median_risk / r_star²`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Median risk strictly decreasing in `N`.
    pub decreasing: bool,
    /// `max(ratio) / min(ratio)` over rows that have a ratio.
    pub ratio_spread: Option<f64>,
    /// Only computed with at least three points.
    pub classification: Option<BoClassification>,
    pub classification_error: Option<String>,
    #[serde(skip)]
    pub experiment: ExperimentResult,
}

pub fn sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepReport> {
    match &cfg.model {
        ModelSource::Sequence { n_values, .. } if n_values.len() >= 2 => {}
        _ => {
            return Err(LabError::Config(
                "sweep needs a sequence with at least two N values".into(),
            ))
        }
    }
    let experiment = run_experiment(cfg, threads)?;
    let rows: Vec<SweepRow> = experiment
        .points
        .iter()
        .map(|pt| {
            let r_star = pt.rate.as_ref().map(|r| r.r_star);
            SweepRow {
                n: pt.n,
                p: pt.p,
                median_risk: pt.median,
                r_star,
                ratio: r_star.filter(|&r| r > 0.0).map(|r| pt.median / (r * r)),
            }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].median_risk < w[0].median_risk);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratio_spread = (!ratios.is_empty()).then(|| {
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    });
    let (classification, classification_error) = if rows.len() >= 3 {
        match bounds::bo_classify(&cfg.models()?, &cfg.geometry) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(SweepReport {
        rows,
        decreasing,
        ratio_spread,
        classification,
        classification_error,
        experiment,
    })
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub median_baseline: f64,
    pub median_heavy: f64,
    /// `median_heavy / median_baseline`.
    pub ratio: f64,
    /// 95% percentile bootstrap interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<RatioRow>,
}

fn median_of(values: &[f64], idx: &[usize], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| values[i]));
    scratch.sort_by(f64::total_cmp);
    nearest_rank(scratch, 0.5)
}

/// Paired bootstrap of a ratio of medians. Trials with the same index share a
/// seed in both runs, so they are resampled together.
pub fn bootstrap_ratio(baseline: &[f64], heavy: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = baseline.len().min(heavy.len());
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = seed::rng(seed);
    let mut idx = vec![0usize; n];
    let mut scratch = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..n);
        }
        let b = median_of(baseline, &idx, &mut scratch);
        let h = median_of(heavy, &idx, &mut scratch);
        ratios.push(h / b);
    }
    ratios.sort_by(f64::total_cmp);
    (nearest_rank(&ratios, 0.025), nearest_rank(&ratios, 0.975))
}

/// Runs both configs and reports the heavy/baseline ratio of median risks
/// per point.
pub fn compare_tail_heavy(
    baseline: &ExperimentConfig,
    heavy: &ExperimentConfig,
    threads: usize,
) -> Result<CompareReport> {
    baseline
        .same_shape(heavy)
        .map_err(LabError::ConfigMismatch)?;
    let a = run_experiment(baseline, threads)?;
    let b = run_experiment(heavy, threads)?;
    let rows = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(pa, pb)| {
            // Pair by trial index, dropping trials that failed in either run.
            let (ra, rb): (Vec<f64>, Vec<f64>) = a
                .point_records(pa.point_index)
                .zip(b.point_records(pb.point_index))
                .filter(|(x, y)| x.ok() && y.ok())
                .map(|(x, y)| (x.risk_total, y.risk_total))
                .unzip();
            let s = seed::derive_path(
                baseline.master_seed,
                &[tag::BOOTSTRAP, pa.point_index as u64],
            );
            let (lo, hi) = bootstrap_ratio(&ra, &rb, BOOTSTRAP_RESAMPLES, s);
            let mut scratch = Vec::new();
            let all: Vec<usize> = (0..ra.len()).collect();
            let ma = median_of(&ra, &all, &mut scratch);
            let mb = median_of(&rb, &all, &mut scratch);
            RatioRow {
                n: pa.n,
                median_baseline: ma,
                median_heavy: mb,
                ratio: mb / ma,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    Ok(CompareReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_of_identical_samples_is_degenerate() {
        let v: Vec<f64> = (1..=50).map(f64::from).collect();
        assert_eq!(bootstrap_ratio(&v, &v, 200, 3), (1.0, 1.0));
        let doubled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert_eq!(bootstrap_ratio(&v, &doubled, 200, 3), (2.0, 2.0));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let a: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 + 1.0).collect();
        let b: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 + 1.0).collect();
        assert_eq!(
            bootstrap_ratio(&a, &b, 300, 9),
            bootstrap_ratio(&a, &b, 300, 9)
        );
        let (lo, hi) = bootstrap_ratio(&a, &b, 300, 9);
        assert!(lo <= hi);
    }
}
