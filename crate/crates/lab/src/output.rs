//! Files written by the CLI: `trials.csv`, `summary.json`, and plot TSVs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::SweepReport;
use crate::config::{Emit, ExperimentConfig};
use crate::error::{LabError, Result};
use crate::experiment::{ExperimentResult, TrialRecord};

/// Bumped whenever a `trials.csv` column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

const CSV_COLUMNS: [&str; 16] = [
    "point_index",
    "trial_index",
    "seed",
    "N",
    "p",
    "head_dim",
    "risk_total",
    "risk_head",
    "risk_tail",
    "bias",
    "variance",
    "interp_residual",
    "identity_rel_error",
    "check_flags",
    "error",
    "wall_time_ms",
];

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

fn row(r: &TrialRecord, timing: bool) -> Vec<String> {
    let mut out = vec![
        r.point_index.to_string(),
        r.trial_index.to_string(),
        r.seed.to_string(),
        r.n.to_string(),
        r.p.to_string(),
        r.head_dim.to_string(),
        num(r.risk_total),
        num(r.risk_head),
        num(r.risk_tail),
        num(r.bias),
        num(r.variance),
        num(r.interp_residual),
        num(r.identity_rel_error),
        r.check_flags.clone(),
        r.error.clone().unwrap_or_default(),
    ];
    if timing {
        out.push(r.wall_time_ms.map(num).unwrap_or_default());
    }
    out
}

/// Writes the trial table. `wall_time_ms` is present only when `timing` is
/// set, so default output is reproducible byte for byte.
pub fn write_trials_csv<W: Write>(w: W, records: &[TrialRecord], timing: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let ncol = if timing {
        CSV_COLUMNS.len()
    } else {
        CSV_COLUMNS.len() - 1
    };
    wtr.write_record(&CSV_COLUMNS[..ncol])?;
    for r in records {
        wtr.write_record(row(r, timing))?;
    }
    wtr.flush().map_err(|e| LabError::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    crate_version: &'static str,
    csv_schema: u32,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| LabError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, cfg: &ExperimentConfig, body: T) -> Result<()> {
    let summary = Summary {
        crate_version: env!("CARGO_PKG_VERSION"),
        csv_schema: CSV_SCHEMA_VERSION,
        config: cfg,
        body,
    };
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n").map_err(|e| LabError::io(path, e))
}

/// One two-column TSV per curve, `x\ty` with a header line.
fn write_curve(dir: &Path, name: &str, x_label: &str, points: &[(f64, f64)]) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.tsv"));
    let mut f = create(&path)?;
    let mut text = format!("{x_label}\t{name}\n");
    for (x, y) in points {
        text.push_str(&format!("{x}\t{}\n", num(*y)));
    }
    f.write_all(text.as_bytes())
        .map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

fn experiment_curves(res: &ExperimentResult) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let by_n = |f: &dyn Fn(&crate::experiment::PointSummary) -> Option<f64>| {
        res.points
            .iter()
            .filter_map(|p| f(p).map(|y| (p.n as f64, y)))
            .collect::<Vec<_>>()
    };
    vec![
        ("median_risk", by_n(&|p| Some(p.median))),
        ("mean_risk", by_n(&|p| Some(p.mean))),
        ("q05_risk", by_n(&|p| Some(p.q05))),
        ("q95_risk", by_n(&|p| Some(p.q95))),
        (
            "r_star_sq",
            by_n(&|p| p.rate.as_ref().map(|r| r.r_star * r.r_star)),
        ),
        (
            "lower_bound",
            by_n(&|p| p.rate.as_ref().and_then(|r| r.lower_bound)),
        ),
    ]
}

/// Writes the enabled outputs of a `simulate` run and returns their paths.
pub fn write_experiment(
    dir: &Path,
    emit: Emit,
    cfg: &ExperimentConfig,
    res: &ExperimentResult,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let mut written = Vec::new();
    if emit.csv {
        let path = dir.join("trials.csv");
        write_trials_csv(create(&path)?, &res.records, cfg.record_timing)?;
        written.push(path);
    }
    if emit.json {
        let path = dir.join("summary.json");
        write_json(&path, cfg, serde_json::json!({ "points": res.points }))?;
        written.push(path);
    }
    if emit.plotdata {
        let plot = dir.join("plotdata");
        prepare(&plot)?;
        for (name, pts) in experiment_curves(res) {
            written.push(write_curve(&plot, name, "N", &pts)?);
        }
    }
    Ok(written)
}

/// [`write_experiment`] plus `sweep.csv` and the sweep verdicts.
pub fn write_sweep(
    dir: &Path,
    emit: Emit,
    cfg: &ExperimentConfig,
    rep: &SweepReport,
) -> Result<Vec<PathBuf>> {
    let mut written = write_experiment(
        dir,
        Emit {
            json: false,
            ..emit
        },
        cfg,
        &rep.experiment,
    )?;
    if emit.csv {
        let path = dir.join("sweep.csv");
        let mut wtr = csv::Writer::from_writer(create(&path)?);
        wtr.write_record(["N", "p", "median_risk", "r_star", "ratio"])?;
        for r in &rep.rows {
            wtr.write_record([
                r.n.to_string(),
                r.p.to_string(),
                num(r.median_risk),
                r.r_star.map(num).unwrap_or_default(),
                r.ratio.map(num).unwrap_or_default(),
            ])?;
        }
        wtr.flush().map_err(|e| LabError::io(&path, e))?;
        written.push(path);
    }
    if emit.json {
        let path = dir.join("summary.json");
        write_json(
            &path,
            cfg,
            serde_json::json!({ "points": rep.experiment.points, "sweep": rep }),
        )?;
        written.push(path);
    }
    if emit.plotdata {
        let pts: Vec<(f64, f64)> = rep
            .rows
            .iter()
            .filter_map(|r| r.ratio.map(|y| (r.n as f64, y)))
            .collect();
        written.push(write_curve(
            &dir.join("plotdata"),
            "risk_over_r_star_sq",
            "N",
            &pts,
        )?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(err: Option<&str>) -> TrialRecord {
        TrialRecord {
            point_index: 0,
            trial_index: 3,
            seed: 42,
            n: 10,
            p: 40,
            head_dim: 2,
            risk_total: 0.5,
            risk_head: 0.25,
            risk_tail: 0.25,
            bias: 0.1,
            variance: 0.4,
            interp_residual: 1e-15,
            identity_rel_error: 2e-16,
            check_flags: "dm_embedding=1".into(),
            error: err.map(str::to_string),
            wall_time_ms: Some(1.5),
        }
    }

    #[test]
    fn csv_header_and_timing_column() {
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &[record(None)], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 15);
        assert!(lines.next().unwrap().starts_with("0,3,42,10,40,2,5e-1,"));

        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &[record(Some("boom"))], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().ends_with("wall_time_ms"));
        assert!(text.contains("boom,1.5e0"));
    }
}
