use std::path::{Path, PathBuf};
use std::process::ExitCode;

use benign_core::bounds;
use benign_core::checks::{parse_check_name, CheckSpec};
use benign_lab::analysis::{compare_tail_heavy, sweep};
use benign_lab::config::Emit;
use benign_lab::experiment::{run_experiment, split_for};
use benign_lab::{output, ExperimentConfig, LabError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "benign", version, about = "Minimum-norm interpolation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the rate report of every model point.
    Rate { config: PathBuf },
    /// Run the Monte Carlo experiment.
    Simulate(RunArgs),
    /// Run a sequence of N values and compare the trend with the rates.
    Sweep(RunArgs),
    /// Classify a model sequence as benign or not.
    Classify { config: PathBuf },
    /// Run geometry checks and print a pass-rate table.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated check names, or `all`. Overrides the config.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Ratio of median risks between two configs (second over first).
    Compare {
        baseline: PathBuf,
        heavy: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    emit: Vec<EmitKind>,
    /// Worker threads; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitKind {
    Csv,
    Json,
    Plotdata,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.n_trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if !self.emit.is_empty() {
            let mut e = Emit {
                csv: false,
                json: false,
                plotdata: false,
            };
            for k in &self.emit {
                match k {
                    EmitKind::Csv => e.csv = true,
                    EmitKind::Json => e.json = true,
                    EmitKind::Plotdata => e.plotdata = true,
                }
            }
            cfg.emit = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn rate(path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_path(path)?;
    let mut out = Vec::new();
    for m in cfg.models()? {
        let split = split_for(&cfg, &m)?;
        let split = (split.head_dim() > 0).then_some(split);
        let entry = match bounds::rate_report(&m, &cfg.geometry, split.as_ref(), &cfg.rates) {
            Ok(r) => serde_json::json!({ "N": m.n, "p": m.p(), "report": r }),
            Err(e) => serde_json::json!({ "N": m.n, "p": m.p(), "error": e.to_string() }),
        };
        out.push(entry);
    }
    print_json(&out)
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let res = run_experiment(&cfg, args.threads)?;
    println!(
        "{:>6} {:>8} {:>6} {:>12} {:>12} {:>12} {:>12}",
        "N", "p", "ok", "mean", "median", "q05", "q95"
    );
    for pt in &res.points {
        println!(
            "{:>6} {:>8} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            pt.n, pt.p, pt.n_ok, pt.mean, pt.median, pt.q05, pt.q95
        );
    }
    report_written(&output::write_experiment(
        &cfg.output_dir,
        cfg.emit,
        &cfg,
        &res,
    )?);
    Ok(())
}

fn run_sweep(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let rep = sweep(&cfg, args.threads)?;
    println!(
        "{:>6} {:>8} {:>12} {:>12} {:>12}",
        "N", "p", "median", "r_star", "ratio"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
    for r in &rep.rows {
        println!(
            "{:>6} {:>8} {:>12.4e} {:>12} {:>12}",
            r.n,
            r.p,
            r.median_risk,
            opt(r.r_star),
            opt(r.ratio)
        );
    }
    println!(
        "trend: {}",
        if rep.decreasing {
            "decreasing"
        } else {
            "not decreasing"
        }
    );
    match (&rep.classification, &rep.classification_error) {
        (Some(c), _) => println!(
            "classification: {}",
            if c.benign { "benign" } else { "not benign" }
        ),
        (None, Some(e)) => println!("classification: unavailable ({e})"),
        (None, None) => println!("classification: needs at least three points"),
    }
    report_written(&output::write_sweep(&cfg.output_dir, cfg.emit, &cfg, &rep)?);
    Ok(())
}

fn classify(path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_path(path)?;
    print_json(&bounds::bo_classify(&cfg.models()?, &cfg.geometry)?)
}

fn default_check(name: &str) -> Result<CheckSpec> {
    serde_json::from_value(serde_json::json!({ "check": name }))
        .map_err(|e| LabError::Config(format!("check {name}: {e}")))
}

fn check(args: &RunArgs, names: &[String]) -> Result<()> {
    let mut cfg = args.load()?;
    if !names.is_empty() {
        let mut specs = Vec::new();
        for n in names {
            let resolved = parse_check_name(n)
                .ok_or_else(|| LabError::Config(format!("unknown check {n}")))?;
            for r in resolved {
                specs.push(default_check(r)?);
            }
        }
        cfg.checks = specs;
    }
    if cfg.checks.is_empty() {
        return Err(LabError::Config("no checks configured".into()));
    }
    let res = run_experiment(&cfg, args.threads)?;
    println!(
        "{:<20} {:>6} {:>8} {:>8} {:>9} {:>7}",
        "check", "N", "passes", "trials", "rate", "errors"
    );
    for pt in &res.points {
        for c in &cfg.checks {
            let rep = pt.checks.iter().find(|r| r.name == c.name());
            let errors = pt
                .check_errors
                .iter()
                .find(|(n, _)| n == c.name())
                .map_or(0, |(_, k)| *k);
            let (passes, trials, rate) =
                rep.map_or((0, 0, f64::NAN), |r| (r.passes, r.n_trials, r.pass_rate));
            println!(
                "{:<20} {:>6} {:>8} {:>8} {:>9.3} {:>7}",
                c.name(),
                pt.n,
                passes,
                trials,
                rate,
                errors
            );
        }
    }
    Ok(())
}

fn compare(a: &Path, b: &Path, threads: usize) -> Result<()> {
    let ca = ExperimentConfig::from_path(a)?;
    let cb = ExperimentConfig::from_path(b)?;
    let rep = compare_tail_heavy(&ca, &cb, threads)?;
    println!(
        "{:>6} {:>12} {:>12} {:>8} {:>18}",
        "N", "median_a", "median_b", "ratio", "95% CI"
    );
    for r in &rep.rows {
        println!(
            "{:>6} {:>12.4e} {:>12.4e} {:>8.3} {:>18}",
            r.n,
            r.median_baseline,
            r.median_heavy,
            r.ratio,
            format!("[{:.3}, {:.3}]", r.ci_low, r.ci_high)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Rate { config } => rate(config),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Classify { config } => classify(config),
        Command::Check { run, checks } => check(run, checks),
        Command::Compare {
            baseline,
            heavy,
            threads,
        } => compare(baseline, heavy, *threads),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
