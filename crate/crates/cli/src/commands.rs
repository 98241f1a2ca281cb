//! The four workflows: simulate, estimate, evaluate, sweep.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crswf_core::io::{self, StateTable};
use crswf_core::metrics::{evaluate, EvalReport, TruthSeries};
use crswf_core::sim::{generate, synthesize, Measurement, SensorKind};
use crswf_core::solver::SolveReport;
use crswf_core::window::{run_estimator, slice_count, EstimatorRun, RunError};
use crswf_core::Error;
use log::{info, warn};

use crate::config::RunConfig;

pub const TRUTH_FILE: &str = "truth.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const JOINT_FILE: &str = "joint.csv";
pub const SOLVE_REPORT_FILE: &str = "solve_report.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_SERIES_FILE: &str = "eval_series.csv";
pub const EVAL_TEXT_FILE: &str = "eval.txt";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn classify(err: &Error, message: String) -> Self {
        match err {
            Error::Config(_) => CliError::Usage(message),
            Error::IndexOutOfWindow { .. } => CliError::Numerical(message),
            e if e.is_numerical() => CliError::Numerical(message),
            _ => CliError::Data(message),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::classify(&err, err.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(err: RunError) -> Self {
        Self::classify(&err.source, err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn in_context<T>(path: &Path, r: crswf_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::classify(&e, format!("{}: {e}", path.display())))
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Data(format!("{}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSummary {
    pub seed: u64,
    pub truth_rows: usize,
    pub measurements: usize,
    pub tip_poses: usize,
    pub gyros: usize,
}

/// Ground truth and measurements for the configured profile and seed.
pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SimulateSummary> {
    let dir = out_dir(cfg)?;
    let gt = generate(&cfg.trajectory(&cfg.profile)?)?;
    let ms = synthesize(&gt, &cfg.sensors, cfg.seed)?;
    let table = StateTable {
        times: gt.times.clone(),
        arcs: cfg.arcs(),
        states: gt.states.clone(),
    };
    let truth_path = dir.join(TRUTH_FILE);
    in_context(&truth_path, io::write_states(create(&truth_path)?, &table))?;
    let ms_path = dir.join(MEASUREMENTS_FILE);
    in_context(&ms_path, io::write_measurements(create(&ms_path)?, &ms))?;
    let count = |k| ms.iter().filter(|m| m.kind == k).count();
    Ok(SimulateSummary {
        seed: cfg.seed,
        truth_rows: gt.times.len() * gt.nodes(),
        measurements: ms.len(),
        tip_poses: count(SensorKind::TipPose),
        gyros: count(SensorKind::Gyro),
    })
}

/// Horizon covered by the estimator: the configured duration, else up to
/// the last measurement.
fn horizon(cfg: &RunConfig, ms: &[Measurement]) -> f64 {
    match (cfg.duration, ms.last()) {
        (Some(d), _) => d,
        (None, Some(last)) => {
            // Round up so the last measurement falls inside the final interval.
            let slices = slice_count(last.timestamp, cfg.swf.dt);
            let end = (slices - 1) as f64 * cfg.swf.dt;
            if end + 1e-9 < last.timestamp {
                end + cfg.swf.dt
            } else {
                end
            }
        }
        (None, None) => cfg.duration_or_default(),
    }
}

/// Run the window over a measurement stream.
pub fn estimate_stream(cfg: &RunConfig, ms: &[Measurement]) -> CliResult<EstimatorRun> {
    Ok(run_estimator(cfg.model(), cfg.swf, ms, horizon(cfg, ms))?)
}

pub fn mean_wall_ms(reports: &[SolveReport]) -> f64 {
    reports.iter().map(|r| r.wall_ms).sum::<f64>() / reports.len().max(1) as f64
}

/// Estimates, joint covariances and per-window solve reports for a
/// measurement file.
pub fn cmd_estimate(cfg: &RunConfig) -> CliResult<EstimatorRun> {
    let dir = out_dir(cfg)?;
    let path = cfg.measurements.clone().unwrap_or_else(|| dir.join(MEASUREMENTS_FILE));
    let ms = in_context(&path, io::read_measurements(open(&path)?, &cfg.noise()?))?;
    info!("{} measurements read from {}", ms.len(), path.display());
    let run = estimate_stream(cfg, &ms)?;
    let arcs = cfg.arcs();
    let est_path = dir.join(ESTIMATES_FILE);
    in_context(
        &est_path,
        io::write_estimates(create(&est_path)?, &run.estimates, &arcs),
    )?;
    let joint_path = dir.join(JOINT_FILE);
    in_context(
        &joint_path,
        io::write_joint(create(&joint_path)?, &run.estimates, &arcs),
    )?;
    let rep_path = dir.join(SOLVE_REPORT_FILE);
    in_context(&rep_path, io::write_solve_reports(create(&rep_path)?, &run.reports))?;
    Ok(run)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Evaluate an estimate file against a truth file. Joint covariances and
/// solve reports next to the estimate file are used when present.
pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<EvalReport> {
    let dir = out_dir(cfg)?;
    let est_path = cfg.estimates.clone().unwrap_or_else(|| dir.join(ESTIMATES_FILE));
    let truth_path = cfg.truth.clone().unwrap_or_else(|| dir.join(TRUTH_FILE));
    let (mut estimates, _) = in_context(&est_path, io::read_estimates(open(&est_path)?))?;
    let joint_path = sibling(&est_path, JOINT_FILE);
    if joint_path.exists() {
        in_context(&joint_path, io::read_joint(open(&joint_path)?, &mut estimates))?;
    } else {
        info!("no {JOINT_FILE} next to the estimates; NEES needs slice-time truth only");
    }
    let rep_path = sibling(&est_path, SOLVE_REPORT_FILE);
    let wall = if rep_path.exists() {
        in_context(&rep_path, io::read_solve_times(open(&rep_path)?))?
    } else {
        Vec::new()
    };
    let truth = in_context(&truth_path, io::read_states(open(&truth_path)?))?;
    let length = *truth
        .arcs
        .last()
        .ok_or_else(|| CliError::Data(format!("{}: no ground-truth rows", truth_path.display())))?;
    let reports: Vec<SolveReport> = wall
        .iter()
        .map(|&wall_ms| SolveReport {
            wall_ms,
            ..Default::default()
        })
        .collect();
    let series = TruthSeries::from_states(&truth.times, &truth.states);
    let report = evaluate(&estimates, &series, length, &cfg.spectra().time, &reports)?;
    let p = dir.join(EVAL_FILE);
    in_context(&p, io::write_eval_summary(create(&p)?, &report))?;
    let p = dir.join(EVAL_SERIES_FILE);
    in_context(&p, io::write_eval_series(create(&p)?, &report))?;
    let p = dir.join(EVAL_TEXT_FILE);
    let mut f = create(&p)?;
    write!(f, "{report}").map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub trajectory: String,
    pub window_s: f64,
    pub report: Option<EvalReport>,
    pub failure: Option<String>,
}

fn sweep_one(cfg: &RunConfig, profile: &str, window: f64) -> CliResult<EvalReport> {
    let gt = generate(&cfg.trajectory(profile)?)?;
    let ms = synthesize(&gt, &cfg.sensors, cfg.seed)?;
    let mut run_cfg = cfg.clone();
    run_cfg.swf.window_seconds = window;
    run_cfg.duration = Some(cfg.duration_or_default());
    let run = estimate_stream(&run_cfg, &ms)?;
    let truth = TruthSeries::from_states(&gt.times, &gt.states);
    Ok(evaluate(
        &run.estimates,
        &truth,
        gt.length(),
        &cfg.spectra().time,
        &run.reports,
    )?)
}

/// Simulate, estimate and evaluate every (profile, window) pair. A failing
/// run is recorded in the `failure` column and the sweep continues.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    if cfg.windows.len() < 2 {
        return Err(CliError::Usage("a sweep needs at least two window lengths".into()));
    }
    let dir = out_dir(cfg)?;
    let mut rows = Vec::new();
    for profile in &cfg.profiles {
        for &w in &cfg.windows {
            info!("sweep: {profile}, window {w} s");
            let row = match sweep_one(cfg, profile, w) {
                Ok(r) => SweepRow {
                    trajectory: profile.clone(),
                    window_s: w,
                    report: Some(r),
                    failure: None,
                },
                Err(e) => {
                    warn!("sweep run {profile} / {w} s failed: {e}");
                    SweepRow {
                        trajectory: profile.clone(),
                        window_s: w,
                        report: None,
                        failure: Some(e.to_string()),
                    }
                }
            };
            rows.push(row);
        }
    }
    let path = dir.join(SWEEP_FILE);
    write_sweep(create(&path)?, &rows).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(rows)
}

fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    let mut out = out;
    writeln!(out, "trajectory,window_s,pos_rmse_pct,rot_rmse,nees,mean_ms,failure")?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    for r in rows {
        let rep = r.report.as_ref();
        let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trajectory,
            r.window_s,
            opt(rep.map(|x| x.tip_pos_rmse_pct)),
            opt(rep.map(|x| x.tip_rot_rmse)),
            opt(rep.and_then(|x| x.avg_nees)),
            opt(rep.and_then(|x| x.runtime.map(|t| t.mean_ms))),
            failure
        )?;
    }
    out.flush()
}
