//! CSV formats for measurements, states, estimates and reports.
//!
//! Every float is written with Rust's shortest round-trip formatting, so a
//! file read back reproduces the values bit for bit and identical runs give
//! identical files.

use std::io::{Read, Write};

use nalgebra::{Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::factors::NoiseModel;
use crate::interp::{JointNeighborCovariance, Matrix24};
use crate::lie::{Pose, Twist};
use crate::metrics::EvalReport;
use crate::sim::{Measurement, MeasurementValue, SensorKind};
use crate::solver::SolveReport;
use crate::state::{NodeMatrix, NodeState, NODE_DOF};
use crate::window::SliceEstimate;

/// Arc lengths farther apart than this are different nodes.
const ARC_TOL: f64 = 1e-9;

/// Upper-triangle entry count of an `n × n` matrix.
const fn triangle(n: usize) -> usize {
    n * (n + 1) / 2
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map_or(0, |p| p.line() as usize);
        match err.kind() {
            csv::ErrorKind::Io(e) => Error::Io(e.to_string()),
            _ => Error::Schema {
                line,
                message: err.to_string(),
            },
        }
    }
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Row reader tracking line numbers for error messages.
struct Rows<R> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: Read> Rows<R> {
    fn new(reader: R, header: &[String]) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let found = inner.headers()?.clone();
        if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
            return Err(schema(1, format!("expected header `{}`", header.join(","))));
        }
        Ok(Self {
            inner,
            record: csv::StringRecord::new(),
        })
    }

    /// Next row with its 1-based line number.
    fn next(&mut self) -> Result<Option<(usize, &csv::StringRecord)>> {
        if !self.inner.read_record(&mut self.record)? {
            return Ok(None);
        }
        let line = self.record.position().map_or(0, |p| p.line() as usize);
        Ok(Some((line, &self.record)))
    }
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| schema(line, format!("missing column {}", i + 1)))
}

fn float(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let s = field(rec, i, line)?;
    let v: f64 = s
        .parse()
        .map_err(|_| schema(line, format!("column {}: `{s}` is not a number", i + 1)))?;
    if !v.is_finite() {
        return Err(schema(line, format!("column {}: non-finite value", i + 1)));
    }
    Ok(v)
}

fn floats(rec: &csv::StringRecord, start: usize, count: usize, line: usize) -> Result<Vec<f64>> {
    (start..start + count).map(|i| float(rec, i, line)).collect()
}

fn expect_len(rec: &csv::StringRecord, len: usize, line: usize) -> Result<()> {
    if rec.len() != len {
        return Err(schema(line, format!("expected {len} columns, found {}", rec.len())));
    }
    Ok(())
}

fn pose_values(p: &Pose) -> impl Iterator<Item = f64> {
    let m = p.to_matrix();
    (0..16).map(move |k| m[(k / 4, k % 4)])
}

fn parse_pose(v: &[f64], line: usize) -> Result<Pose> {
    let m = Matrix4::from_row_slice(v);
    let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - 1.0];
    if bottom.iter().any(|x| x.abs() > 1e-9) {
        return Err(schema(line, "pose bottom row must be 0 0 0 1"));
    }
    let pose = Pose::from_matrix(&m);
    if pose.orthonormality_error() > 1e-6 {
        return Err(schema(line, "pose rotation is not orthonormal"));
    }
    Ok(pose)
}

fn upper_triangle<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>) -> impl Iterator<Item = f64> + '_ {
    (0..D).flat_map(move |i| (i..D).map(move |j| m[(i, j)]))
}

fn from_upper_triangle<const D: usize>(v: &[f64]) -> nalgebra::SMatrix<f64, D, D> {
    let mut m = nalgebra::SMatrix::<f64, D, D>::zeros();
    let mut k = 0;
    for i in 0..D {
        for j in i..D {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (0..count).map(move |i| format!("{prefix}{i}"))
}

fn measurement_header() -> Vec<String> {
    ["kind", "timestamp", "node_index"]
        .into_iter()
        .map(String::from)
        .chain(numbered("v", 16))
        .collect()
}

pub fn write_measurements<W: Write>(out: W, ms: &[Measurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(measurement_header())?;
    for m in ms {
        let mut row = vec![m.kind.name().to_string(), fmt(m.timestamp), m.node.to_string()];
        match &m.value {
            MeasurementValue::Pose(p) => row.extend(pose_values(p).map(fmt)),
            MeasurementValue::Rate(w) => {
                row.extend(w.iter().map(|v| fmt(*v)));
                row.extend(std::iter::repeat_n(String::new(), 13));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Noise models attached to measurements read from a file, which records
/// only the readings themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementNoise {
    pub pose: NoiseModel,
    pub gyro: NoiseModel,
}

/// Read a measurement file. Rows may be in any order; they are returned in
/// stream order.
pub fn read_measurements<R: Read>(input: R, noise: &MeasurementNoise) -> Result<Vec<Measurement>> {
    let header = measurement_header();
    let mut rows = Rows::new(input, &header)?;
    let mut out = Vec::new();
    while let Some((line, rec)) = rows.next()? {
        expect_len(rec, header.len(), line)?;
        let name = field(rec, 0, line)?;
        let kind = SensorKind::parse(name).ok_or_else(|| schema(line, format!("unknown sensor kind `{name}`")))?;
        let timestamp = float(rec, 1, line)?;
        let node_field = field(rec, 2, line)?;
        let node = node_field
            .parse()
            .map_err(|_| schema(line, format!("`{node_field}` is not a node index")))?;
        let (value, noise) = match kind {
            SensorKind::Gyro => {
                if (6..19).any(|i| !rec[i].is_empty()) {
                    return Err(schema(line, "gyro rows fill v0..v2 only"));
                }
                let v = floats(rec, 3, 3, line)?;
                (
                    MeasurementValue::Rate(Vector3::new(v[0], v[1], v[2])),
                    noise.gyro.clone(),
                )
            }
            SensorKind::TipPose | SensorKind::BasePose => {
                let v = floats(rec, 3, 16, line)?;
                (MeasurementValue::Pose(parse_pose(&v, line)?), noise.pose.clone())
            }
        };
        out.push(Measurement {
            kind,
            timestamp,
            node,
            value,
            noise,
        });
    }
    crate::sim::sort_measurements(&mut out);
    Ok(out)
}

fn state_header() -> Vec<String> {
    ["t", "s"]
        .into_iter()
        .map(String::from)
        .chain(numbered("T", 16))
        .chain(numbered("w", 6))
        .chain(numbered("e", 6))
        .collect()
}

fn state_row(t: f64, s: f64, x: &NodeState) -> Vec<String> {
    [t, s]
        .into_iter()
        .chain(pose_values(&x.pose))
        .chain(x.velocity.iter().copied())
        .chain(x.strain.iter().copied())
        .map(fmt)
        .collect()
}

fn parse_state(rec: &csv::StringRecord, line: usize) -> Result<(f64, f64, NodeState)> {
    let v = floats(rec, 0, 30, line)?;
    let pose = parse_pose(&v[2..18], line)?;
    Ok((
        v[0],
        v[1],
        NodeState::new(
            pose,
            Twist::from_column_slice(&v[18..24]),
            Twist::from_column_slice(&v[24..30]),
        ),
    ))
}

/// Node states on a time grid: `states[k][j]` is node `j` at `times[k]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateTable {
    pub times: Vec<f64>,
    pub arcs: Vec<f64>,
    pub states: Vec<Vec<NodeState>>,
}

pub fn write_states<W: Write>(out: W, table: &StateTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(state_header())?;
    for (t, nodes) in table.times.iter().zip(&table.states) {
        for (s, x) in table.arcs.iter().zip(nodes) {
            w.write_record(state_row(*t, *s, x))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Group consecutive rows by time; within a time, rows must list every node
/// in order of increasing arc length.
// (times, arcs, rows per time with their line numbers)
type Grouped = (Vec<f64>, Vec<f64>, Vec<Vec<(usize, NodeState)>>);

struct Grouper {
    times: Vec<f64>,
    arcs: Vec<f64>,
    groups: Vec<Vec<(usize, NodeState)>>,
    current_arcs: Vec<f64>,
}

impl Grouper {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            arcs: Vec::new(),
            groups: Vec::new(),
            current_arcs: Vec::new(),
        }
    }

    fn close(&mut self, line: usize) -> Result<()> {
        if self.current_arcs.is_empty() {
            return Ok(());
        }
        let arcs = std::mem::take(&mut self.current_arcs);
        if self.arcs.is_empty() {
            self.arcs = arcs;
        } else if arcs.len() != self.arcs.len() || arcs.iter().zip(&self.arcs).any(|(a, b)| (a - b).abs() > ARC_TOL) {
            return Err(schema(line, "node arc lengths differ between times"));
        }
        Ok(())
    }

    fn push(&mut self, line: usize, t: f64, s: f64, x: NodeState) -> Result<()> {
        match self.times.last() {
            Some(&last) if last == t => {
                let prev = *self.current_arcs.last().unwrap_or(&f64::NEG_INFINITY);
                if s <= prev + ARC_TOL {
                    return Err(schema(line, "arc lengths must increase within a time"));
                }
            }
            Some(&last) if t < last => return Err(schema(line, "times must not decrease")),
            _ => {
                self.close(line)?;
                self.times.push(t);
                self.groups.push(Vec::new());
            }
        }
        self.current_arcs.push(s);
        self.groups.last_mut().expect("group opened above").push((line, x));
        Ok(())
    }

    fn finish(mut self, line: usize) -> Result<Grouped> {
        self.close(line)?;
        Ok((self.times, self.arcs, self.groups))
    }
}

pub fn read_states<R: Read>(input: R) -> Result<StateTable> {
    let header = state_header();
    let mut rows = Rows::new(input, &header)?;
    let mut g = Grouper::new();
    let mut last_line = 1;
    while let Some((line, rec)) = rows.next()? {
        expect_len(rec, header.len(), line)?;
        let (t, s, x) = parse_state(rec, line)?;
        g.push(line, t, s, x)?;
        last_line = line;
    }
    let (times, arcs, groups) = g.finish(last_line)?;
    Ok(StateTable {
        times,
        arcs,
        states: groups
            .into_iter()
            .map(|g| g.into_iter().map(|(_, x)| x).collect())
            .collect(),
    })
}

fn estimate_header() -> Vec<String> {
    let mut h = state_header();
    h.extend(numbered("P", triangle(NODE_DOF)));
    h
}

/// One row per node per reported slice, with the node's 18×18 covariance.
pub fn write_estimates<W: Write>(out: W, estimates: &[SliceEstimate<NodeState>], arcs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(estimate_header())?;
    for e in estimates {
        for ((s, x), p) in arcs.iter().zip(&e.nodes).zip(&e.covariances) {
            let mut row = state_row(e.timestamp, *s, x);
            row.extend(upper_triangle(p).map(fmt));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Estimates read back from a file, with slice indices renumbered from 0 and
/// no joint covariance attached.
pub fn read_estimates<R: Read>(input: R) -> Result<(Vec<SliceEstimate<NodeState>>, Vec<f64>)> {
    let header = estimate_header();
    let mut rows = Rows::new(input, &header)?;
    let mut g = Grouper::new();
    let mut covs: Vec<NodeMatrix> = Vec::new();
    let mut last_line = 1;
    while let Some((line, rec)) = rows.next()? {
        expect_len(rec, header.len(), line)?;
        let (t, s, x) = parse_state(rec, line)?;
        covs.push(from_upper_triangle(&floats(rec, 30, triangle(NODE_DOF), line)?));
        g.push(line, t, s, x)?;
        last_line = line;
    }
    let (times, arcs, groups) = g.finish(last_line)?;
    let mut covs = covs.into_iter();
    let estimates = times
        .into_iter()
        .zip(groups)
        .enumerate()
        .map(|(index, (timestamp, group))| SliceEstimate {
            index,
            timestamp,
            covariances: covs.by_ref().take(group.len()).collect(),
            nodes: group.into_iter().map(|(_, x)| x).collect(),
            joint_prev: None,
        })
        .collect();
    Ok((estimates, arcs))
}

fn joint_header() -> Vec<String> {
    ["t_a", "t_b", "s"]
        .into_iter()
        .map(String::from)
        .chain(numbered("J", triangle(24)))
        .collect()
}

/// Joint covariances of consecutive reported slices, one row per node.
pub fn write_joint<W: Write>(out: W, estimates: &[SliceEstimate<NodeState>], arcs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(joint_header())?;
    for j in estimates.iter().filter_map(|e| e.joint_prev.as_ref()) {
        for (s, b) in arcs.iter().zip(&j.blocks) {
            let mut row = vec![fmt(j.t_a), fmt(j.t_b), fmt(*s)];
            row.extend(upper_triangle(b).map(fmt));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Attach joint covariances to the estimates whose timestamp matches `t_b`.
pub fn read_joint<R: Read>(input: R, estimates: &mut [SliceEstimate<NodeState>]) -> Result<()> {
    let header = joint_header();
    let mut rows = Rows::new(input, &header)?;
    let mut pending: Option<(usize, JointNeighborCovariance)> = None;
    let mut done: Vec<(usize, JointNeighborCovariance)> = Vec::new();
    while let Some((line, rec)) = rows.next()? {
        expect_len(rec, header.len(), line)?;
        let v = floats(rec, 0, 3, line)?;
        let block: Matrix24 = from_upper_triangle(&floats(rec, 3, triangle(24), line)?);
        match &mut pending {
            Some((_, j)) if j.t_a == v[0] && j.t_b == v[1] => j.blocks.push(block),
            _ => {
                let target = estimates
                    .iter()
                    .position(|e| e.timestamp == v[1])
                    .ok_or_else(|| schema(line, format!("no estimate at t = {}", v[1])))?;
                done.extend(pending.take());
                pending = Some((
                    target,
                    JointNeighborCovariance {
                        t_a: v[0],
                        t_b: v[1],
                        blocks: vec![block],
                    },
                ));
            }
        }
    }
    done.extend(pending);
    for (target, j) in done {
        let nodes = estimates[target].nodes.len();
        if j.blocks.len() != nodes {
            return Err(schema(
                0,
                format!(
                    "joint covariance at t = {} has {} of {nodes} nodes",
                    j.t_b,
                    j.blocks.len()
                ),
            ));
        }
        estimates[target].joint_prev = Some(j);
    }
    Ok(())
}

pub fn write_solve_reports<W: Write>(out: W, reports: &[SolveReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window_index", "iterations", "cost", "wall_ms"])?;
    for r in reports {
        w.write_record([
            r.window_index.to_string(),
            r.iterations.to_string(),
            fmt(r.final_cost),
            fmt(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Wall times (ms) from a solve-report file.
pub fn read_solve_times<R: Read>(input: R) -> Result<Vec<f64>> {
    let header: Vec<String> = ["window_index", "iterations", "cost", "wall_ms"]
        .map(String::from)
        .to_vec();
    let mut rows = Rows::new(input, &header)?;
    let mut out = Vec::new();
    while let Some((line, rec)) = rows.next()? {
        expect_len(rec, 4, line)?;
        out.push(float(rec, 3, line)?);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

/// Summary row of an evaluation; empty cells mark unavailable values.
pub fn write_eval_summary<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tip_pos_rmse_pct",
        "tip_rot_rmse",
        "avg_nees",
        "mean_ms",
        "p50_ms",
        "p99_ms",
        "real_time",
    ])?;
    let rt = report.runtime;
    w.write_record([
        fmt(report.tip_pos_rmse_pct),
        fmt(report.tip_rot_rmse),
        opt(report.avg_nees),
        opt(rt.map(|r| r.mean_ms)),
        opt(rt.map(|r| r.p50_ms)),
        opt(rt.map(|r| r.p99_ms)),
        rt.map_or_else(String::new, |r| r.real_time.to_string()),
    ])?;
    w.flush()?;
    Ok(())
}

/// Per-stamp error series of an evaluation.
pub fn write_eval_series<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "pos_err_m", "rot_err_rad", "nees"])?;
    for e in &report.series {
        w.write_record([fmt(e.time), fmt(e.position), fmt(e.rotation), opt(e.nees)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{default_gyro_noise, default_pose_noise};
    use crate::lie;
    use crate::sim::{generate, synthesize, Profile, SensorConfig, TrajectoryConfig};

    fn noise() -> MeasurementNoise {
        MeasurementNoise {
            pose: default_pose_noise(),
            gyro: default_gyro_noise(),
        }
    }

    fn sample_stream() -> Vec<Measurement> {
        let cfg = TrajectoryConfig {
            duration: 0.3,
            profile: Profile::named("fast-contact").unwrap(),
            ..Default::default()
        };
        let gt = generate(&cfg).unwrap();
        synthesize(&gt, &SensorConfig::default(), 4).unwrap()
    }

    #[test]
    fn measurements_round_trip_exactly() {
        let ms = sample_stream();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &ms).unwrap();
        let back = read_measurements(buf.as_slice(), &noise()).unwrap();
        assert_eq!(back.len(), ms.len());
        for (a, b) in ms.iter().zip(&back) {
            assert_eq!(
                (a.kind, a.timestamp, a.node, a.value),
                (b.kind, b.timestamp, b.node, b.value)
            );
        }
        let text = String::from_utf8(buf).unwrap();
        let gyro = text.lines().find(|l| l.starts_with("gyro")).unwrap();
        assert!(gyro.ends_with(",,,,,,,,,,,,,"));
    }

    #[test]
    fn measurements_are_returned_in_stream_order() {
        let ms = sample_stream();
        let mut rev = ms.clone();
        rev.reverse();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &rev).unwrap();
        let back = read_measurements(buf.as_slice(), &noise()).unwrap();
        assert!(back
            .iter()
            .zip(&ms)
            .all(|(a, b)| a.timestamp == b.timestamp && a.kind == b.kind));
    }

    fn err_line(text: &str) -> (usize, String) {
        match read_measurements(text.as_bytes(), &noise()) {
            Err(Error::Schema { line, message }) => (line, message),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let header = measurement_header().join(",");
        let ok_gyro = "gyro,0.1,2,0.1,0.2,0.3,,,,,,,,,,,,,";
        assert_eq!(err_line("kind,t\n").0, 1);
        let (line, msg) = err_line(&format!("{header}\n{ok_gyro}\nlaser,0.2,1{}\n", ",0".repeat(16)));
        assert_eq!(line, 3);
        assert!(msg.contains("laser"));
        let (line, _) = err_line(&format!(
            "{header}\n{ok_gyro}\n{ok_gyro}\ngyro,abc,2,0,0,0,,,,,,,,,,,,,\n"
        ));
        assert_eq!(line, 4);
        let (line, _) = err_line(&format!("{header}\ngyro,0.1,2,0,0\n"));
        assert_eq!(line, 2);
        let skew = "tip_pose,0.1,4,1,0,0,0,0,2,0,0,0,0,1,0,0,0,0,1";
        let (line, msg) = err_line(&format!("{header}\n{skew}\n"));
        assert_eq!(line, 2);
        assert!(msg.contains("orthonormal"));
    }

    #[test]
    fn empty_file_gives_empty_stream() {
        let header = measurement_header().join(",");
        assert!(read_measurements(format!("{header}\n").as_bytes(), &noise())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn states_round_trip() {
        let cfg = TrajectoryConfig {
            duration: 0.05,
            ..Default::default()
        };
        let gt = generate(&cfg).unwrap();
        let table = StateTable {
            times: gt.times.clone(),
            arcs: (0..5).map(|j| j as f64 * 0.466 / 4.0).collect(),
            states: gt.states.clone(),
        };
        let mut buf = Vec::new();
        write_states(&mut buf, &table).unwrap();
        assert_eq!(read_states(buf.as_slice()).unwrap(), table);
    }

    fn random_estimates() -> Vec<SliceEstimate<NodeState>> {
        (0..3)
            .map(|i| {
                let x = NodeState::new(
                    lie::exp(&Twist::from_fn(|k, _| (k + i) as f64 * 0.1)),
                    Twist::from_fn(|k, _| k as f64),
                    Twist::from_fn(|k, _| -(k as f64)),
                );
                let p = NodeMatrix::from_fn(|r, c| 1.0 / (1.0 + r as f64 + c as f64));
                let joint = (i > 0).then(|| JointNeighborCovariance {
                    t_a: (i - 1) as f64 / 30.0,
                    t_b: i as f64 / 30.0,
                    blocks: vec![Matrix24::from_fn(|r, c| (r * c) as f64 + 1.0 + (r == c) as u8 as f64); 2],
                });
                SliceEstimate {
                    index: i,
                    timestamp: i as f64 / 30.0,
                    nodes: vec![x; 2],
                    covariances: vec![p; 2],
                    joint_prev: joint,
                }
            })
            .collect()
    }

    #[test]
    fn estimates_and_joints_round_trip() {
        let est = random_estimates();
        let arcs = [0.0, 0.466];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_estimates(&mut a, &est, &arcs).unwrap();
        write_joint(&mut b, &est, &arcs).unwrap();
        let (mut back, back_arcs) = read_estimates(a.as_slice()).unwrap();
        assert_eq!(back_arcs, arcs);
        read_joint(b.as_slice(), &mut back).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn joint_for_unknown_time_is_rejected() {
        let est = random_estimates();
        let mut b = Vec::new();
        write_joint(&mut b, &est, &[0.0, 0.466]).unwrap();
        let mut short = est[..1].to_vec();
        assert!(matches!(
            read_joint(b.as_slice(), &mut short),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn solve_reports_round_trip_wall_times() {
        let r = SolveReport {
            window_index: 3,
            iterations: 2,
            final_delta_norm: 0.0,
            final_cost: 1.5,
            converged: true,
            wall_ms: 4.25,
        };
        let mut buf = Vec::new();
        write_solve_reports(&mut buf, &[r, r]).unwrap();
        assert_eq!(read_solve_times(buf.as_slice()).unwrap(), vec![4.25, 4.25]);
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("window_index,iterations,cost,wall_ms\n3,2,1.5,4.25\n"));
    }
}
