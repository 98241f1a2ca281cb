//! Accuracy, consistency and runtime metrics.

use std::fmt;

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::lie::{self, Pose};
use crate::solver::SolveReport;
use crate::state::NodeState;
use crate::window::{query_continuous, query_mean, SliceEstimate};

/// Mean solve time below which a 30 Hz window keeps up with the data.
pub const REAL_TIME_MS: f64 = 1000.0 / 30.0;

/// Ground-truth tip poses at their timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TruthSeries {
    pub times: Vec<f64>,
    pub tip: Vec<Pose>,
}

impl TruthSeries {
    /// Tip (last node) of every truth sample.
    pub fn from_states(times: &[f64], states: &[Vec<NodeState>]) -> Self {
        Self {
            times: times.to_vec(),
            tip: states.iter().filter_map(|s| s.last().map(|x| x.pose)).collect(),
        }
    }

    /// Samples inside `[start, end]`.
    fn within(&self, start: f64, end: f64) -> impl Iterator<Item = (f64, &Pose)> {
        self.times
            .iter()
            .copied()
            .zip(&self.tip)
            .filter(move |(t, _)| *t >= start - 1e-12 && *t <= end + 1e-12)
    }
}

/// Error at one ground-truth stamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampError {
    pub time: f64,
    /// Tip position error (m).
    pub position: f64,
    /// Tip rotation error (rad).
    pub rotation: f64,
    pub nees: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuntimeStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub real_time: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Tip position RMSE as a percentage of the robot length.
    pub tip_pos_rmse_pct: f64,
    pub tip_rot_rmse: f64,
    /// `None` when the estimates carry no covariance between slices.
    pub avg_nees: Option<f64>,
    pub runtime: Option<RuntimeStats>,
    pub series: Vec<StampError>,
}

fn overlap(records: &[SliceEstimate<NodeState>]) -> Result<(f64, f64)> {
    match (records.first(), records.last()) {
        (Some(a), Some(b)) => Ok((a.timestamp, b.timestamp)),
        _ => Err(Error::EmptyOverlap),
    }
}

fn tip_of(nodes: &[NodeState]) -> Result<&NodeState> {
    nodes.last().ok_or(Error::EmptyOverlap)
}

fn rotation_error(est: &Pose, truth: &Pose) -> Result<f64> {
    Ok(lie::so3_log(&(est.rotation.transpose() * truth.rotation))?.norm())
}

/// Per-stamp tip errors, with the estimate interpolated at every truth stamp
/// inside the estimated span.
pub fn tip_errors(records: &[SliceEstimate<NodeState>], truth: &TruthSeries) -> Result<Vec<StampError>> {
    let (start, end) = overlap(records)?;
    let mut out = Vec::new();
    for (t, true_tip) in truth.within(start, end) {
        let nodes = query_mean(records, t)?;
        let est = tip_of(&nodes)?.pose;
        out.push(StampError {
            time: t,
            position: (est.translation - true_tip.translation).norm(),
            rotation: rotation_error(&est, true_tip)?,
            nees: None,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(out)
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Tip position RMSE (% of `length`) and rotation RMSE (rad).
pub fn tip_rmse(records: &[SliceEstimate<NodeState>], truth: &TruthSeries, length: f64) -> Result<(f64, f64)> {
    let errs = tip_errors(records, truth)?;
    Ok(summarize(&errs, length))
}

fn summarize(errs: &[StampError], length: f64) -> (f64, f64) {
    (
        100.0 * rms(errs.iter().map(|e| e.position)) / length,
        rms(errs.iter().map(|e| e.rotation)),
    )
}

/// `eᵀΣ⁻¹e` for a 6-DoF pose error.
pub fn nees(error: &Vector6<f64>, covariance: &Matrix6<f64>) -> Result<f64> {
    let chol = covariance.cholesky().ok_or(Error::SingularCovariance)?;
    Ok(error.dot(&chol.solve(error)))
}

/// NEES of the tip pose at every truth stamp inside the estimated span.
pub fn nees_series(
    records: &[SliceEstimate<NodeState>],
    truth: &TruthSeries,
    qc: &Matrix6<f64>,
) -> Result<Vec<(f64, f64)>> {
    let (start, end) = overlap(records)?;
    let mut out = Vec::new();
    for (t, true_tip) in truth.within(start, end) {
        let (nodes, covs) = query_continuous(records, t, qc)?;
        let est = tip_of(&nodes)?.pose;
        let cov = covs.last().ok_or(Error::EmptyOverlap)?;
        let e = lie::log(&(est.inverse() * *true_tip))?;
        out.push((t, nees(&e, &cov.fixed_view::<6, 6>(0, 0).into_owned())?));
    }
    if out.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(out)
}

/// Average tip-pose NEES; the optimum for a consistent estimator is 6.
pub fn avg_nees(records: &[SliceEstimate<NodeState>], truth: &TruthSeries, qc: &Matrix6<f64>) -> Result<f64> {
    let s = nees_series(records, truth, qc)?;
    Ok(s.iter().map(|(_, v)| v).sum::<f64>() / s.len() as f64)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    // Nearest rank.
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Wall-time statistics over window solves. `None` for an empty list.
pub fn runtime_stats(wall_ms: &[f64]) -> Option<RuntimeStats> {
    if wall_ms.is_empty() {
        return None;
    }
    let mut sorted = wall_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean_ms = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Some(RuntimeStats {
        mean_ms,
        p50_ms: percentile(&sorted, 50.0),
        p99_ms: percentile(&sorted, 99.0),
        real_time: mean_ms < REAL_TIME_MS,
    })
}

pub fn report_runtime(reports: &[SolveReport]) -> Option<RuntimeStats> {
    runtime_stats(&reports.iter().map(|r| r.wall_ms).collect::<Vec<_>>())
}

/// Full evaluation. NEES is left out, not an error, when the records hold
/// no covariance between slices.
pub fn evaluate(
    records: &[SliceEstimate<NodeState>],
    truth: &TruthSeries,
    length: f64,
    qc: &Matrix6<f64>,
    reports: &[SolveReport],
) -> Result<EvalReport> {
    let mut series = tip_errors(records, truth)?;
    let (tip_pos_rmse_pct, tip_rot_rmse) = summarize(&series, length);
    let avg_nees = match nees_series(records, truth, qc) {
        Ok(values) => {
            for (e, (_, v)) in series.iter_mut().zip(&values) {
                e.nees = Some(*v);
            }
            Some(values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64)
        }
        Err(Error::MissingJointCovariance { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        tip_pos_rmse_pct,
        tip_rot_rmse,
        avg_nees,
        runtime: report_runtime(reports),
        series,
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.prec$}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>14} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "Tip pos (%L)", "Rot (rad)", "Avg NEES", "Mean (ms)", "p50 (ms)", "p99 (ms)"
        )?;
        let rt = self.runtime;
        writeln!(
            f,
            "{:>14.3} {:>10.4} {:>10} {:>10} {:>10} {:>10}",
            self.tip_pos_rmse_pct,
            self.tip_rot_rmse,
            opt(self.avg_nees, 2),
            opt(rt.map(|r| r.mean_ms), 2),
            opt(rt.map(|r| r.p50_ms), 2),
            opt(rt.map(|r| r.p99_ms), 2),
        )?;
        if let Some(r) = rt {
            writeln!(f, "real-time capable: {}", if r.real_time { "yes" } else { "no" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::JointNeighborCovariance;
    use crate::lie::Twist;
    use crate::state::NodeMatrix;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rod(x: f64, z_angle: f64) -> NodeState {
        NodeState::new(
            Pose::new(
                *nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), z_angle).matrix(),
                Vector3::new(x, 0.0, 0.0),
            ),
            Twist::zeros(),
            Twist::zeros(),
        )
    }

    fn record(index: usize, t: f64, tip: NodeState, cov: f64) -> SliceEstimate<NodeState> {
        SliceEstimate {
            index,
            timestamp: t,
            nodes: vec![rod(0.0, 0.0), tip],
            covariances: vec![NodeMatrix::identity() * cov; 2],
            joint_prev: None,
        }
    }

    fn static_run(tip: NodeState) -> (Vec<SliceEstimate<NodeState>>, TruthSeries) {
        let records = (0..4).map(|i| record(i, i as f64 * 0.1, tip, 1.0)).collect();
        let times: Vec<f64> = (0..=30).map(|i| i as f64 * 0.01).collect();
        let truth = TruthSeries {
            tip: vec![rod(0.466, 0.0).pose; times.len()],
            times,
        };
        (records, truth)
    }

    #[test]
    fn perfect_estimate_has_zero_error() {
        let (records, truth) = static_run(rod(0.466, 0.0));
        assert_eq!(tip_rmse(&records, &truth, 0.466).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn position_offset_is_length_normalized() {
        let (records, truth) = static_run(rod(0.466 + 4.66e-3, 0.0));
        let (pos, rot) = tip_rmse(&records, &truth, 0.466).unwrap();
        assert_relative_eq!(pos, 1.0, epsilon = 1e-9);
        assert_eq!(rot, 0.0);
    }

    #[test]
    fn rotation_offset_is_geodesic_angle() {
        let (records, truth) = static_run(rod(0.466, 0.05));
        let (_, rot) = tip_rmse(&records, &truth, 0.466).unwrap();
        assert_relative_eq!(rot, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn truth_outside_span_is_ignored_and_empty_overlap_fails() {
        let (records, mut truth) = static_run(rod(0.466, 0.0));
        assert_eq!(tip_errors(&records, &truth).unwrap().len(), 31);
        truth.times.iter_mut().for_each(|t| *t += 10.0);
        assert_eq!(tip_rmse(&records, &truth, 1.0).unwrap_err(), Error::EmptyOverlap);
        assert_eq!(tip_rmse(&[], &truth, 1.0).unwrap_err(), Error::EmptyOverlap);
    }

    #[test]
    fn rmse_is_invariant_to_global_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut twist = || Twist::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let g = lie::exp(&twist());
        let tip = NodeState::new(lie::exp(&(twist() * 0.1)), Twist::zeros(), Twist::zeros());
        let records: Vec<_> = (0..3)
            .map(|i| {
                record(
                    i,
                    i as f64 * 0.1,
                    NodeState::new(lie::exp(&(twist() * 0.2)), Twist::zeros(), Twist::zeros()),
                    1.0,
                )
            })
            .collect();
        let truth = TruthSeries {
            times: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            tip: vec![tip.pose; 5],
        };
        let moved: Vec<_> = records
            .iter()
            .map(|r| SliceEstimate {
                nodes: r.nodes.iter().map(|x| NodeState { pose: g * x.pose, ..*x }).collect(),
                ..r.clone()
            })
            .collect();
        let moved_truth = TruthSeries {
            times: truth.times.clone(),
            tip: truth.tip.iter().map(|p| g * *p).collect(),
        };
        let a = tip_rmse(&records, &truth, 0.466).unwrap();
        let b = tip_rmse(&moved, &moved_truth, 0.466).unwrap();
        assert_relative_eq!(a.0, b.0, epsilon = 1e-9);
        assert_relative_eq!(a.1, b.1, epsilon = 1e-9);
    }

    #[test]
    fn nees_of_gaussian_draws_is_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = Matrix6::from_fn(|i, j| if i >= j { 0.2 + (i * 7 + j) as f64 * 0.01 } else { 0.0 });
        let cov = l * l.transpose();
        let n = 10_000;
        let mean = (0..n)
            .map(|_| {
                let z = Vector6::from_fn(|_, _| StandardNormal.sample(&mut rng));
                nees(&(l * z), &cov).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((5.7..=6.3).contains(&mean), "{mean}");
    }

    #[test]
    fn nees_scales_inversely_with_covariance() {
        let e = Vector6::new(0.1, -0.2, 0.3, 0.01, 0.02, -0.03);
        let cov = Matrix6::from_diagonal(&Vector6::new(0.1, 0.2, 0.3, 0.01, 0.02, 0.03));
        let a = nees(&e, &cov).unwrap();
        assert_relative_eq!(nees(&e, &(cov * 4.0)).unwrap(), a / 4.0, epsilon = 1e-12);
        assert_eq!(nees(&Vector6::zeros(), &cov).unwrap(), 0.0);
        assert_eq!(nees(&e, &Matrix6::zeros()).unwrap_err(), Error::SingularCovariance);
    }

    #[test]
    fn nees_needs_joint_covariance_between_slices() {
        let (records, truth) = static_run(rod(0.466, 0.0));
        let qc = Matrix6::identity();
        assert!(matches!(
            avg_nees(&records, &truth, &qc),
            Err(Error::MissingJointCovariance { .. })
        ));
        let report = evaluate(&records, &truth, 0.466, &qc, &[]).unwrap();
        assert_eq!(report.avg_nees, None);
        assert_eq!(report.runtime, None);
        // At slice stamps alone the node covariance is enough.
        let at_slices = TruthSeries {
            times: vec![0.1, 0.2],
            tip: vec![rod(0.466, 0.0).pose; 2],
        };
        assert_eq!(avg_nees(&records, &at_slices, &qc).unwrap(), 0.0);
    }

    #[test]
    fn nees_uses_interpolated_covariance() {
        let tip = rod(0.466, 0.0);
        let mut records: Vec<_> = (0..2).map(|i| record(i, i as f64 * 0.1, tip, 1.0)).collect();
        let blocks = vec![crate::interp::Matrix24::identity(); 2];
        records[1].joint_prev = Some(JointNeighborCovariance {
            t_a: 0.0,
            t_b: 0.1,
            blocks,
        });
        let truth = TruthSeries {
            times: vec![0.05],
            tip: vec![rod(0.466, 0.001).pose],
        };
        let v = avg_nees(&records, &truth, &Matrix6::identity()).unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    #[test]
    fn runtime_statistics() {
        let r = runtime_stats(&[10.0; 100]).unwrap();
        assert_eq!((r.mean_ms, r.p50_ms, r.real_time), (10.0, 10.0, true));
        let mut v = vec![10.0; 99];
        v.push(50.0);
        let r = runtime_stats(&v).unwrap();
        assert_relative_eq!(r.mean_ms, 10.4, epsilon = 1e-12);
        assert!(r.real_time);
        assert_eq!(r.p99_ms, 10.0);
        assert!(!runtime_stats(&[40.0; 5]).unwrap().real_time);
        assert_eq!(runtime_stats(&[]), None);
    }
}
