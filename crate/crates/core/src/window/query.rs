//! Continuous-time queries over the reported slice history.

use nalgebra::Matrix6;

use super::SliceEstimate;
use crate::error::{Error, Result};
use crate::interp::{interp_covariance, interp_mean, Matrix12};
use crate::state::NodeState;

enum Bracket<'a> {
    Exact(&'a SliceEstimate<NodeState>),
    Between(&'a SliceEstimate<NodeState>, &'a SliceEstimate<NodeState>),
}

fn bracket(records: &[SliceEstimate<NodeState>], tau: f64) -> Result<Bracket<'_>> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyOverlap),
    };
    let outside = Error::TimestampOutsideInterval {
        tau,
        start: first.timestamp,
        end: last.timestamp,
    };
    let idx = records.partition_point(|r| r.timestamp < tau);
    if let Some(r) = records.get(idx) {
        if (r.timestamp - tau).abs() <= 1e-12 {
            return Ok(Bracket::Exact(r));
        }
    }
    if idx > 0 && (records[idx - 1].timestamp - tau).abs() <= 1e-12 {
        return Ok(Bracket::Exact(&records[idx - 1]));
    }
    if idx == 0 || idx == records.len() {
        return Err(outside);
    }
    Ok(Bracket::Between(&records[idx - 1], &records[idx]))
}

/// Mean of every node at `τ`, interpolated between the bracketing slices.
pub fn query_mean(records: &[SliceEstimate<NodeState>], tau: f64) -> Result<Vec<NodeState>> {
    match bracket(records, tau)? {
        Bracket::Exact(r) => Ok(r.nodes.clone()),
        Bracket::Between(a, b) => a
            .nodes
            .iter()
            .zip(&b.nodes)
            .map(|(xa, xb)| interp_mean(xa, xb, a.timestamp, b.timestamp, tau))
            .collect(),
    }
}

/// (pose, velocity) covariance of every node at `τ`.
///
/// Between slices this needs the joint covariance stored with the later
/// slice, which single-slice (filter) windows do not provide.
pub fn query_covariance(records: &[SliceEstimate<NodeState>], tau: f64, qc: &Matrix6<f64>) -> Result<Vec<Matrix12>> {
    match bracket(records, tau)? {
        Bracket::Exact(r) => Ok(r
            .covariances
            .iter()
            .map(|c| c.fixed_view::<12, 12>(0, 0).into_owned())
            .collect()),
        Bracket::Between(a, b) => {
            let joint = b
                .joint_prev
                .as_ref()
                .filter(|j| (j.t_a - a.timestamp).abs() <= 1e-9)
                .ok_or(Error::MissingJointCovariance { tau })?;
            (0..a.nodes.len())
                .map(|j| interp_covariance(joint, &a.nodes[j], &b.nodes[j], tau, j, qc))
                .collect()
        }
    }
}

/// Mean and (pose, velocity) covariance at `τ`.
pub fn query_continuous(
    records: &[SliceEstimate<NodeState>],
    tau: f64,
    qc: &Matrix6<f64>,
) -> Result<(Vec<NodeState>, Vec<Matrix12>)> {
    Ok((query_mean(records, tau)?, query_covariance(records, tau, qc)?))
}
