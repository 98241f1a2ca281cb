//! The estimation grid: node states indexed by (time slice, arc-length node).

use nalgebra::{SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::lie::{self, Pose, Twist};

/// Local perturbation dimension of one node: pose (6), velocity (6), strain (6).
pub const NODE_DOF: usize = 18;

pub type NodeVector = SVector<f64, NODE_DOF>;
pub type NodeMatrix = SMatrix<f64, NODE_DOF, NODE_DOF>;

/// State of the robot at one (arc length, time) grid point.
///
/// `pose` maps body coordinates to world coordinates; `velocity` and `strain`
/// are body-frame time and arc-length derivatives, so that locally
/// `T(t + h) ≈ T(t)·exp(h·ϖ)` and `T(s + h) ≈ T(s)·exp(h·ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeState {
    pub pose: Pose,
    pub velocity: Twist,
    pub strain: Twist,
}

impl Default for NodeState {
    fn default() -> Self {
        Self {
            pose: Pose::identity(),
            velocity: Twist::zeros(),
            strain: Twist::zeros(),
        }
    }
}

impl NodeState {
    pub fn new(pose: Pose, velocity: Twist, strain: Twist) -> Self {
        Self { pose, velocity, strain }
    }

    pub fn is_finite(&self) -> bool {
        self.velocity.iter().all(|v| v.is_finite())
            && self.strain.iter().all(|v| v.is_finite())
            && self.pose.rotation.iter().all(|v| v.is_finite())
            && self.pose.translation.iter().all(|v| v.is_finite())
    }

    /// Apply a local increment: `T ← T·exp(δ_pose)`, additive on velocity and strain.
    pub fn retract(&self, delta: &NodeVector) -> NodeState {
        let d_pose: Twist = delta.fixed_rows::<6>(0).into_owned();
        let d_vel: Twist = delta.fixed_rows::<6>(6).into_owned();
        let d_strain: Twist = delta.fixed_rows::<6>(12).into_owned();
        NodeState {
            pose: self.pose * lie::exp(&d_pose),
            velocity: self.velocity + d_vel,
            strain: self.strain + d_strain,
        }
    }

    /// Local coordinates of `self` about `anchor`: `anchor.retract(self.local(anchor)) == self`.
    pub fn local(&self, anchor: &NodeState) -> Result<NodeVector> {
        let xi = lie::log(&(anchor.pose.inverse() * self.pose))?;
        let mut out = NodeVector::zeros();
        out.fixed_rows_mut::<6>(0).copy_from(&xi);
        out.fixed_rows_mut::<6>(6).copy_from(&(self.velocity - anchor.velocity));
        out.fixed_rows_mut::<6>(12).copy_from(&(self.strain - anchor.strain));
        Ok(out)
    }
}

/// A value living on a manifold with an 18-dimensional local parameterization.
///
/// The sliding-window machinery is generic over this so that the same code
/// path handles the continuum-robot states and plain vector-space states.
pub trait Variable: Clone + std::fmt::Debug + Send + Sync {
    fn retract(&self, delta: &NodeVector) -> Self;

    /// Coordinates of `self` relative to `anchor`.
    fn local(&self, anchor: &Self) -> Result<NodeVector>;

    /// `∂ local(self ⊞ δ, anchor) / ∂δ` at `δ = 0`.
    fn local_jacobian(&self, anchor: &Self) -> Result<NodeMatrix>;
}

impl Variable for NodeState {
    fn retract(&self, delta: &NodeVector) -> Self {
        NodeState::retract(self, delta)
    }

    fn local(&self, anchor: &Self) -> Result<NodeVector> {
        NodeState::local(self, anchor)
    }

    fn local_jacobian(&self, anchor: &Self) -> Result<NodeMatrix> {
        let xi = lie::log(&(anchor.pose.inverse() * self.pose))?;
        let mut j = NodeMatrix::identity();
        j.fixed_view_mut::<6, 6>(0, 0).copy_from(&lie::right_jacobian_inv(&xi)?);
        Ok(j)
    }
}

/// Plain vector state; retraction is addition.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct VectorState(pub NodeVector);

impl Variable for VectorState {
    fn retract(&self, delta: &NodeVector) -> Self {
        VectorState(self.0 + delta)
    }

    fn local(&self, anchor: &Self) -> Result<NodeVector> {
        Ok(self.0 - anchor.0)
    }

    fn local_jacobian(&self, _anchor: &Self) -> Result<NodeMatrix> {
        Ok(NodeMatrix::identity())
    }
}

/// Absolute grid coordinates: time slice index and arc-length node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex {
    pub time: usize,
    pub node: usize,
}

impl GridIndex {
    pub fn new(time: usize, node: usize) -> Self {
        Self { time, node }
    }
}

/// Static dimensions of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateConfig {
    /// Nodes per slice.
    pub nodes: usize,
    /// Robot length in meters.
    pub length: f64,
    /// Slice period in seconds.
    pub dt: f64,
    /// Slices kept in the window.
    pub window_slices: usize,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            nodes: 5,
            length: 0.466,
            dt: 1.0 / 30.0,
            window_slices: 4,
        }
    }
}

impl StateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Config("at least two nodes are required".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("slice period must be positive".into()));
        }
        if self.window_slices < 1 {
            return Err(Error::Config("window must hold at least one slice".into()));
        }
        if !(self.length > 0.0) {
            return Err(Error::Config("robot length must be positive".into()));
        }
        Ok(())
    }

    /// Arc-length spacing between nodes.
    pub fn ds(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn arc_length(&self, node: usize) -> f64 {
        node as f64 * self.ds()
    }
}

/// All nodes of the robot at one timestamp, ordered base to tip.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSlice<V = NodeState> {
    pub index: usize,
    pub timestamp: f64,
    pub nodes: Vec<V>,
}

/// Offset of a node's perturbation block in the stacked window vector.
///
/// Ordering is time-major then arc length: `18·(N·local_time + node)`.
pub fn perturbation_offset<V>(idx: GridIndex, window: &[TimeSlice<V>]) -> Result<usize> {
    block_index(idx, window).map(|b| b * NODE_DOF)
}

/// Block (node) index of a grid point in the window ordering.
pub fn block_index<V>(idx: GridIndex, window: &[TimeSlice<V>]) -> Result<usize> {
    let out = Error::IndexOutOfWindow {
        time: idx.time,
        node: idx.node,
    };
    let first = window.first().ok_or(out.clone())?;
    let nodes = first.nodes.len();
    if idx.time < first.index || idx.time >= first.index + window.len() || idx.node >= nodes {
        return Err(out);
    }
    Ok((idx.time - first.index) * nodes + idx.node)
}

/// Straight, unstrained rod along body x with its base at `base`.
pub fn straight_rod(base: &Pose, cfg: &StateConfig) -> Vec<NodeState> {
    let strain = lie::twist(Vector3::x(), Vector3::zeros());
    (0..cfg.nodes)
        .map(|j| {
            let pose = base * &lie::exp(&(strain * cfg.arc_length(j)));
            NodeState::new(pose, Vector6::zeros(), strain)
        })
        .collect()
}
