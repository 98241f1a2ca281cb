//! The continuum-robot window model.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{batch_solve, bin_by_interval, BatchResult, Bootstrap, Model, SliceEstimate, SlidingWindow, SwfConfig};
use crate::error::{Error, Result};
use crate::factors::{default_boundary_noise, Bracket, NoiseModel, PriorPowerSpectra, RobotFactor};
use crate::lie::{self, Pose};
use crate::sim::{Measurement, MeasurementValue};
use crate::solver::{BoxedFactor, GaussNewtonOptions, SolveReport};
use crate::state::{straight_rod, GridIndex, NodeState, StateConfig, TimeSlice, NODE_DOF};

/// Standard deviations of the weak prior placed on the first slice.
///
/// A single slice is not fully observable from its own factors: the node
/// velocities (other than the clamped base) and one common strain offset are
/// free until measurements arrive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialPrior {
    pub pose: f64,
    pub velocity: f64,
    pub strain_linear: f64,
    pub strain_angular: f64,
}

impl Default for InitialPrior {
    fn default() -> Self {
        Self {
            pose: 1.0,
            velocity: 1.0,
            strain_linear: 0.1,
            strain_angular: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub state: StateConfig,
    pub spectra: PriorPowerSpectra,
    /// Clamped base pose.
    pub base: Pose,
    pub boundary_noise: NoiseModel,
    pub initial: InitialPrior,
}

impl RobotModel {
    pub fn new(state: StateConfig, spectra: PriorPowerSpectra) -> Self {
        Self {
            state,
            spectra,
            base: Pose::identity(),
            boundary_noise: default_boundary_noise(),
            initial: InitialPrior::default(),
        }
    }

    fn midpoint(a: &Pose, b: &Pose) -> Result<Pose> {
        let d = lie::log(&(a.inverse() * *b))?;
        Ok(*a * lie::exp(&(d * 0.5)))
    }
}

impl Model<NodeState> for RobotModel {
    type Input = Measurement;

    fn nodes(&self) -> usize {
        self.state.nodes
    }

    fn bootstrap(&self, _timestamp: f64) -> Result<Bootstrap<NodeState>> {
        self.state.validate()?;
        let nodes = straight_rod(&self.base, &self.state);
        let p = &self.initial;
        let mut sig = [0.0; NODE_DOF];
        sig[..6].fill(p.pose);
        sig[6..12].fill(p.velocity);
        sig[12..15].fill(p.strain_linear);
        sig[15..].fill(p.strain_angular);
        let diag = DVector::from_iterator(
            NODE_DOF * nodes.len(),
            (0..nodes.len()).flat_map(|_| sig.iter().map(|s| 1.0 / (s * s))),
        );
        Ok(Bootstrap {
            prior_vector: DVector::zeros(diag.len()),
            prior_information: DMatrix::from_diagonal(&diag),
            nodes,
        })
    }

    /// Each node starts at the geodesic midpoint of a constant-velocity
    /// prediction from the previous slice and a constant-strain prediction
    /// from its (already initialized) neighbor toward the base.
    fn predict(&self, prev: &TimeSlice<NodeState>, _index: usize, timestamp: f64) -> Result<Vec<NodeState>> {
        let dt = timestamp - prev.timestamp;
        let ds = self.state.ds();
        let mut out: Vec<NodeState> = Vec::with_capacity(prev.nodes.len());
        for old in &prev.nodes {
            let temporal = old.pose * lie::exp(&(old.velocity * dt));
            let x = match out.last() {
                None => NodeState::new(temporal, old.velocity, old.strain),
                Some(below) => {
                    let spatial = below.pose * lie::exp(&(below.strain * ds));
                    NodeState::new(
                        Self::midpoint(&temporal, &spatial)?,
                        (old.velocity + below.velocity) * 0.5,
                        (old.strain + below.strain) * 0.5,
                    )
                }
            };
            out.push(x);
        }
        Ok(out)
    }

    fn slice_factors(&self, slice: &TimeSlice<NodeState>) -> Result<Vec<BoxedFactor<NodeState>>> {
        let i = slice.index;
        let ds = self.state.ds();
        let mut out: Vec<BoxedFactor<NodeState>> = vec![Box::new(RobotFactor::boundary(
            GridIndex::new(i, 0),
            self.base,
            self.boundary_noise.clone(),
        )?)];
        for j in 1..slice.nodes.len() {
            out.push(Box::new(RobotFactor::spatial(
                GridIndex::new(i, j - 1),
                GridIndex::new(i, j),
                ds,
                &self.spectra.space,
            )?));
        }
        Ok(out)
    }

    fn interval_factors(
        &self,
        prev: &TimeSlice<NodeState>,
        next: &TimeSlice<NodeState>,
        inputs: &[Measurement],
    ) -> Result<Vec<BoxedFactor<NodeState>>> {
        let (a, b) = (prev.index, next.index);
        let dt = next.timestamp - prev.timestamp;
        let n = prev.nodes.len();
        let mut out: Vec<BoxedFactor<NodeState>> = Vec::with_capacity(n + inputs.len());
        for j in 0..n {
            out.push(Box::new(RobotFactor::motion(
                GridIndex::new(a, j),
                GridIndex::new(b, j),
                dt,
                &self.spectra.time,
            )?));
        }
        for m in inputs {
            if m.node >= n {
                return Err(Error::OffGridSensor { node: m.node, nodes: n });
            }
            let bracket = Bracket::new(prev.timestamp, next.timestamp, m.timestamp)?;
            let (ka, kb) = (GridIndex::new(a, m.node), GridIndex::new(b, m.node));
            let f = match m.value {
                MeasurementValue::Pose(p) => RobotFactor::pose_measurement(ka, kb, bracket, p, m.noise.clone())?,
                MeasurementValue::Rate(w) => RobotFactor::gyro_measurement(ka, kb, bracket, w, m.noise.clone())?,
            };
            out.push(Box::new(f));
        }
        Ok(out)
    }
}

/// Output of a full estimator run.
#[derive(Clone, Debug)]
pub struct EstimatorRun {
    /// Reported slices in time order.
    pub estimates: Vec<SliceEstimate<NodeState>>,
    /// One report per window solve, bootstrap included.
    pub reports: Vec<SolveReport>,
    /// Measurements outside the estimated horizon.
    pub dropped: usize,
    pub window_slices: usize,
}

/// Failure of a run, tagged with the window (step) where it happened.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("window {window_index}: {source}")]
pub struct RunError {
    pub window_index: usize,
    #[source]
    pub source: Error,
}

/// Number of slices covering `[0, duration]` at period `dt`.
pub fn slice_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize + 1
}

/// Feed a time-ordered measurement stream through the window over
/// `[0, duration]` and collect every reported slice.
pub fn run_estimator(
    model: RobotModel,
    cfg: SwfConfig,
    measurements: &[Measurement],
    duration: f64,
) -> std::result::Result<EstimatorRun, RunError> {
    let at = |window_index| move |source| RunError { window_index, source };
    let slices = slice_count(duration, cfg.dt);
    let (bins, dropped) = bin_by_interval(measurements, |m| m.timestamp, 0.0, cfg.dt, slices);
    if dropped > 0 {
        warn!("{dropped} measurements fall outside the estimated horizon and were ignored");
    }
    if measurements.is_empty() {
        warn!("no measurements: estimates follow the prior only");
    }
    let (mut window, first) = SlidingWindow::new(model, cfg, 0.0).map_err(at(0))?;
    let window_slices = window.capacity();
    let mut estimates = first.emitted;
    let mut reports = vec![first.report];
    for (i, bin) in bins.iter().enumerate() {
        let t = window.next_timestamp();
        let out = window.step(t, bin).map_err(at(i + 1))?;
        estimates.extend(out.emitted);
        reports.push(out.report);
    }
    estimates.extend(window.finish().map_err(at(slices))?);
    Ok(EstimatorRun {
        estimates,
        reports,
        dropped,
        window_slices,
    })
}

/// Solve the whole horizon `[0, duration]` at once.
///
/// `initial` seeds Gauss-Newton (typically a windowed run over the same
/// data); without it the model's own prediction is used.
pub fn run_batch(
    model: &RobotModel,
    dt: f64,
    measurements: &[Measurement],
    duration: f64,
    initial: Option<&[SliceEstimate<NodeState>]>,
    opts: &GaussNewtonOptions,
) -> Result<BatchResult<NodeState>> {
    let slices = slice_count(duration, dt);
    let (bins, _) = bin_by_interval(measurements, |m| m.timestamp, 0.0, dt, slices);
    let initial = match initial {
        Some(est) if est.len() == slices => Some(
            est.iter()
                .map(|e| TimeSlice {
                    index: e.index,
                    timestamp: e.timestamp,
                    nodes: e.nodes.clone(),
                })
                .collect(),
        ),
        Some(_) => return Err(Error::Config("initial estimates do not cover the horizon".into())),
        None => None,
    };
    batch_solve(model, 0.0, dt, &bins, initial, opts)
}
