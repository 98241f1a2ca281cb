//! Linear-Gaussian window models.

use nalgebra::{DMatrix, DVector};

use super::{Bootstrap, MarginalPrior, Model};
use crate::error::{Error, Result};
use crate::solver::{BoxedFactor, Factor, LinearFactor};
use crate::state::{NodeState, NodeVector, TimeSlice, VectorState, NODE_DOF};

/// A linear problem given as explicit factor tables.
///
/// `slice_factors[i]` involve only slice `i`; `interval_factors[i]` link
/// slices `i` and `i + 1`. Slice 0 carries a prior `½xᵀHx − hᵀx`.
#[derive(Clone, Debug)]
pub struct TabulatedModel {
    pub nodes: usize,
    pub prior_information: DMatrix<f64>,
    pub prior_vector: DVector<f64>,
    pub slice_factors: Vec<Vec<LinearFactor>>,
    pub interval_factors: Vec<Vec<LinearFactor>>,
}

impl TabulatedModel {
    pub fn slices(&self) -> usize {
        self.slice_factors.len()
    }

    /// Every factor of the full horizon, slice 0 prior excluded.
    pub fn all_factors(&self) -> impl Iterator<Item = &LinearFactor> {
        self.slice_factors.iter().chain(&self.interval_factors).flatten()
    }
}

fn boxed(fs: &[LinearFactor]) -> Vec<BoxedFactor<VectorState>> {
    fs.iter()
        .map(|f| Box::new(f.clone()) as BoxedFactor<VectorState>)
        .collect()
}

impl Model<VectorState> for TabulatedModel {
    type Input = ();

    fn nodes(&self) -> usize {
        self.nodes
    }

    fn bootstrap(&self, _timestamp: f64) -> Result<Bootstrap<VectorState>> {
        Ok(Bootstrap {
            nodes: vec![VectorState::default(); self.nodes],
            prior_information: self.prior_information.clone(),
            prior_vector: self.prior_vector.clone(),
        })
    }

    fn predict(&self, prev: &TimeSlice<VectorState>, _index: usize, _timestamp: f64) -> Result<Vec<VectorState>> {
        Ok(prev.nodes.clone())
    }

    fn slice_factors(&self, slice: &TimeSlice<VectorState>) -> Result<Vec<BoxedFactor<VectorState>>> {
        self.slice_factors
            .get(slice.index)
            .map(|f| boxed(f))
            .ok_or(Error::IndexOutOfWindow {
                time: slice.index,
                node: 0,
            })
    }

    fn interval_factors(
        &self,
        prev: &TimeSlice<VectorState>,
        _next: &TimeSlice<VectorState>,
        _inputs: &[()],
    ) -> Result<Vec<BoxedFactor<VectorState>>> {
        self.interval_factors
            .get(prev.index)
            .map(|f| boxed(f))
            .ok_or(Error::IndexOutOfWindow {
                time: prev.index + 1,
                node: 0,
            })
    }
}

/// A nonlinear model with every factor linearized at fixed points.
///
/// States are local coordinates about `points[time][node]`; each factor
/// becomes `e₀ + Σ Jₖ·δₖ` with `e₀`, `Jₖ` evaluated once at the points.
pub struct LinearizedModel<M> {
    pub inner: M,
    pub points: Vec<Vec<NodeState>>,
    pub t0: f64,
    pub dt: f64,
}

impl<M: Model<NodeState>> LinearizedModel<M> {
    fn slice_at(&self, time: usize) -> Result<TimeSlice<NodeState>> {
        let nodes = self
            .points
            .get(time)
            .ok_or(Error::IndexOutOfWindow { time, node: 0 })?
            .clone();
        Ok(TimeSlice {
            index: time,
            timestamp: self.t0 + time as f64 * self.dt,
            nodes,
        })
    }

    fn freeze(&self, f: &dyn Factor<NodeState>) -> Result<LinearFactor> {
        let mut vars = Vec::with_capacity(f.keys().len());
        for k in f.keys() {
            let x = self
                .points
                .get(k.time)
                .and_then(|s| s.get(k.node))
                .ok_or(Error::IndexOutOfWindow {
                    time: k.time,
                    node: k.node,
                })?;
            vars.push(x);
        }
        let lin = f.linearize(&vars)?;
        Ok(LinearFactor {
            keys: f.keys().to_vec(),
            a: lin.jacobians,
            z: -lin.error,
            info: f.information().clone(),
        })
    }

    fn freeze_all(&self, fs: Vec<BoxedFactor<NodeState>>) -> Result<Vec<BoxedFactor<VectorState>>> {
        fs.iter()
            .map(|f| Ok(Box::new(self.freeze(f.as_ref())?) as BoxedFactor<VectorState>))
            .collect()
    }

    /// Map local coordinates back onto the manifold.
    pub fn retract(&self, time: usize, states: &[VectorState]) -> Result<Vec<NodeState>> {
        let base = self.points.get(time).ok_or(Error::IndexOutOfWindow { time, node: 0 })?;
        Ok(base.iter().zip(states).map(|(x, d)| x.retract(&d.0)).collect())
    }
}

impl<M: Model<NodeState>> Model<VectorState> for LinearizedModel<M> {
    type Input = M::Input;

    fn nodes(&self) -> usize {
        self.inner.nodes()
    }

    fn bootstrap(&self, timestamp: f64) -> Result<Bootstrap<VectorState>> {
        let boot = self.inner.bootstrap(timestamp)?;
        let n = boot.nodes.len();
        let prior = MarginalPrior::new(0, boot.nodes, boot.prior_information, boot.prior_vector)?;
        let at = self.slice_at(0)?;
        let vars: Vec<&NodeState> = at.nodes.iter().collect();
        let lin = prior.linearize(&vars)?;
        let mut j = DMatrix::zeros(lin.error.len(), n * NODE_DOF);
        for (k, jk) in lin.jacobians.iter().enumerate() {
            j.view_mut((0, k * NODE_DOF), (jk.nrows(), NODE_DOF)).copy_from(jk);
        }
        Ok(Bootstrap {
            nodes: vec![VectorState(NodeVector::zeros()); n],
            prior_information: j.transpose() * &j,
            prior_vector: -(j.transpose() * lin.error),
        })
    }

    fn predict(&self, _prev: &TimeSlice<VectorState>, _index: usize, _timestamp: f64) -> Result<Vec<VectorState>> {
        Ok(vec![VectorState::default(); self.nodes()])
    }

    fn slice_factors(&self, slice: &TimeSlice<VectorState>) -> Result<Vec<BoxedFactor<VectorState>>> {
        let at = self.slice_at(slice.index)?;
        self.freeze_all(self.inner.slice_factors(&at)?)
    }

    fn interval_factors(
        &self,
        prev: &TimeSlice<VectorState>,
        next: &TimeSlice<VectorState>,
        inputs: &[Self::Input],
    ) -> Result<Vec<BoxedFactor<VectorState>>> {
        let a = self.slice_at(prev.index)?;
        let b = self.slice_at(next.index)?;
        self.freeze_all(self.inner.interval_factors(&a, &b, inputs)?)
    }
}
