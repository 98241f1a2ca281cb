//! Sliding-window filter: expansion, Gauss-Newton over the window,
//! Schur-complement marginalization of the oldest slice, and extraction.
//!
//! The engine is generic over the state type and a [`Model`] that supplies
//! initial guesses and factors, so the same code runs the continuum-robot
//! estimator and linear-Gaussian reference problems.

mod linear;
mod query;
mod robot;

use std::time::Instant;

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interp::{JointNeighborCovariance, Matrix24};
use crate::solver::{
    build_normal_equations, gauss_newton, BlockCholesky, BoxedFactor, Factor, GaussNewtonOptions, Linearization,
    SelectedInverse, SolveReport,
};
use crate::state::{GridIndex, NodeMatrix, TimeSlice, Variable, NODE_DOF};

pub use linear::{LinearizedModel, TabulatedModel};
pub use query::{query_continuous, query_covariance, query_mean};
pub use robot::{run_batch, run_estimator, slice_count, EstimatorRun, InitialPrior, RobotModel, RunError};

/// A Gaussian prior on one slice in square-root form, produced by
/// marginalization (or supplied at bootstrap).
///
/// The cost is `½‖R·δ − R⁻ᵀh‖²` with `RᵀR = H` and `δ` the stacked local
/// coordinates of the slice about `anchor`, which equals
/// `½δᵀHδ − hᵀδ` up to a constant.
#[derive(Clone, Debug)]
pub struct MarginalPrior<V> {
    keys: Vec<GridIndex>,
    anchor: Vec<V>,
    information: DMatrix<f64>,
    vector: DVector<f64>,
    sqrt: DMatrix<f64>,
    rhs: DVector<f64>,
    identity: DMatrix<f64>,
}

impl<V: Variable> MarginalPrior<V> {
    pub fn new(time: usize, anchor: Vec<V>, information: DMatrix<f64>, vector: DVector<f64>) -> Result<Self> {
        let dim = anchor.len() * NODE_DOF;
        if information.shape() != (dim, dim) || vector.len() != dim {
            return Err(Error::Config(format!(
                "prior dimension {}×{} does not match {} nodes",
                information.nrows(),
                information.ncols(),
                anchor.len()
            )));
        }
        let information = (&information + information.transpose()) * 0.5;
        let (sqrt, rhs) = match information.clone().cholesky() {
            Some(chol) => {
                let l = chol.l();
                let rhs = l.solve_lower_triangular(&vector).ok_or(Error::SingularCovariance)?;
                (l.transpose(), rhs)
            }
            None => {
                // Semidefinite (or slightly indefinite from round-off): keep
                // the non-negative spectrum only.
                let eig = information.clone().symmetric_eigen();
                let tol = 1e-12 * eig.eigenvalues.amax().max(1e-300);
                if eig.eigenvalues.min() < -1e-9 * eig.eigenvalues.amax().max(1.0) {
                    return Err(Error::NotPositiveDefinite { block: 0 });
                }
                let mut sqrt = DMatrix::zeros(dim, dim);
                let mut rhs = DVector::zeros(dim);
                let proj = eig.eigenvectors.transpose() * &vector;
                for k in 0..dim {
                    let lambda = eig.eigenvalues[k];
                    if lambda > tol {
                        let s = lambda.sqrt();
                        sqrt.row_mut(k).copy_from(&(eig.eigenvectors.column(k).transpose() * s));
                        rhs[k] = proj[k] / s;
                    }
                }
                (sqrt, rhs)
            }
        };
        Ok(Self {
            keys: (0..anchor.len()).map(|j| GridIndex::new(time, j)).collect(),
            anchor,
            information,
            vector,
            sqrt,
            rhs,
            identity: DMatrix::identity(dim, dim),
        })
    }

    /// `H` over the slice's local coordinates about the anchor.
    pub fn information_matrix(&self) -> &DMatrix<f64> {
        &self.information
    }

    /// `h`, so that the prior mean sits at `δ = H⁻¹h`.
    pub fn information_vector(&self) -> &DVector<f64> {
        &self.vector
    }

    pub fn anchor(&self) -> &[V] {
        &self.anchor
    }

    pub fn time(&self) -> usize {
        self.keys[0].time
    }
}

impl<V: Variable> Factor<V> for MarginalPrior<V> {
    fn keys(&self) -> &[GridIndex] {
        &self.keys
    }

    // The error is already whitened.
    #[allow(clippy::misnamed_getters)]
    fn information(&self) -> &DMatrix<f64> {
        &self.identity
    }

    fn error(&self, vars: &[&V]) -> Result<DVector<f64>> {
        let mut delta = DVector::zeros(self.rhs.len());
        for (j, (x, a)) in vars.iter().zip(&self.anchor).enumerate() {
            delta.rows_mut(j * NODE_DOF, NODE_DOF).copy_from(&x.local(a)?);
        }
        Ok(&self.sqrt * delta - &self.rhs)
    }

    fn linearize(&self, vars: &[&V]) -> Result<Linearization> {
        let error = self.error(vars)?;
        let mut jacobians = Vec::with_capacity(vars.len());
        for (j, (x, a)) in vars.iter().zip(&self.anchor).enumerate() {
            let lj = x.local_jacobian(a)?;
            let cols = self.sqrt.columns(j * NODE_DOF, NODE_DOF);
            jacobians.push(cols * DMatrix::from_column_slice(NODE_DOF, NODE_DOF, lj.as_slice()));
        }
        Ok(Linearization { error, jacobians })
    }

    fn label(&self) -> &'static str {
        "marginal-prior"
    }

    fn whitened(&self) -> bool {
        true
    }
}

/// Which in-window slice is reported after each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExtractionPolicy {
    /// Oldest slice: the most smoothed estimate, delayed by the window length.
    #[default]
    Back,
    /// Newest slice: no delay.
    Front,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwfConfig {
    /// Window length in seconds; 0 gives a single-slice (iterated) filter.
    pub window_seconds: f64,
    /// Slice period.
    pub dt: f64,
    pub policy: ExtractionPolicy,
    pub max_iterations: usize,
    pub delta_tol: f64,
}

impl Default for SwfConfig {
    fn default() -> Self {
        Self {
            window_seconds: 0.1,
            dt: 1.0 / 30.0,
            policy: ExtractionPolicy::Back,
            max_iterations: 10,
            delta_tol: 1e-6,
        }
    }
}

impl SwfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_seconds >= 0.0) || !self.window_seconds.is_finite() {
            return Err(Error::Config("window length must be a non-negative number".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("slice period must be positive".into()));
        }
        if self.max_iterations == 0 || !(self.delta_tol > 0.0) {
            return Err(Error::Config("invalid Gauss-Newton settings".into()));
        }
        Ok(())
    }

    /// Slices held after each step: `round(window_seconds / dt) + 1`.
    pub fn window_slices(&self) -> usize {
        (self.window_seconds / self.dt).round() as usize + 1
    }

    fn gn(&self) -> GaussNewtonOptions {
        GaussNewtonOptions {
            max_iterations: self.max_iterations,
            delta_tol: self.delta_tol,
            ..Default::default()
        }
    }
}

/// Initial slice and its prior, in information form about `nodes`.
#[derive(Clone, Debug)]
pub struct Bootstrap<V> {
    pub nodes: Vec<V>,
    pub prior_information: DMatrix<f64>,
    pub prior_vector: DVector<f64>,
}

/// Problem-specific parts of the window: initial guesses and factors.
pub trait Model<V: Variable> {
    type Input;

    fn nodes(&self) -> usize;

    fn bootstrap(&self, timestamp: f64) -> Result<Bootstrap<V>>;

    /// Initial guess for slice `index` at `timestamp` given the previous slice.
    fn predict(&self, prev: &TimeSlice<V>, index: usize, timestamp: f64) -> Result<Vec<V>>;

    /// Factors involving only `slice` (boundary, arc-length priors).
    fn slice_factors(&self, slice: &TimeSlice<V>) -> Result<Vec<BoxedFactor<V>>>;

    /// Factors linking `prev` and `next`: the temporal prior and every
    /// input stamped in `(prev.timestamp, next.timestamp]`.
    fn interval_factors(
        &self,
        prev: &TimeSlice<V>,
        next: &TimeSlice<V>,
        inputs: &[Self::Input],
    ) -> Result<Vec<BoxedFactor<V>>>;
}

/// A reported slice: mean, per-node marginal covariance, and (when the
/// window holds more than one slice) the joint (pose, velocity) covariance
/// with the previous slice, for continuous-time queries.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceEstimate<V> {
    pub index: usize,
    pub timestamp: f64,
    pub nodes: Vec<V>,
    pub covariances: Vec<NodeMatrix>,
    pub joint_prev: Option<JointNeighborCovariance>,
}

#[derive(Clone, Debug, Default)]
pub struct StepOutput<V> {
    pub report: SolveReport,
    pub emitted: Vec<SliceEstimate<V>>,
}

/// Factorization of the last solve and the slice index of its first block.
#[derive(Debug)]
struct SolveCache {
    factor: BlockCholesky,
    selected: Option<SelectedInverse>,
    first: usize,
    slices: usize,
}

impl SolveCache {
    fn block(&mut self, nodes: usize, a: GridIndex, b: GridIndex) -> Result<DMatrix<f64>> {
        let covered = |g: GridIndex| g.time >= self.first && g.time < self.first + self.slices && g.node < nodes;
        if !covered(a) || !covered(b) {
            let bad = if covered(a) { b } else { a };
            return Err(Error::IndexOutOfWindow {
                time: bad.time,
                node: bad.node,
            });
        }
        let ia = (a.time - self.first) * nodes + a.node;
        let ib = (b.time - self.first) * nodes + b.node;
        let sel = self.selected.get_or_insert_with(|| self.factor.selected_inverse());
        let (i, j) = if ia >= ib { (ia, ib) } else { (ib, ia) };
        let blk = sel.block(i, j).unwrap_or_else(|| self.factor.inverse_block(i, j));
        Ok(if ia >= ib { blk } else { blk.transpose() })
    }

    fn covers(&self, time: usize) -> bool {
        time >= self.first && time < self.first + self.slices
    }

    fn node_covariances(&mut self, nodes: usize, time: usize) -> Result<Vec<NodeMatrix>> {
        (0..nodes)
            .map(|j| {
                let g = GridIndex::new(time, j);
                Ok(to_node_matrix(&self.block(nodes, g, g)?))
            })
            .collect()
    }

    /// (pose, velocity) joint covariance of slices `time − 1` and `time`.
    fn joint(&mut self, nodes: usize, time: usize, t_a: f64, t_b: f64) -> Result<JointNeighborCovariance> {
        let mut blocks = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let a = GridIndex::new(time - 1, j);
            let b = GridIndex::new(time, j);
            let aa = self.block(nodes, a, a)?;
            let ba = self.block(nodes, b, a)?;
            let bb = self.block(nodes, b, b)?;
            let ba = ba.view((0, 0), (12, 12));
            let mut m = Matrix24::zeros();
            m.fixed_view_mut::<12, 12>(0, 0).copy_from(&aa.view((0, 0), (12, 12)));
            m.fixed_view_mut::<12, 12>(12, 0).copy_from(&ba);
            m.fixed_view_mut::<12, 12>(0, 12).copy_from(&ba.transpose());
            m.fixed_view_mut::<12, 12>(12, 12).copy_from(&bb.view((0, 0), (12, 12)));
            blocks.push(m);
        }
        Ok(JointNeighborCovariance { t_a, t_b, blocks })
    }
}

fn to_node_matrix(m: &DMatrix<f64>) -> NodeMatrix {
    NodeMatrix::from_column_slice(m.as_slice())
}

/// The sliding-window estimator.
pub struct SlidingWindow<V: Variable, M: Model<V>> {
    model: M,
    cfg: SwfConfig,
    k: usize,
    t0: f64,
    slices: Vec<TimeSlice<V>>,
    prior: MarginalPrior<V>,
    slice_factors: Vec<Vec<BoxedFactor<V>>>,
    interval_factors: Vec<Vec<BoxedFactor<V>>>,
    cache: Option<SolveCache>,
    next_emit: usize,
    steps: usize,
}

impl<V: Variable, M: Model<V>> SlidingWindow<V, M> {
    /// Create the window with slice 0 at `t0` and solve the prior-only problem.
    pub fn new(model: M, cfg: SwfConfig, t0: f64) -> Result<(Self, StepOutput<V>)> {
        cfg.validate()?;
        let start = Instant::now();
        let boot = model.bootstrap(t0)?;
        if boot.nodes.len() != model.nodes() {
            return Err(Error::Config("bootstrap slice has the wrong node count".into()));
        }
        let slice = TimeSlice {
            index: 0,
            timestamp: t0,
            nodes: boot.nodes.clone(),
        };
        let prior = MarginalPrior::new(0, boot.nodes, boot.prior_information, boot.prior_vector)?;
        let factors = model.slice_factors(&slice)?;
        let mut window = Self {
            k: cfg.window_slices(),
            model,
            cfg,
            t0,
            slices: vec![slice],
            prior,
            slice_factors: vec![factors],
            interval_factors: Vec::new(),
            cache: None,
            next_emit: 0,
            steps: 0,
        };
        let mut report = window.solve()?;
        let emitted = window.extract()?;
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok((window, StepOutput { report, emitted }))
    }

    pub fn config(&self) -> &SwfConfig {
        &self.cfg
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Slices held after each step.
    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn slices(&self) -> &[TimeSlice<V>] {
        &self.slices
    }

    pub fn prior(&self) -> &MarginalPrior<V> {
        &self.prior
    }

    /// Replace the in-window states (same shape); drops the cached solve.
    pub fn set_slices(&mut self, slices: Vec<TimeSlice<V>>) -> Result<()> {
        let same = slices.len() == self.slices.len()
            && slices
                .iter()
                .zip(&self.slices)
                .all(|(a, b)| a.index == b.index && a.nodes.len() == b.nodes.len());
        if !same {
            return Err(Error::Config(
                "replacement slices do not match the window layout".into(),
            ));
        }
        self.slices = slices;
        self.cache = None;
        Ok(())
    }

    /// Timestamp of the next slice.
    pub fn next_timestamp(&self) -> f64 {
        let last = self.slices.last().expect("window is never empty");
        self.t0 + (last.index + 1) as f64 * self.cfg.dt
    }

    fn factor_refs(&self) -> Vec<&dyn Factor<V>> {
        let mut refs: Vec<&dyn Factor<V>> = vec![&self.prior];
        for group in self.slice_factors.iter().chain(&self.interval_factors) {
            refs.extend(group.iter().map(|f| f.as_ref()));
        }
        refs
    }

    /// Run Gauss-Newton on the current window and cache the factorization.
    pub fn solve(&mut self) -> Result<SolveReport> {
        let gn = self.cfg.gn();
        let mut slices = std::mem::take(&mut self.slices);
        let result = gauss_newton(&mut slices, &self.factor_refs(), &gn);
        self.slices = slices;
        let sol = result?;
        self.cache = Some(SolveCache {
            factor: sol.factor,
            selected: None,
            first: self.slices[0].index,
            slices: self.slices.len(),
        });
        let mut report = sol.report;
        report.window_index = self.steps;
        Ok(report)
    }

    /// Append the next slice with its initial guess and factors.
    pub fn expand(&mut self, timestamp: f64, inputs: &[M::Input]) -> Result<()> {
        let expected = self.next_timestamp();
        let last = self.slices.last().expect("window is never empty");
        if (timestamp - expected).abs() > 1e-9 {
            return Err(Error::NonMonotonicTimestamp {
                last: last.timestamp,
                new: timestamp,
            });
        }
        let index = last.index + 1;
        let nodes = self.model.predict(last, index, expected)?;
        if nodes.len() != self.model.nodes() {
            return Err(Error::Config("predicted slice has the wrong node count".into()));
        }
        let slice = TimeSlice {
            index,
            timestamp: expected,
            nodes,
        };
        let interval = self.model.interval_factors(last, &slice, inputs)?;
        let own = self.model.slice_factors(&slice)?;
        self.slices.push(slice);
        self.interval_factors.push(interval);
        self.slice_factors.push(own);
        Ok(())
    }

    /// Eliminate the oldest slice by Schur complement, leaving a prior on
    /// the next one linearized at the current estimate.
    pub fn marginalize_oldest(&mut self) -> Result<TimeSlice<V>> {
        if self.slices.len() < 2 {
            return Err(Error::Config("need two slices to marginalize".into()));
        }
        let mut refs: Vec<&dyn Factor<V>> = vec![&self.prior];
        refs.extend(self.slice_factors[0].iter().map(|f| f.as_ref()));
        refs.extend(self.interval_factors[0].iter().map(|f| f.as_ref()));
        let pair = &self.slices[..2];
        let ne = build_normal_equations(pair, &refs)?;
        let (h_r, g_r) = schur_complement(&ne.a.to_dense(), &ne.b, pair[0].nodes.len() * NODE_DOF)?;
        let prior = MarginalPrior::new(pair[1].index, pair[1].nodes.clone(), h_r, g_r)?;
        debug!("marginalized slice {} into a prior on {}", pair[0].index, pair[1].index);
        self.prior = prior;
        self.slice_factors.remove(0);
        self.interval_factors.remove(0);
        Ok(self.slices.remove(0))
    }

    /// Expand, solve, marginalize if over capacity, and extract.
    pub fn step(&mut self, timestamp: f64, inputs: &[M::Input]) -> Result<StepOutput<V>> {
        let start = Instant::now();
        self.steps += 1;
        self.expand(timestamp, inputs)?;
        let mut report = self.solve()?;
        while self.slices.len() > self.k {
            self.marginalize_oldest()?;
        }
        let emitted = self.extract()?;
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(StepOutput { report, emitted })
    }

    /// Estimate of an in-window slice from the last solve.
    pub fn estimate(&mut self, time: usize) -> Result<SliceEstimate<V>> {
        let n = self.model.nodes();
        let pos = self
            .slices
            .iter()
            .position(|s| s.index == time)
            .ok_or(Error::IndexOutOfWindow { time, node: 0 })?;
        let cache = self
            .cache
            .as_mut()
            .ok_or(Error::Config("window has not been solved".into()))?;
        let slice = &self.slices[pos];
        let covariances = cache.node_covariances(n, time)?;
        let joint_prev = if self.k >= 2 && time > 0 && cache.covers(time - 1) {
            let prev_t = self.t0 + (time - 1) as f64 * self.cfg.dt;
            Some(cache.joint(n, time, prev_t, slice.timestamp)?)
        } else {
            None
        };
        Ok(SliceEstimate {
            index: time,
            timestamp: slice.timestamp,
            nodes: slice.nodes.clone(),
            covariances,
            joint_prev,
        })
    }

    /// Covariance block between two in-window nodes from the last solve.
    pub fn covariance(&mut self, a: GridIndex, b: GridIndex) -> Result<NodeMatrix> {
        let n = self.model.nodes();
        let cache = self
            .cache
            .as_mut()
            .ok_or(Error::Config("window has not been solved".into()))?;
        Ok(to_node_matrix(&cache.block(n, a, b)?))
    }

    fn extract(&mut self) -> Result<Vec<SliceEstimate<V>>> {
        let target = match self.cfg.policy {
            ExtractionPolicy::Back if self.slices.len() >= self.k => self.slices[0].index,
            ExtractionPolicy::Back => return Ok(Vec::new()),
            ExtractionPolicy::Front => self.slices.last().expect("window is never empty").index,
        };
        if target < self.next_emit {
            return Ok(Vec::new());
        }
        self.next_emit = target + 1;
        Ok(vec![self.estimate(target)?])
    }

    /// Report every in-window slice not yet emitted, oldest first.
    pub fn finish(mut self) -> Result<Vec<SliceEstimate<V>>> {
        let pending: Vec<usize> = self
            .slices
            .iter()
            .map(|s| s.index)
            .filter(|&i| i >= self.next_emit)
            .collect();
        pending.into_iter().map(|i| self.estimate(i)).collect()
    }
}

/// `H_r = A_rr − A_rm A_mm⁻¹ A_mr`, `h_r = b_r − A_rm A_mm⁻¹ b_m`, with the
/// first `m` coordinates eliminated.
pub fn schur_complement(a: &DMatrix<f64>, b: &DVector<f64>, m: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    let r = n - m;
    let a_mm = a.view((0, 0), (m, m)).into_owned();
    let a_rm = a.view((m, 0), (r, m));
    let chol = a_mm.cholesky().ok_or(Error::SingularHmm)?;
    let x = chol.solve(&a.view((0, m), (m, r)).into_owned());
    let y = chol.solve(&b.rows(0, m).into_owned());
    let h = a.view((m, m), (r, r)) - a_rm * x;
    let g = b.rows(m, r) - a_rm * y;
    Ok(((&h + h.transpose()) * 0.5, g))
}

/// Split time-ordered items into the intervals `(t_{i−1}, t_i]` of a slice
/// grid `t_i = t0 + i·dt`, `i = 1..slices`. Items outside `(t0, t_last]`
/// are dropped; their count is returned.
pub fn bin_by_interval<T: Clone>(
    items: &[T],
    stamp: impl Fn(&T) -> f64,
    t0: f64,
    dt: f64,
    slices: usize,
) -> (Vec<Vec<T>>, usize) {
    let mut bins = vec![Vec::new(); slices.saturating_sub(1)];
    let mut dropped = 0;
    let grid = |i: i64| t0 + i as f64 * dt;
    for item in items {
        let tau = stamp(item);
        // Smallest i with t_i ≥ τ, computed against the same grid the
        // slices use so that τ = t_i lands in bin i exactly.
        let mut i = ((tau - t0) / dt).ceil().max(0.0) as i64;
        while i >= 1 && grid(i - 1) >= tau {
            i -= 1;
        }
        while grid(i) < tau {
            i += 1;
        }
        if i >= 1 && (i as usize) < slices {
            bins[i as usize - 1].push(item.clone());
        } else {
            dropped += 1;
        }
    }
    (bins, dropped)
}

/// Result of solving the whole horizon at once.
#[derive(Debug)]
pub struct BatchResult<V> {
    pub estimates: Vec<SliceEstimate<V>>,
    pub report: SolveReport,
}

/// Single-shot batch solve over `inputs.len() + 1` slices starting at `t0`.
///
/// `initial` overrides the model's bootstrap-and-predict initialization.
pub fn batch_solve<V: Variable, M: Model<V>>(
    model: &M,
    t0: f64,
    dt: f64,
    inputs: &[Vec<M::Input>],
    initial: Option<Vec<TimeSlice<V>>>,
    opts: &GaussNewtonOptions,
) -> Result<BatchResult<V>> {
    let start = Instant::now();
    let boot = model.bootstrap(t0)?;
    let prior = MarginalPrior::new(0, boot.nodes.clone(), boot.prior_information, boot.prior_vector)?;
    let mut slices = match initial {
        Some(s) => s,
        None => {
            let mut s = vec![TimeSlice {
                index: 0,
                timestamp: t0,
                nodes: boot.nodes,
            }];
            for i in 1..=inputs.len() {
                let t = t0 + i as f64 * dt;
                let nodes = model.predict(&s[i - 1], i, t)?;
                s.push(TimeSlice {
                    index: i,
                    timestamp: t,
                    nodes,
                });
            }
            s
        }
    };
    if slices.len() != inputs.len() + 1 {
        return Err(Error::Config("initial guess does not cover the horizon".into()));
    }
    let mut owned: Vec<BoxedFactor<V>> = Vec::new();
    for s in &slices {
        owned.extend(model.slice_factors(s)?);
    }
    for (i, group) in inputs.iter().enumerate() {
        owned.extend(model.interval_factors(&slices[i], &slices[i + 1], group)?);
    }
    let mut refs: Vec<&dyn Factor<V>> = vec![&prior];
    refs.extend(owned.iter().map(|f| f.as_ref()));
    let sol = gauss_newton(&mut slices, &refs, opts)?;
    let mut cache = SolveCache {
        factor: sol.factor,
        selected: None,
        first: 0,
        slices: slices.len(),
    };
    let n = model.nodes();
    let mut estimates = Vec::with_capacity(slices.len());
    for s in &slices {
        let joint_prev = match s.index {
            0 => None,
            i => Some(cache.joint(n, i, slices[i - 1].timestamp, s.timestamp)?),
        };
        estimates.push(SliceEstimate {
            index: s.index,
            timestamp: s.timestamp,
            nodes: s.nodes.clone(),
            covariances: cache.node_covariances(n, s.index)?,
            joint_prev,
        });
    }
    let mut report = sol.report;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(BatchResult { estimates, report })
}

#[cfg(test)]
mod tests;
