//! Gauss-Newton on the window's nonlinear least-squares problem.
//!
//! The cost is `½ Σ eᵢᵀ Σᵢ⁻¹ eᵢ`. Each iteration linearizes every factor about
//! the current estimate, assembles the block-sparse normal equations
//! `HᵀW⁻¹H δ = −HᵀW⁻¹e` and retracts the solution onto the states. The inverse
//! of the converged normal-equations matrix is the Laplace covariance.

pub mod sparse;

use std::fmt::Debug;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::{block_index, GridIndex, NodeVector, TimeSlice, Variable, VectorState, NODE_DOF};

pub use sparse::{BlockCholesky, BlockSparse, SelectedInverse};

/// Error vector and one Jacobian block (`dim × 18`) per connected node.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub error: DVector<f64>,
    pub jacobians: Vec<DMatrix<f64>>,
}

/// A Gaussian cost term over a few grid nodes.
pub trait Factor<V>: Debug + Send + Sync {
    /// Connected nodes, in the order the error and Jacobians refer to them.
    fn keys(&self) -> &[GridIndex];

    /// Inverse covariance of the error.
    fn information(&self) -> &DMatrix<f64>;

    fn error(&self, vars: &[&V]) -> Result<DVector<f64>>;

    fn linearize(&self, vars: &[&V]) -> Result<Linearization>;

    fn label(&self) -> &'static str {
        "factor"
    }

    /// True when `information()` is the identity.
    fn whitened(&self) -> bool {
        false
    }
}

pub type BoxedFactor<V> = Box<dyn Factor<V>>;

/// Linear-Gaussian factor on vector states: `e = Σₖ Aₖ·xₖ − z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFactor {
    pub keys: Vec<GridIndex>,
    pub a: Vec<DMatrix<f64>>,
    pub z: DVector<f64>,
    pub info: DMatrix<f64>,
}

impl Factor<VectorState> for LinearFactor {
    fn keys(&self) -> &[GridIndex] {
        &self.keys
    }

    fn information(&self) -> &DMatrix<f64> {
        &self.info
    }

    fn error(&self, vars: &[&VectorState]) -> Result<DVector<f64>> {
        let mut e = -self.z.clone();
        for (a, x) in self.a.iter().zip(vars) {
            e.gemv(1.0, a, &DVector::from_column_slice(x.0.as_slice()), 1.0);
        }
        Ok(e)
    }

    fn linearize(&self, vars: &[&VectorState]) -> Result<Linearization> {
        Ok(Linearization {
            error: self.error(vars)?,
            jacobians: self.a.clone(),
        })
    }

    fn label(&self) -> &'static str {
        "linear"
    }
}

/// Borrow a list of boxed factors as trait objects.
pub fn as_refs<V>(factors: &[BoxedFactor<V>]) -> Vec<&dyn Factor<V>> {
    factors.iter().map(|f| f.as_ref()).collect()
}

/// Normal equations `A·δ = b` of the linearized problem.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    pub a: BlockSparse,
    pub b: DVector<f64>,
    pub cost: f64,
}

fn gather<'a, V>(keys: &[GridIndex], slices: &'a [TimeSlice<V>]) -> Result<(Vec<&'a V>, Vec<usize>)> {
    let mut vars = Vec::with_capacity(keys.len());
    let mut blocks = Vec::with_capacity(keys.len());
    for &k in keys {
        let b = block_index(k, slices)?;
        let first = slices[0].index;
        vars.push(&slices[k.time - first].nodes[k.node]);
        blocks.push(b);
    }
    Ok((vars, blocks))
}

/// Total cost `½ Σ eᵀ Σ⁻¹ e` at the current states.
pub fn total_cost<V>(slices: &[TimeSlice<V>], factors: &[&dyn Factor<V>]) -> Result<f64> {
    let mut cost = 0.0;
    for f in factors {
        let (vars, _) = gather(f.keys(), slices)?;
        let e = f.error(&vars)?;
        cost += 0.5 * e.dot(&(f.information() * &e));
    }
    Ok(cost)
}

/// Assemble `A = Σ Jᵀ Σ⁻¹ J` and `b = −Σ Jᵀ Σ⁻¹ e` over the window.
pub fn build_normal_equations<V>(slices: &[TimeSlice<V>], factors: &[&dyn Factor<V>]) -> Result<NormalEquations> {
    let n_blocks = slices.len() * slices.first().map_or(0, |s| s.nodes.len());
    let mut a = BlockSparse::new(n_blocks, NODE_DOF);
    let mut b = DVector::zeros(n_blocks * NODE_DOF);
    let mut cost = 0.0;
    for f in factors {
        let (vars, blocks) = gather(f.keys(), slices)?;
        let lin = f.linearize(&vars)?;
        let (w_e, wj) = if f.whitened() {
            (lin.error.clone(), lin.jacobians.clone())
        } else {
            let w = f.information();
            (w * &lin.error, lin.jacobians.iter().map(|j| w * j).collect())
        };
        cost += 0.5 * lin.error.dot(&w_e);
        for (p, jp) in lin.jacobians.iter().enumerate() {
            let mut bp = b.rows_mut(blocks[p] * NODE_DOF, NODE_DOF);
            bp.gemv_tr(-1.0, jp, &w_e, 1.0);
            for (q, wjq) in wj.iter().enumerate() {
                if blocks[p] >= blocks[q] {
                    a.add_block(blocks[p], blocks[q], &jp.tr_mul(wjq));
                }
            }
        }
    }
    Ok(NormalEquations { a, b, cost })
}

/// Solve an SPD system, regularizing once if the plain factorization fails.
pub fn solve_spd(a: &BlockSparse, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(BlockCholesky::factor_regularized(a)?.solve(b))
}

/// Requested blocks of `A⁻¹`.
pub fn laplace_covariance(a: &BlockSparse, query: &[(usize, usize)]) -> Result<Vec<DMatrix<f64>>> {
    let chol = BlockCholesky::factor_regularized(a)?;
    Ok(covariance_blocks(&chol, &chol.selected_inverse(), query))
}

/// Blocks of `A⁻¹`, from the selected inverse where available and by
/// block-column solves elsewhere.
pub fn covariance_blocks(
    chol: &BlockCholesky,
    selected: &SelectedInverse,
    query: &[(usize, usize)],
) -> Vec<DMatrix<f64>> {
    query
        .iter()
        .map(|&(i, j)| selected.block(i, j).unwrap_or_else(|| chol.inverse_block(i, j)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on `‖δ‖∞`.
    pub delta_tol: f64,
    pub max_halvings: usize,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            delta_tol: 1e-6,
            max_halvings: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SolveReport {
    pub window_index: usize,
    /// Gauss-Newton steps taken (at least one solve is always performed).
    pub iterations: usize,
    pub final_delta_norm: f64,
    pub final_cost: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Result of a Gauss-Newton run: the report plus the factorization of the
/// normal equations at the final estimate.
#[derive(Debug)]
pub struct Solution {
    pub report: SolveReport,
    pub factor: BlockCholesky,
}

fn retract_all<V: Variable>(slices: &[TimeSlice<V>], delta: &DVector<f64>, scale: f64) -> Vec<TimeSlice<V>> {
    let n = slices.first().map_or(0, |s| s.nodes.len());
    slices
        .iter()
        .enumerate()
        .map(|(i, s)| TimeSlice {
            index: s.index,
            timestamp: s.timestamp,
            nodes: s
                .nodes
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let off = (i * n + j) * NODE_DOF;
                    let d = NodeVector::from_iterator(delta.rows(off, NODE_DOF).iter().map(|v| v * scale));
                    x.retract(&d)
                })
                .collect(),
        })
        .collect()
}

/// Iterate build → solve → retract until `‖δ‖∞ < delta_tol` or the iteration
/// budget runs out. Steps that raise the cost are halved up to
/// `max_halvings` times.
pub fn gauss_newton<V: Variable>(
    slices: &mut Vec<TimeSlice<V>>,
    factors: &[&dyn Factor<V>],
    opts: &GaussNewtonOptions,
) -> Result<Solution> {
    if opts.max_iterations == 0 || !(opts.delta_tol > 0.0) {
        return Err(Error::Config("invalid Gauss-Newton options".into()));
    }
    let start = Instant::now();
    let mut steps = 0;
    let mut converged = false;
    let mut delta_norm = f64::INFINITY;
    let mut last: Option<(BlockCholesky, f64)> = None;
    for _ in 0..opts.max_iterations {
        let ne = build_normal_equations(slices, factors)?;
        let chol = BlockCholesky::factor_regularized(&ne.a)?;
        let delta = chol.solve(&ne.b);
        delta_norm = delta.amax();
        if delta_norm < opts.delta_tol {
            *slices = retract_all(slices, &delta, 1.0);
            converged = true;
            last = Some((chol, ne.cost));
            break;
        }
        let mut scale = 1.0;
        let mut accepted = None;
        let mut tried = f64::NAN;
        for _ in 0..=opts.max_halvings {
            let candidate = retract_all(slices, &delta, scale);
            let cost = total_cost(&candidate, factors)?;
            tried = cost;
            if cost <= ne.cost * (1.0 + 1e-12) + 1e-14 {
                accepted = Some((candidate, cost));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((candidate, _)) => *slices = candidate,
            None => {
                return Err(Error::DivergedCost {
                    previous: ne.cost,
                    current: tried,
                })
            }
        }
        steps += 1;
        last = None;
    }
    let (factor, cost) = match last {
        Some(l) => l,
        None => {
            let ne = build_normal_equations(slices, factors)?;
            (BlockCholesky::factor_regularized(&ne.a)?, ne.cost)
        }
    };
    Ok(Solution {
        report: SolveReport {
            window_index: 0,
            iterations: steps.max(1),
            final_delta_norm: delta_norm,
            final_cost: cost,
            converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        factor,
    })
}
