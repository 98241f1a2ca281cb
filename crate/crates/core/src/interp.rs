//! Gaussian-process interpolation between two time slices under the
//! white-noise-on-acceleration prior.
//!
//! Between slice times `t_a < t_b` the pose is written `T(τ) = T_a·exp(ξ(τ))`
//! and the local state `[ξ; ξ̇]` is a linear time-invariant GP, so the
//! conditional mean is `Λ(τ)·γ_a + Ψ(τ)·γ_b` with `γ_a = [0; ϖ_a]` and
//! `γ_b = [log(T_a⁻¹T_b); J_r⁻¹·ϖ_b]`.

use nalgebra::{Matrix2, Matrix6, SMatrix, Vector6};

use crate::error::{Error, Result};
use crate::lie::{self, Twist};
use crate::state::NodeState;

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Matrix24 = SMatrix<f64, 24, 24>;

/// The interpolation operators `Λ(τ)` and `Ψ(τ)` over `[ξ; ξ̇]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpOperators {
    pub lambda: Matrix12,
    pub psi: Matrix12,
}

/// Joint covariance of (pose, velocity) at two neighboring slice times.
///
/// One 24×24 block per node, ordered `[pose_a, vel_a, pose_b, vel_b]` in the
/// right-perturbation coordinates of each state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointNeighborCovariance {
    pub t_a: f64,
    pub t_b: f64,
    pub blocks: Vec<Matrix24>,
}

fn transition(dt: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, dt, 0.0, 1.0)
}

fn wnoa_kernel(dt: f64) -> Matrix2<f64> {
    Matrix2::new(dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt)
}

fn kron(m: &Matrix2<f64>, q: &Matrix6<f64>) -> Matrix12 {
    let mut out = Matrix12::zeros();
    for r in 0..2 {
        for c in 0..2 {
            out.fixed_view_mut::<6, 6>(6 * r, 6 * c).copy_from(&(q * m[(r, c)]));
        }
    }
    out
}

fn check_interval(t_a: f64, t_b: f64, tau: f64) -> Result<()> {
    if !(t_a < t_b) || tau < t_a || tau > t_b {
        return Err(Error::TimestampOutsideInterval {
            tau,
            start: t_a,
            end: t_b,
        });
    }
    Ok(())
}

// Scalar (per-axis) versions of Λ, Ψ and the conditional covariance; the
// 12×12 operators are these Kronecker-multiplied with I₆ (or Q_c).
fn scalar_operators(t_a: f64, t_b: f64, tau: f64) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let q_tau = wnoa_kernel(tau - t_a);
    let q_ab_inv = wnoa_kernel(t_b - t_a).try_inverse().expect("t_b > t_a");
    let phi_b_tau = transition(t_b - tau);
    let psi = q_tau * phi_b_tau.transpose() * q_ab_inv;
    let lambda = transition(tau - t_a) - psi * transition(t_b - t_a);
    let cond = q_tau - psi * phi_b_tau * q_tau;
    (lambda, psi, (cond + cond.transpose()) * 0.5)
}

/// `Λ(τ)`, `Ψ(τ)` for `t_a ≤ τ ≤ t_b`.
///
/// The operators do not depend on `Q_c` (it cancels under the Kronecker
/// structure of the prior); it is accepted for interface symmetry with
/// [`conditional_covariance`].
pub fn interp_operators(t_a: f64, t_b: f64, tau: f64, _qc: &Matrix6<f64>) -> Result<InterpOperators> {
    check_interval(t_a, t_b, tau)?;
    let (lambda, psi, _) = scalar_operators(t_a, t_b, tau);
    let eye = Matrix6::identity();
    Ok(InterpOperators {
        lambda: kron(&lambda, &eye),
        psi: kron(&psi, &eye),
    })
}

/// Covariance of `[ξ(τ); ξ̇(τ)]` given both endpoints exactly.
pub fn conditional_covariance(t_a: f64, t_b: f64, tau: f64, qc: &Matrix6<f64>) -> Result<Matrix12> {
    check_interval(t_a, t_b, tau)?;
    let (_, _, cond) = scalar_operators(t_a, t_b, tau);
    Ok(kron(&cond, qc))
}

/// Interpolated state with its sensitivities.
#[derive(Clone, Copy, Debug)]
pub struct Interpolated {
    pub state: NodeState,
    /// `∂(pose, velocity)(τ) / ∂(pose_a, velocity_a)`.
    pub jac_a: Matrix12,
    /// `∂(pose, velocity)(τ) / ∂(pose_b, velocity_b)`.
    pub jac_b: Matrix12,
    /// `∂(pose, velocity)(τ) / ∂[ξ(τ); ξ̇(τ)]`.
    pub local_map: Matrix12,
    /// Weight of the later endpoint in the strain interpolation.
    pub alpha: f64,
}

fn put(m: &mut Matrix12, r: usize, c: usize, block: &Matrix6<f64>) {
    m.fixed_view_mut::<6, 6>(r, c).copy_from(block);
}

/// Interpolate the mean at `τ ∈ [t_a, t_b]` together with its Jacobians.
pub fn interpolate(xa: &NodeState, xb: &NodeState, t_a: f64, t_b: f64, tau: f64) -> Result<Interpolated> {
    check_interval(t_a, t_b, tau)?;
    let (lambda, psi, _) = scalar_operators(t_a, t_b, tau);
    let gamma = lie::log(&(xa.pose.inverse() * xb.pose))?;
    let jr_inv = lie::right_jacobian_inv(&gamma)?;
    let jl_inv = lie::left_jacobian_inv(&gamma)?;
    let rate_b = jr_inv * xb.velocity;
    let g = lie::right_jacobian_inv_vec_derivative(&gamma, &xb.velocity);

    let xi: Twist = xa.velocity * lambda[(0, 1)] + gamma * psi[(0, 0)] + rate_b * psi[(0, 1)];
    let xi_dot: Twist = xa.velocity * lambda[(1, 1)] + gamma * psi[(1, 0)] + rate_b * psi[(1, 1)];

    let jr = lie::right_jacobian(&xi);
    let h = lie::right_jacobian_vec_derivative(&xi, &xi_dot);
    let mut local_map = Matrix12::zeros();
    put(&mut local_map, 0, 0, &jr);
    put(&mut local_map, 6, 0, &h);
    put(&mut local_map, 6, 6, &jr);

    // ∂γ_b/∂(pose_a, vel_a) and ∂γ_b/∂(pose_b, vel_b)
    let mut dgb_a = Matrix12::zeros();
    put(&mut dgb_a, 0, 0, &(-jl_inv));
    put(&mut dgb_a, 6, 0, &(-(g * jl_inv)));
    let mut dgb_b = Matrix12::zeros();
    put(&mut dgb_b, 0, 0, &jr_inv);
    put(&mut dgb_b, 6, 0, &(g * jr_inv));
    put(&mut dgb_b, 6, 6, &jr_inv);
    let mut dga_a = Matrix12::zeros();
    put(&mut dga_a, 6, 6, &Matrix6::identity());

    let big_lambda = kron(&lambda, &Matrix6::identity());
    let big_psi = kron(&psi, &Matrix6::identity());
    let dloc_a = big_lambda * dga_a + big_psi * dgb_a;
    let dloc_b = big_psi * dgb_b;

    let mut jac_a = local_map * dloc_a;
    let direct = lie::adjoint(&lie::exp(&(-xi)));
    let mut top = jac_a.fixed_view_mut::<6, 6>(0, 0);
    top += direct;
    let jac_b = local_map * dloc_b;

    let alpha = (tau - t_a) / (t_b - t_a);
    let state = NodeState {
        pose: xa.pose * lie::exp(&xi),
        velocity: jr * xi_dot,
        strain: xa.strain * (1.0 - alpha) + xb.strain * alpha,
    };
    Ok(Interpolated {
        state,
        jac_a,
        jac_b,
        local_map,
        alpha,
    })
}

/// Interpolated mean at `τ`: pose and velocity from the GP, strain linear in time.
pub fn interp_mean(xa: &NodeState, xb: &NodeState, t_a: f64, t_b: f64, tau: f64) -> Result<NodeState> {
    if tau == t_b {
        return Ok(*xb);
    }
    if tau == t_a {
        return Ok(*xa);
    }
    Ok(interpolate(xa, xb, t_a, t_b, tau)?.state)
}

/// Covariance of (pose, velocity) at `τ` for node `node`:
/// `J·P_joint·Jᵀ + M·Q_local(τ)·Mᵀ`.
pub fn interp_covariance(
    joint: &JointNeighborCovariance,
    xa: &NodeState,
    xb: &NodeState,
    tau: f64,
    node: usize,
    qc: &Matrix6<f64>,
) -> Result<Matrix12> {
    let block = joint.blocks.get(node).ok_or(Error::MissingJointCovariance { tau })?;
    let it = interpolate(xa, xb, joint.t_a, joint.t_b, tau)?;
    let mut j = SMatrix::<f64, 12, 24>::zeros();
    j.fixed_view_mut::<12, 12>(0, 0).copy_from(&it.jac_a);
    j.fixed_view_mut::<12, 12>(0, 12).copy_from(&it.jac_b);
    let q_local = conditional_covariance(joint.t_a, joint.t_b, tau, qc)?;
    let cov = j * block * j.transpose() + it.local_map * q_local * it.local_map.transpose();
    Ok((cov + cov.transpose()) * 0.5)
}

/// Zero-velocity helper used by tests and the simulator.
pub fn zero_twist() -> Twist {
    Vector6::zeros()
}
