//! SE(3) / se(3) machinery.
//!
//! Twists are ordered `[translational; rotational]` everywhere in this crate,
//! so `ad(ξ) = [[φ^, ρ^], [0, φ^]]` and `Ad(T) = [[R, t^R], [0, R]]`.
//! Closed forms are used for the exponential, logarithm and Jacobians; the
//! derivatives of Jacobian-vector products, which have no convenient closed
//! form, are evaluated from their power series.

use std::f64::consts::PI;
use std::ops::Mul;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

/// Element of se(3): `[ρ; φ]`.
pub type Twist = Vector6<f64>;

/// Rotation angles closer than this to π are rejected by the logarithm.
pub const ANGLE_NEAR_PI_TOL: f64 = 1e-6;

/// Below this rotation angle the exponential and logarithm use series forms.
pub const SMALL_ANGLE: f64 = 1e-7;

// Coefficient functions switch to Taylor series below this angle; the closed
// forms lose too many digits to cancellation there.
const SERIES_ANGLE: f64 = 0.25;

/// Rigid transform: rotation and translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Largest of `‖RᵀR − I‖∞` and `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.abs().max().max((self.rotation.determinant() - 1.0).abs())
    }

    /// Project the rotation back onto SO(3) (polar decomposition via SVD).
    pub fn renormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self::new(r, self.translation)
    }

    pub fn adjoint(&self) -> Matrix6<f64> {
        adjoint(self)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Mul::mul(&self, &rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.translation + self.translation,
        )
    }
}

pub fn hat3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// 4×4 lift of a twist.
pub fn hat(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&rotational(xi)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translational(xi));
    m
}

/// The se(3) adjoint operator `ad(ξ)`, so that `ad(ξ)·ζ` is the Lie bracket.
pub fn ad(xi: &Twist) -> Matrix6<f64> {
    let rho = hat3(&translational(xi));
    let phi = hat3(&rotational(xi));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&phi);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&rho);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&phi);
    m
}

pub fn translational(xi: &Twist) -> Vector3<f64> {
    xi.fixed_rows::<3>(0).into_owned()
}

pub fn rotational(xi: &Twist) -> Vector3<f64> {
    xi.fixed_rows::<3>(3).into_owned()
}

pub fn twist(translational: Vector3<f64>, rotational: Vector3<f64>) -> Twist {
    Twist::new(
        translational.x,
        translational.y,
        translational.z,
        rotational.x,
        rotational.y,
        rotational.z,
    )
}

// sin θ / θ
fn sinc(theta: f64) -> f64 {
    if theta < 1e-4 {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

// (1 − cos θ) / θ²
fn one_minus_cos_over_sq(theta: f64) -> f64 {
    let s = sinc(0.5 * theta);
    0.5 * s * s
}

// (θ − sin θ) / θ³
fn theta_minus_sin_over_cube(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

// (θ² + 2 cos θ − 2) / (2θ⁴)
fn quartic_coeff(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40_320.0 - t2 * t2 * t2 / 3_628_800.0
    } else {
        let t2 = theta * theta;
        (t2 + 2.0 * theta.cos() - 2.0) / (2.0 * t2 * t2)
    }
}

// (2θ − 3 sin θ + θ cos θ) / (2θ⁵)
fn quintic_coeff(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120_960.0 - t2 * t2 * t2 / 9_979_200.0
    } else {
        let t2 = theta * theta;
        (2.0 * theta - 3.0 * theta.sin() + theta * theta.cos()) / (2.0 * t2 * t2 * theta)
    }
}

// (1 − (θ/2) cot(θ/2)) / θ²
fn inv_jacobian_coeff(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30_240.0 + t2 * t2 * t2 / 1_209_600.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if theta >= PI - ANGLE_NEAR_PI_TOL {
        Err(Error::AngleNearPi { angle: theta })
    } else {
        Ok(())
    }
}

pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat3(phi);
    let k2 = k * k;
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + k2 * 0.5 + k2 * k / 6.0 + k2 * k2 / 24.0;
    }
    Matrix3::identity() + k * sinc(theta) + k2 * one_minus_cos_over_sq(theta)
}

pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let v = vee3(&(r - r.transpose()));
    let s = v.norm(); // 2 sin θ
    let c = r.trace() - 1.0; // 2 cos θ
    let theta = s.atan2(c);
    check_angle(theta)?;
    if theta < SMALL_ANGLE {
        // θ / (2 sin θ) ≈ ½ (1 + θ²/6)
        return Ok(v * 0.5 * (1.0 + theta * theta / 6.0));
    }
    Ok(v * (theta / s))
}

pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat3(phi);
    Matrix3::identity() + k * one_minus_cos_over_sq(theta) + k * k * theta_minus_sin_over_cube(theta)
}

pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat3(phi);
    Matrix3::identity() - k * 0.5 + k * k * inv_jacobian_coeff(theta)
}

// The coupling block Q(ρ, φ) of the SE(3) left Jacobian.
fn q_block(xi: &Twist) -> Matrix3<f64> {
    let phi = rotational(xi);
    let theta = phi.norm();
    let p = hat3(&phi);
    let r = hat3(&translational(xi));
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    let pp = p * p;
    r * 0.5
        + (pr + rp + prp) * theta_minus_sin_over_cube(theta)
        + (pp * r + rp * p - prp * 3.0) * quartic_coeff(theta)
        + (prp * p + pp * rp) * quintic_coeff(theta)
}

/// SE(3) exponential map.
pub fn exp(xi: &Twist) -> Pose {
    let phi = rotational(xi);
    let rotation = so3_exp(&phi);
    let translation = so3_left_jacobian(&phi) * translational(xi);
    Pose::new(rotation, translation)
}

/// SE(3) logarithm. Fails when the rotation angle is within
/// [`ANGLE_NEAR_PI_TOL`] of π.
pub fn log(pose: &Pose) -> Result<Twist> {
    let phi = so3_log(&pose.rotation)?;
    let rho = so3_left_jacobian_inv(&phi) * pose.translation;
    Ok(twist(rho, phi))
}

pub fn left_jacobian(xi: &Twist) -> Matrix6<f64> {
    let j = so3_left_jacobian(&rotational(xi));
    let q = q_block(xi);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&q);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    m
}

pub fn left_jacobian_inv(xi: &Twist) -> Result<Matrix6<f64>> {
    check_angle(rotational(xi).norm())?;
    let j_inv = so3_left_jacobian_inv(&rotational(xi));
    let q = q_block(xi);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&j_inv);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(j_inv * q * j_inv)));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j_inv);
    Ok(m)
}

/// `J_r(ξ) = J_l(−ξ)`.
pub fn right_jacobian(xi: &Twist) -> Matrix6<f64> {
    left_jacobian(&(-xi))
}

pub fn right_jacobian_inv(xi: &Twist) -> Result<Matrix6<f64>> {
    left_jacobian_inv(&(-xi))
}

pub fn adjoint(pose: &Pose) -> Matrix6<f64> {
    let r = pose.rotation;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(hat3(&pose.translation) * r));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m
}

/// Geodesic distance-like norm of the relative pose `a⁻¹·b`.
pub fn distance(a: &Pose, b: &Pose) -> Result<f64> {
    Ok(log(&(a.inverse() * *b))?.norm())
}

const SERIES_TERMS: usize = 160;

// B_n / n!, the coefficients of J_l⁻¹ = Σ (B_n/n!) ad(ξ)ⁿ.
fn bernoulli_coeffs() -> &'static [f64] {
    static COEFFS: OnceLock<Vec<f64>> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut c = vec![0.0; SERIES_TERMS];
        c[0] = 1.0;
        c[1] = -0.5;
        let two_pi = 2.0 * PI;
        let mut k = 1;
        while 2 * k < SERIES_TERMS {
            let n = 2 * k;
            let zeta = match k {
                1 => PI.powi(2) / 6.0,
                2 => PI.powi(4) / 90.0,
                3 => PI.powi(6) / 945.0,
                _ => (1..=1000).map(|m| (m as f64).powi(-(n as i32))).sum(),
            };
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            c[n] = sign * 2.0 * zeta / two_pi.powi(n as i32);
            k += 1;
        }
        c
    })
}

// 1/(n+1)!, the coefficients of J_l = Σ ad(ξ)ⁿ/(n+1)!.
fn exp_coeffs() -> &'static [f64] {
    static COEFFS: OnceLock<Vec<f64>> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut c = Vec::with_capacity(SERIES_TERMS);
        let mut fact = 1.0;
        for n in 0..SERIES_TERMS {
            fact *= (n + 1) as f64;
            c.push(1.0 / fact);
        }
        c
    })
}

// Derivative with respect to ξ of Σ cₙ (s·ad ξ)ⁿ v.
fn series_vec_derivative(coeffs: &[f64], sign: f64, xi: &Twist, v: &Twist) -> Matrix6<f64> {
    let a = ad(xi) * sign;
    let mut w = *v;
    let mut d = Matrix6::zeros();
    let mut acc = Matrix6::zeros();
    for n in 1..coeffs.len() {
        d = a * d - ad(&w) * sign;
        w = a * w;
        acc += d * coeffs[n];
        let next = coeffs.get(n + 1).copied().unwrap_or(0.0).abs();
        let scale = coeffs[n].abs().max(next);
        if n >= 2 && scale * (d.abs().max() + w.abs().max()) < 1e-17 * (1.0 + acc.abs().max()) {
            break;
        }
    }
    acc
}

/// `∂/∂ξ [J_l⁻¹(ξ)·v]`.
pub fn left_jacobian_inv_vec_derivative(xi: &Twist, v: &Twist) -> Matrix6<f64> {
    series_vec_derivative(bernoulli_coeffs(), 1.0, xi, v)
}

/// `∂/∂ξ [J_r⁻¹(ξ)·v]`.
pub fn right_jacobian_inv_vec_derivative(xi: &Twist, v: &Twist) -> Matrix6<f64> {
    series_vec_derivative(bernoulli_coeffs(), -1.0, xi, v)
}

/// `∂/∂ξ [J_l(ξ)·v]`.
pub fn left_jacobian_vec_derivative(xi: &Twist, v: &Twist) -> Matrix6<f64> {
    series_vec_derivative(exp_coeffs(), 1.0, xi, v)
}

/// `∂/∂ξ [J_r(ξ)·v]`.
pub fn right_jacobian_vec_derivative(xi: &Twist, v: &Twist) -> Matrix6<f64> {
    series_vec_derivative(exp_coeffs(), -1.0, xi, v)
}
