//! Cost terms of the window problem: GP motion and spatial priors, the base
//! boundary condition, and pose / gyroscope measurements.
//!
//! All errors use right perturbations (`T ← T·exp(δ)`), matching
//! [`NodeState::retract`].

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::interp;
use crate::lie::{self, Pose, Twist};
use crate::solver::{Factor, Linearization};
use crate::state::{GridIndex, NodeState, NODE_DOF};

/// Gaussian noise stored as its information (inverse covariance) matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    information: DMatrix<f64>,
}

impl NoiseModel {
    /// From a covariance; fails with [`Error::SingularNoise`] unless it is
    /// symmetric positive definite.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularNoise);
        }
        let asym = (cov - cov.transpose()).amax();
        if asym > 1e-9 * cov.amax().max(1e-300) {
            return Err(Error::SingularNoise);
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let chol = sym.cholesky().ok_or(Error::SingularNoise)?;
        let information = chol.inverse();
        Ok(Self {
            information: (&information + information.transpose()) * 0.5,
        })
    }

    pub fn from_information(information: DMatrix<f64>) -> Result<Self> {
        if !information.is_square() || information.clone().cholesky().is_none() {
            return Err(Error::SingularNoise);
        }
        Ok(Self { information })
    }

    /// Independent components with the given standard deviations.
    pub fn diagonal(sigmas: &[f64]) -> Result<Self> {
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::SingularNoise);
        }
        let info = DVector::from_iterator(sigmas.len(), sigmas.iter().map(|s| 1.0 / (s * s)));
        Ok(Self {
            information: DMatrix::from_diagonal(&info),
        })
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.information
    }

    pub fn dim(&self) -> usize {
        self.information.nrows()
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.information
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularNoise)
    }
}

/// Power-spectral densities of the white-noise priors in time and arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorPowerSpectra {
    pub time: Matrix6<f64>,
    pub space: Matrix6<f64>,
}

impl Default for PriorPowerSpectra {
    fn default() -> Self {
        let space = Matrix6::from_diagonal(&Twist::new(1e-2, 1e-2, 1e-2, 0.2, 0.2, 0.2));
        Self {
            time: Matrix6::identity(),
            space,
        }
    }
}

/// Covariance of the WNOA prior over an interval `delta`:
/// `[[δ³/3·Q, δ²/2·Q], [δ²/2·Q, δ·Q]]`.
pub fn wnoa_covariance(delta: f64, qc: &Matrix6<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(12, 12);
    let w = [[delta.powi(3) / 3.0, delta * delta / 2.0], [delta * delta / 2.0, delta]];
    for (r, row) in w.iter().enumerate() {
        for (c, wrc) in row.iter().enumerate() {
            out.view_mut((6 * r, 6 * c), (6, 6)).copy_from(&(qc * *wrc));
        }
    }
    out
}

/// Closed-form inverse of [`wnoa_covariance`].
pub fn wnoa_information(delta: f64, qc: &Matrix6<f64>) -> Result<DMatrix<f64>> {
    if !(delta > 0.0) {
        return Err(Error::SingularNoise);
    }
    let qi = qc.cholesky().ok_or(Error::SingularNoise)?.inverse();
    let mut out = DMatrix::zeros(12, 12);
    let w = [
        [12.0 / delta.powi(3), -6.0 / (delta * delta)],
        [-6.0 / (delta * delta), 4.0 / delta],
    ];
    for (r, row) in w.iter().enumerate() {
        for (c, wrc) in row.iter().enumerate() {
            out.view_mut((6 * r, 6 * c), (6, 6)).copy_from(&(qi * *wrc));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Motion,
    Spatial,
    BoundaryPrior,
    PoseMeasurement,
    GyroMeasurement,
}

/// Error, Jacobians (one `dim × 18` block per connected node) and noise.
#[derive(Clone, Debug)]
pub struct FactorEval {
    pub error: DVector<f64>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub noise: NoiseModel,
}

/// Which rate a GP prior acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rate {
    Velocity,
    Strain,
}

impl Rate {
    fn offset(self) -> usize {
        match self {
            Rate::Velocity => 6,
            Rate::Strain => 12,
        }
    }

    fn of(self, x: &NodeState) -> Twist {
        match self {
            Rate::Velocity => x.velocity,
            Rate::Strain => x.strain,
        }
    }
}

fn place(target: &mut DMatrix<f64>, r: usize, c: usize, block: &Matrix6<f64>) {
    target.view_mut((r, c), (6, 6)).copy_from(block);
}

// e = [γ − δ·r_a ; J_r⁻¹(γ)·r_b − r_a],  γ = log(T_a⁻¹T_b)
fn gp_binary(xa: &NodeState, xb: &NodeState, delta: f64, rate: Rate) -> Result<Linearization> {
    let gamma = lie::log(&(xa.pose.inverse() * xb.pose))?;
    let jr_inv = lie::right_jacobian_inv(&gamma)?;
    let jl_inv = lie::left_jacobian_inv(&gamma)?;
    let (ra, rb) = (rate.of(xa), rate.of(xb));
    let mut error = DVector::zeros(12);
    error.rows_mut(0, 6).copy_from(&(gamma - ra * delta));
    error.rows_mut(6, 6).copy_from(&(jr_inv * rb - ra));

    let g = lie::right_jacobian_inv_vec_derivative(&gamma, &rb);
    let off = rate.offset();
    let mut ja = DMatrix::zeros(12, NODE_DOF);
    place(&mut ja, 0, 0, &(-jl_inv));
    place(&mut ja, 0, off, &(-Matrix6::identity() * delta));
    place(&mut ja, 6, 0, &(-(g * jl_inv)));
    place(&mut ja, 6, off, &(-Matrix6::identity()));
    let mut jb = DMatrix::zeros(12, NODE_DOF);
    place(&mut jb, 0, 0, &jr_inv);
    place(&mut jb, 6, 0, &(g * jr_inv));
    place(&mut jb, 6, off, &jr_inv);
    Ok(Linearization {
        error,
        jacobians: vec![ja, jb],
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("prior interval must be positive, got {delta}")));
    }
    Ok(())
}

/// Temporal GP prior between the same node at consecutive slices.
pub fn motion_error(xa: &NodeState, xb: &NodeState, dt: f64, qc: &Matrix6<f64>) -> Result<FactorEval> {
    check_delta(dt)?;
    let lin = gp_binary(xa, xb, dt, Rate::Velocity)?;
    Ok(FactorEval {
        error: lin.error,
        jacobians: lin.jacobians,
        noise: NoiseModel::from_information(wnoa_information(dt, qc)?)?,
    })
}

/// Arc-length GP prior between neighboring nodes of one slice.
pub fn spatial_error(xa: &NodeState, xb: &NodeState, ds: f64, qc: &Matrix6<f64>) -> Result<FactorEval> {
    check_delta(ds)?;
    let lin = gp_binary(xa, xb, ds, Rate::Strain)?;
    Ok(FactorEval {
        error: lin.error,
        jacobians: lin.jacobians,
        noise: NoiseModel::from_information(wnoa_information(ds, qc)?)?,
    })
}

// e = [log(T_ref⁻¹·T) ; ϖ]
fn boundary(x: &NodeState, base: &Pose) -> Result<Linearization> {
    let e_pose = lie::log(&(base.inverse() * x.pose))?;
    let mut error = DVector::zeros(12);
    error.rows_mut(0, 6).copy_from(&e_pose);
    error.rows_mut(6, 6).copy_from(&x.velocity);
    let mut j = DMatrix::zeros(12, NODE_DOF);
    place(&mut j, 0, 0, &lie::right_jacobian_inv(&e_pose)?);
    place(&mut j, 6, 6, &Matrix6::identity());
    Ok(Linearization {
        error,
        jacobians: vec![j],
    })
}

/// Clamped base: pose equal to `base`, zero velocity.
pub fn boundary_error(x: &NodeState, base: &Pose, noise: &NoiseModel) -> Result<FactorEval> {
    let lin = boundary(x, base)?;
    Ok(FactorEval {
        error: lin.error,
        jacobians: lin.jacobians,
        noise: noise.clone(),
    })
}

/// Interpolation bracket of an off-grid measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub t_a: f64,
    pub t_b: f64,
    pub tau: f64,
}

impl Bracket {
    /// Measurements belong to the half-open interval `(t_a, t_b]`.
    pub fn new(t_a: f64, t_b: f64, tau: f64) -> Result<Self> {
        if !(t_a < t_b) || !(tau > t_a) || tau > t_b {
            return Err(Error::TimestampOutsideInterval {
                tau,
                start: t_a,
                end: t_b,
            });
        }
        Ok(Self { t_a, t_b, tau })
    }
}

fn embed_rows<const R: usize>(src: &SMatrix<f64, R, 12>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(R, NODE_DOF);
    out.view_mut((0, 0), (R, 12)).copy_from(src);
    out
}

// e = log(T_meas⁻¹·T(τ))
fn pose_measurement(xa: &NodeState, xb: &NodeState, br: &Bracket, measured: &Pose) -> Result<Linearization> {
    let it = interp::interpolate(xa, xb, br.t_a, br.t_b, br.tau)?;
    let e = lie::log(&(measured.inverse() * it.state.pose))?;
    let jr_inv = lie::right_jacobian_inv(&e)?;
    let ja: SMatrix<f64, 6, 12> = jr_inv * it.jac_a.fixed_rows::<6>(0);
    let jb: SMatrix<f64, 6, 12> = jr_inv * it.jac_b.fixed_rows::<6>(0);
    Ok(Linearization {
        error: DVector::from_column_slice(e.as_slice()),
        jacobians: vec![embed_rows(&ja), embed_rows(&jb)],
    })
}

/// Full-pose measurement at `τ ∈ (t_a, t_b]` of the node shared by `xa` and `xb`.
pub fn pose_measurement_error(
    xa: &NodeState,
    xb: &NodeState,
    bracket: &Bracket,
    measured: &Pose,
    noise: &NoiseModel,
) -> Result<FactorEval> {
    let lin = pose_measurement(xa, xb, bracket, measured)?;
    Ok(FactorEval {
        error: lin.error,
        jacobians: lin.jacobians,
        noise: noise.clone(),
    })
}

// e = ω_meas − rotational(ϖ(τ))
fn gyro_measurement(xa: &NodeState, xb: &NodeState, br: &Bracket, rate: &Vector3<f64>) -> Result<Linearization> {
    let it = interp::interpolate(xa, xb, br.t_a, br.t_b, br.tau)?;
    let e = rate - lie::rotational(&it.state.velocity);
    let ja: SMatrix<f64, 3, 12> = -it.jac_a.fixed_rows::<3>(9);
    let jb: SMatrix<f64, 3, 12> = -it.jac_b.fixed_rows::<3>(9);
    Ok(Linearization {
        error: DVector::from_column_slice(e.as_slice()),
        jacobians: vec![embed_rows(&ja), embed_rows(&jb)],
    })
}

/// Body-frame angular-rate measurement at `τ ∈ (t_a, t_b]`.
pub fn gyro_measurement_error(
    xa: &NodeState,
    xb: &NodeState,
    bracket: &Bracket,
    rate: &Vector3<f64>,
    noise: &NoiseModel,
) -> Result<FactorEval> {
    let lin = gyro_measurement(xa, xb, bracket, rate)?;
    Ok(FactorEval {
        error: lin.error,
        jacobians: lin.jacobians,
        noise: noise.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Params {
    Motion { dt: f64 },
    Spatial { ds: f64 },
    Boundary { base: Pose },
    Pose { bracket: Bracket, measured: Pose },
    Gyro { bracket: Bracket, rate: Vector3<f64> },
}

/// A factor of the continuum-robot window problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotFactor {
    keys: Vec<GridIndex>,
    noise: NoiseModel,
    params: Params,
}

impl RobotFactor {
    pub fn motion(a: GridIndex, b: GridIndex, dt: f64, qc: &Matrix6<f64>) -> Result<Self> {
        check_delta(dt)?;
        Ok(Self {
            keys: vec![a, b],
            noise: NoiseModel::from_information(wnoa_information(dt, qc)?)?,
            params: Params::Motion { dt },
        })
    }

    pub fn spatial(a: GridIndex, b: GridIndex, ds: f64, qc: &Matrix6<f64>) -> Result<Self> {
        check_delta(ds)?;
        Ok(Self {
            keys: vec![a, b],
            noise: NoiseModel::from_information(wnoa_information(ds, qc)?)?,
            params: Params::Spatial { ds },
        })
    }

    pub fn boundary(at: GridIndex, base: Pose, noise: NoiseModel) -> Result<Self> {
        if noise.dim() != 12 {
            return Err(Error::SingularNoise);
        }
        Ok(Self {
            keys: vec![at],
            noise,
            params: Params::Boundary { base },
        })
    }

    pub fn pose_measurement(
        a: GridIndex,
        b: GridIndex,
        bracket: Bracket,
        measured: Pose,
        noise: NoiseModel,
    ) -> Result<Self> {
        if noise.dim() != 6 {
            return Err(Error::SingularNoise);
        }
        Ok(Self {
            keys: vec![a, b],
            noise,
            params: Params::Pose { bracket, measured },
        })
    }

    pub fn gyro_measurement(
        a: GridIndex,
        b: GridIndex,
        bracket: Bracket,
        rate: Vector3<f64>,
        noise: NoiseModel,
    ) -> Result<Self> {
        if noise.dim() != 3 {
            return Err(Error::SingularNoise);
        }
        Ok(Self {
            keys: vec![a, b],
            noise,
            params: Params::Gyro { bracket, rate },
        })
    }

    pub fn kind(&self) -> FactorKind {
        match self.params {
            Params::Motion { .. } => FactorKind::Motion,
            Params::Spatial { .. } => FactorKind::Spatial,
            Params::Boundary { .. } => FactorKind::BoundaryPrior,
            Params::Pose { .. } => FactorKind::PoseMeasurement,
            Params::Gyro { .. } => FactorKind::GyroMeasurement,
        }
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
}

impl Factor<NodeState> for RobotFactor {
    fn keys(&self) -> &[GridIndex] {
        &self.keys
    }

    fn information(&self) -> &DMatrix<f64> {
        self.noise.information()
    }

    fn error(&self, vars: &[&NodeState]) -> Result<DVector<f64>> {
        Ok(self.linearize(vars)?.error)
    }

    fn linearize(&self, vars: &[&NodeState]) -> Result<Linearization> {
        match &self.params {
            Params::Motion { dt } => gp_binary(vars[0], vars[1], *dt, Rate::Velocity),
            Params::Spatial { ds } => gp_binary(vars[0], vars[1], *ds, Rate::Strain),
            Params::Boundary { base } => boundary(vars[0], base),
            Params::Pose { bracket, measured } => pose_measurement(vars[0], vars[1], bracket, measured),
            Params::Gyro { bracket, rate } => gyro_measurement(vars[0], vars[1], bracket, rate),
        }
    }

    fn label(&self) -> &'static str {
        match self.kind() {
            FactorKind::Motion => "motion",
            FactorKind::Spatial => "spatial",
            FactorKind::BoundaryPrior => "boundary",
            FactorKind::PoseMeasurement => "pose",
            FactorKind::GyroMeasurement => "gyro",
        }
    }
}

/// Default pose-measurement noise: 1 mm position, 0.5° orientation.
pub fn default_pose_noise() -> NoiseModel {
    let r = 0.5f64.to_radians();
    NoiseModel::diagonal(&[1e-3, 1e-3, 1e-3, r, r, r]).expect("positive sigmas")
}

/// Default gyroscope noise: 0.01 rad/s per axis.
pub fn default_gyro_noise() -> NoiseModel {
    NoiseModel::diagonal(&[0.01; 3]).expect("positive sigmas")
}

/// Tight clamp on the base pose and velocity.
pub fn default_boundary_noise() -> NoiseModel {
    let mut s = [1e-4; 12];
    s[6..].fill(1e-3);
    NoiseModel::diagonal(&s).expect("positive sigmas")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::NodeVector;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, scale: f64) -> NodeState {
        let mut v = NodeVector::zeros();
        for k in 0..NODE_DOF {
            v[k] = rng.random_range(-scale..scale);
        }
        NodeState::default().retract(&v)
    }

    fn near(rng: &mut ChaCha8Rng, x: &NodeState, scale: f64) -> NodeState {
        let mut v = NodeVector::zeros();
        for k in 0..NODE_DOF {
            v[k] = rng.random_range(-scale..scale);
        }
        x.retract(&v)
    }

    // Central differences of the error with respect to each node's right
    // perturbation, compared column by column.
    fn check_jacobians(f: &RobotFactor, vars: &[NodeState]) {
        let refs: Vec<&NodeState> = vars.iter().collect();
        let lin = f.linearize(&refs).unwrap();
        let h = 1e-6;
        for (p, jac) in lin.jacobians.iter().enumerate() {
            for k in 0..NODE_DOF {
                let mut d = NodeVector::zeros();
                d[k] = h;
                let eval = |s: f64| {
                    let mut vs = vars.to_vec();
                    vs[p] = vars[p].retract(&(d * s));
                    let r: Vec<&NodeState> = vs.iter().collect();
                    f.error(&r).unwrap()
                };
                let fd = (eval(1.0) - eval(-1.0)) / (2.0 * h);
                let col = jac.column(k).into_owned();
                assert!(
                    (&fd - &col).norm() <= 1e-6 * (1.0 + col.norm()),
                    "{} key {p} column {k}: fd {fd} analytic {col}",
                    f.label()
                );
            }
        }
    }

    #[test]
    fn wnoa_information_inverts_covariance() {
        let qc = Matrix6::from_diagonal(&Twist::new(1.0, 2.0, 3.0, 0.5, 0.1, 4.0));
        for delta in [1e-3, 1.0 / 30.0, 0.1165, 2.0] {
            let prod = wnoa_covariance(delta, &qc) * wnoa_information(delta, &qc).unwrap();
            assert_relative_eq!(prod, DMatrix::identity(12, 12), epsilon = 1e-8);
        }
    }

    #[test]
    fn motion_error_zero_for_constant_twist() {
        let v = Twist::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.2);
        let dt = 1.0 / 30.0;
        let xa = NodeState::new(Pose::identity(), v, Twist::zeros());
        let xb = NodeState::new(lie::exp(&(v * dt)), v, Twist::zeros());
        let f = motion_error(&xa, &xb, dt, &Matrix6::identity()).unwrap();
        assert!(f.error.amax() < 1e-14);
    }

    #[test]
    fn spatial_error_zero_for_straight_rod() {
        let cfg = crate::state::StateConfig::default();
        let rod = crate::state::straight_rod(&Pose::identity(), &cfg);
        let qc = PriorPowerSpectra::default().space;
        for w in rod.windows(2) {
            let f = spatial_error(&w[0], &w[1], cfg.ds(), &qc).unwrap();
            assert!(f.error.amax() < 1e-14);
        }
    }

    #[test]
    fn boundary_and_measurement_zero_at_truth() {
        let base = Pose::identity();
        let x = NodeState::default();
        let f = boundary_error(&x, &base, &default_boundary_noise()).unwrap();
        assert!(f.error.amax() < 1e-15);

        let v = Twist::new(0.0, 0.1, 0.0, 0.3, 0.0, 0.0);
        let xa = NodeState::new(Pose::identity(), v, Twist::zeros());
        let xb = NodeState::new(lie::exp(&(v * 0.1)), v, Twist::zeros());
        let br = Bracket::new(0.0, 0.1, 0.04).unwrap();
        let truth = lie::exp(&(v * 0.04));
        let f = pose_measurement_error(&xa, &xb, &br, &truth, &default_pose_noise()).unwrap();
        assert!(f.error.amax() < 1e-12);
        let f = gyro_measurement_error(&xa, &xb, &br, &Vector3::new(0.3, 0.0, 0.0), &default_gyro_noise()).unwrap();
        assert!(f.error.amax() < 1e-12);
    }

    #[test]
    fn bracket_is_half_open() {
        assert!(Bracket::new(0.0, 0.1, 0.1).is_ok());
        assert!(matches!(
            Bracket::new(0.0, 0.1, 0.0),
            Err(Error::TimestampOutsideInterval { .. })
        ));
        assert!(Bracket::new(0.0, 0.1, 0.11).is_err());
    }

    #[test]
    fn noise_rejects_non_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(NoiseModel::from_covariance(&bad), Err(Error::SingularNoise));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(NoiseModel::from_covariance(&asym), Err(Error::SingularNoise));
        assert!(NoiseModel::diagonal(&[1.0, 0.0]).is_err());
        let ok = NoiseModel::from_covariance(&DMatrix::from_diagonal_element(3, 3, 4.0)).unwrap();
        assert_relative_eq!(ok.information()[(1, 1)], 0.25);
    }

    #[test]
    fn motion_and_spatial_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let qc = Matrix6::identity();
        for _ in 0..10 {
            let xa = random_state(&mut rng, 0.8);
            let xb = near(&mut rng, &xa, 0.3);
            let f = RobotFactor::motion(GridIndex::new(0, 0), GridIndex::new(1, 0), 0.05, &qc).unwrap();
            check_jacobians(&f, &[xa, xb]);
            let f = RobotFactor::spatial(GridIndex::new(0, 0), GridIndex::new(0, 1), 0.1, &qc).unwrap();
            check_jacobians(&f, &[xa, xb]);
        }
    }

    #[test]
    fn measurement_and_boundary_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let xa = random_state(&mut rng, 0.8);
            let xb = near(&mut rng, &xa, 0.2);
            let br = Bracket::new(0.0, 1.0 / 30.0, rng.random_range(0.001..1.0 / 30.0)).unwrap();
            let measured = near(&mut rng, &xb, 0.1).pose;
            let (a, b) = (GridIndex::new(0, 2), GridIndex::new(1, 2));
            let f = RobotFactor::pose_measurement(a, b, br, measured, default_pose_noise()).unwrap();
            check_jacobians(&f, &[xa, xb]);
            let rate = Vector3::new(0.1, -0.3, 0.2);
            let f = RobotFactor::gyro_measurement(a, b, br, rate, default_gyro_noise()).unwrap();
            check_jacobians(&f, &[xa, xb]);
            let f = RobotFactor::boundary(a, measured, default_boundary_noise()).unwrap();
            check_jacobians(&f, &[xa]);
        }
    }
}
