//! Synthetic ground truth and sensor streams.
//!
//! The robot shape at time `t` is the product-of-exponentials realization of
//! a body-frame strain field `ε(s, t) = [1, 0, 0, τ, κ_y, κ_z]` (inextensible,
//! unsheared, base clamped at the identity). Motion families differ only in
//! how the curvatures and torsion evolve.

use std::f64::consts::PI;

use nalgebra::{Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factors::NoiseModel;
use crate::lie::{self, Pose, Twist};
use crate::state::NodeState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorKind {
    TipPose,
    BasePose,
    Gyro,
}

impl SensorKind {
    pub fn name(self) -> &'static str {
        match self {
            SensorKind::TipPose => "tip_pose",
            SensorKind::BasePose => "base_pose",
            SensorKind::Gyro => "gyro",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tip_pose" => Some(SensorKind::TipPose),
            "base_pose" => Some(SensorKind::BasePose),
            "gyro" => Some(SensorKind::Gyro),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurementValue {
    Pose(Pose),
    /// Body-frame angular rate, rad/s.
    Rate(Vector3<f64>),
}

/// One timestamped sensor reading of node `node`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub kind: SensorKind,
    pub timestamp: f64,
    pub node: usize,
    pub value: MeasurementValue,
    pub noise: NoiseModel,
}

/// Global order of a measurement stream: time, then kind, then node.
pub fn sort_measurements(ms: &mut [Measurement]) {
    ms.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.kind.cmp(&b.kind))
            .then(a.node.cmp(&b.node))
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileFamily {
    /// Fixed bent shape.
    Constant,
    /// Smooth periodic bending and twisting.
    SinusoidalSweep,
    /// A slow sweep with sudden kicks that ring down.
    Impulse,
    /// A sweep during which the tip pose sensor drops out.
    DropoutSweep,
}

/// A sudden disturbance: curvature `A·e^{−(t−t₀)/d}·sin(2πf(t−t₀))` for `t > t₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kick {
    pub time: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub decay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub family: ProfileFamily,
    /// Peak curvature of the sweep, rad/m.
    pub amplitude: f64,
    /// Sweep period, s.
    pub period: f64,
    pub kicks: Vec<Kick>,
    /// Intervals without tip pose measurements.
    pub dropouts: Vec<(f64, f64)>,
}

/// Names accepted by [`Profile::named`].
pub const PROFILE_NAMES: [&str; 5] = [
    "out-of-bounds",
    "fast-contact",
    "impulse-1",
    "impulse-2",
    "slow-free-space",
];

impl Profile {
    pub fn constant(amplitude: f64) -> Self {
        Self {
            family: ProfileFamily::Constant,
            amplitude,
            period: 1.0,
            kicks: Vec::new(),
            dropouts: Vec::new(),
        }
    }

    pub fn sweep(amplitude: f64, period: f64) -> Self {
        Self {
            family: ProfileFamily::SinusoidalSweep,
            amplitude,
            period,
            kicks: Vec::new(),
            dropouts: Vec::new(),
        }
    }

    /// The five named motion families.
    pub fn named(name: &str) -> Result<Self> {
        let kick = |time, amplitude, frequency, decay| Kick {
            time,
            amplitude,
            frequency,
            decay,
        };
        let p = match name {
            "slow-free-space" => Self::sweep(1.5, 6.0),
            "fast-contact" => Self {
                family: ProfileFamily::Impulse,
                amplitude: 2.5,
                period: 1.6,
                kicks: vec![kick(3.0, 1.5, 2.5, 0.4), kick(6.5, 1.5, 2.5, 0.4)],
                dropouts: Vec::new(),
            },
            "impulse-1" => Self {
                family: ProfileFamily::Impulse,
                amplitude: 1.0,
                period: 5.0,
                kicks: vec![
                    kick(2.0, 2.0, 3.0, 0.4),
                    kick(5.0, 2.0, 3.0, 0.4),
                    kick(8.0, 2.0, 3.0, 0.4),
                ],
                dropouts: Vec::new(),
            },
            "impulse-2" => Self {
                family: ProfileFamily::Impulse,
                amplitude: 1.0,
                period: 4.0,
                kicks: vec![
                    kick(1.5, 1.5, 4.0, 0.3),
                    kick(3.5, 1.5, 4.0, 0.3),
                    kick(5.5, 1.5, 4.0, 0.3),
                    kick(7.5, 1.5, 4.0, 0.3),
                ],
                dropouts: Vec::new(),
            },
            "out-of-bounds" => Self {
                family: ProfileFamily::DropoutSweep,
                amplitude: 2.0,
                period: 3.0,
                kicks: Vec::new(),
                dropouts: vec![(5.0, 6.0)],
            },
            other => return Err(Error::Config(format!("unknown profile '{other}'"))),
        };
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let finite = self.amplitude.is_finite() && self.period > 0.0 && self.period.is_finite();
        let kicks_ok = self
            .kicks
            .iter()
            .all(|k| k.amplitude.is_finite() && k.frequency.is_finite() && k.decay > 0.0);
        let drops_ok = self.dropouts.iter().all(|(a, b)| a <= b);
        if finite && kicks_ok && drops_ok {
            Ok(())
        } else {
            Err(Error::Config("invalid strain profile".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    /// Robot length, m.
    pub length: f64,
    /// Duration, s.
    pub duration: f64,
    pub profile: Profile,
    pub seed: u64,
    /// Estimation / ground-truth nodes along the robot.
    pub nodes: usize,
    /// Ground-truth sample rate, Hz.
    pub truth_rate: f64,
    /// Integration points along the robot.
    pub fine_points: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            length: 0.466,
            duration: 10.0,
            profile: Profile::named("slow-free-space").expect("known profile"),
            seed: 0,
            nodes: 5,
            truth_rate: 200.0,
            fine_points: 401,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config("length and duration must be positive".into()));
        }
        if self.nodes < 2 || self.fine_points < 2 {
            return Err(Error::Config(
                "need at least two nodes and two integration points".into(),
            ));
        }
        if !(self.truth_rate > 0.0) {
            return Err(Error::Config("ground-truth rate must be positive".into()));
        }
        self.profile.validate()
    }
}

/// A continuous strain field with seed-dependent phases.
#[derive(Clone, Debug)]
pub struct Trajectory {
    cfg: TrajectoryConfig,
    phases: [f64; 3],
    scale: f64,
}

impl Trajectory {
    pub fn new(cfg: TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let phases = [
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        let scale = rng.random_range(0.85..1.15);
        Ok(Self { cfg, phases, scale })
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.cfg
    }

    /// Body-frame strain at arc length `s` and time `t`.
    pub fn strain(&self, s: f64, t: f64) -> Twist {
        let p = &self.cfg.profile;
        let u = s / self.cfg.length;
        let a = p.amplitude * self.scale;
        let w = 2.0 * PI / p.period;
        let [p0, p1, p2] = self.phases;
        let (mut ky, mut kz, mut torsion) = match p.family {
            ProfileFamily::Constant => (0.3 * a * (0.5 + 0.5 * u), a * (1.0 - 0.5 * u), 0.0),
            _ => (
                0.6 * a * (w * t + p0).sin() * (0.5 + 0.5 * u),
                a * (w * t + p1).sin() * (1.0 - 0.5 * u),
                0.2 * a * (0.5 * w * t + p2).sin(),
            ),
        };
        for (n, k) in p.kicks.iter().enumerate() {
            let dt = t - k.time;
            if dt > 0.0 {
                let ring = k.amplitude * self.scale * (-dt / k.decay).exp() * (2.0 * PI * k.frequency * dt).sin() * u;
                let dir = self.phases[n % 3];
                ky += ring * dir.cos();
                kz += ring * dir.sin();
                torsion += 0.1 * ring;
            }
        }
        Twist::new(1.0, 0.0, 0.0, torsion, ky, kz)
    }

    /// Node poses at time `t`.
    pub fn poses(&self, t: f64) -> Vec<Pose> {
        let arcs: Vec<f64> = (0..self.cfg.nodes)
            .map(|j| j as f64 * self.cfg.length / (self.cfg.nodes - 1) as f64)
            .collect();
        integrate_shape(|s| self.strain(s, t), &arcs, self.cfg.length, self.cfg.fine_points)
    }

    /// Full node states at time `t`; velocities by central differences.
    pub fn states(&self, t: f64) -> Vec<NodeState> {
        const H: f64 = 1e-5;
        let now = self.poses(t);
        let before = self.poses(t - H);
        let after = self.poses(t + H);
        now.into_iter()
            .enumerate()
            .map(|(j, pose)| {
                let inc = lie::log(&(before[j].inverse() * after[j])).expect("small increment");
                let s = j as f64 * self.cfg.length / (self.cfg.nodes - 1) as f64;
                NodeState::new(pose, inc / (2.0 * H), self.strain(s, t))
            })
            .collect()
    }
}

/// Poses at the requested arc lengths of the rod whose base is the identity
/// and whose body-frame strain is `strain(s)`.
///
/// Each of the `fine_points − 1` sub-intervals of `[0, length]` (split
/// further so that every requested arc length is hit exactly) is integrated
/// with the midpoint rule `T ← T·exp(Δs·ε(s + Δs/2))`.
pub fn integrate_shape(strain: impl Fn(f64) -> Twist, arcs: &[f64], length: f64, fine_points: usize) -> Vec<Pose> {
    let h = length / (fine_points.max(2) - 1) as f64;
    let mut out = Vec::with_capacity(arcs.len());
    let mut pose = Pose::identity();
    let mut s = 0.0;
    for &target in arcs {
        let span = target - s;
        if span > 0.0 {
            let steps = (span / h - 1e-9).ceil().max(1.0) as usize;
            let ds = span / steps as f64;
            for k in 0..steps {
                let mid = s + (k as f64 + 0.5) * ds;
                pose = pose * lie::exp(&(strain(mid) * ds));
            }
            s = target;
        }
        out.push(pose);
    }
    out
}

/// Node states sampled on a uniform time grid.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub trajectory: Trajectory,
    pub times: Vec<f64>,
    /// `states[k][j]`: node `j` at `times[k]`.
    pub states: Vec<Vec<NodeState>>,
}

impl GroundTruth {
    pub fn nodes(&self) -> usize {
        self.trajectory.cfg.nodes
    }

    pub fn length(&self) -> f64 {
        self.trajectory.cfg.length
    }
}

/// Sample the trajectory at `truth_rate` from 0 to `duration` inclusive.
pub fn generate(cfg: &TrajectoryConfig) -> Result<GroundTruth> {
    let trajectory = Trajectory::new(cfg.clone())?;
    let count = (cfg.duration * cfg.truth_rate + 1e-9).floor() as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| k as f64 / cfg.truth_rate).collect();
    let states = times.iter().map(|&t| trajectory.states(t)).collect();
    Ok(GroundTruth {
        trajectory,
        times,
        states,
    })
}

/// Smallest standard deviation recorded in a measurement's noise model.
pub const MIN_SIGMA: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SensorConfig {
    pub pose_rate: f64,
    pub gyro_rate: f64,
    /// Position noise of the pose sensors, m.
    pub pose_sigma_position: f64,
    /// Orientation noise of the pose sensors, rad.
    pub pose_sigma_rotation: f64,
    /// Gyroscope noise, rad/s.
    pub gyro_sigma: f64,
    /// Timing jitter as a fraction of the sample period.
    pub jitter: f64,
    pub base_pose: bool,
    pub tip_pose: bool,
    /// Nodes carrying gyroscopes; `None` means the midpoint and the tip.
    pub gyro_nodes: Option<Vec<usize>>,
    /// Extra tip-pose dropout intervals on top of the profile's own.
    pub dropouts: Vec<(f64, f64)>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            pose_rate: 40.0,
            gyro_rate: 50.0,
            pose_sigma_position: 1e-3,
            pose_sigma_rotation: 0.5f64.to_radians(),
            gyro_sigma: 0.01,
            jitter: 0.1,
            base_pose: true,
            tip_pose: true,
            gyro_nodes: None,
            dropouts: Vec::new(),
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (1.0..=1000.0).contains(&r);
        if !rate_ok(self.pose_rate) || !rate_ok(self.gyro_rate) {
            return Err(Error::Config("sensor rates must lie in [1, 1000] Hz".into()));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::Config("jitter must be in [0, 0.5)".into()));
        }
        if self.pose_sigma_position < 0.0 || self.pose_sigma_rotation < 0.0 || self.gyro_sigma < 0.0 {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }

    /// Noise recorded with pose measurements. Sigmas are floored at
    /// [`MIN_SIGMA`] so noiseless data still carries a usable model.
    pub fn pose_noise(&self) -> Result<NoiseModel> {
        let p = self.pose_sigma_position.max(MIN_SIGMA);
        let r = self.pose_sigma_rotation.max(MIN_SIGMA);
        NoiseModel::diagonal(&[p, p, p, r, r, r])
    }

    pub fn gyro_noise(&self) -> Result<NoiseModel> {
        NoiseModel::diagonal(&[self.gyro_sigma.max(MIN_SIGMA); 3])
    }

    pub fn gyro_nodes_for(&self, nodes: usize) -> Vec<usize> {
        self.gyro_nodes
            .clone()
            .unwrap_or_else(|| vec![(nodes - 1) / 2, nodes - 1])
    }
}

// Sample times of one stream: random phase, per-sample uniform jitter.
fn sample_times(rng: &mut ChaCha8Rng, rate: f64, jitter: f64, duration: f64) -> Vec<f64> {
    let period = 1.0 / rate;
    let phase = rng.random_range(0.0..period);
    let mut out = Vec::new();
    let mut n = 0usize;
    loop {
        let nominal = phase + n as f64 * period;
        let j = if jitter > 0.0 {
            rng.random_range(-jitter..jitter) * period
        } else {
            0.0
        };
        let t = nominal + j;
        if nominal > duration + period {
            break;
        }
        if t > 0.0 && t <= duration {
            out.push(t);
        }
        n += 1;
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Noisy, asynchronous measurements of the trajectory, globally time-sorted.
///
/// Each sensor draws from its own random stream derived from `seed`, so
/// adding or removing a sensor does not change the others. Pose noise is a
/// right perturbation `T·exp(n)`.
pub fn synthesize(truth: &GroundTruth, sensors: &SensorConfig, seed: u64) -> Result<Vec<Measurement>> {
    sensors.validate()?;
    let traj = &truth.trajectory;
    let cfg = traj.config();
    let n = cfg.nodes;
    let dropouts: Vec<(f64, f64)> = cfg.profile.dropouts.iter().chain(&sensors.dropouts).copied().collect();
    let in_dropout = |t: f64| dropouts.iter().any(|&(a, b)| t >= a && t <= b);

    let mut streams: Vec<(SensorKind, usize)> = Vec::new();
    if sensors.tip_pose {
        streams.push((SensorKind::TipPose, n - 1));
    }
    if sensors.base_pose {
        streams.push((SensorKind::BasePose, 0));
    }
    for g in sensors.gyro_nodes_for(n) {
        if g >= n {
            return Err(Error::OffGridSensor { node: g, nodes: n });
        }
        streams.push((SensorKind::Gyro, g));
    }

    let pose_noise = sensors.pose_noise()?;
    let gyro_noise = sensors.gyro_noise()?;
    let mut out = Vec::new();
    for (k, &(kind, node)) in streams.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let rate = match kind {
            SensorKind::Gyro => sensors.gyro_rate,
            _ => sensors.pose_rate,
        };
        for t in sample_times(&mut rng, rate, sensors.jitter, cfg.duration) {
            let x = traj.states(t)[node];
            let (value, noise) = match kind {
                SensorKind::Gyro => {
                    let e = Vector3::from_fn(|_, _| gaussian(&mut rng) * sensors.gyro_sigma);
                    (
                        MeasurementValue::Rate(lie::rotational(&x.velocity) + e),
                        gyro_noise.clone(),
                    )
                }
                _ => {
                    let (p, r) = (sensors.pose_sigma_position, sensors.pose_sigma_rotation);
                    let e = Vector6::from_fn(|i, _| gaussian(&mut rng) * if i < 3 { p } else { r });
                    (MeasurementValue::Pose(x.pose * lie::exp(&e)), pose_noise.clone())
                }
            };
            if kind == SensorKind::TipPose && in_dropout(t) {
                continue;
            }
            out.push(Measurement {
                kind,
                timestamp: t,
                node,
                value,
                noise,
            });
        }
    }
    sort_measurements(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(profile: Profile, duration: f64) -> TrajectoryConfig {
        TrajectoryConfig {
            profile,
            duration,
            ..Default::default()
        }
    }

    #[test]
    fn straight_rod_tip() {
        let poses = integrate_shape(|_| Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), &[0.0, 0.466], 0.466, 401);
        assert_relative_eq!(poses[1].translation, Vector3::new(0.466, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn constant_strain_matches_exponential() {
        let eps = Twist::new(1.0, 0.0, 0.0, 0.3, -1.2, 2.0);
        let poses = integrate_shape(|_| eps, &[0.2, 0.466], 0.466, 101);
        let expected = lie::exp(&(eps * 0.466));
        assert_relative_eq!(poses[1].to_matrix(), expected.to_matrix(), epsilon = 1e-9);
    }

    #[test]
    fn quarter_circle_arc() {
        let l = 0.466;
        let kappa = PI / (2.0 * l);
        let poses = integrate_shape(|_| Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, kappa), &[l], l, 401);
        let tip = poses[0];
        let r = 1.0 / kappa;
        assert_relative_eq!(tip.translation, Vector3::new(r, r, 0.0), epsilon = 1e-9);
        // Tangent rotated by π/2 about z.
        assert_relative_eq!(tip.rotation * Vector3::x(), Vector3::y(), epsilon = 1e-9);
    }

    #[test]
    fn refinement_converges() {
        let traj = Trajectory::new(cfg(Profile::named("fast-contact").unwrap(), 1.0)).unwrap();
        let coarse = integrate_shape(|s| traj.strain(s, 0.37), &[0.466], 0.466, 401);
        let fine = integrate_shape(|s| traj.strain(s, 0.37), &[0.466], 0.466, 801);
        assert!((coarse[0].translation - fine[0].translation).norm() < 1e-6);
    }

    #[test]
    fn constant_profile_is_static() {
        let gt = generate(&cfg(Profile::constant(2.0), 0.2)).unwrap();
        for slice in &gt.states {
            for (x, x0) in slice.iter().zip(&gt.states[0]) {
                assert!(x.velocity.norm() < 1e-9);
                assert_relative_eq!(x.pose.to_matrix(), x0.pose.to_matrix(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn sweep_is_periodic() {
        let mut p = Profile::sweep(1.5, 2.0);
        p.family = ProfileFamily::SinusoidalSweep;
        let traj = Trajectory::new(cfg(p, 10.0)).unwrap();
        // Torsion runs at half the sweep frequency, so the shape repeats every two periods.
        let a = traj.poses(0.3)[4];
        let b = traj.poses(4.3)[4];
        assert_relative_eq!(a.translation, b.translation, epsilon = 1e-9);
    }

    #[test]
    fn velocities_are_consistent_with_pose_increments() {
        let gt = generate(&cfg(Profile::named("impulse-1").unwrap(), 0.5)).unwrap();
        let h = 1.0 / 200.0;
        for k in 10..20 {
            for j in 0..5 {
                let a = &gt.states[k][j];
                let b = &gt.states[k + 1][j];
                let mid = (a.velocity + b.velocity) * 0.5;
                let inc = lie::log(&(a.pose.inverse() * b.pose)).unwrap() / h;
                assert!((inc - mid).norm() < 1e-2 * (1.0 + mid.norm()));
            }
        }
    }

    #[test]
    fn impulse_spikes_follow_kicks() {
        let mut p = Profile::sweep(0.0, 5.0);
        p.family = ProfileFamily::Impulse;
        p.kicks = vec![Kick {
            time: 1.0,
            amplitude: 2.0,
            frequency: 3.0,
            decay: 0.3,
        }];
        let traj = Trajectory::new(cfg(p, 3.0)).unwrap();
        let speed = |t: f64| traj.states(t)[4].velocity.norm();
        assert!(speed(0.5) < 1e-6);
        assert!(speed(1.05) > 0.1);
        assert!(speed(2.9) < 0.1 * speed(1.05));
    }

    #[test]
    fn noiseless_measurements_equal_truth() {
        let gt = generate(&cfg(Profile::named("slow-free-space").unwrap(), 0.5)).unwrap();
        let sensors = SensorConfig {
            pose_sigma_position: 0.0,
            pose_sigma_rotation: 0.0,
            gyro_sigma: 0.0,
            ..Default::default()
        };
        let ms = synthesize(&gt, &sensors, 1).unwrap();
        assert!(ms.len() > 50);
        for m in &ms {
            let x = gt.trajectory.states(m.timestamp)[m.node];
            match m.value {
                MeasurementValue::Pose(p) => assert_relative_eq!(p.to_matrix(), x.pose.to_matrix(), epsilon = 0.0),
                MeasurementValue::Rate(w) => assert_relative_eq!(w, lie::rotational(&x.velocity), epsilon = 0.0),
            }
        }
    }

    #[test]
    fn dropout_removes_tip_poses_only() {
        let gt = generate(&cfg(Profile::named("out-of-bounds").unwrap(), 7.0)).unwrap();
        let ms = synthesize(&gt, &SensorConfig::default(), 3).unwrap();
        let inside = |m: &Measurement| m.timestamp >= 5.0 && m.timestamp <= 6.0;
        assert!(!ms.iter().any(|m| m.kind == SensorKind::TipPose && inside(m)));
        let gyros = ms.iter().filter(|m| m.kind == SensorKind::Gyro && inside(m)).count();
        assert!(gyros >= 2 * 45);
    }

    #[test]
    fn stream_is_sorted_and_deterministic() {
        let gt = generate(&cfg(Profile::named("impulse-2").unwrap(), 1.0)).unwrap();
        let a = synthesize(&gt, &SensorConfig::default(), 9).unwrap();
        let b = synthesize(&gt, &SensorConfig::default(), 9).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let c = synthesize(&gt, &SensorConfig::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn position_noise_has_requested_spread() {
        let gt = generate(&cfg(Profile::constant(1.0), 0.1)).unwrap();
        let sensors = SensorConfig {
            pose_rate: 1000.0,
            base_pose: false,
            gyro_nodes: Some(vec![]),
            ..Default::default()
        };
        let truth = gt.states[0][4].pose;
        let mut sq = 0.0;
        let mut count = 0;
        for seed in 0..120 {
            for m in synthesize(&gt, &sensors, seed).unwrap() {
                if let MeasurementValue::Pose(p) = m.value {
                    // Right-perturbation noise lives in the body frame.
                    let d = truth.rotation.transpose() * (p.translation - truth.translation);
                    sq += d.norm_squared();
                    count += 3;
                }
            }
        }
        assert!(count >= 25_000, "count {count}");
        let std = (sq / count as f64).sqrt();
        assert!((std - 1e-3).abs() < 0.05e-3, "std {std}");
    }
}
