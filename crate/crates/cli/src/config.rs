//! Run configuration: a flat `key = value` file, then command-line flags.
//!
//! ```text
//! # comment
//! profile = fast-contact
//! seed = 7
//! window_seconds = 0.1
//! windows = 0, 0.033, 0.066, 0.1, 0.2
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use crswf_core::io::MeasurementNoise;
use crswf_core::sim::{Profile, SensorConfig, TrajectoryConfig, PROFILE_NAMES};
use crswf_core::window::RobotModel;
use crswf_core::{Error, ExtractionPolicy, PriorPowerSpectra, Result, StateConfig, SwfConfig};
use nalgebra::{Matrix6, Vector6};

/// Window lengths of the default sweep, in seconds.
pub const DEFAULT_WINDOWS: [f64; 5] = [0.0, 0.033, 0.066, 0.1, 0.2];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub measurements: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub estimates: Option<PathBuf>,
    pub profile: String,
    pub seed: u64,
    /// Estimation horizon; when unset, `estimate` uses the last measurement.
    pub duration: Option<f64>,
    pub length: f64,
    pub nodes: usize,
    pub truth_rate: f64,
    pub sensors: SensorConfig,
    pub swf: SwfConfig,
    pub qc_time: [f64; 2],
    pub qc_space: [f64; 2],
    pub windows: Vec<f64>,
    pub profiles: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spectra = PriorPowerSpectra::default();
        Self {
            out: PathBuf::from("out"),
            measurements: None,
            truth: None,
            estimates: None,
            profile: "slow-free-space".into(),
            seed: 0,
            duration: None,
            length: 0.466,
            nodes: 5,
            truth_rate: 200.0,
            sensors: SensorConfig::default(),
            swf: SwfConfig::default(),
            qc_time: [spectra.time[(0, 0)], spectra.time[(3, 3)]],
            qc_space: [spectra.space[(0, 0)], spectra.space[(3, 3)]],
            windows: DEFAULT_WINDOWS.to_vec(),
            profiles: PROFILE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn diag(pair: [f64; 2]) -> Matrix6<f64> {
    let [l, a] = pair;
    Matrix6::from_diagonal(&Vector6::new(l, l, l, a, a, a))
}

impl RunConfig {
    /// Set one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.sensors;
        match key {
            "out" => self.out = PathBuf::from(value),
            "measurements" => self.measurements = Some(PathBuf::from(value)),
            "truth" => self.truth = Some(PathBuf::from(value)),
            "estimates" => self.estimates = Some(PathBuf::from(value)),
            "profile" => self.profile = value.to_string(),
            "seed" => self.seed = parse(key, value)?,
            "duration" => self.duration = Some(parse(key, value)?),
            "length" => self.length = parse(key, value)?,
            "nodes" => self.nodes = parse(key, value)?,
            "truth_rate" => self.truth_rate = parse(key, value)?,
            "pose_rate" => s.pose_rate = parse(key, value)?,
            "gyro_rate" => s.gyro_rate = parse(key, value)?,
            "pose_sigma_position" => s.pose_sigma_position = parse(key, value)?,
            "pose_sigma_rotation" => s.pose_sigma_rotation = parse(key, value)?,
            "gyro_sigma" => s.gyro_sigma = parse(key, value)?,
            "jitter" => s.jitter = parse(key, value)?,
            "base_pose" => s.base_pose = flag(key, value)?,
            "tip_pose" => s.tip_pose = flag(key, value)?,
            "gyro_nodes" => s.gyro_nodes = Some(list(key, value)?),
            "window_seconds" => self.swf.window_seconds = parse(key, value)?,
            "dt" => self.swf.dt = parse(key, value)?,
            "policy" => {
                self.swf.policy = match value {
                    "back" => ExtractionPolicy::Back,
                    "front" => ExtractionPolicy::Front,
                    _ => {
                        return Err(Error::Config(format!(
                            "`policy`: expected back or front, got `{value}`"
                        )))
                    }
                }
            }
            "max_iterations" => self.swf.max_iterations = parse(key, value)?,
            "delta_tol" => self.swf.delta_tol = parse(key, value)?,
            "qc_time_linear" => self.qc_time[0] = parse(key, value)?,
            "qc_time_angular" => self.qc_time[1] = parse(key, value)?,
            "qc_space_linear" => self.qc_space[0] = parse(key, value)?,
            "qc_space_angular" => self.qc_space[1] = parse(key, value)?,
            "windows" => self.windows = list(key, value)?,
            "profiles" => self.profiles = list(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a config file's contents.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.swf.validate()?;
        self.sensors.validate()?;
        self.state().validate()?;
        Profile::named(&self.profile)?;
        for p in &self.profiles {
            Profile::named(p)?;
        }
        if let Some(d) = self.duration {
            if !(d > 0.0) {
                return Err(Error::Config("duration must be positive".into()));
            }
        }
        if self.windows.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("window lengths must be non-negative".into()));
        }
        let qc_ok = self
            .qc_time
            .iter()
            .chain(&self.qc_space)
            .all(|q| *q > 0.0 && q.is_finite());
        if !qc_ok {
            return Err(Error::Config("power spectral densities must be positive".into()));
        }
        Ok(())
    }

    pub fn duration_or_default(&self) -> f64 {
        self.duration.unwrap_or(10.0)
    }

    pub fn trajectory(&self, profile: &str) -> Result<TrajectoryConfig> {
        Ok(TrajectoryConfig {
            length: self.length,
            duration: self.duration_or_default(),
            profile: Profile::named(profile)?,
            seed: self.seed,
            nodes: self.nodes,
            truth_rate: self.truth_rate,
            ..Default::default()
        })
    }

    pub fn state(&self) -> StateConfig {
        StateConfig {
            nodes: self.nodes,
            length: self.length,
            dt: self.swf.dt,
            window_slices: self.swf.window_slices(),
        }
    }

    pub fn spectra(&self) -> PriorPowerSpectra {
        PriorPowerSpectra {
            time: diag(self.qc_time),
            space: diag(self.qc_space),
        }
    }

    pub fn model(&self) -> RobotModel {
        RobotModel::new(self.state(), self.spectra())
    }

    pub fn noise(&self) -> Result<MeasurementNoise> {
        Ok(MeasurementNoise {
            pose: self.sensors.pose_noise()?,
            gyro: self.sensors.gyro_noise()?,
        })
    }

    pub fn arcs(&self) -> Vec<f64> {
        let st = self.state();
        (0..st.nodes).map(|j| st.arc_length(j)).collect()
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
