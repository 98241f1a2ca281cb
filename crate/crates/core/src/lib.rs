//! Continuous-time sliding-window estimation for continuum robots.
//!
//! The robot is discretized into nodes along its arc length and slices in
//! time; each node carries a pose, a body velocity and a body strain. Gaussian
//! process priors in time and arc length, plus asynchronous pose and
//! gyroscope measurements, form a factor graph that is solved over a sliding
//! window of recent slices.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factors;
pub mod interp;
pub mod io;
pub mod lie;
pub mod metrics;
pub mod sim;
pub mod solver;
pub mod state;
pub mod window;

pub use error::{Error, Result};
pub use factors::{NoiseModel, PriorPowerSpectra};
pub use lie::{Pose, Twist};
pub use sim::{Measurement, MeasurementValue, SensorKind};
pub use state::{GridIndex, NodeState, StateConfig, TimeSlice};
pub use window::{ExtractionPolicy, SliceEstimate, SlidingWindow, SwfConfig};
