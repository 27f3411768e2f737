//! Hinge-joint axis identification for two arbitrarily mounted 6-DOF IMUs.
//!
//! The joint axis is estimated in both sensor frames by minimizing a weighted
//! sum of squared gyroscope and accelerometer constraint residuals with
//! Gauss-Newton. The accelerometer term resolves the sign pairing of the two
//! axes that gyroscope data alone cannot.
//!
//! The crate also contains a rigid-body hinge simulator that produces
//! ground-truth-labeled recordings and an evaluation harness that compares
//! residual weighting strategies on segmented data.
//!
//! Runnable walkthroughs live under `examples/`; the `hinge-axis` binary
//! exposes the same pipeline on CSV files.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod kinematics;
pub mod recording;
pub mod residuals;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use kinematics::{AxisPair, AxisParams, Mat3, Vec3};
pub use recording::RecordingPair;
pub use residuals::{AccWeighting, NoiseModel, ResidualWeights, SamplePair};
pub use solver::{EstimationResult, SolverConfig};
