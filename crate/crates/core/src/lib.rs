//! Kalman filtering with group-testing fault localization.
//!
//! Sensors are pooled into random groups; each group runs a cumulative χ²
//! consistency test over a window, the fused filter keeps only sensors from
//! groups that still pass, and the binary test outcomes are decoded into a
//! per-(sensor, step) fault estimate with an LP relaxation.

pub mod attack;
mod bits;
pub mod chi2;
pub mod config;
pub mod decoder;
pub mod detector;
pub mod dynamics;
mod error;
pub mod group_testing;
pub mod harness;
pub mod lp;
pub mod report;
pub mod seeds;

pub use nalgebra;

pub use attack::{AttackModel, BiasMode, ScenarioConfig};
pub use bits::Bits;
pub use decoder::{decode, relax, DecoderConfig, LpSolution};
pub use detector::{DetectorConfig, SequentialDetector, WindowResult};
pub use dynamics::{GaussianState, SensorModel, SystemModel};
pub use error::{Error, Result};
pub use group_testing::{FaultVector, OutcomeVector, SamplingMatrix};
pub use harness::{run_experiment, run_sweep, ExperimentConfig, ExperimentReport, Method, MetricsReport, SamplingRate};
