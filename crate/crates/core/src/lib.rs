//! Noise-constrained least-mean absolute third (NCLMAT) adaptive
//! filters, their reference variants, a Monte Carlo harness and the
//! analytical MSD model used to predict their behaviour.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod filter;
pub mod harness;
pub mod signals;
pub mod theory;

pub use algorithms::{Algorithm, NcParams, NcState, Rule};
pub use error::{Error, Result};
pub use filter::{RegressorWindow, SamplePair, TapWeights};
pub use harness::{preset, ExperimentConfig, LearningCurve};
pub use signals::{InputSpec, NoiseFamily, NoiseSpec, PlantDrift, PlantSpec, Seed, Stream};
pub use theory::{AccumulatorMode, MsdTrajectory, PowerEstimator, SteadyState, TheoryParams};
