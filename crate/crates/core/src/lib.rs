//! Quantized channel-state feedback over Rician fading.
//!
//! The receiver splits the SNR axis into `Λ` regions and feeds back the region
//! index; the transmitter sends at that region's rate. This crate provides the
//! channel law, goodput evaluation, exact optimizers for the thresholds, K-factor
//! estimators (moment inversions and a boosted-tree regressor) and a tabular
//! Q-learning adaptor that tunes thresholds online while K drifts.
//!
//! Channel, feedback, oracle and moment code is generic over [`Scalar`]
//! (`f32` or `f64`); the tree regressor, the learner and the experiment
//! harness work in `f64`.

pub mod channel;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod kest;
pub mod numeric;
pub mod oracle;
pub mod rl;
pub mod rng;
pub mod scalar;

pub use channel::{capacity, capacity_inverse, sample_gammas, ChannelSample, RicianSampler, RicianSpec};
pub use error::{Error, Result};
pub use feedback::{analytic_goodput, empirical_goodput, FeedbackScheme, GoodputReport};
pub use kest::{EstimatorMethod, EstimatorModel, KEstimate, MomentFeatures, TrainingTable};
pub use oracle::{brute_force, ergodic_capacity, no_csi_optimum, threshold_recursion, Method, OracleSolution, RecursionVariant};
pub use scalar::{db_to_linear, linear_to_db, Scalar};

pub type RicianSpecF64 = RicianSpec<f64>;
pub type RicianSpecF32 = RicianSpec<f32>;
pub type FeedbackSchemeF64 = FeedbackScheme<f64>;
pub type FeedbackSchemeF32 = FeedbackScheme<f32>;
pub type GoodputReportF64 = GoodputReport<f64>;
pub type GoodputReportF32 = GoodputReport<f32>;
pub type OracleSolutionF64 = OracleSolution<f64>;
pub type OracleSolutionF32 = OracleSolution<f32>;
pub type MomentFeaturesF64 = MomentFeatures<f64>;
pub type MomentFeaturesF32 = MomentFeatures<f32>;
pub type KEstimateF64 = KEstimate<f64>;
pub type KEstimateF32 = KEstimate<f32>;
