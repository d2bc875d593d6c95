//! Charging-node ranking for EV-to-EV energy trading.
//!
//! The pipeline runs at desk scale end to end: a seeded synthetic world
//! and journey generator, graded-label construction (fuzzy-weighted
//! TOPSIS refined by Beta-mixture smoothing), a from-scratch
//! gradient-boosted tree ranker with LambdaRank-style and
//! pairwise-logistic objectives, ranking metrics, and an experiment
//! harness for sensitivity sweeps and ablations.

pub mod error;
pub mod features;
pub mod geo;
pub mod labeling;
pub mod metrics;
pub mod ranker;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
