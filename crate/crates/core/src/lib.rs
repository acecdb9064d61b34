// SPDX-License-Identifier: Apache-2.0

//! Differentially private selection with smooth-sensitivity noisy max,
//! its baselines, exact probability oracles and two applications.

// `!(x > 0.0)` is used deliberately so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod mechanisms;
pub mod noise;
pub mod percentile;
pub mod quadrature;
pub mod rng;
pub mod sensitivity;
pub mod trees;

pub use error::{Error, Result};
pub use experiment::{ExperimentResult, Mode, ResultRow};
pub use mechanisms::{Mechanism, RnmNoise, ScoreContext, Selector, SnmNoise};
pub use noise::{CalibratedNoise, NoiseKind, PrivacyBudget};
pub use percentile::{PercentileInstance, SmoothRule};
pub use sensitivity::{Database, SmoothSensitivity, UtilityModel};
