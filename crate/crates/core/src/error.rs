// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The t-ball around a database is too large to enumerate.
    #[error(
        "brute-force enumeration would visit more than {limit} databases; \
         use the analytic sensitivity of the application instead"
    )]
    EnumerationBudget { limit: usize },

    #[error(
        "smooth sensitivity was computed with beta = {sensitivity_beta} but the noise \
         was calibrated with beta = {noise_beta}"
    )]
    BetaMismatch {
        sensitivity_beta: f64,
        noise_beta: f64,
    },

    #[error("the smooth-sensitivity exponential mechanism is not differentially private; pass an explicit unsafe acknowledgment to run it")]
    UnsafeNotAcknowledged,

    #[error("quadrature did not converge (residual {residual:.3e})")]
    Quadrature { residual: f64 },

    #[error("audit requires neighbouring databases, got distance {distance}")]
    NotNeighbors { distance: usize },

    #[error("unsupported mechanism `{0}`")]
    UnsupportedMechanism(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
