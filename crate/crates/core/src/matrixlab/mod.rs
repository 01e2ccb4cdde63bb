//! Observation model, sample covariance and the two generalized inverses.
//!
//! Data follow `Y = Σ^{1/2} X` with `X` a `p × n` matrix of i.i.d. zero-mean,
//! unit-variance noise and `n < p`, so `S = (1/n) Y Y'` is singular. Both
//! inverses are assembled from an `n × n` Gram matrix:
//!
//! ```text
//! S⁺ = (1/n) Y ((1/n) Y'Y)^{-2} Y'
//! S⁻ = (1/n) Σ^{-1/2} X ((1/n) X'X)^{-2} X' Σ^{-1/2}
//! ```

mod inverses;
mod io;
mod model;
mod sampling;
mod stats;

pub use inverses::{
    moore_penrose_inverse, penrose_residuals, reflexive_factor, reflexive_inverse, GramFactor, InversePair,
    PenroseResiduals, GRAM_CONDITION_LIMIT,
};
pub use io::{read_matrix, write_atomic, write_matrix};
pub use model::{CovarianceModel, Scenario};
pub use sampling::{build_observations, mix_seed, sample_covariance, sample_noise, Noise};
pub use stats::{frobenius_sq, spectral_stats, trace, SpectralStats};

pub use nalgebra::DMatrix;
