use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::CovarianceModel;
use crate::error::{Error, Result};

/// Zero-mean, unit-variance noise laws for the entries of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    #[default]
    Gaussian,
    /// ±1 with probability ½ each.
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformScaled,
}

impl Noise {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => rng.sample(StandardNormal),
            Noise::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Noise::UniformScaled => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
        }
    }
}

impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Noise::Gaussian),
            "rademacher" => Ok(Noise::Rademacher),
            "uniform" | "uniform-scaled" => Ok(Noise::UniformScaled),
            other => Err(Error::Validation(format!(
                "unknown noise `{other}` (expected gaussian, rademacher or uniform-scaled)"
            ))),
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Noise::Gaussian => "gaussian",
            Noise::Rademacher => "rademacher",
            Noise::UniformScaled => "uniform-scaled",
        })
    }
}

/// `p × n` noise matrix, filled column by column from a ChaCha8 stream seeded with `seed`.
pub fn sample_noise(p: usize, n: usize, noise: Noise, seed: u64) -> Result<DMatrix<f64>> {
    if p == 0 || n == 0 {
        return Err(Error::Validation(format!(
            "noise matrix needs p, n >= 1 (got {p} x {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DMatrix::from_iterator(
        p,
        n,
        (0..p * n).map(|_| noise.draw(&mut rng)),
    ))
}

/// `Y = Σ^{1/2} X`.
pub fn build_observations(model: &CovarianceModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.apply_sqrt(x)
}

/// `S = (1/n) Y Y'`.
pub fn sample_covariance(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.ncols() as f64;
    (y * y.transpose()) / n
}

/// Stable 64-bit mix of several words (splitmix64 finalizer chained over the inputs).
pub fn mix_seed(parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &p| splitmix(acc ^ splitmix(p)))
}
