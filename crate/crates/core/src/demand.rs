//! Seeded customer demand.
//!
//! Streams are driven by `ChaCha8Rng` seeded from a `u64`. Poisson draws use
//! sequential inversion of the CDF (one uniform per draw); normal draws use the
//! ziggurat sampler from `rand_distr`. Low-demand normal draws are truncated at
//! zero and then rounded to the nearest integer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemandModel<T> {
    HighPoisson { mean: T },
    LowNormal { mean: T, std: T },
    Scripted(Vec<T>),
}

impl<T: Scalar> DemandModel<T> {
    /// Poisson with mean 10.
    pub fn high() -> Self {
        DemandModel::HighPoisson { mean: T::lit(10.0) }
    }

    /// Normal(2, 1), truncated and rounded.
    pub fn low() -> Self {
        DemandModel::LowNormal {
            mean: T::lit(2.0),
            std: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DemandModel::HighPoisson { mean } if !(mean.is_finite() && *mean > T::zero()) => {
                Err(Error::Config(format!("poisson mean must be positive, got {mean}")))
            }
            DemandModel::LowNormal { mean, std }
                if !(mean.is_finite() && *mean > T::zero() && std.is_finite() && *std > T::zero()) =>
            {
                Err(Error::Config(format!(
                    "normal demand needs positive mean and std, got ({mean}, {std})"
                )))
            }
            DemandModel::Scripted(seq) if seq.iter().any(|d| !d.is_finite() || *d < T::zero()) => {
                Err(Error::Config("scripted demand values must be finite and >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// One draw from a stochastic model. Scripted models have no random draw;
    /// use [`DemandSampler`] for them.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<T> {
        match self {
            DemandModel::HighPoisson { mean } => Some(T::from_usize_lossy(poisson_inversion(
                mean.as_f64(),
                rng,
            ))),
            DemandModel::LowNormal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                let x = mean.as_f64() + std.as_f64() * z;
                Some(T::lit(x.max(0.0).round()))
            }
            DemandModel::Scripted(_) => None,
        }
    }
}

fn poisson_inversion<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut k = 0usize;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // The tail beyond mean + 40 sd is below f64 resolution for the means used here.
    let cap = (mean + 40.0 * mean.sqrt() + 40.0) as usize;
    while u > cdf && k < cap {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// A demand model together with the generator state that drives it.
#[derive(Debug, Clone)]
pub struct DemandSampler<T> {
    model: DemandModel<T>,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl<T: Scalar> DemandSampler<T> {
    pub fn new(model: DemandModel<T>, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cursor: 0,
        })
    }

    pub fn model(&self) -> &DemandModel<T> {
        &self.model
    }

    pub fn sample(&mut self) -> Result<T> {
        match &self.model {
            DemandModel::Scripted(seq) => {
                let d = seq
                    .get(self.cursor)
                    .copied()
                    .ok_or(Error::ScriptExhausted(seq.len()))?;
                self.cursor += 1;
                Ok(d)
            }
            model => Ok(model.draw(&mut self.rng).expect("stochastic model")),
        }
    }

    /// Restarts a scripted sequence from its first element.
    pub fn rewind(&mut self) {
        self.cursor = 0;
    }
}
