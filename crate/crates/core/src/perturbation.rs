//! Seeded exponential perturbations.
//!
//! Draws come from a ChaCha8 stream keyed by the seed; the stream number is
//! the step index in per-step mode and zero in initial-only mode, so every
//! vector is reproducible from `(seed, mode, n, t)` alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::PerturbationVector;
use crate::error::{FplError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// One vector drawn before the first step and reused.
    InitialOnly,
    /// A fresh independent vector at every step.
    PerStep,
}

impl std::str::FromStr for PerturbationMode {
    type Err = FplError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial_only" | "initial" => Ok(Self::InitialOnly),
            "per_step" => Ok(Self::PerStep),
            other => Err(FplError::invalid(format!("unknown perturbation mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InitialOnly => "initial_only",
            Self::PerStep => "per_step",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSource {
    pub seed: u64,
    pub mode: PerturbationMode,
}

impl PerturbationSource {
    pub fn new(seed: u64, mode: PerturbationMode) -> Self {
        Self { seed, mode }
    }

    /// Draws `q` for step `t` (one-based).
    pub fn sample(&self, n: usize, t: u64) -> Result<PerturbationVector> {
        sample_perturbation(self, n, t)
    }

    /// An independent source for a different consumer of randomness
    /// (e.g. the meta level of a hierarchy), same mode.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: mix_seed(self.seed, tag),
            mode: self.mode,
        }
    }
}

/// Inverse-CDF transform of a uniform draw in `[0, 1)` to `Exp(1)`.
pub fn exponential_from_uniform(u: f64) -> f64 {
    -(-u).ln_1p()
}

pub fn sample_perturbation(source: &PerturbationSource, n: usize, t: u64) -> Result<PerturbationVector> {
    if n == 0 {
        return Err(FplError::invalid("perturbation dimension must be positive"));
    }
    if t == 0 {
        return Err(FplError::invalid("steps are numbered from 1"));
    }
    let stream = match source.mode {
        PerturbationMode::InitialOnly => 0,
        PerturbationMode::PerStep => t,
    };
    let mut rng = stream_rng(source.seed, stream);
    let values = (0..n).map(|_| exponential_from_uniform(rng.gen::<f64>())).collect();
    Ok(PerturbationVector::new(values).expect("exponential draws are non-negative"))
}

/// A ChaCha8 generator positioned at the start of `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer over `seed ^ tag`.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag.rotate_left(32)).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
