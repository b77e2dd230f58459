//! Finite-shot estimation of Pauli expectations.
//!
//! A ±1-valued observable measured `N` times yields `k` plus-one outcomes with
//! `k ~ Binomial(N, (1 + p)/2)`, so the estimate is `(2k - N)/N`. Drawing the
//! binomial directly is distributionally identical to simulating bitstrings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Shots per quantity used by the noisy experiments.
pub const DEFAULT_SHOTS: u64 = 1024;

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ExpectationEstimator {
    Exact,
    Shots { shots: u64, rng: ChaCha8Rng },
}

impl ExpectationEstimator {
    pub fn exact() -> Self {
        ExpectationEstimator::Exact
    }

    /// Shot-sampled estimator with a deterministic stream.
    ///
    /// Panics if `shots` is zero.
    pub fn shots(shots: u64, seed: u64) -> Self {
        assert!(shots > 0, "shot count must be positive");
        ExpectationEstimator::Shots {
            shots,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Builds from an optional shot count; `None` means exact.
    pub fn from_options(shots: Option<u64>, seed: u64) -> Self {
        match shots {
            Some(n) => Self::shots(n, seed),
            None => Self::Exact,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ExpectationEstimator::Exact)
    }

    /// Estimate of a ±1-observable whose exact expectation is `exact`.
    pub fn estimate(&mut self, exact: f64) -> f64 {
        let p = exact.clamp(-1.0, 1.0);
        match self {
            ExpectationEstimator::Exact => p,
            ExpectationEstimator::Shots { shots, rng } => {
                let success = (1.0 + p) / 2.0;
                let k = Binomial::new(*shots, success)
                    .expect("success probability lies in [0, 1]")
                    .sample(rng);
                (2.0 * k as f64 - *shots as f64) / *shots as f64
            }
        }
    }

    /// Estimate of a probability in `[0, 1]` (e.g. a compute-uncompute overlap).
    pub fn estimate_probability(&mut self, exact: f64) -> f64 {
        (1.0 + self.estimate(2.0 * exact.clamp(0.0, 1.0) - 1.0)) / 2.0
    }
}
