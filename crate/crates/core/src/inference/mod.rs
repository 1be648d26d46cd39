//! Initialization and the Gibbs-within-Metropolis sampler for a fixed number
//! of communities.

mod chain;
mod init;
mod updates;

pub use chain::{run_chain, run_chain_from, run_chains, AcceptRates, ChainDraws, McmcConfig, UpdateMask};
pub use init::{init_beta, init_membership, init_theta, initialize, BetaInit, InitConfig};
pub use updates::{sample_dirichlet, sample_sigma2, update_alpha, update_beta, update_membership, update_theta};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::model::BlockCoefficients;
use crate::rng;

/// Hyperparameters for one fit with `K` communities.
///
/// The coefficient prior is `N(mu, sigma_scale · I)` over `[β₀, β₁₁, β₁₂, …, β_KK]`,
/// `σ² ~ IG(a, b)`, and each `α_i ~ Dir(gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub mu: Vec<f64>,
    pub sigma_scale: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: Vec<f64>,
}

impl PriorConfig {
    /// Shape of the Beta distribution the Dirichlet concentrations are drawn from.
    pub fn gamma_beta_shape(k: usize) -> (f64, f64) {
        (1.0, k as f64)
    }

    /// `mu = 0`, `Σ = 100 I`, `a = b = 1`, `γ_k ~ Beta(1, K)` i.i.d.
    pub fn vague<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        PriorHyper::default().build(k, rng)
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.mu.len() != BlockCoefficients::free_count(k) {
            return Err(CalfError::DimensionMismatch {
                what: "prior mean",
                expected: BlockCoefficients::free_count(k),
                found: self.mu.len(),
            });
        }
        if self.gamma.len() != k {
            return Err(CalfError::DimensionMismatch {
                what: "Dirichlet concentration",
                expected: k,
                found: self.gamma.len(),
            });
        }
        if !(self.sigma_scale > 0.0 && self.a > 0.0 && self.b > 0.0) {
            return Err(CalfError::InvalidInput("prior scale, a and b must be positive".into()));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(CalfError::InvalidInput("Dirichlet concentrations must be positive".into()));
        }
        Ok(())
    }
}

/// `K`-independent prior settings, resolved into a [`PriorConfig`] per fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorHyper {
    pub mu: f64,
    pub sigma_scale: f64,
    pub a: f64,
    pub b: f64,
    /// Fixed symmetric concentration; `None` draws each `γ_k` from `Beta(1, K)`.
    pub gamma: Option<f64>,
}

impl Default for PriorHyper {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma_scale: 100.0,
            a: 1.0,
            b: 1.0,
            gamma: None,
        }
    }
}

impl PriorHyper {
    pub fn build<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> PriorConfig {
        let gamma = match self.gamma {
            Some(g) => vec![g; k],
            None => {
                let (s1, s2) = PriorConfig::gamma_beta_shape(k);
                let beta = Beta::new(s1, s2).expect("valid Beta shape");
                (0..k).map(|_| beta.sample(rng).max(f64::MIN_POSITIVE)).collect()
            }
        };
        PriorConfig {
            mu: vec![self.mu; BlockCoefficients::free_count(k)],
            sigma_scale: self.sigma_scale,
            a: self.a,
            b: self.b,
            gamma,
        }
    }

    /// Resolves the prior of a fit seeded with `seed`; the draw of `γ` is
    /// shared by every chain of that fit.
    pub fn resolve(&self, k: usize, seed: u64) -> PriorConfig {
        let mut r = rng::stream(rng::child_seed(seed, rng::tags::PRIOR), 0);
        self.build(k, &mut r)
    }
}
