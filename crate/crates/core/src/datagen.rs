//! Synthetic networks with planted communities, covariates and latent effects.
//!
//! Recipe for `n` nodes and `K` communities:
//!
//! 1. labels i.i.d. with `P(k) ∝ K − k + 1` for 1-based `k`;
//! 2. community centers equally spaced on a circle of radius `√(2ω)`, and
//!    covariates `X_i ~ N(center_{π_i}, I_p)`;
//! 3. `θ_i ~ N(0, theta_variance)`;
//! 4. `β_kk` equally spaced over `beta_within_range`, `β_kl = beta_between`,
//!    and every dyad an independent Bernoulli draw from the model.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;
use crate::model::{inv_logit, BlockCoefficients, ModelState, Network, NodeData};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub omega: f64,
    pub beta0: f64,
    pub beta_within_range: (f64, f64),
    pub beta_between: f64,
    /// Variance (not standard deviation) of the latent effects.
    pub theta_variance: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 400,
            k: 2,
            p: 2,
            omega: 1.5,
            beta0: 1.0,
            beta_within_range: (-1.6, -1.0),
            beta_between: -3.0,
            theta_variance: 0.3,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(CalfError::InvalidInput(format!("need n >= K >= 1, got n = {}, K = {}", self.n, self.k)));
        }
        if self.p == 0 {
            return Err(CalfError::InvalidInput("covariate dimension p must be at least 1".into()));
        }
        if !(self.omega > 0.0) {
            return Err(CalfError::InvalidInput(format!("omega = {} must be positive", self.omega)));
        }
        if !(self.theta_variance >= 0.0) {
            return Err(CalfError::InvalidInput(format!(
                "theta_variance = {} must be non-negative",
                self.theta_variance
            )));
        }
        Ok(())
    }

    /// The coefficients used to draw edges.
    pub fn coefficients(&self) -> BlockCoefficients {
        let within = within_coefficients(self.k, self.beta_within_range);
        let mut c = BlockCoefficients::zeros(self.k);
        c.beta0 = self.beta0;
        for (a, b) in BlockCoefficients::pairs(self.k) {
            c.set(a, b, if a == b { within[a] } else { self.beta_between });
        }
        c
    }
}

/// `K` equally spaced values from `range.0` to `range.1`; a single block gets
/// the range start.
pub fn within_coefficients(k: usize, range: (f64, f64)) -> Vec<f64> {
    if k <= 1 {
        return vec![range.0; k];
    }
    let step = (range.1 - range.0) / (k - 1) as f64;
    (0..k).map(|a| if a == k - 1 { range.1 } else { range.0 + step * a as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNetwork {
    pub network: Network,
    pub node_data: NodeData,
    pub true_membership: Vec<usize>,
    pub true_theta: Vec<f64>,
    pub true_state: ModelState,
}

/// Unbalanced labels with probabilities proportional to `(K, K−1, …, 1)`.
pub fn sample_membership<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if k <= 1 {
        return vec![0; n];
    }
    let dist = WeightedIndex::new((0..k).map(|a| (k - a) as f64)).expect("positive weights");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Community centers of norm `√(2ω)`. Block `c` (0-based) sits at angle
/// `2(c+1)π/K` in the first two coordinates; remaining coordinates are zero.
/// With `p = 1` the centers alternate between `−√(2ω)` and `+√(2ω)`.
pub fn cluster_centers(k: usize, p: usize, omega: f64) -> Result<DenseMatrix> {
    if p == 0 {
        return Err(CalfError::InvalidInput("covariate dimension p must be at least 1".into()));
    }
    let r = (2.0 * omega).sqrt();
    let mut centers = DenseMatrix::zeros(k, p);
    for c in 0..k {
        if p == 1 {
            centers[(c, 0)] = if c % 2 == 0 { -r } else { r };
        } else {
            let angle = 2.0 * (c + 1) as f64 * std::f64::consts::PI / k as f64;
            centers[(c, 0)] = r * angle.cos();
            centers[(c, 1)] = r * angle.sin();
        }
    }
    Ok(centers)
}

/// `X_i ~ N(center_{π_i}, I_p)`.
pub fn sample_covariates<R: Rng + ?Sized>(membership: &[usize], centers: &DenseMatrix, rng: &mut R) -> DenseMatrix {
    let p = centers.cols();
    let mut x = DenseMatrix::zeros(membership.len(), p);
    for (i, &z) in membership.iter().enumerate() {
        for c in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, c)] = centers[(z, c)] + e;
        }
    }
    x
}

/// Draws an adjacency matrix from the model at a fixed state.
pub fn sample_network<R: Rng + ?Sized>(nd: &NodeData, state: &ModelState, rng: &mut R) -> Network {
    let n = nd.n();
    let mut adj = vec![0u8; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let prob = inv_logit(state.logit(nd, i, j));
            if rng.random::<f64>() < prob {
                adj[i * n + j] = 1;
                adj[j * n + i] = 1;
            }
        }
    }
    Network::from_adjacency(n, adj).expect("sampled adjacency is valid by construction")
}

/// Runs the full recipe with the generator `rng::stream(config.seed, 0)`.
pub fn generate(config: &GenConfig) -> Result<SyntheticNetwork> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, 0);
    let membership = sample_membership(config.n, config.k, &mut rng);
    let centers = cluster_centers(config.k, config.p, config.omega)?;
    let x = sample_covariates(&membership, &centers, &mut rng);
    let theta: Vec<f64> = if config.theta_variance > 0.0 {
        let normal = Normal::new(0.0, config.theta_variance.sqrt()).expect("finite sd");
        (0..config.n).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; config.n]
    };
    let node_data = NodeData::euclidean(x)?;

    let mut true_state = ModelState::new(
        config.coefficients(),
        theta.clone(),
        config.theta_variance.max(f64::MIN_POSITIVE),
        membership.clone(),
    )?;
    for i in 0..config.n {
        let z = true_state.one_hot(i);
        true_state.alpha.row_mut(i).copy_from_slice(&z);
    }
    let network = sample_network(&node_data, &true_state, &mut rng);
    Ok(SyntheticNetwork {
        network,
        node_data,
        true_membership: membership,
        true_theta: theta,
        true_state,
    })
}
