use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::updates::{sample_sigma2, update_alpha};
use super::PriorConfig;
use crate::error::{CalfError, Result};
use crate::evaluation::{lloyd, CenterRule};
use crate::model::{inv_logit, BlockCoefficients, ModelState, Network, NodeData};

/// Coefficient norm beyond which the logistic fit is treated as separated.
const DIVERGED_NORM: f64 = 1e4;
/// Diagonal jitter keeping the normal equations solvable when a block pair has no dyads.
const JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    /// Offset `c` in `θ_i = log(d_i / d̄ + c)`.
    pub offset_c: f64,
    pub kmedians_restarts: usize,
    pub irls_max_iter: usize,
    pub irls_tol: f64,
    /// L2 penalty on the logistic coefficients; zero gives the plain MLE.
    pub ridge: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            offset_c: 1e-4,
            kmedians_restarts: 10,
            irls_max_iter: 50,
            irls_tol: 1e-8,
            ridge: 0.0,
        }
    }
}

/// Initial labels from the best of `kmedians_restarts` k-medians runs on the covariates.
pub fn init_membership<R: Rng + ?Sized>(nd: &NodeData, k: usize, cfg: &InitConfig, rng: &mut R) -> Result<Vec<usize>> {
    Ok(lloyd(nd.covariates(), k, CenterRule::Median, cfg.kmedians_restarts.max(1), 100, rng)?.labels)
}

/// `θ_i = log(d_i / mean_degree + c)`.
pub fn init_theta(degrees: &[usize], mean_degree: f64, c: f64) -> Result<Vec<f64>> {
    if !(mean_degree > 0.0) {
        return Err(CalfError::AllIsolated);
    }
    if !(c > 0.0) {
        return Err(CalfError::InvalidInput(format!("offset c = {c} must be positive")));
    }
    Ok(degrees.iter().map(|&d| (d as f64 / mean_degree + c).ln()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaInit {
    pub coefficients: BlockCoefficients,
    /// Fitted slope on `θ_i + θ_j`; not part of the model state.
    pub theta_slope: f64,
    /// `false` when IRLS hit `irls_max_iter`; the coefficients are then zero.
    pub converged: bool,
    pub iterations: usize,
}

/// Dyad-level logistic regression by IRLS.
///
/// Design: intercept, one column `S_ij · 1({π_i, π_j} = {k, l})` per block
/// pair, and `θ_i + θ_j` with a free slope.
pub fn init_beta(
    net: &Network,
    nd: &NodeData,
    labels: &[usize],
    theta_init: &[f64],
    k: usize,
    cfg: &InitConfig,
) -> Result<BetaInit> {
    let n = net.n();
    for (what, found) in [("labels", labels.len()), ("theta", theta_init.len()), ("node data", nd.n())] {
        if found != n {
            return Err(CalfError::DimensionMismatch { what, expected: n, found });
        }
    }
    if labels.iter().any(|&z| z >= k) {
        return Err(CalfError::InvalidInput(format!("labels must lie in 0..{k}")));
    }
    let pairs = k * (k + 1) / 2;
    let q = pairs + 2;
    let index = BlockCoefficients::zeros(k);

    // each dyad row has three nonzeros: intercept, its pair column, and the offset column
    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::with_capacity(net.dyad_count());
    for i in 0..n {
        let arow = net.row(i);
        let srow = nd.similarity().row(i);
        for j in i + 1..n {
            let col = 1 + index.pair_index(labels[i], labels[j]);
            rows.push((col, srow[j], theta_init[i] + theta_init[j], arow[j] as f64));
        }
    }

    let mut coef = DVector::<f64>::zeros(q);
    let mut norms = Vec::with_capacity(cfg.irls_max_iter);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.irls_max_iter {
        iterations += 1;
        let mut xtwx = DMatrix::<f64>::zeros(q, q);
        let mut xtwz = DVector::<f64>::zeros(q);
        for &(col, s, t, y) in &rows {
            let eta = coef[0] + coef[col] * s + coef[q - 1] * t;
            let mu = inv_logit(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let z = eta + (y - mu) / w;
            let idx = [0, col, q - 1];
            let val = [1.0, s, t];
            for a in 0..3 {
                xtwz[idx[a]] += w * val[a] * z;
                for b in 0..3 {
                    xtwx[(idx[a], idx[b])] += w * val[a] * val[b];
                }
            }
        }
        for d in 0..q {
            xtwx[(d, d)] += cfg.ridge + JITTER;
        }
        let next = match xtwx.clone().cholesky() {
            Some(ch) => ch.solve(&xtwz),
            None => xtwx
                .lu()
                .solve(&xtwz)
                .ok_or_else(|| CalfError::InvalidInput("singular logistic design".into()))?,
        };
        let change = (&next - &coef).amax();
        coef = next;
        let norm = coef.norm();
        norms.push(norm);
        if !norm.is_finite() || norm > DIVERGED_NORM {
            return Err(CalfError::Separation { norm });
        }
        if change < cfg.irls_tol {
            converged = true;
            break;
        }
    }

    if !converged {
        // a healthy fit settles within a few steps; steady growth past that is divergence
        let early = norms[norms.len().min(5) - 1];
        let peak = norms.iter().copied().fold(0.0, f64::max);
        let diverging = peak - early > 5.0;
        if diverging {
            return Err(CalfError::Separation { norm: peak });
        }
        log::warn!("initial logistic fit did not converge in {} iterations; starting from zero coefficients", cfg.irls_max_iter);
        return Ok(BetaInit {
            coefficients: BlockCoefficients::zeros(k),
            theta_slope: 0.0,
            converged: false,
            iterations,
        });
    }

    let upper = coef.as_slice()[1..=pairs].to_vec();
    Ok(BetaInit {
        coefficients: BlockCoefficients::from_upper(k, coef[0], upper)?,
        theta_slope: coef[q - 1],
        converged: true,
        iterations,
    })
}

/// Full starting state: k-medians labels, degree-based `θ`, logistic-regression
/// `β`, then `σ²` and `α` drawn from their full conditionals.
///
/// A separated logistic fit is refitted with a ridge equal to the prior
/// precision `1 / sigma_scale`.
pub fn initialize<R: Rng + ?Sized>(
    net: &Network,
    nd: &NodeData,
    k: usize,
    prior: &PriorConfig,
    cfg: &InitConfig,
    rng: &mut R,
) -> Result<ModelState> {
    let n = net.n();
    if k == 0 || k > n {
        return Err(CalfError::TooManyClusters { k, n });
    }
    if nd.n() != n {
        return Err(CalfError::DimensionMismatch {
            what: "node data",
            expected: n,
            found: nd.n(),
        });
    }
    prior.validate(k)?;
    let labels = init_membership(nd, k, cfg, rng)?;
    let theta = init_theta(net.degrees(), net.mean_degree(), cfg.offset_c)?;
    let coefficients = match init_beta(net, nd, &labels, &theta, k, cfg) {
        Ok(fit) => fit.coefficients,
        Err(CalfError::Separation { norm }) => {
            log::warn!("initial logistic fit separated (norm {norm:.3e}); refitting with ridge");
            let ridged = InitConfig {
                ridge: 1.0 / prior.sigma_scale,
                ..cfg.clone()
            };
            init_beta(net, nd, &labels, &theta, k, &ridged)?.coefficients
        }
        Err(e) => return Err(e),
    };
    let sigma2 = sample_sigma2(&theta, prior.a, prior.b, rng);
    let mut state = ModelState::new(coefficients, theta, sigma2, labels)?;
    update_alpha(&mut state, &prior.gamma, rng);
    Ok(state)
}
