use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::inference::AcceptRates;
use crate::model::BlockCoefficients;

use super::diagnostics::gelman_rubin;
use super::relabel::RelabeledDraws;
use super::waic::{waic_pooled, Waic};

/// Posterior summary of one scalar parameter over pooled draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// 2.5% quantile.
    pub lower: f64,
    /// 97.5% quantile.
    pub upper: f64,
    /// `None` when fewer than two chains were run or every draw is equal.
    pub rhat: Option<f64>,
}

impl ScalarSummary {
    fn from_chains(name: String, chains: &[Vec<f64>]) -> Self {
        let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let sd = if pooled.len() > 1 {
            (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        pooled.sort_by(f64::total_cmp);
        Self {
            name,
            mean,
            median: quantile_sorted(&pooled, 0.5),
            sd,
            lower: quantile_sorted(&pooled, 0.025),
            upper: quantile_sorted(&pooled, 0.975),
            rhat: gelman_rubin(chains).ok(),
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Linear-interpolation sample quantile (the common "type 7" rule).
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(CalfError::Empty);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(CalfError::InvalidInput(format!("quantile level {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, p))
}

/// Summary of one fit with a fixed `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub k: usize,
    pub n_nodes: usize,
    pub n_chains: usize,
    pub draws_per_chain: usize,
    /// `beta0`, `beta_a_b` for `a ≤ b` (1-based), `sigma2`, `sigma`.
    pub scalars: Vec<ScalarSummary>,
    pub theta_mean: Vec<f64>,
    /// Most frequent label per node, 1-based.
    pub membership: Vec<usize>,
    pub waic: Waic,
    pub accept: Vec<AcceptRates>,
    pub empty_cluster_draws: usize,
    pub max_rhat: Option<f64>,
}

impl FitReport {
    pub fn scalar(&self, name: &str) -> Option<&ScalarSummary> {
        self.scalars.iter().find(|s| s.name == name)
    }

    /// Summary of `β_ab` for 0-based block indices.
    pub fn beta(&self, a: usize, b: usize) -> Option<&ScalarSummary> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.scalar(&beta_name(a, b))
    }

    pub fn membership_zero_based(&self) -> Vec<usize> {
        self.membership.iter().map(|z| z - 1).collect()
    }
}

pub(crate) fn beta_name(a: usize, b: usize) -> String {
    format!("beta_{}_{}", a + 1, b + 1)
}

fn check_chains(chains: &[RelabeledDraws]) -> Result<(usize, usize)> {
    let first = chains.first().ok_or(CalfError::Empty)?;
    let (k, n) = (first.draws.k, first.draws.states.first().ok_or(CalfError::Empty)?.n());
    for c in chains {
        if c.draws.k != k {
            return Err(CalfError::DimensionMismatch {
                what: "chain K",
                expected: k,
                found: c.draws.k,
            });
        }
        if c.draws.is_empty() {
            return Err(CalfError::Empty);
        }
    }
    Ok((k, n))
}

/// Posterior mode of each node's label over the pooled draws; ties go to
/// the lowest label. Labels are 0-based.
pub fn hard_membership(chains: &[RelabeledDraws]) -> Result<Vec<usize>> {
    let (k, n) = check_chains(chains)?;
    let mut counts = vec![0usize; n * k];
    for s in chains.iter().flat_map(|c| &c.draws.states) {
        for (i, &z) in s.membership.iter().enumerate() {
            counts[i * k + z] += 1;
        }
    }
    Ok(counts
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Pools relabeled chains into a [`FitReport`].
pub fn summarize(chains: &[RelabeledDraws]) -> Result<FitReport> {
    let (k, n) = check_chains(chains)?;
    let per_chain = |f: &dyn Fn(&crate::model::ModelState) -> f64| -> Vec<Vec<f64>> {
        chains.iter().map(|c| c.draws.states.iter().map(f).collect()).collect()
    };
    let mut scalars = vec![ScalarSummary::from_chains("beta0".into(), &per_chain(&|s| s.coefficients.beta0))];
    for (a, b) in BlockCoefficients::pairs(k) {
        scalars.push(ScalarSummary::from_chains(beta_name(a, b), &per_chain(&|s| s.coefficients.get(a, b))));
    }
    scalars.push(ScalarSummary::from_chains("sigma2".into(), &per_chain(&|s| s.sigma2)));
    scalars.push(ScalarSummary::from_chains("sigma".into(), &per_chain(&|s| s.sigma2.sqrt())));

    let total: usize = chains.iter().map(|c| c.draws.len()).sum();
    let mut theta_mean = vec![0.0; n];
    for s in chains.iter().flat_map(|c| &c.draws.states) {
        for (m, t) in theta_mean.iter_mut().zip(&s.theta) {
            *m += t;
        }
    }
    theta_mean.iter_mut().for_each(|m| *m /= total as f64);

    let tables: Vec<_> = chains.iter().map(|c| &c.draws.pointwise_ll).collect();
    let waic = waic_pooled(&tables)?;
    let max_rhat = scalars.iter().filter_map(|s| s.rhat).reduce(f64::max);
    if let Some(r) = max_rhat.filter(|r| *r > 1.1) {
        log::warn!("K = {k}: largest R-hat is {r:.3}; chains may not have mixed");
    }
    Ok(FitReport {
        k,
        n_nodes: n,
        n_chains: chains.len(),
        draws_per_chain: chains[0].draws.len(),
        scalars,
        theta_mean,
        membership: hard_membership(chains)?.into_iter().map(|z| z + 1).collect(),
        waic,
        accept: chains.iter().map(|c| c.draws.accept.clone()).collect(),
        empty_cluster_draws: chains.iter().map(|c| c.draws.empty_cluster_draws).sum(),
        max_rhat,
    })
}
