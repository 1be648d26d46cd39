//! Single-block updates of the sampler. Each function mutates the state in
//! place and leaves every other block untouched.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::PriorConfig;
use crate::matrix::DenseMatrix;
use crate::model::{dyad_log_lik, ModelState, Network, NodeData};

/// One draw from `IG(a + n/2, b + Σθ²/2)`.
pub fn sample_sigma2<R: Rng + ?Sized>(theta: &[f64], a: f64, b: f64, rng: &mut R) -> f64 {
    let shape = a + theta.len() as f64 / 2.0;
    let rate = b + theta.iter().map(|t| t * t).sum::<f64>() / 2.0;
    let g = Gamma::new(shape, 1.0 / rate).expect("positive IG parameters");
    1.0 / g.sample(rng)
}

/// Dirichlet draw via normalized Gamma variates. A single component returns `[1.0]`.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    if concentration.len() == 1 {
        return vec![1.0];
    }
    let mut draws: Vec<f64> = concentration
        .iter()
        .map(|&c| Gamma::new(c, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.iter_mut().for_each(|d| *d /= sum);
    } else {
        // every variate underflowed; fall back to the largest concentration
        let top = crate::model::argmax_label(concentration);
        draws.iter_mut().enumerate().for_each(|(k, d)| *d = if k == top { 1.0 } else { 0.0 });
    }
    draws
}

/// Redraws every `α_i` from `Dir(γ + Z_i)`.
pub fn update_alpha<R: Rng + ?Sized>(state: &mut ModelState, gamma: &[f64], rng: &mut R) {
    let mut conc = gamma.to_vec();
    for i in 0..state.n() {
        let z = state.membership[i];
        conc[z] += 1.0;
        let row = sample_dirichlet(&conc, rng);
        conc[z] -= 1.0;
        state.alpha.row_mut(i).copy_from_slice(&row);
    }
}

#[inline]
fn normal_log_kernel(x: f64, mean: f64, var: f64) -> f64 {
    -(x - mean) * (x - mean) / (2.0 * var)
}

#[inline]
fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Logits and log-likelihood terms of every dyad, stored as full symmetric
/// `n × n` tables and kept in step with the state by the update methods.
/// A chain owns one and refreshes it from scratch now and then to shed
/// accumulated rounding.
#[derive(Debug, Clone)]
pub(crate) struct DyadCache {
    n: usize,
    logit: Vec<f64>,
    ll: Vec<f64>,
    scratch: Vec<f64>,
    /// flat `i * n + j` indices (`i < j`) grouped by upper-triangle pair
    by_pair: Vec<Vec<u32>>,
}

impl DyadCache {
    pub(crate) fn new(state: &ModelState, net: &Network, nd: &NodeData) -> Self {
        let n = net.n();
        let mut cache = Self {
            n,
            logit: vec![0.0; n * n],
            ll: vec![0.0; n * n],
            scratch: Vec::new(),
            by_pair: Vec::new(),
        };
        cache.refresh(state, net, nd);
        cache
    }

    pub(crate) fn refresh(&mut self, state: &ModelState, net: &Network, nd: &NodeData) {
        let n = self.n;
        for i in 0..n {
            let row = net.row(i);
            for j in i + 1..n {
                let x = state.logit(nd, i, j);
                let v = dyad_log_lik(row[j] == 1, x);
                self.set(i, j, x, v);
            }
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, logit: f64, ll: f64) {
        let n = self.n;
        self.logit[i * n + j] = logit;
        self.logit[j * n + i] = logit;
        self.ll[i * n + j] = ll;
        self.ll[j * n + i] = ll;
    }

    /// Appends the `i < j` log-likelihood terms in row-major order.
    pub(crate) fn push_pointwise(&self, out: &mut Vec<f64>) {
        for i in 0..self.n {
            out.extend_from_slice(&self.ll[i * self.n + i + 1..(i + 1) * self.n]);
        }
    }

    pub(crate) fn update_beta<R: Rng + ?Sized>(
        &mut self,
        state: &mut ModelState,
        net: &Network,
        nd: &NodeData,
        prior: &PriorConfig,
        proposal_sd: &[f64],
        rng: &mut R,
    ) -> Vec<bool> {
        let n = self.n;
        let adj = net.adjacency();
        let mut flags = Vec::with_capacity(proposal_sd.len());

        // intercept: every dyad
        let step: f64 = rng.sample::<f64, _>(StandardNormal) * proposal_sd[0];
        let old = state.coefficients.beta0;
        let new = old + step;
        self.scratch.clear();
        let mut delta = normal_log_kernel(new, prior.mu[0], prior.sigma_scale) - normal_log_kernel(old, prior.mu[0], prior.sigma_scale);
        for i in 0..n {
            for j in i + 1..n {
                let d = i * n + j;
                let v = dyad_log_lik(adj[d] == 1, self.logit[d] + step);
                delta += v - self.ll[d];
                self.scratch.push(v);
            }
        }
        let accept = metropolis_accept(delta, rng);
        if accept {
            state.coefficients.beta0 = new;
            let mut t = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let x = self.logit[i * n + j] + step;
                    self.set(i, j, x, self.scratch[t]);
                    t += 1;
                }
            }
        }
        flags.push(accept);

        // block pairs: only the dyads currently in that pair
        let pairs = state.coefficients.upper().len();
        self.by_pair.resize_with(pairs, Vec::new);
        self.by_pair.iter_mut().for_each(Vec::clear);
        for i in 0..n {
            let zi = state.membership[i];
            for j in i + 1..n {
                let p = state.coefficients.pair_index(zi, state.membership[j]);
                self.by_pair[p].push((i * n + j) as u32);
            }
        }
        let sim = nd.similarity().as_slice();
        for pair in 0..pairs {
            let c = pair + 1;
            let step: f64 = rng.sample::<f64, _>(StandardNormal) * proposal_sd[c];
            let old = state.coefficients.upper()[pair];
            let new = old + step;
            let mut delta = normal_log_kernel(new, prior.mu[c], prior.sigma_scale) - normal_log_kernel(old, prior.mu[c], prior.sigma_scale);
            self.scratch.clear();
            for &d in &self.by_pair[pair] {
                let d = d as usize;
                let v = dyad_log_lik(adj[d] == 1, self.logit[d] + step * sim[d]);
                delta += v - self.ll[d];
                self.scratch.push(v);
            }
            let accept = metropolis_accept(delta, rng);
            if accept {
                state.coefficients.upper_mut()[pair] = new;
                for t in 0..self.by_pair[pair].len() {
                    let d = self.by_pair[pair][t] as usize;
                    let x = self.logit[d] + step * sim[d];
                    self.set(d / n, d % n, x, self.scratch[t]);
                }
            }
            flags.push(accept);
        }
        flags
    }

    pub(crate) fn update_theta<R: Rng + ?Sized>(
        &mut self,
        state: &mut ModelState,
        net: &Network,
        proposal_sd: &[f64],
        rng: &mut R,
    ) -> Vec<bool> {
        let n = self.n;
        let mut flags = Vec::with_capacity(n);
        self.scratch.resize(n, 0.0);
        for i in 0..n {
            let step: f64 = rng.sample::<f64, _>(StandardNormal) * proposal_sd[i];
            let old = state.theta[i];
            let new = old + step;
            let row = net.row(i);
            let mut delta = normal_log_kernel(new, 0.0, state.sigma2) - normal_log_kernel(old, 0.0, state.sigma2);
            for j in (0..n).filter(|&j| j != i) {
                let d = i * n + j;
                let v = dyad_log_lik(row[j] == 1, self.logit[d] + step);
                delta += v - self.ll[d];
                self.scratch[j] = v;
            }
            let accept = metropolis_accept(delta, rng);
            if accept {
                state.theta[i] = new;
                for j in (0..n).filter(|&j| j != i) {
                    let x = self.logit[i * n + j] + step;
                    self.set(i, j, x, self.scratch[j]);
                }
            }
            flags.push(accept);
        }
        flags
    }

    /// Normalized log-probabilities of `π_i = c` from the cached terms; the
    /// candidate terms are left in `scratch[c * n + j]`.
    fn membership_conditional(&mut self, state: &ModelState, net: &Network, nd: &NodeData, dense: &DenseMatrix, i: usize) -> Vec<f64> {
        let (n, k) = (self.n, state.k);
        let zi = state.membership[i];
        let row = net.row(i);
        let srow = nd.similarity().row(i);
        self.scratch.resize(n * k, 0.0);
        let mut logp: Vec<f64> = state.alpha.row(i).iter().map(|a| a.ln()).collect();
        for j in (0..n).filter(|&j| j != i) {
            let d = i * n + j;
            let zj = state.membership[j];
            let x0 = self.logit[d] - dense[(zi, zj)] * srow[j];
            let e = row[j] == 1;
            for (c, lp) in logp.iter_mut().enumerate() {
                let v = if c == zi { self.ll[d] } else { dyad_log_lik(e, x0 + dense[(c, zj)] * srow[j]) };
                *lp += v;
                self.scratch[c * n + j] = v;
            }
        }
        let lse = log_sum_exp(&logp);
        logp.iter_mut().for_each(|v| *v -= lse);
        logp
    }

    pub(crate) fn update_membership<R: Rng + ?Sized>(&mut self, state: &mut ModelState, net: &Network, nd: &NodeData, rng: &mut R) {
        let n = self.n;
        let dense = state.coefficients.to_dense();
        for i in 0..n {
            let logp = self.membership_conditional(state, net, nd, &dense, i);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for (c, lp) in logp.iter().enumerate() {
                acc += lp.exp();
                if u < acc {
                    pick = Some(c);
                    break;
                }
            }
            // rounding can leave acc a hair below 1
            let new = pick.unwrap_or_else(|| crate::model::argmax_label(&logp));
            let old = state.membership[i];
            if new != old {
                let srow = nd.similarity().row(i);
                for j in (0..n).filter(|&j| j != i) {
                    let zj = state.membership[j];
                    let x = self.logit[i * n + j] + (dense[(new, zj)] - dense[(old, zj)]) * srow[j];
                    self.set(i, j, x, self.scratch[new * n + j]);
                }
                state.membership[i] = new;
            }
        }
    }
}

/// Component-wise random-walk Metropolis on `β₀` then each `β_kl` in
/// upper-triangle order. `proposal_sd[c]` is the step size of component `c`
/// of `[β₀, β₁₁, β₁₂, …]`. Returns one acceptance flag per component.
pub fn update_beta<R: Rng + ?Sized>(
    state: &mut ModelState,
    net: &Network,
    nd: &NodeData,
    prior: &PriorConfig,
    proposal_sd: &[f64],
    rng: &mut R,
) -> Vec<bool> {
    DyadCache::new(state, net, nd).update_beta(state, net, nd, prior, proposal_sd, rng)
}

/// Per-node random-walk Metropolis on `θ_i` against its `N(0, σ²)` prior.
pub fn update_theta<R: Rng + ?Sized>(
    state: &mut ModelState,
    net: &Network,
    nd: &NodeData,
    proposal_sd: &[f64],
    rng: &mut R,
) -> Vec<bool> {
    DyadCache::new(state, net, nd).update_theta(state, net, proposal_sd, rng)
}

/// Gibbs sweep over nodes in index order, drawing each label from its exact
/// categorical full conditional. Clusters may become empty.
pub fn update_membership<R: Rng + ?Sized>(state: &mut ModelState, net: &Network, nd: &NodeData, rng: &mut R) {
    DyadCache::new(state, net, nd).update_membership(state, net, nd, rng)
}

/// Change in the log-likelihood when `θ_i` moves by `step`, summed over the
/// `n − 1` dyads incident to `i`.
#[cfg(test)]
pub(crate) fn theta_delta(state: &ModelState, net: &Network, nd: &NodeData, i: usize, step: f64) -> f64 {
    let row = net.row(i);
    let srow = nd.similarity().row(i);
    let zi = state.membership[i];
    let base = state.coefficients.beta0 + state.theta[i];
    let mut delta = 0.0;
    for j in 0..net.n() {
        if j == i {
            continue;
        }
        let x = base + state.coefficients.get(zi, state.membership[j]) * srow[j] + state.theta[j];
        let e = row[j] == 1;
        delta += dyad_log_lik(e, x + step) - dyad_log_lik(e, x);
    }
    delta
}

/// Normalized log-probabilities of `π_i = k` given everything else,
/// evaluated directly from the state.
#[cfg(test)]
pub(crate) fn membership_log_conditional(state: &ModelState, net: &Network, nd: &NodeData, i: usize) -> Vec<f64> {
    let k = state.k;
    let dense = state.coefficients.to_dense();
    let row = net.row(i);
    let srow = nd.similarity().row(i);
    let base = state.coefficients.beta0 + state.theta[i];
    let mut logp: Vec<f64> = state.alpha.row(i).iter().map(|a| a.ln()).collect();
    for j in 0..net.n() {
        if j == i {
            continue;
        }
        let e = row[j] == 1;
        let x0 = base + state.theta[j];
        let zj = state.membership[j];
        for (c, lp) in logp.iter_mut().enumerate().take(k) {
            *lp += dyad_log_lik(e, x0 + dense[(c, zj)] * srow[j]);
        }
    }
    let lse = log_sum_exp(&logp);
    logp.iter_mut().for_each(|v| *v -= lse);
    logp
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_likelihood, BlockCoefficients};
    use crate::rng;

    fn mean_and_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    fn random_instance(n: usize, k: usize, seed: u64) -> (Network, NodeData, ModelState) {
        let mut r = rng::stream(seed, 0);
        let x = DenseMatrix::from_fn(n, 2, |_, _| r.random_range(-1.5..1.5));
        let nd = NodeData::euclidean(x).unwrap();
        let mut c = BlockCoefficients::zeros(k);
        c.beta0 = r.random_range(-0.5..1.0);
        for v in c.upper_mut() {
            *v = r.random_range(-2.0..0.0);
        }
        let theta = (0..n).map(|_| r.random_range(-0.8..0.8)).collect();
        let membership = (0..n).map(|_| r.random_range(0..k)).collect();
        let mut state = ModelState::new(c, theta, 0.5, membership).unwrap();
        update_alpha(&mut state, &vec![1.0; k], &mut r);
        let net = crate::datagen::sample_network(&nd, &state, &mut r);
        (net, nd, state)
    }

    fn flat_prior(k: usize, sigma_scale: f64) -> PriorConfig {
        PriorConfig {
            mu: vec![0.5; BlockCoefficients::free_count(k)],
            sigma_scale,
            a: 1.0,
            b: 1.0,
            gamma: vec![1.0; k],
        }
    }

    #[test]
    fn sigma2_with_no_nodes_draws_from_prior() {
        // IG(3, 2) has mean 1
        let mut r = rng::stream(1, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_sigma2(&[], 3.0, 2.0, &mut r)).collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn sigma2_conjugate_mean() {
        let mut r = rng::stream(2, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_sigma2(&[1.0, 1.0], 1.0, 1.0, &mut r)).collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 2.0).abs() < 3.0 * se, "{m} ± {se}");
        assert!(draws.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn sigma2_zero_theta_uses_prior_scale() {
        // θ = 0 (n = 8): IG(1 + 4, 1) with mean 1/4 and variance 1/48
        let mut r = rng::stream(3, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_sigma2(&[0.0; 8], 1.0, 1.0, &mut r)).collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 0.25).abs() < 3.0 * se);
        let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var - 1.0 / 48.0).abs() < 0.1 / 48.0, "variance {var}");
    }

    #[test]
    fn alpha_dirichlet_mean_and_simplex() {
        let mut r = rng::stream(4, 0);
        let mut state = ModelState::new(BlockCoefficients::zeros(2), vec![0.0], 1.0, vec![0]).unwrap();
        let mut firsts = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            update_alpha(&mut state, &[1.0, 1.0], &mut r);
            let row = state.alpha.row(0);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            firsts.push(row[0]);
        }
        let (m, se) = mean_and_se(&firsts);
        assert!((m - 2.0 / 3.0).abs() < 3.0 * se);
        // Beta(2, 1) variance = 1/18
        let var = firsts.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (firsts.len() - 1) as f64;
        assert!((var - 1.0 / 18.0).abs() < 0.03 / 18.0 * 10.0);
    }

    #[test]
    fn alpha_single_block_is_one() {
        let mut r = rng::stream(5, 0);
        let mut state = ModelState::new(BlockCoefficients::zeros(1), vec![0.0; 3], 1.0, vec![0; 3]).unwrap();
        update_alpha(&mut state, &[0.3], &mut r);
        assert!(state.alpha.as_slice().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn small_concentrations_stay_on_simplex() {
        let mut r = rng::stream(6, 0);
        for _ in 0..10_000 {
            let d = sample_dirichlet(&[1e-3, 1.001, 2e-3], &mut r);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn tiny_steps_are_always_accepted() {
        let (net, nd, mut state) = random_instance(12, 2, 7);
        let prior = flat_prior(2, 100.0);
        let mut r = rng::stream(7, 1);
        let mut accepted = 0;
        let mut total = 0;
        for _ in 0..200 {
            let flags = update_beta(&mut state, &net, &nd, &prior, &[1e-12; 4], &mut r);
            accepted += flags.iter().filter(|&&f| f).count();
            total += flags.len();
            let flags = update_theta(&mut state, &net, &nd, &[1e-12; 12], &mut r);
            accepted += flags.iter().filter(|&&f| f).count();
            total += flags.len();
        }
        assert!(accepted as f64 / total as f64 > 0.999);
    }

    /// Expected acceptance of the intercept move from a fixed state,
    /// `E_ε[min(1, r(ε))]` with `ε ~ N(0, sd²)`, by Simpson quadrature.
    fn expected_intercept_acceptance(state: &ModelState, net: &Network, nd: &NodeData, prior: &PriorConfig, sd: f64) -> f64 {
        let base = log_likelihood(net, nd, state).unwrap()
            + normal_log_kernel(state.coefficients.beta0, prior.mu[0], prior.sigma_scale);
        let target = |eps: f64| {
            let mut s = state.clone();
            s.coefficients.beta0 += eps;
            log_likelihood(net, nd, &s).unwrap() + normal_log_kernel(s.coefficients.beta0, prior.mu[0], prior.sigma_scale)
        };
        let (lo, hi, m) = (-8.0 * sd, 8.0 * sd, 4000usize);
        let h = (hi - lo) / m as f64;
        let mut acc = 0.0;
        for t in 0..=m {
            let eps = lo + h * t as f64;
            let w = if t == 0 || t == m { 1.0 } else if t % 2 == 1 { 4.0 } else { 2.0 };
            let dens = (-eps * eps / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            acc += w * dens * (target(eps) - base).exp().min(1.0);
        }
        acc * h / 3.0
    }

    #[test]
    fn intercept_acceptance_matches_metropolis_ratio() {
        let n = 2;
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]);
        let nd = NodeData::euclidean(x).unwrap();
        let net = Network::from_edges(n, [(0, 1)]).unwrap();
        let mut c = BlockCoefficients::zeros(1);
        c.beta0 = 0.3;
        c.set(0, 0, -0.5);
        let state = ModelState::new(c, vec![0.1, -0.2], 1.0, vec![0, 0]).unwrap();
        let prior = PriorConfig {
            mu: vec![0.0, 0.0],
            sigma_scale: 0.5,
            a: 1.0,
            b: 1.0,
            gamma: vec![1.0],
        };
        let sd = 1.5;
        let want = expected_intercept_acceptance(&state, &net, &nd, &prior, sd);
        let mut r = rng::stream(8, 0);
        let trials = 100_000;
        let mut hits = 0;
        for _ in 0..trials {
            let mut s = state.clone();
            if update_beta(&mut s, &net, &nd, &prior, &[sd, sd], &mut r)[0] {
                hits += 1;
            }
        }
        let f = hits as f64 / trials as f64;
        let se = (want * (1.0 - want) / trials as f64).sqrt();
        assert!((f - want).abs() < 3.0 * se, "empirical {f} vs {want}");
    }

    // Standard normal quantiles at 0.1, 0.25, 0.5, 0.75, 0.9.
    const PROBS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
    const Z: [f64; 5] = [-1.281552, -0.674490, 0.0, 0.674490, 1.281552];

    fn quantile(sorted: &[f64], p: f64) -> f64 {
        sorted[((sorted.len() - 1) as f64 * p).round() as usize]
    }

    #[test]
    fn coefficients_recover_prior_without_dyads() {
        let net = Network::empty(1);
        let nd = NodeData::euclidean(DenseMatrix::zeros(1, 1)).unwrap();
        let mut state = ModelState::new(BlockCoefficients::zeros(2), vec![0.0], 1.0, vec![0]).unwrap();
        let prior = flat_prior(2, 4.0);
        let mut r = rng::stream(9, 0);
        let mut b0 = Vec::new();
        let mut b12 = Vec::new();
        for t in 0..120_000 {
            update_beta(&mut state, &net, &nd, &prior, &[3.0; 4], &mut r);
            if t >= 1000 {
                b0.push(state.coefficients.beta0);
                b12.push(state.coefficients.get(0, 1));
            }
        }
        for v in [&mut b0, &mut b12] {
            v.sort_by(f64::total_cmp);
            for (p, z) in PROBS.iter().zip(Z) {
                let want = 0.5 + 2.0 * z;
                assert!((quantile(v, *p) - want).abs() < 0.1, "q{p}: {} vs {want}", quantile(v, *p));
            }
        }
    }

    #[test]
    fn theta_recovers_prior_without_dyads() {
        let net = Network::empty(1);
        let nd = NodeData::euclidean(DenseMatrix::zeros(1, 1)).unwrap();
        let mut state = ModelState::new(BlockCoefficients::zeros(1), vec![0.0], 0.64, vec![0]).unwrap();
        let mut r = rng::stream(10, 0);
        let mut draws = Vec::new();
        for t in 0..120_000 {
            update_theta(&mut state, &net, &nd, &[1.5], &mut r);
            if t >= 1000 {
                draws.push(state.theta[0]);
            }
        }
        draws.sort_by(f64::total_cmp);
        for (p, z) in PROBS.iter().zip(Z) {
            assert!((quantile(&draws, *p) - 0.8 * z).abs() < 0.05);
        }
    }

    #[test]
    fn incident_dyad_delta_matches_full_likelihood() {
        for seed in 0..5 {
            let (net, nd, state) = random_instance(15, 3, 20 + seed);
            let full = log_likelihood(&net, &nd, &state).unwrap();
            for i in [0, 7, 14] {
                let step = 0.37 - 0.1 * seed as f64;
                let mut moved = state.clone();
                moved.theta[i] += step;
                let want = log_likelihood(&net, &nd, &moved).unwrap() - full;
                assert!((theta_delta(&state, &net, &nd, i, step) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn membership_conditional_matches_full_likelihood_differences() {
        for seed in 0..5 {
            let (net, nd, state) = random_instance(12, 3, 40 + seed);
            for i in [0, 5, 11] {
                let logp = membership_log_conditional(&state, &net, &nd, i);
                let joint: Vec<f64> = (0..3)
                    .map(|c| {
                        let mut s = state.clone();
                        s.membership[i] = c;
                        log_likelihood(&net, &nd, &s).unwrap() + s.alpha[(i, c)].ln()
                    })
                    .collect();
                for c in 1..3 {
                    assert!(((logp[c] - logp[0]) - (joint[c] - joint[0])).abs() < 1e-10);
                }
                assert!((logp.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_coefficients_give_uniform_conditional() {
        let (_, nd, mut state) = random_instance(6, 3, 50);
        let net = Network::empty(6);
        for v in state.coefficients.upper_mut() {
            *v = -0.7;
        }
        for i in 0..6 {
            state.alpha.row_mut(i).fill(1.0 / 3.0);
        }
        let logp = membership_log_conditional(&state, &net, &nd, 2);
        for v in logp {
            assert!((v.exp() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_alpha_forces_label() {
        let (net, nd, mut state) = random_instance(8, 3, 51);
        for i in 0..8 {
            state.alpha.row_mut(i).copy_from_slice(&[0.0, 0.0, 1.0]);
        }
        let mut r = rng::stream(51, 1);
        for _ in 0..20 {
            update_membership(&mut state, &net, &nd, &mut r);
            assert!(state.membership.iter().all(|&z| z == 2));
        }
    }

    #[test]
    fn membership_sweeps_match_enumeration() {
        let (net, nd, mut state) = random_instance(3, 2, 52);
        for v in state.coefficients.upper_mut() {
            *v *= 0.5;
        }
        state.alpha = DenseMatrix::from_rows(&[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.6, 0.4]]);
        // exact posterior over 2^3 labelings
        let mut exact = [0.0; 8];
        for (cfg, slot) in exact.iter_mut().enumerate() {
            let mut s = state.clone();
            for i in 0..3 {
                s.membership[i] = cfg >> i & 1;
            }
            let prior: f64 = (0..3).map(|i| s.alpha[(i, s.membership[i])].ln()).sum();
            *slot = (prior + log_likelihood(&net, &nd, &s).unwrap()).exp();
        }
        let z: f64 = exact.iter().sum();
        exact.iter_mut().for_each(|p| *p /= z);

        let mut r = rng::stream(52, 1);
        let sweeps = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..sweeps {
            update_membership(&mut state, &net, &nd, &mut r);
            let cfg: usize = (0..3).map(|i| state.membership[i] << i).sum();
            counts[cfg] += 1;
        }
        for c in 0..8 {
            let f = counts[c] as f64 / sweeps as f64;
            // successive sweeps are correlated; allow a modest inflation of the i.i.d. SE
            let se = (exact[c] * (1.0 - exact[c]) / sweeps as f64).sqrt() * 2.0;
            assert!((f - exact[c]).abs() < 3.0 * se + 1e-4, "config {c}: {f} vs {}", exact[c]);
        }
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[f64::NEG_INFINITY, 0.0]) - 0.0).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    fn assert_cache_fresh(cache: &DyadCache, state: &ModelState, net: &Network, nd: &NodeData) {
        let fresh = DyadCache::new(state, net, nd);
        for (a, b) in cache.logit.iter().zip(&fresh.logit).chain(cache.ll.iter().zip(&fresh.ll)) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn cache_tracks_state_through_sweeps() {
        let (net, nd, mut state) = random_instance(12, 3, 21);
        let prior = flat_prior(3, 100.0);
        let mut r = rng::stream(22, 0);
        let mut cache = DyadCache::new(&state, &net, &nd);
        for _ in 0..200 {
            cache.update_beta(&mut state, &net, &nd, &prior, &[0.3; 7], &mut r);
            assert_cache_fresh(&cache, &state, &net, &nd);
            cache.update_theta(&mut state, &net, &[0.5; 12], &mut r);
            assert_cache_fresh(&cache, &state, &net, &nd);
            cache.update_membership(&mut state, &net, &nd, &mut r);
            assert_cache_fresh(&cache, &state, &net, &nd);
        }
        let mut pointwise = Vec::new();
        cache.push_pointwise(&mut pointwise);
        let total: f64 = pointwise.iter().sum();
        assert!((total - log_likelihood(&net, &nd, &state).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn cached_conditional_matches_direct() {
        let (net, nd, mut state) = random_instance(9, 4, 23);
        let mut r = rng::stream(24, 0);
        update_alpha(&mut state, &[0.7; 4], &mut r);
        let mut cache = DyadCache::new(&state, &net, &nd);
        let dense = state.coefficients.to_dense();
        for i in 0..9 {
            let a = cache.membership_conditional(&state, &net, &nd, &dense, i);
            let b = membership_log_conditional(&state, &net, &nd, i);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
