use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::{initialize, InitConfig};
use super::updates::{sample_sigma2, update_alpha, DyadCache};
use super::PriorConfig;
use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;
use crate::model::{BlockCoefficients, ModelState, Network, NodeData};
use crate::rng::{self, SimRng};

/// Which blocks of the sweep are active. Disabled blocks keep their starting values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateMask {
    pub beta: bool,
    pub theta: bool,
    pub sigma2: bool,
    pub membership: bool,
    pub alpha: bool,
}

impl Default for UpdateMask {
    fn default() -> Self {
        Self {
            beta: true,
            theta: true,
            sigma2: true,
            membership: true,
            alpha: true,
        }
    }
}

impl UpdateMask {
    /// Only the discrete blocks (`Z` and `α`) move.
    pub fn discrete_only() -> Self {
        Self {
            beta: false,
            theta: false,
            sigma2: false,
            membership: true,
            alpha: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub iterations: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub proposal_sd_beta: f64,
    pub proposal_sd_theta: f64,
    /// Robbins–Monro scaling of proposal sds, during burn-in only.
    pub adapt: bool,
    pub target_accept: f64,
    pub seed: u64,
    pub updates: UpdateMask,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl McmcConfig {
    /// 5000 burn-in, 10000 iterations, thinning 10, three chains.
    pub fn paper() -> Self {
        Self {
            burn_in: 5000,
            iterations: 10_000,
            thin: 10,
            n_chains: 3,
            proposal_sd_beta: 0.05,
            proposal_sd_theta: 0.3,
            adapt: true,
            target_accept: 0.35,
            seed: 0,
            updates: UpdateMask::default(),
        }
    }

    /// 1000 burn-in, 2000 iterations, thinning 5, two chains.
    pub fn desk() -> Self {
        Self {
            burn_in: 1000,
            iterations: 2000,
            thin: 5,
            n_chains: 2,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thin == 0 || self.n_chains == 0 {
            return Err(CalfError::InvalidInput("iterations, thin and n_chains must be positive".into()));
        }
        if self.iterations < self.thin {
            return Err(CalfError::InvalidInput(format!(
                "iterations ({}) shorter than thinning interval ({}) stores no draws",
                self.iterations, self.thin
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(CalfError::InvalidInput("target_accept must lie in (0, 1)".into()));
        }
        if !(self.proposal_sd_beta > 0.0 && self.proposal_sd_theta > 0.0) {
            return Err(CalfError::InvalidInput("proposal sds must be positive".into()));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iterations / self.thin
    }
}

/// Post-burn-in acceptance fractions of the Metropolis blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptRates {
    pub beta: f64,
    pub theta: f64,
    /// Per component of `[β₀, β₁₁, β₁₂, …]`.
    pub beta_components: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub k: usize,
    pub states: Vec<ModelState>,
    /// draws × dyads, dyads row-major over `i < j`.
    pub pointwise_ll: DenseMatrix,
    pub accept: AcceptRates,
    /// Stored draws in which at least one community was empty.
    pub empty_cluster_draws: usize,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Total log-likelihood of each stored draw.
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.pointwise_ll.iter_rows().map(|r| r.iter().sum()).collect()
    }
}

/// Sweeps between full recomputations of the dyad cache.
const CACHE_REFRESH: usize = 50;

struct Adapter {
    log_sd: Vec<f64>,
    target: f64,
}

impl Adapter {
    fn new(len: usize, sd: f64, target: f64) -> Self {
        Self {
            log_sd: vec![sd.ln(); len],
            target,
        }
    }

    fn sds(&self) -> Vec<f64> {
        self.log_sd.iter().map(|l| l.exp()).collect()
    }

    fn update(&mut self, flags: &[bool], sweep: usize) {
        let gain = (sweep as f64).powf(-0.6);
        for (l, &f) in self.log_sd.iter_mut().zip(flags) {
            *l = (*l + gain * (f as u8 as f64 - self.target)).clamp(1e-4f64.ln(), 10f64.ln());
        }
    }
}

/// Runs the sweep `β → θ → σ² → Z → α` from `state` for `burn_in + iterations`
/// sweeps and stores every `thin`-th post-burn-in state.
pub fn run_chain_from<R: Rng + ?Sized>(
    net: &Network,
    nd: &NodeData,
    prior: &PriorConfig,
    cfg: &McmcConfig,
    mut state: ModelState,
    rng: &mut R,
) -> Result<ChainDraws> {
    cfg.validate()?;
    state.validate()?;
    let k = state.k;
    prior.validate(k)?;
    if net.n() != state.n() || nd.n() != state.n() {
        return Err(CalfError::DimensionMismatch {
            what: "network nodes",
            expected: state.n(),
            found: net.n(),
        });
    }
    let n = state.n();
    let mut beta_adapt = Adapter::new(BlockCoefficients::free_count(k), cfg.proposal_sd_beta, cfg.target_accept);
    let mut theta_adapt = Adapter::new(n, cfg.proposal_sd_theta, cfg.target_accept);
    let mut beta_sd = beta_adapt.sds();
    let mut theta_sd = theta_adapt.sds();

    let n_draws = cfg.draws_per_chain();
    let dyads = net.dyad_count();
    let mut states = Vec::with_capacity(n_draws);
    let mut pointwise = Vec::with_capacity(n_draws * dyads);
    let mut beta_hits = vec![0usize; BlockCoefficients::free_count(k)];
    let mut theta_hits = 0usize;
    let mut empty_cluster_draws = 0;
    let mut counts = vec![0usize; k];

    let mut cache = DyadCache::new(&state, net, nd);
    for sweep in 1..=cfg.burn_in + cfg.iterations {
        let burning = sweep <= cfg.burn_in;
        let storing = !burning && (sweep - cfg.burn_in) % cfg.thin == 0;
        if sweep % CACHE_REFRESH == 0 {
            cache.refresh(&state, net, nd);
        }
        if cfg.updates.beta {
            let flags = cache.update_beta(&mut state, net, nd, prior, &beta_sd, rng);
            if burning && cfg.adapt {
                beta_adapt.update(&flags, sweep);
                beta_sd = beta_adapt.sds();
            } else if !burning {
                beta_hits.iter_mut().zip(&flags).for_each(|(h, &f)| *h += f as usize);
            }
        }
        if cfg.updates.theta {
            let flags = cache.update_theta(&mut state, net, &theta_sd, rng);
            if burning && cfg.adapt {
                theta_adapt.update(&flags, sweep);
                theta_sd = theta_adapt.sds();
            } else if !burning {
                theta_hits += flags.iter().filter(|&&f| f).count();
            }
        }
        if cfg.updates.sigma2 {
            state.sigma2 = sample_sigma2(&state.theta, prior.a, prior.b, rng);
        }
        if cfg.updates.membership {
            cache.update_membership(&mut state, net, nd, rng);
        }
        if cfg.updates.alpha {
            update_alpha(&mut state, &prior.gamma, rng);
        }

        if storing {
            counts.fill(0);
            state.membership.iter().for_each(|&z| counts[z] += 1);
            if counts.contains(&0) {
                empty_cluster_draws += 1;
            }
            cache.push_pointwise(&mut pointwise);
            states.push(state.clone());
        }
    }

    let post = cfg.iterations as f64;
    let beta_components: Vec<f64> = beta_hits.iter().map(|&h| h as f64 / post).collect();
    let accept = AcceptRates {
        beta: beta_components.iter().sum::<f64>() / beta_components.len() as f64,
        theta: if n > 0 { theta_hits as f64 / (post * n as f64) } else { 0.0 },
        beta_components,
    };
    Ok(ChainDraws {
        k,
        pointwise_ll: DenseMatrix::from_vec(states.len(), dyads, pointwise),
        states,
        accept,
        empty_cluster_draws,
    })
}

/// Initializes and runs one chain.
pub fn run_chain<R: Rng + ?Sized>(
    net: &Network,
    nd: &NodeData,
    k: usize,
    prior: &PriorConfig,
    cfg: &McmcConfig,
    init: &InitConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    cfg.validate()?;
    let state = initialize(net, nd, k, prior, init, rng)?;
    run_chain_from(net, nd, prior, cfg, state, rng)
}

/// `cfg.n_chains` independent chains; chain `c` uses `rng::stream(cfg.seed, c)`.
pub fn run_chains(
    net: &Network,
    nd: &NodeData,
    k: usize,
    prior: &PriorConfig,
    cfg: &McmcConfig,
    init: &InitConfig,
) -> Result<Vec<ChainDraws>> {
    cfg.validate()?;
    (0..cfg.n_chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut r: SimRng = rng::stream(cfg.seed, c);
            run_chain(net, nd, k, prior, cfg, init, &mut r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};
    use crate::model::log_likelihood;
    use crate::rng;

    fn small_cfg() -> McmcConfig {
        McmcConfig {
            burn_in: 20,
            iterations: 40,
            thin: 4,
            n_chains: 2,
            seed: 3,
            ..McmcConfig::desk()
        }
    }

    fn small_data() -> (Network, NodeData) {
        let syn = generate(&GenConfig {
            n: 40,
            k: 2,
            seed: 8,
            ..GenConfig::default()
        })
        .unwrap();
        (syn.network, syn.node_data)
    }

    #[test]
    fn presets() {
        let p = McmcConfig::paper();
        assert_eq!((p.burn_in, p.iterations, p.thin, p.n_chains), (5000, 10_000, 10, 3));
        let d = McmcConfig::desk();
        assert_eq!((d.burn_in, d.iterations, d.thin, d.n_chains), (1000, 2000, 5, 2));
        assert_eq!(d.draws_per_chain(), 400);
        assert!(McmcConfig { thin: 0, ..d.clone() }.validate().is_err());
        assert!(McmcConfig { target_accept: 1.0, ..d }.validate().is_err());
    }

    #[test]
    fn stores_iterations_over_thin_draws() {
        let (net, nd) = small_data();
        let mut r = rng::stream(1, 0);
        let prior = PriorConfig::vague(2, &mut r);
        let cfg = McmcConfig {
            iterations: 7,
            thin: 7,
            ..small_cfg()
        };
        let d = run_chain(&net, &nd, 2, &prior, &cfg, &InitConfig::default(), &mut r).unwrap();
        assert_eq!(d.len(), 1);
        let d = run_chain(&net, &nd, 2, &prior, &small_cfg(), &InitConfig::default(), &mut r).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.pointwise_ll.rows(), 10);
        assert_eq!(d.pointwise_ll.cols(), 40 * 39 / 2);
        for (state, ll) in d.states.iter().zip(d.log_likelihoods()) {
            assert!((log_likelihood(&net, &nd, state).unwrap() - ll).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let (net, nd) = small_data();
        let prior = PriorConfig::vague(2, &mut rng::stream(2, 0));
        let a = run_chains(&net, &nd, 2, &prior, &small_cfg(), &InitConfig::default()).unwrap();
        let b = run_chains(&net, &nd, 2, &prior, &small_cfg(), &InitConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_ne!(a[0].states, a[1].states);
        let pooled: usize = a.iter().map(ChainDraws::len).sum();
        assert_eq!(pooled, 2 * small_cfg().draws_per_chain());
    }

    #[test]
    fn single_chain_matches_run_chain() {
        let (net, nd) = small_data();
        let prior = PriorConfig::vague(2, &mut rng::stream(3, 0));
        let cfg = McmcConfig {
            n_chains: 1,
            ..small_cfg()
        };
        let many = run_chains(&net, &nd, 2, &prior, &cfg, &InitConfig::default()).unwrap();
        let one = run_chain(&net, &nd, 2, &prior, &cfg, &InitConfig::default(), &mut rng::stream(cfg.seed, 0)).unwrap();
        assert_eq!(many, vec![one]);
    }

    #[test]
    fn masked_blocks_stay_fixed() {
        let (net, nd) = small_data();
        let mut r = rng::stream(4, 0);
        let prior = PriorConfig::vague(2, &mut r);
        let start = initialize(&net, &nd, 2, &prior, &InitConfig::default(), &mut r).unwrap();
        let cfg = McmcConfig {
            updates: UpdateMask::discrete_only(),
            ..small_cfg()
        };
        let d = run_chain_from(&net, &nd, &prior, &cfg, start.clone(), &mut r).unwrap();
        for s in &d.states {
            assert_eq!(s.coefficients, start.coefficients);
            assert_eq!(s.theta, start.theta);
            assert_eq!(s.sigma2, start.sigma2);
        }
        assert_eq!(d.accept.beta, 0.0);
    }

    #[test]
    fn adaptation_stays_in_burn_in() {
        let mut a = Adapter::new(2, 0.1, 0.35);
        a.update(&[true, false], 1);
        let after = a.sds();
        assert!(after[0] > 0.1 && after[1] < 0.1);
    }
}
