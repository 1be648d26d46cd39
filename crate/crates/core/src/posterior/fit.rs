use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::inference::{run_chains, InitConfig, McmcConfig, PriorConfig, PriorHyper};
use crate::model::{Network, NodeData};
use crate::rng;

use super::relabel::{relabel, RelabeledDraws};
use super::summary::{summarize, FitReport};
use super::waic::Waic;

/// Everything a fit needs besides the data and `K`. The master seed is
/// `mcmc.seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub prior: PriorHyper,
    pub mcmc: McmcConfig,
    pub init: InitConfig,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub report: FitReport,
    pub prior: PriorConfig,
    pub chains: Vec<RelabeledDraws>,
}

/// Resolves the prior, runs the chains, corrects label switching and
/// summarizes.
pub fn fit(net: &Network, nd: &NodeData, k: usize, settings: &FitSettings) -> Result<Fit> {
    let seed = settings.mcmc.seed;
    let prior = settings.prior.resolve(k, seed);
    let mcmc = McmcConfig {
        seed: rng::child_seed(seed, rng::tags::CHAINS),
        ..settings.mcmc.clone()
    };
    let chains = run_chains(net, nd, k, &prior, &mcmc, &settings.init)?
        .into_iter()
        .map(relabel)
        .collect::<Result<Vec<_>>>()?;
    let report = summarize(&chains)?;
    Ok(Fit { report, prior, chains })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub k: usize,
    pub waic: Option<Waic>,
    pub report: Option<FitReport>,
    /// Why the fit for this `K` failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best_k: usize,
    pub entries: Vec<SelectionEntry>,
}

impl Selection {
    pub fn best(&self) -> &FitReport {
        self.entries
            .iter()
            .find(|e| e.k == self.best_k)
            .and_then(|e| e.report.as_ref())
            .expect("best K has a report")
    }
}

/// Fits every `K` in `ks` and keeps the one with the smallest WAIC; ties go
/// to the smaller `K`. A failing `K` is recorded and skipped.
pub fn select_k(net: &Network, nd: &NodeData, ks: &[usize], settings: &FitSettings) -> Result<Selection> {
    if ks.is_empty() {
        return Err(CalfError::InvalidInput("empty K range".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let entries: Vec<SelectionEntry> = ks
        .par_iter()
        .map(|&k| match fit(net, nd, k, settings) {
            Ok(f) => SelectionEntry {
                k,
                waic: Some(f.report.waic),
                report: Some(f.report),
                error: None,
            },
            Err(e) => {
                log::warn!("fit with K = {k} failed: {e}");
                SelectionEntry {
                    k,
                    waic: None,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let best_k = entries
        .iter()
        .filter_map(|e| e.waic.map(|w| (e.k, w.waic)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(k, _)| k)
        .ok_or_else(|| CalfError::InvalidInput("every K in the range failed to fit".into()))?;
    Ok(Selection { best_k, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};

    fn settings(seed: u64) -> FitSettings {
        FitSettings {
            mcmc: McmcConfig {
                burn_in: 30,
                iterations: 60,
                thin: 3,
                n_chains: 2,
                seed,
                ..McmcConfig::desk()
            },
            ..FitSettings::default()
        }
    }

    fn data() -> crate::datagen::SyntheticNetwork {
        generate(&GenConfig {
            n: 30,
            k: 2,
            seed: 5,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn fit_is_deterministic_and_ordered() {
        let d = data();
        let a = fit(&d.network, &d.node_data, 3, &settings(1)).unwrap();
        let b = fit(&d.network, &d.node_data, 3, &settings(1)).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.draws_per_chain, 20);
        for s in a.chains.iter().flat_map(|c| &c.draws.states) {
            let diag = s.coefficients.diagonal();
            assert!(diag.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(a.report.membership.iter().all(|&z| (1..=3).contains(&z)));
    }

    #[test]
    fn selection_records_failures() {
        let d = data();
        let sel = select_k(&d.network, &d.node_data, &[2, 1, 31], &settings(2)).unwrap();
        assert_eq!(sel.entries.iter().map(|e| e.k).collect::<Vec<_>>(), vec![1, 2, 31]);
        assert!(sel.entries[2].error.is_some());
        assert!([1, 2].contains(&sel.best_k));
        let best = sel.entries.iter().filter_map(|e| e.waic).map(|w| w.waic).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.best().waic.waic, best);
        assert!(select_k(&d.network, &d.node_data, &[], &settings(2)).is_err());
        assert!(select_k(&d.network, &d.node_data, &[40], &settings(2)).is_err());
    }
}
