//! Replicated simulation study: generate, fit, score against baselines,
//! and aggregate.

use calfsbm::datagen::{generate, GenConfig};
use calfsbm::evaluation::{ari, kmeans, nmi, spectral_clustering};
use calfsbm::posterior::{fit, select_k, FitReport, FitSettings};
use calfsbm::rng::{self, tags};
use calfsbm::BlockCoefficients;
use rayon::prelude::*;
use serde::Serialize;

pub const METHODS: [&str; 4] = ["calf-sbm", "casc", "spectral", "kmeans"];

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub generate: GenConfig,
    pub replicates: usize,
    pub settings: FitSettings,
    /// When set, `K` is also selected by WAIC over this range.
    pub k_range: Option<Vec<usize>>,
    pub seed: u64,
}

/// Posterior summary of one parameter in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub replicate: usize,
    pub parameter: String,
    pub truth: f64,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub covered: Option<bool>,
    pub rhat: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub replicate: usize,
    pub method: String,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub replicate: usize,
    pub k: usize,
    pub waic: Option<f64>,
    pub p_waic: Option<f64>,
    pub selected: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub params: Vec<ParamRow>,
    pub comparison: Vec<ComparisonRow>,
    pub selection: Vec<SelectionRow>,
    pub selected_k: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub truth: f64,
    /// Mean of `posterior mean − truth`.
    pub bias: f64,
    /// Mean posterior standard deviation.
    pub se: f64,
    /// Standard deviation of the posterior means across replicates.
    pub esd: f64,
    /// Fraction of 95% intervals covering the truth.
    pub cp: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub median_ari: Option<f64>,
    pub mean_ari: Option<f64>,
    pub median_nmi: Option<f64>,
    pub mean_nmi: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFrequency {
    pub k: usize,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub outcomes: Vec<ReplicateOutcome>,
}

/// Parameter names and true values in report order.
pub fn true_parameters(gen: &GenConfig) -> Vec<(String, f64)> {
    let c = gen.coefficients();
    let mut out = vec![("beta0".to_string(), c.beta0)];
    out.extend(BlockCoefficients::pairs(gen.k).map(|(a, b)| (format!("beta_{}_{}", a + 1, b + 1), c.get(a, b))));
    out.push(("sigma2".into(), gen.theta_variance));
    out.push(("sigma".into(), gen.theta_variance.sqrt()));
    out
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn failed_rows(replicate: usize, truth: &[(String, f64)], why: &str) -> (Vec<ParamRow>, Vec<ComparisonRow>) {
    let params = truth
        .iter()
        .map(|(p, t)| ParamRow {
            replicate,
            parameter: p.clone(),
            truth: *t,
            mean: None,
            sd: None,
            lower: None,
            upper: None,
            covered: None,
            rhat: None,
            status: format!("failed: {why}"),
        })
        .collect();
    let comparison = METHODS
        .iter()
        .map(|m| ComparisonRow {
            replicate,
            method: m.to_string(),
            ari: None,
            nmi: None,
            status: format!("failed: {why}"),
        })
        .collect();
    (params, comparison)
}

/// ARI and NMI of `labels` against `truth`, or a failed row.
pub fn score(replicate: usize, method: &str, labels: calfsbm::Result<Vec<usize>>, truth: &[usize]) -> ComparisonRow {
    let scored = labels.and_then(|l| Ok((ari(&l, truth)?, nmi(&l, truth)?)));
    match scored {
        Ok((a, n)) => ComparisonRow {
            replicate,
            method: method.into(),
            ari: Some(a),
            nmi: Some(n),
            status: "ok".into(),
        },
        Err(e) => ComparisonRow {
            replicate,
            method: method.into(),
            ari: None,
            nmi: None,
            status: format!("failed: {e}"),
        },
    }
}

fn run_replicate(cfg: &StudyConfig, replicate: usize) -> ReplicateOutcome {
    let r = replicate as u64;
    let gen = GenConfig {
        seed: rng::child_seed(rng::child_seed(cfg.seed, tags::GENERATE), r),
        ..cfg.generate.clone()
    };
    let mut settings = cfg.settings.clone();
    settings.mcmc.seed = rng::child_seed(rng::child_seed(cfg.seed, tags::CHAINS), r);
    let truth = true_parameters(&gen);
    let k = gen.k;

    let outcome = (|| -> calfsbm::Result<(FitReport, Vec<SelectionRow>, Option<usize>, Vec<ComparisonRow>)> {
        let data = generate(&gen)?;
        let (net, nd) = (&data.network, &data.node_data);
        let mut selection = Vec::new();
        let mut selected_k = None;
        let mut report = None;
        if let Some(ks) = &cfg.k_range {
            let sel = select_k(net, nd, ks, &settings)?;
            selected_k = Some(sel.best_k);
            for e in sel.entries {
                selection.push(SelectionRow {
                    replicate,
                    k: e.k,
                    waic: e.waic.map(|w| w.waic),
                    p_waic: e.waic.map(|w| w.p_waic),
                    selected: e.k == sel.best_k,
                    status: e.error.clone().map_or("ok".into(), |m| format!("failed: {m}")),
                });
                if e.k == k {
                    report = e.report;
                }
            }
        }
        let report = match report {
            Some(r) => r,
            None => fit(net, nd, k, &settings)?.report,
        };
        let mut baseline_rng = rng::stream(rng::child_seed(cfg.seed, tags::BASELINE), r);
        let true_z = &data.true_membership;
        let comparison = vec![
            score(replicate, "calf-sbm", Ok(report.membership_zero_based()), true_z),
            ComparisonRow {
                replicate,
                method: "casc".into(),
                ari: None,
                nmi: None,
                status: "unavailable".into(),
            },
            score(replicate, "spectral", spectral_clustering(net, k, &mut baseline_rng), true_z),
            score(replicate, "kmeans", kmeans(nd.covariates(), k, &mut baseline_rng), true_z),
        ];
        Ok((report, selection, selected_k, comparison))
    })();

    match outcome {
        Ok((report, selection, selected_k, comparison)) => {
            let params = truth
                .iter()
                .map(|(name, t)| {
                    let s = report.scalar(name).expect("report carries every parameter");
                    ParamRow {
                        replicate,
                        parameter: name.clone(),
                        truth: *t,
                        mean: Some(s.mean),
                        sd: Some(s.sd),
                        lower: Some(s.lower),
                        upper: Some(s.upper),
                        covered: Some(s.covers(*t)),
                        rhat: s.rhat,
                        status: "ok".into(),
                    }
                })
                .collect();
            ReplicateOutcome {
                replicate,
                params,
                comparison,
                selection,
                selected_k,
                error: None,
            }
        }
        Err(e) => {
            log::warn!("replicate {replicate} failed: {e}");
            let (params, comparison) = failed_rows(replicate, &truth, &e.to_string());
            ReplicateOutcome {
                replicate,
                params,
                comparison,
                selection: Vec::new(),
                selected_k: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs every replicate. Replicates are independent and run in parallel;
/// each draws its data, chain and baseline seeds from its own index.
pub fn run_study(cfg: &StudyConfig) -> StudyResult {
    let outcomes = (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, r)).collect();
    StudyResult { outcomes }
}

impl StudyResult {
    pub fn succeeded(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_none()).count()
    }

    pub fn params(&self) -> Vec<ParamRow> {
        self.outcomes.iter().flat_map(|o| o.params.iter().cloned()).collect()
    }

    pub fn comparison(&self) -> Vec<ComparisonRow> {
        self.outcomes.iter().flat_map(|o| o.comparison.iter().cloned()).collect()
    }

    pub fn selection(&self) -> Vec<SelectionRow> {
        self.outcomes.iter().flat_map(|o| o.selection.iter().cloned()).collect()
    }

    pub fn param_summary(&self) -> Vec<ParamSummary> {
        let rows = self.params();
        let mut names: Vec<(String, f64)> = Vec::new();
        for r in &rows {
            if !names.iter().any(|(n, _)| n == &r.parameter) {
                names.push((r.parameter.clone(), r.truth));
            }
        }
        names
            .into_iter()
            .map(|(name, truth)| {
                let ok: Vec<&ParamRow> = rows.iter().filter(|r| r.parameter == name && r.mean.is_some()).collect();
                let means: Vec<f64> = ok.iter().filter_map(|r| r.mean).collect();
                let m = mean(&means).unwrap_or(f64::NAN);
                let esd = if means.len() > 1 {
                    (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
                } else {
                    f64::NAN
                };
                let sds: Vec<f64> = ok.iter().filter_map(|r| r.sd).collect();
                let covered = ok.iter().filter(|r| r.covered == Some(true)).count();
                ParamSummary {
                    parameter: name,
                    truth,
                    bias: m - truth,
                    se: mean(&sds).unwrap_or(f64::NAN),
                    esd,
                    cp: if ok.is_empty() { f64::NAN } else { covered as f64 / ok.len() as f64 },
                    replicates: ok.len(),
                }
            })
            .collect()
    }

    pub fn method_summary(&self) -> Vec<MethodSummary> {
        let rows = self.comparison();
        METHODS
            .iter()
            .map(|m| {
                let ok: Vec<&ComparisonRow> = rows.iter().filter(|r| r.method == *m && r.ari.is_some()).collect();
                let mut a: Vec<f64> = ok.iter().filter_map(|r| r.ari).collect();
                let mut n: Vec<f64> = ok.iter().filter_map(|r| r.nmi).collect();
                MethodSummary {
                    method: m.to_string(),
                    mean_ari: mean(&a),
                    mean_nmi: mean(&n),
                    median_ari: median(&mut a),
                    median_nmi: median(&mut n),
                    replicates: ok.len(),
                }
            })
            .collect()
    }

    pub fn k_frequencies(&self) -> Vec<KFrequency> {
        let picks: Vec<usize> = self.outcomes.iter().filter_map(|o| o.selected_k).collect();
        let mut ks: Vec<usize> = self.selection().iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.into_iter()
            .map(|k| {
                let count = picks.iter().filter(|&&p| p == k).count();
                KFrequency {
                    k,
                    count,
                    frequency: if picks.is_empty() { 0.0 } else { count as f64 / picks.len() as f64 },
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use calfsbm::inference::McmcConfig;

    fn tiny(k_range: Option<Vec<usize>>) -> StudyConfig {
        StudyConfig {
            generate: GenConfig {
                n: 24,
                k: 2,
                ..GenConfig::default()
            },
            replicates: 3,
            settings: FitSettings {
                mcmc: McmcConfig {
                    burn_in: 20,
                    iterations: 40,
                    thin: 4,
                    n_chains: 2,
                    ..McmcConfig::desk()
                },
                ..FitSettings::default()
            },
            k_range,
            seed: 9,
        }
    }

    #[test]
    fn rows_have_no_gaps() {
        let res = run_study(&tiny(None));
        assert_eq!(res.succeeded(), 3);
        assert_eq!(res.comparison().len(), 3 * METHODS.len());
        assert_eq!(res.params().len(), 3 * 6);
        for (i, r) in res.comparison().iter().enumerate() {
            assert_eq!(r.replicate, i / METHODS.len());
            assert_eq!(r.method, METHODS[i % METHODS.len()]);
        }
        let s = res.param_summary();
        assert_eq!(s[0].parameter, "beta0");
        assert_eq!(s[0].replicates, 3);
        assert!((0.0..=1.0).contains(&s[0].cp));
        let m = res.method_summary();
        assert_eq!(m[1].replicates, 0);
        assert!(m[0].median_ari.is_some());
    }

    #[test]
    fn selection_study_and_determinism() {
        let a = run_study(&tiny(Some(vec![1, 2])));
        let b = run_study(&tiny(Some(vec![1, 2])));
        assert_eq!(a, b);
        assert_eq!(a.selection().len(), 6);
        let f = a.k_frequencies();
        assert_eq!(f.iter().map(|x| x.count).sum::<usize>(), 3);
    }

    #[test]
    fn failures_become_rows() {
        let mut cfg = tiny(None);
        cfg.generate.k = 30;
        let res = run_study(&cfg);
        assert_eq!(res.succeeded(), 0);
        assert_eq!(res.comparison().len(), 3 * METHODS.len());
        assert!(res.comparison().iter().all(|r| r.status.starts_with("failed")));
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
