//! Subcommand bodies. Each takes a fully resolved [`RunConfig`] and an
//! output directory, and writes its artifacts plus `config.toml`, an echo of
//! the effective configuration including the seed.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use calfsbm::datagen::generate;
use calfsbm::evaluation::{kmeans, spectral_clustering};
use calfsbm::posterior::{fit, select_k, FitReport};
use calfsbm::rng::{self, tags};
use calfsbm::{Network, NodeData};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{self, Truth};
use crate::study::{self, ComparisonRow, StudyConfig};

fn prepare(cfg: &mut RunConfig, out: &Path) -> Result<u64> {
    let seed = cfg.pin_seed()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    fs::write(out.join("config.toml"), cfg.echo()?)?;
    Ok(seed)
}

fn load_inputs(cfg: &RunConfig) -> Result<(Network, NodeData)> {
    let (Some(edges), Some(covariates)) = (&cfg.input.edges, &cfg.input.covariates) else {
        bail!("both an edge list and a covariate file are required");
    };
    let nd = io::load_covariates(covariates)?.node_data()?;
    let net = io::load_network(edges, Some(nd.n()), cfg.input.reciprocal)?;
    Ok((net, nd))
}

fn required_k(cfg: &RunConfig) -> Result<usize> {
    cfg.k.context("the number of communities is required: pass --k")
}

/// A report file: the run's seed and configuration next to the results.
#[derive(Serialize, Deserialize)]
pub struct ReportDocument<T> {
    pub seed: u64,
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Serialize, Deserialize)]
pub struct FitBody {
    pub report: FitReport,
}

#[derive(Serialize)]
struct WaicRow {
    k: usize,
    waic: Option<f64>,
    lppd: Option<f64>,
    p_waic: Option<f64>,
    max_rhat: Option<f64>,
    selected: bool,
    status: String,
}

/// Writes `edges.csv`, `covariates.csv` and `truth.csv` for one synthetic network.
pub fn cmd_generate(mut cfg: RunConfig, out: &Path) -> Result<()> {
    if let Some(k) = cfg.k {
        cfg.generate.k = k;
    }
    prepare(&mut cfg, out)?;
    let syn = generate(&cfg.generate)?;
    io::save_network(&syn.network, &out.join("edges.csv"))?;
    io::save_covariates(syn.node_data.covariates(), &out.join("covariates.csv"))?;
    io::save_truth(
        &Truth {
            membership: syn.true_membership,
            theta: syn.true_theta,
        },
        &out.join("truth.csv"),
    )?;
    log::info!(
        "generated {} nodes, {} edges (density {:.3})",
        syn.network.n(),
        syn.network.edge_count(),
        syn.network.density()
    );
    Ok(())
}

/// Fits one `K` and writes `report.json`, plus `draws.csv` when asked.
pub fn cmd_fit(mut cfg: RunConfig, out: &Path) -> Result<()> {
    let k = required_k(&cfg)?;
    let seed = prepare(&mut cfg, out)?;
    let (net, nd) = load_inputs(&cfg)?;
    let f = fit(&net, &nd, k, &cfg.fit_settings())?;
    if cfg.write_draws {
        io::save_draws(&f.chains, &out.join("draws.csv"))?;
    }
    log::info!("K = {k}: WAIC {:.3}", f.report.waic.waic);
    io::save_json(
        &ReportDocument {
            seed,
            config: cfg,
            body: FitBody { report: f.report },
        },
        &out.join("report.json"),
    )
}

/// Fits every `K` in the range; writes `waic.csv`, `selection.json` and the
/// chosen fit as `report.json`.
pub fn cmd_select_k(mut cfg: RunConfig, out: &Path) -> Result<()> {
    let ks = cfg.k_range()?;
    let seed = prepare(&mut cfg, out)?;
    let (net, nd) = load_inputs(&cfg)?;
    let sel = select_k(&net, &nd, &ks, &cfg.fit_settings())?;
    let rows: Vec<WaicRow> = sel
        .entries
        .iter()
        .map(|e| WaicRow {
            k: e.k,
            waic: e.waic.map(|w| w.waic),
            lppd: e.waic.map(|w| w.lppd),
            p_waic: e.waic.map(|w| w.p_waic),
            max_rhat: e.report.as_ref().and_then(|r| r.max_rhat),
            selected: e.k == sel.best_k,
            status: e.error.clone().map_or("ok".into(), |m| format!("failed: {m}")),
        })
        .collect();
    io::save_rows(&rows, &out.join("waic.csv"))?;
    log::info!("selected K = {}", sel.best_k);
    let best = sel.best().clone();
    io::save_json(
        &ReportDocument {
            seed,
            config: cfg.clone(),
            body: &sel,
        },
        &out.join("selection.json"),
    )?;
    io::save_json(
        &ReportDocument {
            seed,
            config: cfg,
            body: FitBody { report: best },
        },
        &out.join("report.json"),
    )
}

/// Scores a fitted membership (if given) and the baselines against the
/// truth; writes `comparison.csv`.
pub fn cmd_evaluate(mut cfg: RunConfig, out: &Path) -> Result<()> {
    let seed = prepare(&mut cfg, out)?;
    let (net, nd) = load_inputs(&cfg)?;
    let truth_path = cfg.input.truth.as_ref().context("a truth file is required")?;
    let truth = io::load_truth(truth_path)?;
    ensure!(
        truth.membership.len() == net.n(),
        "truth lists {} nodes but the network has {}",
        truth.membership.len(),
        net.n()
    );
    let true_k = truth.membership.iter().max().map_or(0, |m| m + 1);
    let k = cfg.k.unwrap_or(true_k);
    let fitted = match &cfg.input.report {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let doc: ReportDocument<FitBody> =
                serde_json::from_str(&text).with_context(|| format!("{} is not a fit report", p.display()))?;
            ensure!(doc.body.report.membership.len() == net.n(), "report does not match the network size");
            Some(doc.body.report.membership_zero_based())
        }
        None => None,
    };
    let mut r = rng::stream(rng::child_seed(seed, tags::BASELINE), 0);
    let z = &truth.membership;
    let rows: Vec<ComparisonRow> = vec![
        match fitted {
            Some(l) => study::score(0, "calf-sbm", Ok(l), z),
            None => placeholder("calf-sbm", "not provided"),
        },
        placeholder("casc", "unavailable"),
        study::score(0, "spectral", spectral_clustering(&net, k, &mut r), z),
        study::score(0, "kmeans", kmeans(nd.covariates(), k, &mut r), z),
    ];
    io::save_rows(&rows, &out.join("comparison.csv"))
}

fn placeholder(method: &str, status: &str) -> ComparisonRow {
    ComparisonRow {
        replicate: 0,
        method: method.into(),
        ari: None,
        nmi: None,
        status: status.into(),
    }
}

/// Runs the replicated study and writes per-replicate and aggregate CSVs.
pub fn cmd_simulate(mut cfg: RunConfig, out: &Path) -> Result<study::StudyResult> {
    if let Some(k) = cfg.k {
        cfg.generate.k = k;
    }
    let seed = prepare(&mut cfg, out)?;
    let k_range = if cfg.k_min.is_some() || cfg.k_max.is_some() {
        Some(cfg.k_range()?)
    } else {
        None
    };
    let res = study::run_study(&StudyConfig {
        generate: cfg.generate.clone(),
        replicates: cfg.replicates,
        settings: cfg.fit_settings(),
        k_range: k_range.clone(),
        seed,
    });
    io::save_rows(&res.params(), &out.join("replicates.csv"))?;
    io::save_rows(&res.comparison(), &out.join("comparison.csv"))?;
    io::save_rows(&res.param_summary(), &out.join("summary.csv"))?;
    io::save_rows(&res.method_summary(), &out.join("methods.csv"))?;
    if k_range.is_some() {
        io::save_rows(&res.selection(), &out.join("selection.csv"))?;
        io::save_rows(&res.k_frequencies(), &out.join("k_frequency.csv"))?;
    }
    ensure!(res.succeeded() > 0, "every replicate failed");
    log::info!("{}/{} replicates succeeded", res.succeeded(), cfg.replicates);
    Ok(res)
}
