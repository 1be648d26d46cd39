use calfsbm::datagen::{generate, GenConfig};
use calfsbm::evaluation::ari;
use calfsbm::inference::McmcConfig;
use calfsbm::posterior::{fit, select_k, FitSettings};

fn quick_settings(seed: u64) -> FitSettings {
    let mut s = FitSettings::default();
    s.mcmc = McmcConfig {
        burn_in: 500,
        iterations: 1000,
        thin: 2,
        n_chains: 2,
        seed,
        ..McmcConfig::desk()
    };
    s
}

fn data() -> calfsbm::datagen::SyntheticNetwork {
    generate(&GenConfig {
        n: 150,
        k: 2,
        omega: 2.0,
        seed: 17,
        ..GenConfig::default()
    })
    .unwrap()
}

#[test]
fn fit_recovers_block_structure() {
    let syn = data();
    let f = fit(&syn.network, &syn.node_data, 2, &quick_settings(5)).unwrap();
    let r = &f.report;
    assert_eq!((r.k, r.n_nodes, r.n_chains, r.draws_per_chain), (2, 150, 2, 500));
    let acc = ari(&r.membership_zero_based(), &syn.true_membership).unwrap();
    assert!(acc > 0.6, "ARI {acc}");
    let b = r.beta(0, 0).unwrap().mean;
    assert!(b <= r.beta(1, 1).unwrap().mean, "diagonal sorted after relabeling");
    assert!(r.waic.waic.is_finite() && r.waic.p_waic > 0.0);
}

#[test]
fn fit_is_reproducible() {
    let syn = data();
    let a = fit(&syn.network, &syn.node_data, 2, &quick_settings(8)).unwrap();
    let b = fit(&syn.network, &syn.node_data, 2, &quick_settings(8)).unwrap();
    assert_eq!(a.report.waic, b.report.waic);
    assert_eq!(a.report.membership, b.report.membership);
}

#[test]
fn selection_reports_every_k() {
    let syn = data();
    let sel = select_k(&syn.network, &syn.node_data, &[1, 2, 3], &quick_settings(2)).unwrap();
    assert_eq!(sel.entries.iter().map(|e| e.k).collect::<Vec<_>>(), [1, 2, 3]);
    let best = sel.entries.iter().filter_map(|e| e.waic.map(|w| (e.k, w.waic))).min_by(|a, b| a.1.total_cmp(&b.1));
    assert_eq!(Some(sel.best_k), best.map(|b| b.0));
    assert!(select_k(&syn.network, &syn.node_data, &[], &quick_settings(2)).is_err());
}
