use calfsbm::datagen::{generate, GenConfig};
use calfsbm_cli::commands::{cmd_fit, cmd_generate};
use calfsbm_cli::config::RunConfig;
use calfsbm_cli::io::{load_covariates, load_network, load_truth};

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed: Some(seed),
        ..RunConfig::default()
    };
    cfg.generate.n = 50;
    cfg.generate.k = 2;
    cfg.mcmc.burn_in = 40;
    cfg.mcmc.iterations = 80;
    cfg.mcmc.thin = 2;
    cfg.mcmc.n_chains = 2;
    cfg
}

#[test]
fn generated_files_reload_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(9);
    cmd_generate(cfg.clone(), dir.path()).unwrap();

    let gen = GenConfig { seed: 9, ..cfg.generate.clone() };
    let syn = generate(&gen).unwrap();

    let net = load_network(&dir.path().join("edges.csv"), Some(50), false).unwrap();
    assert_eq!(net.adjacency(), syn.network.adjacency());

    let cov = load_covariates(&dir.path().join("covariates.csv")).unwrap();
    assert_eq!(cov.matrix().as_slice(), syn.node_data.covariates().as_slice());

    let truth = load_truth(&dir.path().join("truth.csv")).unwrap();
    assert_eq!(truth.membership, syn.true_membership);
    assert_eq!(truth.theta, syn.true_theta);
}

#[test]
fn fit_report_has_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    cmd_generate(small_config(3), &data).unwrap();

    let mut cfg = small_config(4);
    cfg.k = Some(2);
    cfg.write_draws = true;
    cfg.input.edges = Some(data.join("edges.csv"));
    cfg.input.covariates = Some(data.join("covariates.csv"));
    let out = dir.path().join("fit");
    cmd_fit(cfg, &out).unwrap();

    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["seed"], 4);
    assert!(doc["config"].is_object());
    let report = &doc["report"];
    for key in ["k", "n_nodes", "n_chains", "draws_per_chain", "scalars", "theta_mean", "membership", "waic", "accept"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    assert_eq!(report["membership"].as_array().unwrap().len(), 50);
    let names: Vec<&str> = report["scalars"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["beta0", "beta_1_1", "beta_1_2", "beta_2_2", "sigma2", "sigma"]);
    assert!(report["waic"]["waic"].as_f64().unwrap().is_finite());

    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    // header plus 2 chains × 40 stored draws
    assert_eq!(draws.lines().count(), 1 + 2 * 40);
    assert!(out.join("config.toml").exists());
}

#[test]
fn fit_without_inputs_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(1);
    cfg.k = Some(2);
    let err = cmd_fit(cfg, dir.path()).unwrap_err();
    assert!(format!("{err:#}").contains("edge list"), "{err:#}");
}
