use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use calfsbm_cli::commands;
use calfsbm_cli::config::{Preset, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Covariate-assisted latent-factor stochastic block models: simulate
/// networks, fit them by MCMC, choose K, and compare clusterings.
#[derive(Parser)]
#[command(name = "calfsbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one synthetic network with covariates and ground truth.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of nodes.
        #[arg(long)]
        n: Option<usize>,
        /// Covariate signal strength.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Fit the model with a fixed number of communities.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        mcmc: Mcmc,
        /// Also write every stored draw to draws.csv.
        #[arg(long)]
        draws: bool,
    },
    /// Fit a range of K and keep the one with the smallest WAIC.
    SelectK {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        mcmc: Mcmc,
    },
    /// Score a fitted membership and baseline clusterings against the truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        /// Ground-truth CSV (node, membership, theta).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// report.json written by `fit` or `select-k`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Replicated simulation study with per-replicate and aggregate output.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mcmc: Mcmc,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of communities (true K for generate and simulate).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args)]
struct Input {
    /// Edge-list CSV with columns i, j (0-based).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Covariate CSV; headers may be tagged num:, cat:, lat:, lon:.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Treat edges as directed and keep only reciprocated pairs.
    #[arg(long)]
    reciprocal: bool,
}

#[derive(Args)]
struct Mcmc {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

fn base(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.seed = common.seed.or(cfg.seed);
    cfg.k = common.k.or(cfg.k);
    cfg.k_min = common.k_min.or(cfg.k_min);
    cfg.k_max = common.k_max.or(cfg.k_max);
    Ok(cfg)
}

fn apply_input(cfg: &mut RunConfig, input: Input) {
    if input.edges.is_some() {
        cfg.input.edges = input.edges;
    }
    if input.covariates.is_some() {
        cfg.input.covariates = input.covariates;
    }
    cfg.input.reciprocal |= input.reciprocal;
}

fn apply_mcmc(cfg: &mut RunConfig, m: Mcmc) {
    cfg.preset = m.preset.or(cfg.preset);
    if let Some(p) = cfg.preset {
        p.apply(&mut cfg.mcmc);
    }
    let mc = &mut cfg.mcmc;
    mc.n_chains = m.chains.unwrap_or(mc.n_chains);
    mc.burn_in = m.burn_in.unwrap_or(mc.burn_in);
    mc.iterations = m.iters.unwrap_or(mc.iterations);
    mc.thin = m.thin.unwrap_or(mc.thin);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, n, omega } => {
            let mut cfg = base(&common)?;
            cfg.generate.n = n.unwrap_or(cfg.generate.n);
            cfg.generate.omega = omega.unwrap_or(cfg.generate.omega);
            commands::cmd_generate(cfg, &common.out)
        }
        Command::Fit { common, input, mcmc, draws } => {
            let mut cfg = base(&common)?;
            apply_input(&mut cfg, input);
            apply_mcmc(&mut cfg, mcmc);
            cfg.write_draws |= draws;
            commands::cmd_fit(cfg, &common.out)
        }
        Command::SelectK { common, input, mcmc } => {
            let mut cfg = base(&common)?;
            apply_input(&mut cfg, input);
            apply_mcmc(&mut cfg, mcmc);
            commands::cmd_select_k(cfg, &common.out)
        }
        Command::Evaluate { common, input, truth, report } => {
            let mut cfg = base(&common)?;
            apply_input(&mut cfg, input);
            cfg.input.truth = truth.or(cfg.input.truth);
            cfg.input.report = report.or(cfg.input.report);
            commands::cmd_evaluate(cfg, &common.out)
        }
        Command::Simulate { common, mcmc, n, omega, replicates } => {
            let mut cfg = base(&common)?;
            apply_mcmc(&mut cfg, mcmc);
            cfg.generate.n = n.unwrap_or(cfg.generate.n);
            cfg.generate.omega = omega.unwrap_or(cfg.generate.omega);
            cfg.replicates = replicates.unwrap_or(cfg.replicates);
            commands::cmd_simulate(cfg, &common.out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
