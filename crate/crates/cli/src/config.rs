//! Run configuration: a TOML file, overridden field by field from flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use calfsbm::datagen::GenConfig;
use calfsbm::inference::{InitConfig, McmcConfig, PriorHyper};
use calfsbm::posterior::FitSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 5000 burn-in, 10000 iterations, thin 10, 3 chains.
    Paper,
    /// 1000 burn-in, 2000 iterations, thin 5, 2 chains.
    Desk,
}

impl Preset {
    pub fn apply(self, mcmc: &mut McmcConfig) {
        let p = match self {
            Preset::Paper => McmcConfig::paper(),
            Preset::Desk => McmcConfig::desk(),
        };
        mcmc.burn_in = p.burn_in;
        mcmc.iterations = p.iterations;
        mcmc.thin = p.thin;
        mcmc.n_chains = p.n_chains;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub edges: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// A fit report whose membership is scored by `evaluate`.
    pub report: Option<PathBuf>,
    /// Read edges as directed arcs and keep only reciprocated pairs.
    pub reciprocal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub replicates: usize,
    pub preset: Option<Preset>,
    pub write_draws: bool,
    pub input: InputConfig,
    pub generate: GenConfig,
    pub mcmc: McmcConfig,
    pub prior: PriorHyper,
    pub init: InitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            k: None,
            k_min: None,
            k_max: None,
            replicates: 10,
            preset: None,
            write_draws: false,
            input: InputConfig::default(),
            generate: GenConfig::default(),
            mcmc: McmcConfig::default(),
            prior: PriorHyper::default(),
            init: InitConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("a seed is required: pass --seed or set `seed` in the config"),
        }
    }

    /// Writes the seed into every nested seed field so the echo is
    /// self-consistent.
    pub fn pin_seed(&mut self) -> Result<u64> {
        let seed = self.seed()?;
        self.generate.seed = seed;
        self.mcmc.seed = seed;
        Ok(seed)
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            prior: self.prior.clone(),
            mcmc: self.mcmc.clone(),
            init: self.init.clone(),
        }
    }

    pub fn k_range(&self) -> Result<Vec<usize>> {
        let lo = self.k_min.unwrap_or(2);
        let hi = self.k_max.unwrap_or(lo.max(5));
        if lo == 0 || lo > hi {
            bail!("invalid K range {lo}..={hi}");
        }
        Ok((lo..=hi).collect())
    }

    /// Flattened `dotted.key = value` lines in sorted key order. Unset
    /// optional fields are omitted.
    pub fn echo(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let mut out = String::new();
        flatten("", &value, &mut out);
        Ok(out)
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        serde_json::Value::Null => {}
        other => {
            let _ = writeln!(out, "{prefix} = {other}");
        }
    }
}
