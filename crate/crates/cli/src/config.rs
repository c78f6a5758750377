//! Run configuration: one TOML file with data paths, model block, prior
//! block, MCMC block and output settings. Every field has a default
//! matching the reference application, so a minimal config only names the
//! data files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use slergm::inference::{AuxMode, HyperPriors, McmcConfig};
use slergm::stats::{ModelSpec, StatisticSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcBlock,
    #[serde(default)]
    pub predictive: PredictiveConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Edge-list file produced by `ingest`.
    pub edges: Option<PathBuf>,
    /// Node attribute CSV.
    pub attributes: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub sponsorship: Option<PathBuf>,
    pub actors: Option<PathBuf>,
    #[serde(default = "default_densities")]
    pub densities: Vec<f64>,
}

fn default_densities() -> Vec<f64> {
    vec![0.25, 0.15, 0.10, 0.05]
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { sponsorship: None, actors: None, densities: default_densities() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Per-transition statistic lists; defaults to the five-effect model
    /// with decays 0.5 / 0.3 / 0.1 on party homophily level GOP.
    pub layer: Option<Vec<LayerModel>>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_attr")]
    pub homophily_attr: String,
    #[serde(default = "default_level")]
    pub homophily_level: String,
}

fn default_alphas() -> Vec<f64> {
    vec![0.5, 0.3, 0.1]
}

fn default_attr() -> String {
    "party".into()
}

fn default_level() -> String {
    "GOP".into()
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layer: None,
            alphas: default_alphas(),
            homophily_attr: default_attr(),
            homophily_level: default_level(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerModel {
    pub stats: Vec<StatisticSpec>,
}

impl ModelConfig {
    /// Resolves the model for a stack with `k_layers` layers.
    pub fn resolve(&self, k_layers: usize) -> Result<ModelSpec> {
        if let Some(layers) = &self.layer {
            let spec = ModelSpec { layers: layers.iter().map(|l| l.stats.clone()).collect() };
            if spec.n_transitions() != k_layers - 1 {
                bail!(
                    "model has {} transition blocks but the stack needs {}",
                    spec.n_transitions(),
                    k_layers - 1
                );
            }
            return Ok(spec);
        }
        if self.alphas.len() != k_layers - 1 {
            bail!(
                "model.alphas has {} entries but the stack needs {}",
                self.alphas.len(),
                k_layers - 1
            );
        }
        Ok(ModelSpec::standard(&self.alphas, &self.homophily_attr, &self.homophily_level))
    }
}

/// Covariance shorthand: a bare number means `scalar * I`, a string like
/// `"4*I"` does too, and a nested array gives the full matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovSpec {
    Scalar(f64),
    Shorthand(String),
    Full(Vec<Vec<f64>>),
}

impl CovSpec {
    pub fn to_matrix(&self, p: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            CovSpec::Scalar(s) => Ok(DMatrix::identity(p, p) * *s),
            CovSpec::Shorthand(text) => {
                let cleaned = text.replace(' ', "");
                let scalar = if cleaned == "I" {
                    1.0
                } else if let Some(num) = cleaned.strip_suffix("*I") {
                    num.parse::<f64>()
                        .with_context(|| format!("{what}: cannot parse `{text}`"))?
                } else {
                    bail!("{what}: expected a number, `c*I`, or a matrix, got `{text}`");
                };
                Ok(DMatrix::identity(p, p) * scalar)
            }
            CovSpec::Full(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    bail!("{what}: matrix must be {p}x{p}");
                }
                Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub mu0: Vec<f64>,
    #[serde(default = "default_sigma0")]
    pub sigma0: CovSpec,
    #[serde(default = "default_nu0")]
    pub nu0: f64,
    #[serde(default = "default_s0")]
    pub s0: CovSpec,
}

fn default_sigma0() -> CovSpec {
    CovSpec::Shorthand("4*I".into())
}

fn default_nu0() -> f64 {
    12.0
}

fn default_s0() -> CovSpec {
    CovSpec::Shorthand("I".into())
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mu0: Vec::new(),
            sigma0: default_sigma0(),
            nu0: default_nu0(),
            s0: default_s0(),
        }
    }
}

impl PriorConfig {
    pub fn resolve(&self, p: usize) -> Result<HyperPriors> {
        let mu0 = if self.mu0.is_empty() {
            DVector::zeros(p)
        } else if self.mu0.len() == 1 {
            DVector::from_element(p, self.mu0[0])
        } else if self.mu0.len() == p {
            DVector::from_vec(self.mu0.clone())
        } else {
            bail!("prior.mu0 must have 1 or {p} entries");
        };
        let priors = HyperPriors {
            mu0,
            sigma0: self.sigma0.to_matrix(p, "prior.sigma0")?,
            nu0: self.nu0,
            s0: self.s0.to_matrix(p, "prior.s0")?,
        };
        priors.validate(p)?;
        Ok(priors)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcBlock {
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_t_start")]
    pub t_start: usize,
    #[serde(default = "d_adapt_every")]
    pub adapt_every: usize,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_a_target")]
    pub a_target: f64,
    #[serde(default = "d_gamma0")]
    pub gamma0: f64,
    #[serde(default = "d_aux_iters")]
    pub aux_iters: usize,
    #[serde(default = "d_thin")]
    pub thin: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_chains")]
    pub chains: usize,
    /// Iteration after which proposal scales freeze (default: half the run).
    #[serde(default)]
    pub adapt_freeze: Option<usize>,
    #[serde(default)]
    pub refresh_base_cov: bool,
}

fn d_iterations() -> usize {
    100_000
}
fn d_t_start() -> usize {
    200
}
fn d_adapt_every() -> usize {
    50
}
fn d_lambda() -> f64 {
    0.2
}
fn d_a_target() -> f64 {
    0.234
}
fn d_gamma0() -> f64 {
    1.0
}
fn d_aux_iters() -> usize {
    5_000
}
fn d_thin() -> usize {
    1
}
fn d_seed() -> u64 {
    1
}
fn d_chains() -> usize {
    1
}

impl Default for McmcBlock {
    fn default() -> Self {
        McmcBlock {
            iterations: d_iterations(),
            t_start: d_t_start(),
            adapt_every: d_adapt_every(),
            lambda: d_lambda(),
            a_target: d_a_target(),
            gamma0: d_gamma0(),
            aux_iters: d_aux_iters(),
            thin: d_thin(),
            seed: d_seed(),
            chains: d_chains(),
            adapt_freeze: None,
            refresh_base_cov: false,
        }
    }
}

impl McmcBlock {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 && self.chains == 0 {
            bail!("mcmc.chains must be at least 1");
        }
        for (name, v) in [
            ("mcmc.lambda", self.lambda),
            ("mcmc.a_target", self.a_target),
            ("mcmc.gamma0", self.gamma0),
        ] {
            if v <= 0.0 {
                bail!("{name} must be positive");
            }
        }
        if self.a_target >= 1.0 {
            bail!("mcmc.a_target must lie in (0, 1)");
        }
        if self.thin == 0 {
            bail!("mcmc.thin must be at least 1");
        }
        if self.chains == 0 {
            bail!("mcmc.chains must be at least 1");
        }
        Ok(())
    }

    /// Core config for chain `index` (seeds are spaced per chain).
    pub fn to_core(&self, chain_index: usize) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            t_start: self.t_start,
            adapt_every: self.adapt_every,
            lambda: self.lambda,
            a_target: self.a_target,
            gamma0: self.gamma0,
            aux: AuxMode::Gibbs { iters: self.aux_iters },
            thin: self.thin,
            seed: self.seed.wrapping_add(chain_index as u64 * 0x9E37_79B9),
            adapt_freeze: self.adapt_freeze,
            refresh_base_cov: self.refresh_base_cov,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictiveConfig {
    #[serde(default = "d_n_sims")]
    pub n_sims: usize,
    /// Dyad updates per simulated transition.
    #[serde(default = "d_sim_iters")]
    pub sim_iters: usize,
    #[serde(default = "d_pred_seed")]
    pub seed: u64,
}

fn d_n_sims() -> usize {
    1_000
}
fn d_sim_iters() -> usize {
    5_000
}
fn d_pred_seed() -> u64 {
    7
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        PredictiveConfig { n_sims: d_n_sims(), sim_iters: d_sim_iters(), seed: d_pred_seed() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_out_dir")]
    pub dir: PathBuf,
}

fn d_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: d_out_dir() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.mcmc.validate()?;
        Ok(cfg)
    }
}
