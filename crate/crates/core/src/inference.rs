//! Posterior sampling for the layer coefficients and their hierarchical
//! hyperparameters via an adaptive approximate exchange algorithm.
//!
//! Each iteration runs one exchange update per layer transition (proposal,
//! auxiliary layer simulation at the proposed coefficients, accept/reject
//! on the exchange ratio), an optional proposal-scale adaptation, and a
//! conjugate normal / inverse-Wishart Gibbs update of the pooled mean and
//! covariance. Because the likelihood factorizes over transitions given
//! the observed layers, each exchange update simulates only its own
//! transition factor; cross-factor terms cancel in the acceptance ratio.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::mvn::{self, CholCov};
use crate::network::LayerStack;
use crate::oracle;
use crate::sampler::{simulate_transition_with_rng, InitState};
use crate::stats::{CompiledStats, ModelSpec, StatVector};

/// Hyperpriors of the hierarchical layer: `mu ~ N(mu0, sigma0)` and
/// `Sigma ~ InverseWishart(nu0, s0)`.
#[derive(Debug, Clone)]
pub struct HyperPriors {
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub nu0: f64,
    pub s0: DMatrix<f64>,
}

impl HyperPriors {
    /// The application defaults: mu0 = 0, sigma0 = 4I, nu0 = 12, s0 = I.
    pub fn diffuse(p: usize) -> Self {
        HyperPriors {
            mu0: DVector::zeros(p),
            sigma0: DMatrix::identity(p, p) * 4.0,
            nu0: 12.0,
            s0: DMatrix::identity(p, p),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.mu0.len() != p || self.sigma0.nrows() != p || self.s0.nrows() != p {
            return Err(Error::DimensionMismatch(format!(
                "hyperprior dimension must be {p}"
            )));
        }
        mvn::check_spd(&self.sigma0, "sigma0")?;
        mvn::check_spd(&self.s0, "s0")?;
        if self.nu0 <= (p - 1) as f64 {
            return Err(Error::InvalidConfig(format!(
                "nu0 = {} must exceed p - 1 = {}",
                self.nu0,
                p - 1
            )));
        }
        Ok(())
    }
}

/// Current pooled mean and covariance of the layer coefficients.
#[derive(Debug, Clone)]
pub struct HyperState {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Prior used inside the exchange ratio: the hierarchical conditional
/// (updated by Gibbs) or a fixed normal (no pooling; used for validation
/// against quadrature references).
#[derive(Debug, Clone)]
pub enum PriorMode {
    Hierarchical(HyperPriors),
    Fixed { mu: DVector<f64>, sigma: DMatrix<f64> },
}

/// Auxiliary-draw engine for the exchange step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxMode {
    /// Metropolis-within-Gibbs chain of `iters` dyad updates, warm-started
    /// at the observed layer.
    Gibbs { iters: usize },
    /// Perfect draws from the enumerated factor (tiny supports only).
    Exact,
}

/// Per-layer proposal-scale adaptation state.
#[derive(Debug, Clone)]
pub struct AdaptState {
    pub gamma: Vec<f64>,
    pub base_cov: Vec<DMatrix<f64>>,
    pub lambda: f64,
    pub a_target: f64,
    window_proposals: Vec<usize>,
    window_accepts: Vec<usize>,
}

impl AdaptState {
    pub fn new(n_blocks: usize, p: usize, gamma0: f64, lambda: f64, a_target: f64) -> Self {
        assert!(gamma0 > 0.0 && lambda > 0.0 && a_target > 0.0 && a_target < 1.0);
        AdaptState {
            gamma: vec![gamma0; n_blocks],
            base_cov: vec![DMatrix::identity(p, p); n_blocks],
            lambda,
            a_target,
            window_proposals: vec![0; n_blocks],
            window_accepts: vec![0; n_blocks],
        }
    }

    fn record(&mut self, block: usize, accepted: bool) {
        self.window_proposals[block] += 1;
        if accepted {
            self.window_accepts[block] += 1;
        }
    }

    /// Acceptance rate of the current window for one block.
    pub fn window_rate(&self, block: usize) -> Option<f64> {
        if self.window_proposals[block] == 0 {
            None
        } else {
            Some(self.window_accepts[block] as f64 / self.window_proposals[block] as f64)
        }
    }

    /// Applies the multiplicative scale rule to every block and resets the
    /// window counters.
    pub fn update(&mut self) {
        for block in 0..self.gamma.len() {
            if let Some(rate) = self.window_rate(block) {
                self.gamma[block] = adapt_gamma(self.gamma[block], rate, self.lambda, self.a_target);
            }
            self.window_proposals[block] = 0;
            self.window_accepts[block] = 0;
        }
    }
}

/// The scale rule: grow by (1 + lambda) when the window acceptance rate
/// exceeds the target, shrink by (1 - lambda) otherwise.
pub fn adapt_gamma(gamma: f64, window_rate: f64, lambda: f64, a_target: f64) -> f64 {
    if window_rate > a_target {
        gamma * (1.0 + lambda)
    } else {
        gamma * (1.0 - lambda)
    }
}

/// Exchange acceptance log-ratio: likelihood part from the auxiliary and
/// observed statistics, plus the prior log-density difference.
pub fn exchange_log_ratio(
    phi: &DVector<f64>,
    proposal: &DVector<f64>,
    s_obs: &[f64],
    s_aux: &[f64],
    prior_mean: &DVector<f64>,
    prior_cov: &CholCov,
) -> f64 {
    let lik: f64 = (0..phi.len())
        .map(|r| (phi[r] - proposal[r]) * (s_aux[r] - s_obs[r]))
        .sum();
    lik + prior_cov.log_density(proposal, prior_mean) - prior_cov.log_density(phi, prior_mean)
}

/// Mean and covariance of the full conditional of the pooled mean given
/// the layer coefficients and current Sigma.
pub fn mu_conditional(
    priors: &HyperPriors,
    sigma_phi: &DMatrix<f64>,
    phis: &[DVector<f64>],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let tau0 = CholCov::new(priors.sigma0.clone())?.inverse();
    let m = phis.len();
    let sigma_inv = CholCov::new(sigma_phi.clone())?.inverse();
    let precision = &tau0 + m as f64 * &sigma_inv;
    let cov = CholCov::new(precision)?.inverse();
    let mut weighted = &tau0 * &priors.mu0;
    if m > 0 {
        let mut mean_phi = DVector::zeros(priors.mu0.len());
        for phi in phis {
            mean_phi += phi;
        }
        mean_phi /= m as f64;
        weighted += m as f64 * &sigma_inv * mean_phi;
    }
    Ok((&cov * weighted, cov))
}

/// Degrees of freedom and scale of the full conditional of Sigma given the
/// layer coefficients and current mu.
pub fn sigma_conditional(
    priors: &HyperPriors,
    mu: &DVector<f64>,
    phis: &[DVector<f64>],
) -> (f64, DMatrix<f64>) {
    let nu_n = priors.nu0 + phis.len() as f64;
    let mut s_n = priors.s0.clone();
    for phi in phis {
        let d = phi - mu;
        s_n += &d * d.transpose();
    }
    (nu_n, s_n)
}

/// One conjugate Gibbs sweep over (mu, Sigma) given the layer coefficients.
/// A numerically singular draw is retried with escalating jitter.
pub fn gibbs_hyper<R: Rng>(
    priors: &HyperPriors,
    state: &mut HyperState,
    phis: &[DVector<f64>],
    rng: &mut R,
) -> Result<()> {
    let (mean, cov) = mu_conditional(priors, &state.sigma, phis)?;
    state.mu = CholCov::new(cov)?.sample(&mean, rng);
    let (nu_n, s_n) = sigma_conditional(priors, &state.mu, phis);
    let p = s_n.nrows();
    let mut jitter = 0.0;
    for attempt in 0..5 {
        let scale = if jitter > 0.0 {
            &s_n + DMatrix::identity(p, p) * jitter
        } else {
            s_n.clone()
        };
        match mvn::sample_inverse_wishart(nu_n, &scale, rng)
            .and_then(|draw| mvn::check_spd(&draw, "Sigma draw").map(|_| draw))
        {
            Ok(draw) => {
                state.sigma = draw;
                return Ok(());
            }
            Err(_) if attempt < 4 => {
                jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// MCMC controls. `thin` stores every `thin`-th iteration (1 keeps all).
/// Adaptation runs from `t_start` every `adapt_every` iterations until
/// `adapt_freeze` (defaults to half the run when `None`).
#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub iterations: usize,
    pub t_start: usize,
    pub adapt_every: usize,
    pub lambda: f64,
    pub a_target: f64,
    pub gamma0: f64,
    pub aux: AuxMode,
    pub thin: usize,
    pub seed: u64,
    pub adapt_freeze: Option<usize>,
    /// Refresh each block's base proposal covariance to the empirical
    /// covariance of its stored draws at adaptation checkpoints.
    pub refresh_base_cov: bool,
}

impl McmcConfig {
    /// The application defaults with paper-scale adaptation settings.
    pub fn standard(iterations: usize, aux_iters: usize, seed: u64) -> Self {
        McmcConfig {
            iterations,
            t_start: 200,
            adapt_every: 50,
            lambda: 0.2,
            a_target: 0.234,
            gamma0: 1.0,
            aux: AuxMode::Gibbs { iters: aux_iters },
            thin: 1,
            seed,
            adapt_freeze: None,
            refresh_base_cov: false,
        }
    }
}

/// One stored MCMC state.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iter: usize,
    pub phi: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Row-major p x p.
    pub sigma: Vec<f64>,
    /// Whether each block's most recent exchange proposal was accepted.
    pub accepted: Vec<bool>,
    pub gamma: Vec<f64>,
}

/// Stored draws plus acceptance and adaptation telemetry.
#[derive(Debug, Clone)]
pub struct Chain {
    /// Statistic names per transition block.
    pub stat_names: Vec<Vec<String>>,
    /// Column labels for the pooled mean (first block's names).
    pub mu_names: Vec<String>,
    pub draws: Vec<Draw>,
    pub accept_counts: Vec<usize>,
    pub proposal_counts: Vec<usize>,
    pub seed: u64,
    /// Digest of (data, model, prior, config); predictive checks refuse
    /// chains whose fingerprint does not match their inputs.
    pub fingerprint: String,
}

impl Chain {
    pub fn n_blocks(&self) -> usize {
        self.stat_names.len()
    }

    pub fn n_stats(&self) -> usize {
        self.mu_names.len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn acceptance_rate(&self, block: usize) -> f64 {
        if self.proposal_counts[block] == 0 {
            0.0
        } else {
            self.accept_counts[block] as f64 / self.proposal_counts[block] as f64
        }
    }

    /// All stored draws of one coefficient.
    pub fn phi_series(&self, block: usize, stat: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.phi[block][stat]).collect()
    }

    pub fn mu_series(&self, stat: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.mu[stat]).collect()
    }

    /// Writes the chain as CSV: one row per stored iteration with
    /// `phi[k].<stat>`, `mu.<stat>`, `Sigma[i,j]`, acceptance flags and
    /// proposal scales.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.n_stats();
        let mut header = vec!["iter".to_string()];
        for (b, names) in self.stat_names.iter().enumerate() {
            for name in names {
                header.push(format!("phi[{}].{}", b + 1, name));
            }
        }
        for name in &self.mu_names {
            header.push(format!("mu.{name}"));
        }
        for i in 0..p {
            for j in i..p {
                header.push(format!("Sigma[{i},{j}]"));
            }
        }
        for b in 0..self.n_blocks() {
            header.push(format!("accept[{}]", b + 1));
        }
        for b in 0..self.n_blocks() {
            header.push(format!("gamma[{}]", b + 1));
        }
        writeln!(w, "{}", header.join(","))?;
        for draw in &self.draws {
            let mut row = vec![draw.iter.to_string()];
            for block in &draw.phi {
                for v in block {
                    row.push(format!("{v}"));
                }
            }
            for v in &draw.mu {
                row.push(format!("{v}"));
            }
            for i in 0..p {
                for j in i..p {
                    row.push(format!("{}", draw.sigma[i * p + j]));
                }
            }
            for a in &draw.accepted {
                row.push(if *a { "1".into() } else { "0".into() });
            }
            for g in &draw.gamma {
                row.push(format!("{g}"));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a chain written by [`Chain::to_csv`]. Acceptance totals are
    /// reconstructed from the stored flags; seed and fingerprint must be
    /// supplied from the run manifest.
    pub fn from_csv<R: BufRead>(r: R, seed: u64, fingerprint: String) -> Result<Chain> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "empty chain file".into() })??;
        // column names contain commas inside brackets (`Sigma[i,j]`), so
        // the header split must be bracket-aware
        let mut cols: Vec<String> = Vec::new();
        let mut depth = 0usize;
        let mut current = String::new();
        for ch in header.chars() {
            match ch {
                '[' => {
                    depth += 1;
                    current.push(ch);
                }
                ']' => {
                    depth = depth.saturating_sub(1);
                    current.push(ch);
                }
                ',' if depth == 0 => cols.push(std::mem::take(&mut current)),
                _ => current.push(ch),
            }
        }
        cols.push(current);
        let mut stat_names: Vec<Vec<String>> = Vec::new();
        let mut mu_names = Vec::new();
        for col in &cols {
            if let Some(rest) = col.strip_prefix("phi[") {
                let (block, name) = rest.split_once("].").ok_or(Error::Parse {
                    line: 1,
                    msg: format!("malformed column `{col}`"),
                })?;
                let block: usize = block.parse().map_err(|_| Error::Parse {
                    line: 1,
                    msg: format!("malformed column `{col}`"),
                })?;
                while stat_names.len() < block {
                    stat_names.push(Vec::new());
                }
                stat_names[block - 1].push(name.to_string());
            } else if let Some(name) = col.strip_prefix("mu.") {
                mu_names.push(name.to_string());
            }
        }
        let n_blocks = stat_names.len();
        let p = mu_names.len();
        let phi_cols: usize = stat_names.iter().map(|v| v.len()).sum();
        let sigma_cols = p * (p + 1) / 2;
        let expected = 1 + phi_cols + p + sigma_cols + 2 * n_blocks;
        if cols.len() != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected {expected} columns, found {}", cols.len()),
            });
        }
        let mut draws = Vec::new();
        let mut accept_counts = vec![0usize; n_blocks];
        let mut proposal_counts = vec![0usize; n_blocks];
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected {
                return Err(Error::Parse {
                    line: idx + 2,
                    msg: format!("expected {expected} fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line: idx + 2,
                    msg: format!("bad number `{s}`"),
                })
            };
            let mut cursor = 0usize;
            let iter: usize = fields[cursor].parse().map_err(|_| Error::Parse {
                line: idx + 2,
                msg: "bad iteration index".into(),
            })?;
            cursor += 1;
            let mut phi = Vec::with_capacity(n_blocks);
            for names in &stat_names {
                let mut block = Vec::with_capacity(names.len());
                for _ in names {
                    block.push(parse(fields[cursor])?);
                    cursor += 1;
                }
                phi.push(block);
            }
            let mut mu = Vec::with_capacity(p);
            for _ in 0..p {
                mu.push(parse(fields[cursor])?);
                cursor += 1;
            }
            let mut sigma = vec![0.0; p * p];
            for i in 0..p {
                for j in i..p {
                    let v = parse(fields[cursor])?;
                    cursor += 1;
                    sigma[i * p + j] = v;
                    sigma[j * p + i] = v;
                }
            }
            let mut accepted = Vec::with_capacity(n_blocks);
            for b in 0..n_blocks {
                let flag = fields[cursor] == "1";
                cursor += 1;
                accepted.push(flag);
                if iter > 0 {
                    proposal_counts[b] += 1;
                    if flag {
                        accept_counts[b] += 1;
                    }
                }
            }
            let mut gamma = Vec::with_capacity(n_blocks);
            for _ in 0..n_blocks {
                gamma.push(parse(fields[cursor])?);
                cursor += 1;
            }
            draws.push(Draw { iter, phi, mu, sigma, accepted, gamma });
        }
        Ok(Chain {
            stat_names,
            mu_names,
            draws,
            accept_counts,
            proposal_counts,
            seed,
            fingerprint,
        })
    }
}

/// Deterministic digest of everything that shapes a fit, used to bind a
/// chain to its data, model and configuration.
pub fn run_fingerprint(stack: &LayerStack, model: &ModelSpec, prior: &PriorMode, cfg: &McmcConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"slergm-fit-v1");
    hasher.update((stack.n_nodes() as u64).to_le_bytes());
    hasher.update((stack.n_layers() as u64).to_le_bytes());
    for layer in &stack.layers {
        for (i, j) in layer.edges() {
            hasher.update((i as u64).to_le_bytes());
            hasher.update((j as u64).to_le_bytes());
        }
        hasher.update(b"|");
    }
    for i in 0..stack.n_nodes() {
        for j in (i + 1)..stack.n_nodes() {
            let s = stack.signs.get(i, j);
            if s != 0 {
                hasher.update((i as u64).to_le_bytes());
                hasher.update((j as u64).to_le_bytes());
                hasher.update([(s + 1) as u8]);
            }
        }
    }
    hasher.update(serde_json::to_string(model).expect("model serializes").as_bytes());
    match prior {
        PriorMode::Hierarchical(h) => {
            hasher.update(b"hier");
            for v in h.mu0.iter().chain(h.sigma0.iter()).chain(h.s0.iter()) {
                hasher.update(v.to_le_bytes());
            }
            hasher.update(h.nu0.to_le_bytes());
        }
        PriorMode::Fixed { mu, sigma } => {
            hasher.update(b"fixed");
            for v in mu.iter().chain(sigma.iter()) {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let aux = match cfg.aux {
        AuxMode::Gibbs { iters } => iters as u64,
        AuxMode::Exact => u64::MAX,
    };
    for v in [
        cfg.iterations as u64,
        cfg.t_start as u64,
        cfg.adapt_every as u64,
        aux,
        cfg.thin as u64,
        cfg.seed,
        cfg.adapt_freeze.map(|f| f as u64).unwrap_or(0),
        cfg.refresh_base_cov as u64,
    ] {
        hasher.update(v.to_le_bytes());
    }
    hasher.update(cfg.lambda.to_le_bytes());
    hasher.update(cfg.a_target.to_le_bytes());
    hasher.update(cfg.gamma0.to_le_bytes());
    format!("{:x}", hasher.finalize())
}

// Per-purpose RNG streams: one ChaCha stream per transition block plus
// dedicated init and hyper streams, so concurrent per-block execution is
// bit-identical to sequential execution.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_INIT: u64 = 0;
const STREAM_HYPER: u64 = 1;
const STREAM_BLOCK0: u64 = 2;

struct BlockData {
    compiled: CompiledStats,
    s_obs: StatVector,
    y_obs: SignedGraph,
    exact: Option<oracle::EnumeratedFactor>,
}

/// Runs the adaptive exchange sampler on an observed stack.
pub fn fit(stack: &LayerStack, model: &ModelSpec, prior: &PriorMode, cfg: &McmcConfig) -> Result<Chain> {
    if stack.n_layers() < 2 {
        return Err(Error::InvalidConfig("need at least two layers".into()));
    }
    let n_blocks = stack.n_layers() - 1;
    if model.n_transitions() != n_blocks {
        return Err(Error::DimensionMismatch(format!(
            "model has {} transition blocks, stack needs {}",
            model.n_transitions(),
            n_blocks
        )));
    }
    let p = model.n_stats()?;
    if p == 0 {
        return Err(Error::InvalidConfig("model has no statistics".into()));
    }
    if cfg.thin == 0 {
        return Err(Error::InvalidConfig("thin must be at least 1".into()));
    }
    match prior {
        PriorMode::Hierarchical(h) => h.validate(p)?,
        PriorMode::Fixed { mu, sigma } => {
            if mu.len() != p || sigma.nrows() != p {
                return Err(Error::DimensionMismatch("fixed prior dimension".into()));
            }
            mvn::check_spd(sigma, "fixed prior covariance")?;
        }
    }

    let compiled = model.compile(stack.n_nodes(), &stack.attrs)?;
    let mut blocks = Vec::with_capacity(n_blocks);
    for (b, stats) in compiled.into_iter().enumerate() {
        let support = &stack.layers[b];
        let y_obs = stack.signed_layer(b + 2);
        let s_obs = stats.compute(&y_obs, support)?;
        let exact = match cfg.aux {
            AuxMode::Exact => {
                let prev_signs = if b == 0 { None } else { Some(&stack.signs) };
                Some(oracle::enumerate_factor(&stats, &vec![0.0; p], support, prev_signs)?)
            }
            AuxMode::Gibbs { .. } => None,
        };
        blocks.push(BlockData { compiled: stats, s_obs, y_obs, exact });
    }

    let fingerprint = run_fingerprint(stack, model, prior, cfg);
    let mut init_rng = stream_rng(cfg.seed, STREAM_INIT);
    let mut hyper_rng = stream_rng(cfg.seed, STREAM_HYPER);
    let mut block_rngs: Vec<ChaCha8Rng> = (0..n_blocks)
        .map(|b| stream_rng(cfg.seed, STREAM_BLOCK0 + b as u64))
        .collect();

    // initialization: phi ~ N(0, 0.01 I); mu at its prior mean; Sigma from
    // its prior (hierarchical mode only)
    let mut phis: Vec<DVector<f64>> = (0..n_blocks)
        .map(|_| 0.1 * mvn::standard_normal_vector(p, &mut init_rng))
        .collect();
    let mut hyper = match prior {
        PriorMode::Hierarchical(h) => HyperState {
            mu: h.mu0.clone(),
            sigma: mvn::sample_inverse_wishart(h.nu0, &h.s0, &mut hyper_rng)?,
        },
        PriorMode::Fixed { mu, sigma } => HyperState { mu: mu.clone(), sigma: sigma.clone() },
    };
    let mut adapt = AdaptState::new(n_blocks, p, cfg.gamma0, cfg.lambda, cfg.a_target);
    let freeze = cfg.adapt_freeze.unwrap_or(cfg.iterations / 2);

    let mut prior_cov = CholCov::new(hyper.sigma.clone())?;
    let mut base_chols: Vec<CholCov> = adapt
        .base_cov
        .iter()
        .map(|b| CholCov::new(b.clone()))
        .collect::<Result<_>>()?;

    let mut chain = Chain {
        stat_names: (0..n_blocks)
            .map(|b| blocks[b].compiled.names().to_vec())
            .collect(),
        mu_names: blocks[0].compiled.names().to_vec(),
        draws: Vec::with_capacity(cfg.iterations / cfg.thin + 1),
        accept_counts: vec![0; n_blocks],
        proposal_counts: vec![0; n_blocks],
        seed: cfg.seed,
        fingerprint,
    };
    let mut last_accept = vec![false; n_blocks];
    let record = |chain: &mut Chain, iter: usize, phis: &[DVector<f64>], hyper: &HyperState,
                  accepted: &[bool], gamma: &[f64]| {
        chain.draws.push(Draw {
            iter,
            phi: phis.iter().map(|v| v.iter().cloned().collect()).collect(),
            mu: hyper.mu.iter().cloned().collect(),
            sigma: hyper.sigma.iter().cloned().collect(),
            accepted: accepted.to_vec(),
            gamma: gamma.to_vec(),
        });
    };
    record(&mut chain, 0, &phis, &hyper, &last_accept, &adapt.gamma);

    for t in 1..=cfg.iterations {
        for (b, block) in blocks.iter().enumerate() {
            let rng = &mut block_rngs[b];
            let eps = mvn::standard_normal_vector(p, rng);
            let proposal = &phis[b] + adapt.gamma[b] * (base_chols[b].lower() * eps);
            let prop_slice: Vec<f64> = proposal.iter().cloned().collect();
            let s_aux = match cfg.aux {
                AuxMode::Gibbs { iters } => {
                    let support = &stack.layers[b];
                    let prev_signs = if b == 0 { None } else { Some(&stack.signs) };
                    let (_, s) = simulate_transition_with_rng(
                        &block.compiled,
                        &prop_slice,
                        support,
                        prev_signs,
                        InitState::Warm(&block.y_obs),
                        iters,
                        rng,
                    )?;
                    s
                }
                AuxMode::Exact => block
                    .exact
                    .as_ref()
                    .expect("exact factor precomputed")
                    .sample_stats(&prop_slice, rng),
            };
            let log_alpha =
                exchange_log_ratio(&phis[b], &proposal, &block.s_obs, &s_aux, &hyper.mu, &prior_cov);
            let u: f64 = rng.gen();
            let accepted = u.ln() < log_alpha;
            if accepted {
                phis[b] = proposal;
            }
            last_accept[b] = accepted;
            adapt.record(b, accepted);
            chain.proposal_counts[b] += 1;
            if accepted {
                chain.accept_counts[b] += 1;
            }
        }

        if t >= cfg.t_start && t % cfg.adapt_every == 0 && t <= freeze {
            adapt.update();
            if cfg.refresh_base_cov {
                refresh_base_covariances(&mut adapt, &chain, p);
                base_chols = adapt
                    .base_cov
                    .iter()
                    .map(|b| CholCov::new(b.clone()))
                    .collect::<Result<_>>()?;
            }
        }

        if let PriorMode::Hierarchical(h) = prior {
            gibbs_hyper(h, &mut hyper, &phis, &mut hyper_rng)?;
            prior_cov = CholCov::new(hyper.sigma.clone())?;
        }

        if t % cfg.thin == 0 {
            record(&mut chain, t, &phis, &hyper, &last_accept, &adapt.gamma);
        }
    }
    Ok(chain)
}

fn refresh_base_covariances(adapt: &mut AdaptState, chain: &Chain, p: usize) {
    let n = chain.draws.len();
    if n < 10 * p {
        return;
    }
    for b in 0..adapt.base_cov.len() {
        let mut mean = vec![0.0; p];
        for draw in &chain.draws {
            for r in 0..p {
                mean[r] += draw.phi[b][r];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::zeros(p, p);
        for draw in &chain.draws {
            for r in 0..p {
                for c in 0..p {
                    cov[(r, c)] += (draw.phi[b][r] - mean[r]) * (draw.phi[b][c] - mean[c]);
                }
            }
        }
        cov /= (n - 1) as f64;
        cov += DMatrix::identity(p, p) * 1e-9;
        if CholCov::new(cov.clone()).is_ok() {
            adapt.base_cov[b] = cov;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{decompose, NodeAttributes, WeightedSignedNetwork};
    use crate::stats::StatisticSpec;
    use approx::assert_abs_diff_eq;

    fn small_stack() -> LayerStack {
        let mut net = WeightedSignedNetwork::zero(5, NodeAttributes::default());
        net.set_weight(0, 1, 2);
        net.set_weight(0, 2, -1);
        net.set_weight(1, 2, 1);
        net.set_weight(2, 3, -2);
        net.set_weight(3, 4, 1);
        decompose(&net, &[2.0]).unwrap()
    }

    fn edges_model() -> ModelSpec {
        ModelSpec { layers: vec![vec![StatisticSpec::EdgesPos, StatisticSpec::EdgesNeg]] }
    }

    #[test]
    fn adapt_gamma_formula() {
        assert_abs_diff_eq!(adapt_gamma(1.0, 1.0, 0.2, 0.234), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(adapt_gamma(1.0, 0.0, 0.2, 0.234), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn exchange_ratio_zero_proposal_always_accepts() {
        let phi = DVector::from_vec(vec![0.3, -0.2]);
        let cov = CholCov::new(DMatrix::identity(2, 2)).unwrap();
        let mean = DVector::zeros(2);
        let r = exchange_log_ratio(&phi, &phi.clone(), &[5.0, 2.0], &[7.0, 1.0], &mean, &cov);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn exchange_ratio_matching_stats_reduces_to_prior() {
        let phi = DVector::from_vec(vec![0.3, -0.2]);
        let prop = DVector::from_vec(vec![0.5, 0.1]);
        let cov = CholCov::new(DMatrix::identity(2, 2)).unwrap();
        let mean = DVector::zeros(2);
        let s = [4.0, 1.0];
        let r = exchange_log_ratio(&phi, &prop, &s, &s, &mean, &cov);
        let want = cov.log_density(&prop, &mean) - cov.log_density(&phi, &mean);
        assert_abs_diff_eq!(r, want, epsilon = 1e-14);
    }

    #[test]
    fn flat_prior_limit_recovers_plain_exchange() {
        // huge prior covariance: the ratio collapses to the likelihood part
        let phi = DVector::from_vec(vec![0.3, -0.2]);
        let prop = DVector::from_vec(vec![0.9, 0.4]);
        let cov = CholCov::new(DMatrix::identity(2, 2) * 1e12).unwrap();
        let mean = DVector::zeros(2);
        let s_obs = [4.0, 1.0];
        let s_aux = [6.0, 0.0];
        let r = exchange_log_ratio(&phi, &prop, &s_obs, &s_aux, &mean, &cov);
        let flat: f64 = (0..2).map(|k| (phi[k] - prop[k]) * (s_aux[k] - s_obs[k])).sum();
        assert_abs_diff_eq!(r, flat, epsilon = 1e-9);
    }

    #[test]
    fn mu_conditional_worked_example() {
        // mu0 = 0, sigma0 = 4I, M = 3, Sigma = I: cov = (4/13) I and the
        // conditional mean is (12/13) phi_bar
        let p = 2;
        let priors = HyperPriors {
            mu0: DVector::zeros(p),
            sigma0: DMatrix::identity(p, p) * 4.0,
            nu0: 6.0,
            s0: DMatrix::identity(p, p),
        };
        let phis = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![2.0, 1.0]),
            DVector::from_vec(vec![3.0, -1.0]),
        ];
        let (mean, cov) = mu_conditional(&priors, &DMatrix::identity(p, p), &phis).unwrap();
        let phi_bar = DVector::from_vec(vec![2.0, 0.0]);
        for r in 0..p {
            assert_abs_diff_eq!(mean[r], 12.0 / 13.0 * phi_bar[r], epsilon = 1e-12);
            for c in 0..p {
                let want = if r == c { 4.0 / 13.0 } else { 0.0 };
                assert_abs_diff_eq!(cov[(r, c)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gibbs_hyper_empty_block_list_draws_from_prior() {
        let p = 3;
        let priors = HyperPriors::diffuse(p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mut mu_acc = DVector::zeros(p);
        let mut sigma_acc = DMatrix::zeros(p, p);
        let mut state = HyperState {
            mu: DVector::zeros(p),
            sigma: DMatrix::identity(p, p),
        };
        for _ in 0..n {
            gibbs_hyper(&priors, &mut state, &[], &mut rng).unwrap();
            mu_acc += &state.mu;
            sigma_acc += &state.sigma;
        }
        let mu_mean = mu_acc / n as f64;
        let sigma_mean = sigma_acc / n as f64;
        // prior means: mu0 = 0 and E[IW(12, I)] = I / (12 - 3 - 1)
        for r in 0..p {
            assert_abs_diff_eq!(mu_mean[r], 0.0, epsilon = 0.05);
            assert_abs_diff_eq!(sigma_mean[(r, r)], 1.0 / 8.0, epsilon = 0.01);
        }
    }

    #[test]
    fn fit_zero_iterations_stores_initialization_only() {
        let stack = small_stack();
        let model = edges_model();
        let prior = PriorMode::Hierarchical(HyperPriors::diffuse(2));
        let cfg = McmcConfig {
            iterations: 0,
            ..McmcConfig::standard(0, 50, 3)
        };
        let chain = fit(&stack, &model, &prior, &cfg).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.draws[0].iter, 0);
    }

    #[test]
    fn fit_reproducible_and_csv_round_trip() {
        let stack = small_stack();
        let model = edges_model();
        let prior = PriorMode::Hierarchical(HyperPriors::diffuse(2));
        let cfg = McmcConfig::standard(40, 30, 123);
        let a = fit(&stack, &model, &prior, &cfg).unwrap();
        let b = fit(&stack, &model, &prior, &cfg).unwrap();
        assert_eq!(a.draws, b.draws);

        let mut csv_a = Vec::new();
        a.to_csv(&mut csv_a).unwrap();
        let mut csv_b = Vec::new();
        b.to_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);

        let back = Chain::from_csv(csv_a.as_slice(), a.seed, a.fingerprint.clone()).unwrap();
        assert_eq!(back.draws.len(), a.draws.len());
        assert_eq!(back.stat_names, a.stat_names);
        for (x, y) in back.draws.iter().zip(&a.draws) {
            assert_eq!(x.iter, y.iter);
            for (bx, by) in x.phi.iter().zip(&y.phi) {
                for (vx, vy) in bx.iter().zip(by) {
                    assert_abs_diff_eq!(vx, vy, epsilon = 0.0);
                }
            }
            assert_eq!(x.accepted, y.accepted);
        }
        assert_eq!(back.accept_counts, a.accept_counts);
    }

    #[test]
    fn fit_rejects_nonconformable_model() {
        let stack = small_stack();
        let model = ModelSpec {
            layers: vec![vec![StatisticSpec::EdgesPos], vec![StatisticSpec::EdgesPos]],
        };
        let prior = PriorMode::Hierarchical(HyperPriors::diffuse(1));
        let cfg = McmcConfig::standard(5, 10, 1);
        assert!(fit(&stack, &model, &prior, &cfg).is_err());
    }

    #[test]
    fn fingerprint_sensitive_to_inputs() {
        let stack = small_stack();
        let model = edges_model();
        let prior = PriorMode::Hierarchical(HyperPriors::diffuse(2));
        let cfg = McmcConfig::standard(10, 10, 1);
        let f1 = run_fingerprint(&stack, &model, &prior, &cfg);
        let cfg2 = McmcConfig::standard(10, 10, 2);
        let f2 = run_fingerprint(&stack, &model, &prior, &cfg2);
        assert_ne!(f1, f2);
        assert_eq!(f1, run_fingerprint(&stack, &model, &prior, &cfg));
    }
}
