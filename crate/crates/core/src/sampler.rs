//! Metropolis-within-Gibbs simulation of one signed layer transition, and
//! the cascade that chains transitions into a full stack draw.
//!
//! Each transition draws a signed layer over the support of the previous
//! binary layer. At the first transition the sign of every dyad is free in
//! {-1, 0, +1}; at later transitions a dyad may only keep its inherited
//! sign or dissolve, since signs cannot switch across layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{BinaryMatrix, SignMatrix, SignedGraph};
use crate::network::{LayerStack, NodeAttributes};
use crate::stats::{CompiledStats, ModelSpec, StatVector};

/// Coefficients of one layer transition, aligned with its statistic list.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Transition index: this block models layer k given layer k-1.
    pub k: usize,
    pub phi: Vec<f64>,
}

/// Controls for a single simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    /// Number of single-dyad update proposals.
    pub n_iters: usize,
    pub seed: u64,
}

/// How a transition chain is initialized.
#[derive(Debug, Clone, Copy)]
pub enum InitState<'a> {
    /// Start from a given signed configuration (restricted to the support).
    Warm(&'a SignedGraph),
    /// Start from an independent uniform draw over each dyad's state space.
    Uniform,
}

fn allowed_states(prev_signs: Option<&SignMatrix>, i: usize, j: usize) -> [i8; 3] {
    // fixed-size array; a trailing 0 repeat marks a 2-state space
    match prev_signs {
        None => [-1, 0, 1],
        Some(signs) => {
            let s = signs.get(i, j);
            [0, s, 0]
        }
    }
}

fn n_allowed(prev_signs: Option<&SignMatrix>) -> usize {
    if prev_signs.is_some() {
        2
    } else {
        3
    }
}

/// Full conditional of one dyad's state given the rest of the layer.
///
/// Returns probabilities aligned with the dyad's allowed states:
/// `[-1, 0, +1]` with free signs, `[0, inherited]` when signs are
/// constrained. Computed from change statistics relative to the current
/// state and stabilized by subtracting the maximum exponent.
pub fn dyad_conditional(
    stats: &CompiledStats,
    phi: &[f64],
    y: &SignedGraph,
    x_prev: &BinaryMatrix,
    prev_signs: Option<&SignMatrix>,
    i: usize,
    j: usize,
) -> Result<(Vec<i8>, Vec<f64>)> {
    if !x_prev.get(i, j) {
        return Err(Error::SupportViolation { i, j });
    }
    let states = allowed_states(prev_signs, i, j);
    let m = n_allowed(prev_signs);
    let current = y.state(i, j);
    let mut logw = Vec::with_capacity(m);
    for &state in &states[..m] {
        if state == current {
            logw.push(0.0);
        } else {
            let delta = stats.delta(y, x_prev, i, j, current, state)?;
            logw.push(delta.iter().zip(phi).map(|(d, p)| d * p).sum());
        }
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logw.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok((states[..m].to_vec(), probs))
}

fn categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    probs.len() - 1
}

fn init_layer<R: Rng>(
    support: &[(usize, usize)],
    n: usize,
    prev_signs: Option<&SignMatrix>,
    init: InitState<'_>,
    rng: &mut R,
) -> SignedGraph {
    let mut y = SignedGraph::new(n);
    match init {
        InitState::Warm(given) => {
            for &(i, j) in support {
                let state = given.state(i, j);
                let state = match prev_signs {
                    // a warm start must respect the inherited sign
                    Some(signs) if state != 0 => signs.get(i, j),
                    _ => state,
                };
                y.set_state(i, j, state);
            }
        }
        InitState::Uniform => {
            for &(i, j) in support {
                let states = allowed_states(prev_signs, i, j);
                let m = n_allowed(prev_signs);
                y.set_state(i, j, states[rng.gen_range(0..m)]);
            }
        }
    }
    y
}

/// Simulates one transition: `n_iters` random-scan single-dyad Gibbs
/// updates over the support dyads, starting from `init`. Returns the final
/// signed layer and its statistic vector.
pub fn simulate_transition_with_rng<R: Rng>(
    stats: &CompiledStats,
    phi: &[f64],
    x_prev: &BinaryMatrix,
    prev_signs: Option<&SignMatrix>,
    init: InitState<'_>,
    n_iters: usize,
    rng: &mut R,
) -> Result<(SignedGraph, StatVector)> {
    if phi.len() != stats.len() {
        return Err(Error::DimensionMismatch(format!(
            "phi has {} entries, model has {} statistics",
            phi.len(),
            stats.len()
        )));
    }
    let n = x_prev.n_nodes();
    let support = x_prev.edges();
    if support.is_empty() {
        let y = SignedGraph::new(n);
        let s = stats.compute(&y, x_prev)?;
        return Ok((y, s));
    }
    let mut y = init_layer(&support, n, prev_signs, init, rng);
    for _ in 0..n_iters {
        let &(i, j) = &support[rng.gen_range(0..support.len())];
        let (states, probs) = dyad_conditional(stats, phi, &y, x_prev, prev_signs, i, j)?;
        let pick = categorical(&probs, rng);
        y.set_state(i, j, states[pick]);
    }
    let s = stats.compute(&y, x_prev)?;
    Ok((y, s))
}

/// Seeded wrapper over [`simulate_transition_with_rng`].
pub fn simulate_transition(
    stats: &CompiledStats,
    params: &LayerParams,
    x_prev: &BinaryMatrix,
    prev_signs: Option<&SignMatrix>,
    init: InitState<'_>,
    config: &SamplerConfig,
) -> Result<(SignedGraph, StatVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    simulate_transition_with_rng(stats, &params.phi, x_prev, prev_signs, init, config.n_iters, &mut rng)
}

/// Draws a full `(z, x_2..x_K)` stack given the interaction layer.
///
/// The first transition runs with free signs and fixes `z` on dyads that
/// persist; dyads dissolving there receive a sign from the renormalized
/// sign component of their final conditional (the density does not depend
/// on it). Later transitions inherit signs and only dissolve.
///
/// When `warm` is given, each transition starts from the observed signed
/// layer restricted to the current support; otherwise from a uniform draw.
pub fn simulate_cascade_with_rng<R: Rng>(
    compiled: &[CompiledStats],
    phis: &[Vec<f64>],
    x1: &BinaryMatrix,
    attrs: &NodeAttributes,
    warm: Option<&LayerStack>,
    n_iters: usize,
    rng: &mut R,
) -> Result<LayerStack> {
    if compiled.len() != phis.len() {
        return Err(Error::DimensionMismatch(
            "one coefficient vector per transition required".into(),
        ));
    }
    let n = x1.n_nodes();
    let k_total = compiled.len() + 1;
    let mut layers = Vec::with_capacity(k_total);
    layers.push(x1.clone());
    let mut signs = SignMatrix::new(n);

    for (block, (stats, phi)) in compiled.iter().zip(phis).enumerate() {
        let x_prev = layers[block].clone();
        let first = block == 0;
        let prev_signs = if first { None } else { Some(&signs) };
        let warm_layer: Option<SignedGraph> = match warm {
            Some(stack) if stack.n_layers() > block + 1 => Some(stack.signed_layer(block + 2)),
            _ => None,
        };
        let init = match &warm_layer {
            Some(layer) => InitState::Warm(layer),
            None => InitState::Uniform,
        };
        let (y, _) =
            simulate_transition_with_rng(stats, phi, &x_prev, prev_signs, init, n_iters, rng)?;
        if first {
            // persisting dyads fix z; dissolved dyads get the sign part of
            // their final conditional so the stack stays fully signed
            for (i, j) in x_prev.edges() {
                let state = y.state(i, j);
                if state != 0 {
                    signs.set(i, j, state);
                } else {
                    let (states, probs) =
                        dyad_conditional(stats, phi, &y, &x_prev, None, i, j)?;
                    let mut p_pos = 0.0;
                    let mut p_neg = 0.0;
                    for (s, p) in states.iter().zip(&probs) {
                        match s {
                            1 => p_pos = *p,
                            -1 => p_neg = *p,
                            _ => {}
                        }
                    }
                    let total = p_pos + p_neg;
                    let sign = if total <= 0.0 {
                        if rng.gen_bool(0.5) {
                            1
                        } else {
                            -1
                        }
                    } else if rng.gen::<f64>() < p_pos / total {
                        1
                    } else {
                        -1
                    };
                    signs.set(i, j, sign);
                }
            }
        }
        layers.push(y.binary().clone());
    }

    let thresholds: Vec<f64> = (2..=k_total).map(|k| k as f64).collect();
    Ok(LayerStack::from_parts(layers, signs, thresholds, attrs.clone()))
}

/// Seeded wrapper over [`simulate_cascade_with_rng`] taking a model spec.
pub fn simulate_cascade(
    model: &ModelSpec,
    phis: &[Vec<f64>],
    x1: &BinaryMatrix,
    attrs: &NodeAttributes,
    warm: Option<&LayerStack>,
    config: &SamplerConfig,
) -> Result<LayerStack> {
    let compiled = model.compile(x1.n_nodes(), attrs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    simulate_cascade_with_rng(&compiled, phis, x1, attrs, warm, config.n_iters, &mut rng)
}
