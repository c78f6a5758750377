//! Brute-force ground truth on tiny instances: exhaustive enumeration of
//! all signed configurations of one layer transition, exact normalizing
//! constants and conditionals, and grid-quadrature posteriors. Test
//! support only; capped at 8 support dyads.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BinaryMatrix, SignMatrix, SignedGraph};
use crate::stats::{CompiledStats, StatVector};

pub const MAX_SUPPORT_DYADS: usize = 8;

/// Exhaustive state table of one transition factor.
#[derive(Debug, Clone)]
pub struct EnumeratedFactor {
    pub dyads: Vec<(usize, usize)>,
    /// Allowed states per dyad (identical across dyads in free mode).
    states_per_dyad: Vec<Vec<i8>>,
    /// One row per configuration: the state index chosen for each dyad.
    pub configs: Vec<Vec<u8>>,
    /// Sufficient statistics per configuration (phi-independent).
    pub stat_table: Vec<StatVector>,
    /// Unnormalized log-weights at the phi used for enumeration.
    pub log_weights: Vec<f64>,
    /// Log normalizing constant at that phi.
    pub kappa: f64,
    pub phi: Vec<f64>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Enumerates every configuration of the transition factor over the
/// support of `x_prev`: 3 states per dyad with free signs, 2 when signs
/// are inherited from `prev_signs`.
pub fn enumerate_factor(
    stats: &CompiledStats,
    phi: &[f64],
    x_prev: &BinaryMatrix,
    prev_signs: Option<&SignMatrix>,
) -> Result<EnumeratedFactor> {
    let dyads = x_prev.edges();
    let m = dyads.len();
    if m > MAX_SUPPORT_DYADS {
        return Err(Error::SupportTooLarge { m, max: MAX_SUPPORT_DYADS });
    }
    let states_per_dyad: Vec<Vec<i8>> = dyads
        .iter()
        .map(|&(i, j)| match prev_signs {
            None => vec![-1, 0, 1],
            Some(signs) => vec![0, signs.get(i, j)],
        })
        .collect();
    let n_configs: usize = states_per_dyad.iter().map(|s| s.len()).product::<usize>().max(1);

    let n = x_prev.n_nodes();
    let mut configs = Vec::with_capacity(n_configs);
    let mut stat_table = Vec::with_capacity(n_configs);
    let mut indices = vec![0u8; m];
    loop {
        let mut y = SignedGraph::new(n);
        for (d, &(i, j)) in dyads.iter().enumerate() {
            y.set_state(i, j, states_per_dyad[d][indices[d] as usize]);
        }
        stat_table.push(stats.compute(&y, x_prev)?);
        configs.push(indices.clone());
        // odometer increment
        let mut d = 0;
        loop {
            if d == m {
                break;
            }
            indices[d] += 1;
            if (indices[d] as usize) < states_per_dyad[d].len() {
                break;
            }
            indices[d] = 0;
            d += 1;
        }
        if d == m {
            break;
        }
    }

    let log_weights: Vec<f64> = stat_table
        .iter()
        .map(|s| s.iter().zip(phi).map(|(a, b)| a * b).sum())
        .collect();
    let kappa = log_sum_exp(&log_weights);
    Ok(EnumeratedFactor {
        dyads,
        states_per_dyad,
        configs,
        stat_table,
        log_weights,
        kappa,
        phi: phi.to_vec(),
    })
}

impl EnumeratedFactor {
    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    /// Normalized configuration probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| (lw - self.kappa).exp()).collect()
    }

    /// Log normalizing constant at an arbitrary coefficient vector, reusing
    /// the enumerated statistic table.
    pub fn log_norm(&self, phi: &[f64]) -> f64 {
        let logw: Vec<f64> = self
            .stat_table
            .iter()
            .map(|s| s.iter().zip(phi).map(|(a, b)| a * b).sum())
            .collect();
        log_sum_exp(&logw)
    }

    /// Index of a configuration given dyad states in `dyads` order.
    pub fn config_index(&self, states: &[i8]) -> Option<usize> {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (d, state) in states.iter().enumerate() {
            let pos = self.states_per_dyad[d].iter().position(|s| s == state)?;
            idx += pos * stride;
            stride *= self.states_per_dyad[d].len();
        }
        Some(idx)
    }

    /// States of configuration `idx` in `dyads` order.
    pub fn config_states(&self, idx: usize) -> Vec<i8> {
        self.configs[idx]
            .iter()
            .enumerate()
            .map(|(d, s)| self.states_per_dyad[d][*s as usize])
            .collect()
    }

    /// Exact conditional of one dyad given the rest of the configuration,
    /// obtained by restricting the enumeration table.
    ///
    /// `rest` gives states for every dyad (the target entry is ignored).
    /// Returns (state, probability) pairs in the dyad's state order.
    pub fn exact_conditional(&self, dyad_index: usize, rest: &[i8]) -> Vec<(i8, f64)> {
        let states = &self.states_per_dyad[dyad_index];
        let mut logw = Vec::with_capacity(states.len());
        let mut probe = rest.to_vec();
        for &s in states {
            probe[dyad_index] = s;
            let idx = self.config_index(&probe).expect("state combination must exist");
            logw.push(self.log_weights[idx]);
        }
        let norm = log_sum_exp(&logw);
        states
            .iter()
            .zip(&logw)
            .map(|(s, lw)| (*s, (lw - norm).exp()))
            .collect()
    }

    /// Draws one exact configuration sample and returns its statistics.
    pub fn sample_stats<R: Rng>(&self, phi: &[f64], rng: &mut R) -> StatVector {
        let logw: Vec<f64> = self
            .stat_table
            .iter()
            .map(|s| s.iter().zip(phi).map(|(a, b)| a * b).sum())
            .collect();
        let norm = log_sum_exp(&logw);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (idx, lw) in logw.iter().enumerate() {
            acc += (lw - norm).exp();
            if u < acc {
                return self.stat_table[idx].clone();
            }
        }
        self.stat_table.last().expect("non-empty table").clone()
    }
}

/// One axis of a quadrature grid.
#[derive(Debug, Clone, Copy)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + step * i as f64).collect()
    }
}

/// Independent normal prior per coefficient, for quadrature references.
#[derive(Debug, Clone)]
pub struct GridPrior {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl GridPrior {
    fn log_density(&self, phi: &[f64]) -> f64 {
        phi.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(x, (m, s))| {
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }
}

/// Normalized posterior over a 1-D or 2-D coefficient grid.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub points: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub mean: Vec<f64>,
    /// Set when the outermost grid cells carry more than 1e-6 posterior
    /// mass, i.e. the grid is too narrow or too coarse.
    pub boundary_flagged: bool,
}

/// Quadrature posterior for one transition factor with observed statistics
/// `s_obs`: log-likelihood `phi . s_obs - kappa(phi)` evaluated exactly via
/// the enumeration table.
pub fn grid_posterior(
    factor: &EnumeratedFactor,
    s_obs: &[f64],
    axes: &[GridAxis],
    prior: &GridPrior,
) -> Result<GridPosterior> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidConfig("grid must be 1-D or 2-D".into()));
    }
    if axes.len() != prior.mean.len() || s_obs.len() != prior.mean.len() {
        return Err(Error::DimensionMismatch("grid, prior and statistics must agree".into()));
    }
    for (axis, (m, s)) in axes.iter().zip(prior.mean.iter().zip(&prior.sd)) {
        if axis.n < 2 {
            return Err(Error::InvalidConfig("grid axes need at least 2 points".into()));
        }
        if axis.hi - axis.lo < 6.0 * s || *m < axis.lo || *m > axis.hi {
            return Err(Error::InvalidConfig(
                "grid must cover at least 6 prior standard deviations".into(),
            ));
        }
    }

    let mut points = Vec::new();
    match axes.len() {
        1 => {
            for x in axes[0].points() {
                points.push(vec![x]);
            }
        }
        _ => {
            for x in axes[0].points() {
                for y in axes[1].points() {
                    points.push(vec![x, y]);
                }
            }
        }
    }

    let log_post: Vec<f64> = points
        .iter()
        .map(|phi| {
            let loglik: f64 =
                phi.iter().zip(s_obs).map(|(p, s)| p * s).sum::<f64>() - factor.log_norm(phi);
            loglik + prior.log_density(phi)
        })
        .collect();
    let norm = log_sum_exp(&log_post);
    let probs: Vec<f64> = log_post.iter().map(|lp| (lp - norm).exp()).collect();

    let dim = axes.len();
    let mut mean = vec![0.0; dim];
    for (pt, pr) in points.iter().zip(&probs) {
        for d in 0..dim {
            mean[d] += pt[d] * pr;
        }
    }

    // boundary mass: any point on the edge of an axis
    let mut boundary_mass = 0.0;
    for (pt, pr) in points.iter().zip(&probs) {
        let on_edge = pt.iter().zip(axes).any(|(x, ax)| {
            let step = (ax.hi - ax.lo) / (ax.n - 1) as f64;
            (*x - ax.lo).abs() < 0.5 * step || (*x - ax.hi).abs() < 0.5 * step
        });
        if on_edge {
            boundary_mass += pr;
        }
    }

    Ok(GridPosterior {
        points,
        probs,
        mean,
        boundary_flagged: boundary_mass > 1e-6,
    })
}
