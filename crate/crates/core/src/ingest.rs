//! Bill-sponsorship ingestion: bipartite incidence -> row mean-centring ->
//! pairwise cosine similarity -> density-targeted thresholds -> layer
//! stack with party attributes.
//!
//! The similarity matrix is thresholded on |S| so that strong negative
//! associations populate the higher layers alongside strong positive ones;
//! the sign of S becomes the sign layer.

use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BinaryMatrix, SignMatrix};
use crate::network::{LayerStack, NodeAttributes, WeightedSignedNetwork};

/// Binary actor-by-item incidence with actor attributes.
#[derive(Debug, Clone)]
pub struct BipartiteIncidence {
    pub n_actors: usize,
    pub n_items: usize,
    /// Row-major actor-by-item 0/1 matrix.
    pub matrix: Vec<u8>,
    pub attrs: NodeAttributes,
    pub item_ids: Vec<String>,
}

impl BipartiteIncidence {
    pub fn entry(&self, actor: usize, item: usize) -> u8 {
        self.matrix[actor * self.n_items + item]
    }
}

/// Symmetric matrix of pairwise cosine similarities with unit diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub n: usize,
    values: Vec<f64>,
    /// Actors whose centred sponsorship vector had zero norm; their
    /// similarities were forced to zero.
    pub zero_norm_actors: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Reads the actor CSV `label,party,state` (header required). Additional
/// columns become extra attributes.
pub fn read_actors<R: BufRead>(r: R) -> Result<NodeAttributes> {
    let attrs = crate::network::read_attributes(r)?;
    if attrs.n_nodes() < 2 {
        return Err(Error::InvalidConfig("need >= 2 actors".into()));
    }
    if attrs.column("party").is_none() {
        return Err(Error::InvalidConfig("actors file is missing the `party` column".into()));
    }
    Ok(attrs)
}

/// Reads the sponsorship edge list CSV `senator_id,bill_id` (header
/// required); `senator_id` entries must match actor labels verbatim.
pub fn read_sponsorship<R: BufRead>(r: R, attrs: &NodeAttributes) -> Result<BipartiteIncidence> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty sponsorship file".into(),
    })?;
    let header = header?;
    if header.split(',').count() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "expected `senator_id,bill_id` header".into(),
        });
    }
    let actor_index: std::collections::HashMap<&str, usize> = attrs
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut item_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut item_ids: Vec<String> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (actor, item) = line.split_once(',').ok_or(Error::Parse {
            line: idx + 1,
            msg: "expected `senator_id,bill_id`".into(),
        })?;
        let actor = actor.trim();
        let item = item.trim();
        let &a = actor_index.get(actor).ok_or(Error::Parse {
            line: idx + 1,
            msg: format!("unknown senator_id `{actor}`"),
        })?;
        let b = *item_index.entry(item.to_string()).or_insert_with(|| {
            item_ids.push(item.to_string());
            item_ids.len() - 1
        });
        pairs.push((a, b));
    }
    let n_actors = attrs.n_nodes();
    let n_items = item_ids.len();
    if n_items == 0 {
        return Err(Error::InvalidConfig("sponsorship file contains no rows".into()));
    }
    let mut matrix = vec![0u8; n_actors * n_items];
    for (a, b) in pairs {
        matrix[a * n_items + b] = 1;
    }
    Ok(BipartiteIncidence {
        n_actors,
        n_items,
        matrix,
        attrs: attrs.clone(),
        item_ids,
    })
}

/// Subtracts each actor's mean sponsorship rate from their row.
pub fn center_rows(incidence: &BipartiteIncidence) -> Vec<f64> {
    let (n, m) = (incidence.n_actors, incidence.n_items);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &incidence.matrix[i * m..(i + 1) * m];
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / m as f64;
        for (j, &v) in row.iter().enumerate() {
            out[i * m + j] = v as f64 - mean;
        }
    }
    out
}

/// Pairwise cosine similarity of centred rows. Zero-norm rows get zero
/// similarity to everyone and are reported.
pub fn cosine(centered: &[f64], n_actors: usize, n_items: usize) -> SimilarityMatrix {
    let norms: Vec<f64> = (0..n_actors)
        .map(|i| {
            centered[i * n_items..(i + 1) * n_items]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let zero_norm_actors: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, nm)| **nm == 0.0)
        .map(|(i, _)| i)
        .collect();
    let mut values = vec![0.0; n_actors * n_actors];
    for i in 0..n_actors {
        values[i * n_actors + i] = 1.0;
        for j in (i + 1)..n_actors {
            let s = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = (0..n_items)
                    .map(|t| centered[i * n_items + t] * centered[j * n_items + t])
                    .sum();
                dot / (norms[i] * norms[j])
            };
            values[i * n_actors + j] = s;
            values[j * n_actors + i] = s;
        }
    }
    SimilarityMatrix { n: n_actors, values, zero_norm_actors }
}

/// Everything the threshold pipeline produces, ready for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub targets: Vec<f64>,
    /// Similarity-scale thresholds achieving each target density.
    pub thresholds: Vec<f64>,
    pub achieved_densities: Vec<f64>,
    pub positive_fractions: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

/// Pipeline output: the quantized network (weights = signed layer depth),
/// the layer stack, and the provenance summary.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub network: WeightedSignedNetwork,
    pub stack: LayerStack,
    pub summary: IngestSummary,
}

/// Thresholds the similarity matrix at |S| quantiles so that layer k's
/// density does not exceed `targets[k-1]` (ties broken toward the smaller
/// density), and assembles the layer stack with z = sign(S) on layer 1.
///
/// The stack stores depth-scale thresholds (2..K) so that decomposing its
/// quantized network reproduces it; the similarity-scale thresholds are in
/// the summary.
pub fn density_thresholds(
    similarity: &SimilarityMatrix,
    targets: &[f64],
    attrs: &NodeAttributes,
) -> Result<IngestOutcome> {
    let k_layers = targets.len();
    if k_layers == 0 {
        return Err(Error::InvalidConfig("need at least one density target".into()));
    }
    for (idx, pair) in targets.windows(2).enumerate() {
        if pair[1] >= pair[0] {
            return Err(Error::InvalidConfig(format!(
                "density targets must strictly decrease (index {})",
                idx + 1
            )));
        }
    }
    if targets[0] > 1.0 || *targets.last().unwrap() <= 0.0 {
        return Err(Error::InvalidConfig("density targets must lie in (0, 1]".into()));
    }
    let n = similarity.n;
    let dyads = n * (n - 1) / 2;
    let mut magnitudes: Vec<f64> = Vec::with_capacity(dyads);
    for i in 0..n {
        for j in (i + 1)..n {
            magnitudes.push(similarity.get(i, j).abs());
        }
    }
    magnitudes.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut warnings: Vec<String> = similarity
        .zero_norm_actors
        .iter()
        .map(|i| format!("actor {i} has a zero-norm sponsorship vector; isolated in layer 1"))
        .collect();

    let mut thresholds = Vec::with_capacity(k_layers);
    for (k, target) in targets.iter().enumerate() {
        let budget = (target * dyads as f64).floor() as usize;
        let tau = if budget == 0 {
            magnitudes[0] + 1.0
        } else {
            let mut candidate = magnitudes[budget - 1];
            let count_at = |t: f64| magnitudes.iter().take_while(|m| **m >= t).count();
            if count_at(candidate) > budget {
                // tie at the boundary: prefer the smaller density
                match magnitudes[..budget - 1].iter().rev().find(|m| **m > candidate) {
                    Some(next) => {
                        warnings.push(format!(
                            "layer {}: tie at |S| = {candidate}; target {target} unattainable, achieved {}",
                            k + 1,
                            count_at(*next) as f64 / dyads as f64
                        ));
                        candidate = *next;
                    }
                    None => {
                        warnings.push(format!(
                            "layer {}: every dyad ties at |S| = {candidate}; achieved density exceeds target {target}",
                            k + 1
                        ));
                    }
                }
            }
            candidate
        };
        thresholds.push(tau);
    }

    // assemble layers and the quantized network
    let mut layers = vec![BinaryMatrix::new(n); k_layers];
    let mut signs = SignMatrix::new(n);
    let mut network = WeightedSignedNetwork::zero(n, attrs.clone());
    for i in 0..n {
        for j in (i + 1)..n {
            let s = similarity.get(i, j);
            let mag = s.abs();
            let mut depth = 0i64;
            for (k, tau) in thresholds.iter().enumerate() {
                if mag >= *tau {
                    layers[k].set(i, j, true);
                    depth = k as i64 + 1;
                }
            }
            if depth > 0 {
                let sign = if s >= 0.0 { 1 } else { -1 };
                signs.set(i, j, sign);
                network.set_weight(i, j, sign as i64 * depth);
            }
        }
    }
    let depth_thresholds: Vec<f64> = (2..=k_layers).map(|k| k as f64).collect();
    let stack = LayerStack::from_parts(layers, signs, depth_thresholds, attrs.clone());

    let summary_src = crate::network::layer_summary(&stack);
    let achieved_densities: Vec<f64> = summary_src.iter().map(|l| l.density).collect();
    let positive_fractions: Vec<Option<f64>> = summary_src.iter().map(|l| l.pos_frac).collect();
    Ok(IngestOutcome {
        network,
        stack,
        summary: IngestSummary {
            targets: targets.to_vec(),
            thresholds,
            achieved_densities,
            positive_fractions,
            warnings,
        },
    })
}

/// Full pipeline from CSV readers to the layer stack.
pub fn ingest<R1: BufRead, R2: BufRead>(
    sponsorship: R1,
    actors: R2,
    targets: &[f64],
) -> Result<IngestOutcome> {
    let attrs = read_actors(actors)?;
    let incidence = read_sponsorship(sponsorship, &attrs)?;
    let centered = center_rows(&incidence);
    let similarity = cosine(&centered, incidence.n_actors, incidence.n_items);
    density_thresholds(&similarity, targets, &attrs)
}

pub mod synthetic;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_incidence(rows: &[&[u8]]) -> BipartiteIncidence {
        let n_actors = rows.len();
        let n_items = rows[0].len();
        let matrix = rows.iter().flat_map(|r| r.iter().cloned()).collect();
        let labels = (0..n_actors).map(|i| format!("a{i}")).collect();
        let party = (0..n_actors).map(|i| if i % 2 == 0 { "GOP" } else { "Dem" }.to_string()).collect();
        BipartiteIncidence {
            n_actors,
            n_items,
            matrix,
            attrs: NodeAttributes::new(labels).with_column("party", party),
            item_ids: (0..n_items).map(|i| format!("b{i}")).collect(),
        }
    }

    #[test]
    fn center_rows_examples() {
        let inc = tiny_incidence(&[&[1, 0, 1, 0], &[1, 1, 1, 1]]);
        let c = center_rows(&inc);
        assert_eq!(&c[0..4], &[0.5, -0.5, 0.5, -0.5]);
        // constant row centres to zero
        assert_eq!(&c[4..8], &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn center_rows_random_matrix_zero_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<u8>> = (0..5)
            .map(|_| (0..7).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let inc = tiny_incidence(&refs);
        let c = center_rows(&inc);
        for i in 0..5 {
            let mean: f64 = c[i * 7..(i + 1) * 7].iter().sum::<f64>() / 7.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_identical_orthogonal_negated() {
        // rows: identical, orthogonal (after centring), negated
        let inc = tiny_incidence(&[
            &[1, 1, 0, 0],
            &[1, 1, 0, 0],
            &[0, 0, 1, 1],
            &[1, 0, 1, 0],
        ]);
        let c = center_rows(&inc);
        let s = cosine(&c, 4, 4);
        assert_abs_diff_eq!(s.get(0, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(0, 2), -1.0, epsilon = 1e-12); // complementary rows center to negations
        assert_abs_diff_eq!(s.get(0, 3), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(1, 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_zero_norm_row_isolated() {
        let inc = tiny_incidence(&[&[1, 1, 1, 1], &[1, 0, 1, 0], &[0, 1, 0, 1]]);
        let c = center_rows(&inc);
        let s = cosine(&c, 3, 4);
        assert_eq!(s.zero_norm_actors, vec![0]);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 2), 0.0);
        assert_abs_diff_eq!(s.get(1, 2), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_thresholds_boundary_target_one() {
        // target 1.0 keeps every dyad: tau = min |S|
        let inc = tiny_incidence(&[&[1, 0, 1, 0], &[1, 1, 0, 0], &[0, 1, 0, 1], &[1, 0, 0, 1]]);
        let c = center_rows(&inc);
        let s = cosine(&c, 4, 4);
        let out = density_thresholds(&s, &[1.0], &inc.attrs).unwrap();
        assert_eq!(out.stack.layers[0].edge_count(), 6);
        let mut min_abs = f64::INFINITY;
        for i in 0..4 {
            for j in (i + 1)..4 {
                min_abs = min_abs.min(s.get(i, j).abs());
            }
        }
        assert_abs_diff_eq!(out.summary.thresholds[0], min_abs, epsilon = 1e-12);
    }

    #[test]
    fn density_thresholds_never_exceed_targets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<u8>> = (0..12)
            .map(|_| (0..40).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let inc = tiny_incidence(&refs);
        let c = center_rows(&inc);
        let s = cosine(&c, 12, 40);
        let targets = [0.4, 0.2, 0.1];
        let out = density_thresholds(&s, &targets, &inc.attrs).unwrap();
        for (achieved, target) in out.summary.achieved_densities.iter().zip(&targets) {
            assert!(achieved <= target, "{achieved} > {target}");
        }
        // non-increasing densities and a valid stack
        for w in out.summary.achieved_densities.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(crate::network::validate(&out.stack).is_empty());
        // quantized network round-trips through decompose
        let back = crate::network::decompose(&out.network, &out.stack.thresholds).unwrap();
        assert_eq!(back.layers, out.stack.layers);
        assert_eq!(back.signs, out.stack.signs);
    }

    #[test]
    fn density_thresholds_rejects_bad_targets() {
        let inc = tiny_incidence(&[&[1, 0], &[0, 1]]);
        let c = center_rows(&inc);
        let s = cosine(&c, 2, 2);
        assert!(density_thresholds(&s, &[0.2, 0.2], &inc.attrs).is_err());
        assert!(density_thresholds(&s, &[], &inc.attrs).is_err());
        assert!(density_thresholds(&s, &[0.5, 0.0], &inc.attrs).is_err());
    }

    #[test]
    fn ingest_pipeline_deterministic() {
        let actors = "label,party,state\nA,GOP,TX\nB,Dem,CA\nC,GOP,UT\nD,Dem,NY\n";
        let spons = "senator_id,bill_id\nA,b1\nB,b1\nC,b2\nA,b2\nD,b3\nB,b3\nC,b4\nD,b4\nA,b5\n";
        let out1 = ingest(spons.as_bytes(), actors.as_bytes(), &[0.6, 0.3]).unwrap();
        let out2 = ingest(spons.as_bytes(), actors.as_bytes(), &[0.6, 0.3]).unwrap();
        assert_eq!(out1.stack.layers, out2.stack.layers);
        assert_eq!(out1.summary.thresholds, out2.summary.thresholds);
        assert!(crate::network::validate(&out1.stack).is_empty());
    }

    #[test]
    fn reader_errors_are_named() {
        let no_party = "label,state\nA,TX\nB,CA\n";
        let err = read_actors(no_party.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("party"));

        let single = "label,party,state\nA,GOP,TX\n";
        let err = read_actors(single.as_bytes()).unwrap_err();
        assert!(err.to_string().contains(">= 2 actors"));

        let actors = read_actors("label,party,state\nA,GOP,TX\nB,Dem,CA\n".as_bytes()).unwrap();
        let bad = "senator_id,bill_id\nZZ,b1\n";
        let err = read_sponsorship(bad.as_bytes(), &actors).unwrap_err();
        assert!(err.to_string().contains("ZZ"));
    }
}
