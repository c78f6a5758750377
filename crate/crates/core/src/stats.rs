//! Layer-transition sufficient statistics and their change statistics.
//!
//! Statistics are evaluated on the signed view of a layer (`y_k`, entries
//! in {-1, 0, +1}) relative to the previous binary layer that defines its
//! support. Change statistics for a single dyad toggle are computed
//! incrementally in O(degree) per geometrically weighted term; acceptance
//! tests compare them against full recomputation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BinaryMatrix, SignedGraph};
use crate::network::{LayerStack, NodeAttributes};

/// One sufficient statistic of a layer transition.
///
/// `alpha` is the geometric decay of the curved statistics; homophily
/// counts positive edges whose endpoints both carry `level` in attribute
/// column `attr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    EdgesPos,
    EdgesNeg,
    HomophilyPos { attr: String, level: String },
    GwDegree { alpha: f64 },
    GwesfPos { alpha: f64 },
    GwesePos { alpha: f64 },
    GwesfNeg { alpha: f64 },
    GweseNeg { alpha: f64 },
    Persistence,
}

impl StatisticSpec {
    /// Stable short name used in chain CSV headers and reports.
    pub fn name(&self) -> String {
        match self {
            StatisticSpec::EdgesPos => "edges_pos".into(),
            StatisticSpec::EdgesNeg => "edges_neg".into(),
            StatisticSpec::HomophilyPos { attr, level } => format!("homophily_pos({attr}={level})"),
            StatisticSpec::GwDegree { alpha } => format!("gwdegree({alpha})"),
            StatisticSpec::GwesfPos { alpha } => format!("gwesf_pos({alpha})"),
            StatisticSpec::GwesePos { alpha } => format!("gwese_pos({alpha})"),
            StatisticSpec::GwesfNeg { alpha } => format!("gwesf_neg({alpha})"),
            StatisticSpec::GweseNeg { alpha } => format!("gwese_neg({alpha})"),
            StatisticSpec::Persistence => "persistence".into(),
        }
    }

    fn alpha(&self) -> Option<f64> {
        match self {
            StatisticSpec::GwDegree { alpha }
            | StatisticSpec::GwesfPos { alpha }
            | StatisticSpec::GwesePos { alpha }
            | StatisticSpec::GwesfNeg { alpha }
            | StatisticSpec::GweseNeg { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// Evaluated statistic values aligned with an ordered spec list.
pub type StatVector = Vec<f64>;

/// Per-transition statistic lists for a whole stack (one list per
/// transition, all of equal length so layers share a hierarchical prior).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<Vec<StatisticSpec>>,
}

impl ModelSpec {
    pub fn n_transitions(&self) -> usize {
        self.layers.len()
    }

    /// Common statistic count; errors when transition lists disagree.
    pub fn n_stats(&self) -> Result<usize> {
        let p = self.layers.first().map(|l| l.len()).unwrap_or(0);
        if self.layers.iter().any(|l| l.len() != p) {
            return Err(Error::DimensionMismatch(
                "statistic lists differ in length across transitions".into(),
            ));
        }
        Ok(p)
    }

    /// Compiles each transition list against one node set.
    pub fn compile(&self, n: usize, attrs: &NodeAttributes) -> Result<Vec<CompiledStats>> {
        self.layers
            .iter()
            .map(|specs| CompiledStats::new(specs, n, attrs))
            .collect()
    }

    /// The five-effect application model: edges+, homophily(attr=level),
    /// gwesf+, gwdegree, gwese+ with one decay per transition.
    pub fn standard(alphas: &[f64], attr: &str, level: &str) -> Self {
        let layers = alphas
            .iter()
            .map(|&alpha| {
                vec![
                    StatisticSpec::EdgesPos,
                    StatisticSpec::HomophilyPos {
                        attr: attr.to_string(),
                        level: level.to_string(),
                    },
                    StatisticSpec::GwesfPos { alpha },
                    StatisticSpec::GwDegree { alpha },
                    StatisticSpec::GwesePos { alpha },
                ]
            })
            .collect();
        ModelSpec { layers }
    }
}

// Geometric weight tables: w[c] = e^a (1 - (1 - e^-a)^c), so w[0] = 0 and
// increments shrink geometrically in the partner count / degree c.
fn geometric_table(alpha: f64, n: usize) -> Vec<f64> {
    let ea = alpha.exp();
    let base = 1.0 - (-alpha).exp();
    let mut pow = 1.0;
    (0..=n)
        .map(|_| {
            let w = ea * (1.0 - pow);
            pow *= base;
            w
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Kernel {
    EdgesPos,
    EdgesNeg,
    /// Positive-edge homophily on a precompiled node mask.
    Homophily { mask: Vec<u64>, in_level: Vec<bool> },
    GwDegree { table: Vec<f64> },
    /// Unified edgewise shared-partner family: `edge_sign` selects which
    /// edges are weighted, `partner_sign` whether shared friends (+1) or
    /// shared enemies (-1) are counted.
    GwPartner { edge_sign: i8, partner_sign: i8, table: Vec<f64> },
    Persistence,
}

/// A statistic list resolved against a fixed node set: attribute masks and
/// geometric weight tables are precomputed once.
#[derive(Debug, Clone)]
pub struct CompiledStats {
    n: usize,
    kernels: Vec<Kernel>,
    names: Vec<String>,
}

impl CompiledStats {
    pub fn new(specs: &[StatisticSpec], n: usize, attrs: &NodeAttributes) -> Result<Self> {
        let mut kernels = Vec::with_capacity(specs.len());
        for spec in specs {
            if let Some(alpha) = spec.alpha() {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "decay must be positive in {}",
                        spec.name()
                    )));
                }
            }
            let kernel = match spec {
                StatisticSpec::EdgesPos => Kernel::EdgesPos,
                StatisticSpec::EdgesNeg => Kernel::EdgesNeg,
                StatisticSpec::HomophilyPos { attr, level } => {
                    let column = attrs
                        .column(attr)
                        .ok_or_else(|| Error::UnknownAttribute(attr.clone()))?;
                    if column.len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "attribute `{attr}` covers {} nodes, expected {n}",
                            column.len()
                        )));
                    }
                    let in_level: Vec<bool> = column.iter().map(|v| v == level).collect();
                    let mut mask = vec![0u64; n.div_ceil(64)];
                    for (i, flag) in in_level.iter().enumerate() {
                        if *flag {
                            mask[i / 64] |= 1 << (i % 64);
                        }
                    }
                    Kernel::Homophily { mask, in_level }
                }
                StatisticSpec::GwDegree { alpha } => Kernel::GwDegree {
                    table: geometric_table(*alpha, n),
                },
                StatisticSpec::GwesfPos { alpha } => Kernel::GwPartner {
                    edge_sign: 1,
                    partner_sign: 1,
                    table: geometric_table(*alpha, n),
                },
                StatisticSpec::GwesePos { alpha } => Kernel::GwPartner {
                    edge_sign: 1,
                    partner_sign: -1,
                    table: geometric_table(*alpha, n),
                },
                StatisticSpec::GwesfNeg { alpha } => Kernel::GwPartner {
                    edge_sign: -1,
                    partner_sign: 1,
                    table: geometric_table(*alpha, n),
                },
                StatisticSpec::GweseNeg { alpha } => Kernel::GwPartner {
                    edge_sign: -1,
                    partner_sign: -1,
                    table: geometric_table(*alpha, n),
                },
                StatisticSpec::Persistence => Kernel::Persistence,
            };
            kernels.push(kernel);
        }
        Ok(CompiledStats {
            n,
            kernels,
            names: specs.iter().map(|s| s.name()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    fn check_support(&self, y: &SignedGraph, x_prev: &BinaryMatrix) -> Result<()> {
        if y.n_nodes() != self.n || x_prev.n_nodes() != self.n {
            return Err(Error::DimensionMismatch("layer size mismatch".into()));
        }
        if !y.binary().is_subgraph_of(x_prev) {
            let (i, j) = y
                .binary()
                .edges()
                .into_iter()
                .find(|&(i, j)| !x_prev.get(i, j))
                .unwrap();
            return Err(Error::SupportViolation { i, j });
        }
        Ok(())
    }

    /// Exact statistic values for the signed layer `y` on support `x_prev`.
    pub fn compute(&self, y: &SignedGraph, x_prev: &BinaryMatrix) -> Result<StatVector> {
        self.check_support(y, x_prev)?;
        Ok(self
            .kernels
            .iter()
            .map(|k| self.compute_one(k, y, x_prev))
            .collect())
    }

    fn compute_one(&self, kernel: &Kernel, y: &SignedGraph, x_prev: &BinaryMatrix) -> f64 {
        match kernel {
            Kernel::EdgesPos => y.positive_edge_count() as f64,
            Kernel::EdgesNeg => y.negative_edge_count() as f64,
            Kernel::Homophily { mask, in_level } => {
                let mut count = 0usize;
                for i in 0..self.n {
                    if in_level[i] {
                        count += y.positive().row_intersection(i, mask);
                    }
                }
                (count / 2) as f64
            }
            Kernel::GwDegree { table } => (0..self.n).map(|i| table[y.degree(i)]).sum(),
            Kernel::GwPartner { edge_sign, partner_sign, table } => {
                let edge_layer = if *edge_sign > 0 { y.positive() } else { y.negative() };
                edge_layer
                    .edges()
                    .into_iter()
                    .map(|(i, j)| {
                        let c = if *partner_sign > 0 {
                            y.shared_friends(i, j)
                        } else {
                            y.shared_enemies(i, j)
                        };
                        table[c]
                    })
                    .sum()
            }
            Kernel::Persistence => y.binary().intersection_count(x_prev) as f64,
        }
    }

    /// Change statistics for setting dyad (i, j) from state `from` to `to`,
    /// holding everything else fixed: `s(y with ij=to) - s(y with ij=from)`.
    ///
    /// `y` must currently hold the dyad at state `from`.
    pub fn delta(
        &self,
        y: &SignedGraph,
        x_prev: &BinaryMatrix,
        i: usize,
        j: usize,
        from: i8,
        to: i8,
    ) -> Result<StatVector> {
        if !x_prev.get(i, j) {
            return Err(Error::SupportViolation { i, j });
        }
        debug_assert_eq!(y.state(i, j), from, "dyad not at stated `from` value");
        if from == to {
            return Ok(vec![0.0; self.kernels.len()]);
        }
        Ok(self
            .kernels
            .iter()
            .map(|k| self.delta_one(k, y, i, j, from, to))
            .collect())
    }

    fn delta_one(&self, kernel: &Kernel, y: &SignedGraph, i: usize, j: usize, from: i8, to: i8) -> f64 {
        let d_pos = (to == 1) as i32 - (from == 1) as i32;
        let d_neg = (to == -1) as i32 - (from == -1) as i32;
        let d_bin = (to != 0) as i32 - (from != 0) as i32;
        match kernel {
            Kernel::EdgesPos => d_pos as f64,
            Kernel::EdgesNeg => d_neg as f64,
            Kernel::Homophily { in_level, .. } => {
                if in_level[i] && in_level[j] {
                    d_pos as f64
                } else {
                    0.0
                }
            }
            Kernel::Persistence => d_bin as f64,
            Kernel::GwDegree { table } => {
                if d_bin == 0 {
                    return 0.0;
                }
                let mut delta = 0.0;
                for u in [i, j] {
                    let d = y.degree(u);
                    let new = (d as i64 + d_bin as i64) as usize;
                    delta += table[new] - table[d];
                }
                delta
            }
            Kernel::GwPartner { edge_sign, partner_sign, table } => {
                let d_edge = if *edge_sign > 0 { d_pos } else { d_neg };
                let d_partner = if *partner_sign > 0 { d_pos } else { d_neg };
                let mut delta = 0.0;
                // Own-edge term; the dyad's partner count ignores y_ij itself.
                if d_edge != 0 {
                    let c = if *partner_sign > 0 {
                        y.shared_friends(i, j)
                    } else {
                        y.shared_enemies(i, j)
                    };
                    delta += d_edge as f64 * table[c];
                }
                // Toggling y_ij shifts the partner count of every pair
                // (i, m) with (j, m) partner-signed, and symmetrically.
                if d_partner != 0 {
                    delta += self.partner_side_effects(y, i, j, *edge_sign, *partner_sign, d_partner, table);
                    delta += self.partner_side_effects(y, j, i, *edge_sign, *partner_sign, d_partner, table);
                }
                delta
            }
        }
    }

    fn partner_side_effects(
        &self,
        y: &SignedGraph,
        a: usize,
        b: usize,
        edge_sign: i8,
        partner_sign: i8,
        shift: i32,
        table: &[f64],
    ) -> f64 {
        let partner_layer = if partner_sign > 0 { y.positive() } else { y.negative() };
        let mut delta = 0.0;
        for m in partner_layer.neighbors(b) {
            if m == a {
                continue;
            }
            if y.state(a, m) == edge_sign {
                let c = if partner_sign > 0 {
                    y.shared_friends(a, m)
                } else {
                    y.shared_enemies(a, m)
                };
                let new = (c as i64 + shift as i64) as usize;
                delta += table[new] - table[c];
            }
        }
        delta
    }
}

/// Convenience wrapper over [`CompiledStats::compute`] matching the
/// operation signature used throughout the docs.
pub fn compute(
    specs: &[StatisticSpec],
    y: &SignedGraph,
    x_prev: &BinaryMatrix,
    attrs: &NodeAttributes,
) -> Result<StatVector> {
    CompiledStats::new(specs, y.n_nodes(), attrs)?.compute(y, x_prev)
}

/// Convenience wrapper over [`CompiledStats::delta`].
pub fn change_stat(
    specs: &[StatisticSpec],
    y: &SignedGraph,
    x_prev: &BinaryMatrix,
    dyad: (usize, usize),
    from: i8,
    to: i8,
    attrs: &NodeAttributes,
) -> Result<StatVector> {
    CompiledStats::new(specs, y.n_nodes(), attrs)?.delta(y, x_prev, dyad.0, dyad.1, from, to)
}

/// Per-layer change statistics for flipping the sign of one interacting
/// dyad from -1 to +1 in every layer where it is active: the summands of
/// the cumulative sign log-odds.
///
/// Returns `(k, delta)` pairs for each transition layer k in 2..=K with
/// `x_k,ij = 1`.
pub fn sign_flip_change(
    model: &ModelSpec,
    stack: &LayerStack,
    i: usize,
    j: usize,
) -> Result<Vec<(usize, StatVector)>> {
    if !stack.layers[0].get(i, j) {
        return Err(Error::SupportViolation { i, j });
    }
    let compiled = model.compile(stack.n_nodes(), &stack.attrs)?;
    let mut out = Vec::new();
    for k in 2..=stack.n_layers() {
        if !stack.layers[k - 1].get(i, j) {
            break; // nesting: inactive here means inactive above
        }
        let mut y = stack.signed_layer(k);
        let x_prev = &stack.layers[k - 2];
        let current = y.state(i, j);
        // evaluate the -1 -> +1 toggle from a configuration where the dyad
        // sits at -1, regardless of its observed sign
        if current != -1 {
            y.set_state(i, j, -1);
        }
        let delta = compiled[k - 2].delta(&y, x_prev, i, j, -1, 1)?;
        out.push((k, delta));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complete_support(n: usize) -> BinaryMatrix {
        let mut m = BinaryMatrix::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, true);
            }
        }
        m
    }

    fn all_specs() -> Vec<StatisticSpec> {
        vec![
            StatisticSpec::EdgesPos,
            StatisticSpec::EdgesNeg,
            StatisticSpec::HomophilyPos { attr: "party".into(), level: "GOP".into() },
            StatisticSpec::GwDegree { alpha: 0.5 },
            StatisticSpec::GwesfPos { alpha: 0.5 },
            StatisticSpec::GwesePos { alpha: 0.5 },
            StatisticSpec::GwesfNeg { alpha: 0.5 },
            StatisticSpec::GweseNeg { alpha: 0.5 },
            StatisticSpec::Persistence,
        ]
    }

    fn party_attrs(n: usize) -> NodeAttributes {
        let labels = (0..n).map(|i| format!("n{i}")).collect();
        let party = (0..n)
            .map(|i| if i % 2 == 0 { "GOP".to_string() } else { "Dem".to_string() })
            .collect();
        NodeAttributes::new(labels).with_column("party", party)
    }

    /// Brute-force statistic evaluation straight from the definitions,
    /// independent of the kernel implementations.
    fn brute_force(spec: &StatisticSpec, y: &SignedGraph, x_prev: &BinaryMatrix, attrs: &NodeAttributes) -> f64 {
        let n = y.n_nodes();
        let w = |alpha: f64, c: usize| alpha.exp() * (1.0 - (1.0 - (-alpha).exp()).powi(c as i32));
        let count_partners = |i: usize, j: usize, sign: i8| {
            (0..n)
                .filter(|&m| m != i && m != j && y.state(i, m) == sign && y.state(j, m) == sign)
                .count()
        };
        let sum_edges = |edge_sign: i8, partner_sign: i8, alpha: f64| {
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if y.state(i, j) == edge_sign {
                        total += w(alpha, count_partners(i, j, partner_sign));
                    }
                }
            }
            total
        };
        match spec {
            StatisticSpec::EdgesPos => {
                let mut c = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if y.state(i, j) == 1 {
                            c += 1;
                        }
                    }
                }
                c as f64
            }
            StatisticSpec::EdgesNeg => {
                let mut c = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if y.state(i, j) == -1 {
                            c += 1;
                        }
                    }
                }
                c as f64
            }
            StatisticSpec::HomophilyPos { attr, level } => {
                let col = attrs.column(attr).unwrap();
                let mut c = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if y.state(i, j) == 1 && col[i] == *level && col[j] == *level {
                            c += 1;
                        }
                    }
                }
                c as f64
            }
            StatisticSpec::GwDegree { alpha } => {
                // the D_t histogram form
                let mut hist = vec![0usize; n];
                for i in 0..n {
                    let d = (0..n).filter(|&j| j != i && y.state(i, j) != 0).count();
                    hist[d] += 1;
                }
                (1..n).map(|t| w(*alpha, t) * hist[t] as f64).sum()
            }
            StatisticSpec::GwesfPos { alpha } => sum_edges(1, 1, *alpha),
            StatisticSpec::GwesePos { alpha } => sum_edges(1, -1, *alpha),
            StatisticSpec::GwesfNeg { alpha } => sum_edges(-1, 1, *alpha),
            StatisticSpec::GweseNeg { alpha } => sum_edges(-1, -1, *alpha),
            StatisticSpec::Persistence => {
                let mut c = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if y.state(i, j) != 0 && x_prev.get(i, j) {
                            c += 1;
                        }
                    }
                }
                c as f64
            }
        }
    }

    fn random_signed(n: usize, support: &BinaryMatrix, rng: &mut ChaCha8Rng) -> SignedGraph {
        let mut y = SignedGraph::new(n);
        for (i, j) in support.edges() {
            let state = [-1i8, 0, 1][rng.gen_range(0..3)];
            y.set_state(i, j, state);
        }
        y
    }

    #[test]
    fn all_positive_triangle_gwesf() {
        let support = complete_support(3);
        let mut y = SignedGraph::new(3);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            y.set_state(i, j, 1);
        }
        for alpha in [0.1, 0.5, 2.0] {
            let v = compute(
                &[StatisticSpec::GwesfPos { alpha }],
                &y,
                &support,
                &NodeAttributes::default(),
            )
            .unwrap();
            // each edge has exactly one shared friend; per-edge weight is 1
            assert_abs_diff_eq!(v[0], 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_layer_all_zero() {
        let support = complete_support(4);
        let y = SignedGraph::new(4);
        let v = compute(&all_specs(), &y, &support, &party_attrs(4)).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn mixed_triangle_partner_statistics() {
        // edges (0,1)=+, (0,2)=+, (1,2)=-
        let support = complete_support(3);
        let mut y = SignedGraph::new(3);
        y.set_state(0, 1, 1);
        y.set_state(0, 2, 1);
        y.set_state(1, 2, -1);
        let alpha = 0.7;
        let attrs = NodeAttributes::default();
        let gwesf_pos = compute(&[StatisticSpec::GwesfPos { alpha }], &y, &support, &attrs).unwrap()[0];
        let gwese_pos = compute(&[StatisticSpec::GwesePos { alpha }], &y, &support, &attrs).unwrap()[0];
        let gwesf_neg = compute(&[StatisticSpec::GwesfNeg { alpha }], &y, &support, &attrs).unwrap()[0];
        let gwese_neg = compute(&[StatisticSpec::GweseNeg { alpha }], &y, &support, &attrs).unwrap()[0];
        assert_abs_diff_eq!(gwesf_pos, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gwese_pos, 0.0, epsilon = 1e-12);
        // the negative edge (1,2) has one shared friend (node 0)
        assert_abs_diff_eq!(gwesf_neg, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gwese_neg, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn compute_matches_brute_force_on_random_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let attrs = party_attrs(8);
        let specs = all_specs();
        for _ in 0..30 {
            let n = 8;
            let mut support = BinaryMatrix::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.6) {
                        support.set(i, j, true);
                    }
                }
            }
            let y = random_signed(n, &support, &mut rng);
            let compiled = CompiledStats::new(&specs, n, &attrs).unwrap();
            let fast = compiled.compute(&y, &support).unwrap();
            for (spec, got) in specs.iter().zip(&fast) {
                let want = brute_force(spec, &y, &support, &attrs);
                assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn change_stat_empty_layer_edge_toggle() {
        let support = complete_support(3);
        let y = SignedGraph::new(3);
        let v = change_stat(&all_specs(), &y, &support, (1, 2), 0, 1, &party_attrs(3)).unwrap();
        // edges_pos +1, all triadic terms 0
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert!(v[4..8].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn change_stat_identity_toggle_is_zero() {
        let support = complete_support(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_signed(4, &support, &mut rng);
        let state = y.state(0, 1);
        let v = change_stat(&all_specs(), &y, &support, (0, 1), state, state, &party_attrs(4)).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn triangle_edge_removal_matches_recompute() {
        let support = complete_support(3);
        let mut y = SignedGraph::new(3);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            y.set_state(i, j, 1);
        }
        let alpha = 0.5;
        let spec = [StatisticSpec::GwesfPos { alpha }];
        let attrs = NodeAttributes::default();
        let before = compute(&spec, &y, &support, &attrs).unwrap()[0];
        let delta = change_stat(&spec, &y, &support, (0, 1), 1, 0, &attrs).unwrap()[0];
        let mut y_after = y.clone();
        y_after.set_state(0, 1, 0);
        let after = compute(&spec, &y_after, &support, &attrs).unwrap()[0];
        assert_abs_diff_eq!(delta, after - before, epsilon = 1e-12);
        // hand value: removing one edge of an all-positive triangle zeroes
        // the statistic (each remaining edge loses its only shared friend)
        assert_abs_diff_eq!(delta, -3.0, epsilon = 1e-12);
    }

    #[test]
    fn change_stats_match_full_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let specs = all_specs();
        let attrs = party_attrs(9);
        let compiled = CompiledStats::new(&specs, 9, &attrs).unwrap();
        for _ in 0..200 {
            let n = 9;
            let mut support = BinaryMatrix::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.7) {
                        support.set(i, j, true);
                    }
                }
            }
            let edges = support.edges();
            if edges.is_empty() {
                continue;
            }
            let mut y = random_signed(n, &support, &mut rng);
            let (i, j) = edges[rng.gen_range(0..edges.len())];
            let from = y.state(i, j);
            let to = [-1i8, 0, 1][rng.gen_range(0..3)];
            let delta = compiled.delta(&y, &support, i, j, from, to).unwrap();
            let before = compiled.compute(&y, &support).unwrap();
            y.set_state(i, j, to);
            let after = compiled.compute(&y, &support).unwrap();
            for idx in 0..specs.len() {
                assert_abs_diff_eq!(delta[idx], after[idx] - before[idx], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn delta_path_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let specs = all_specs();
        let attrs = party_attrs(7);
        let compiled = CompiledStats::new(&specs, 7, &attrs).unwrap();
        let support = complete_support(7);
        for _ in 0..100 {
            let mut y = random_signed(7, &support, &mut rng);
            let (i, j) = (rng.gen_range(0..6), 6);
            let a = y.state(i, j);
            let b = [-1i8, 0, 1][rng.gen_range(0..3)];
            let c = [-1i8, 0, 1][rng.gen_range(0..3)];
            let d_ab = compiled.delta(&y, &support, i, j, a, b).unwrap();
            let d_ac = compiled.delta(&y, &support, i, j, a, c).unwrap();
            y.set_state(i, j, b);
            let d_bc = compiled.delta(&y, &support, i, j, b, c).unwrap();
            for idx in 0..specs.len() {
                assert_abs_diff_eq!(d_ab[idx] + d_bc[idx], d_ac[idx], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let specs = all_specs();
        let attrs = party_attrs(n);
        let support = complete_support(n);
        for _ in 0..20 {
            let y = random_signed(n, &support, &mut rng);
            // random permutation
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let mut y_perm = SignedGraph::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    y_perm.set_state(perm[i], perm[j], y.state(i, j));
                }
            }
            let party = attrs.column("party").unwrap();
            let mut party_perm = vec![String::new(); n];
            for i in 0..n {
                party_perm[perm[i]] = party[i].clone();
            }
            let attrs_perm = NodeAttributes::new(attrs.labels.clone()).with_column("party", party_perm);
            let a = compute(&specs, &y, &support, &attrs).unwrap();
            let b = compute(&specs, &y_perm, &support, &attrs_perm).unwrap();
            for idx in 0..specs.len() {
                assert_abs_diff_eq!(a[idx], b[idx], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gw_statistics_finite_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let support = complete_support(10);
        for _ in 0..20 {
            let y = random_signed(10, &support, &mut rng);
            for alpha in [0.01, 0.3, 1.0, 5.0] {
                let specs = [
                    StatisticSpec::GwDegree { alpha },
                    StatisticSpec::GwesfPos { alpha },
                    StatisticSpec::GwesePos { alpha },
                    StatisticSpec::GwesfNeg { alpha },
                    StatisticSpec::GweseNeg { alpha },
                ];
                let v = compute(&specs, &y, &support, &NodeAttributes::default()).unwrap();
                assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
            }
        }
    }

    #[test]
    fn gwesf_with_unit_partner_counts_is_edge_count() {
        // positive triangle plus a pendant edge: every partner count <= 1
        let support = complete_support(4);
        let mut y = SignedGraph::new(4);
        for (i, j) in [(0, 1), (1, 2), (0, 2), (2, 3)] {
            y.set_state(i, j, 1);
        }
        assert!(y.positive().edges().iter().all(|&(i, j)| y.shared_friends(i, j) <= 1));
        let count_with_one_friend = y
            .positive()
            .edges()
            .into_iter()
            .filter(|&(i, j)| y.shared_friends(i, j) == 1)
            .count();
        for alpha in [0.2, 0.9, 3.0] {
            let v = compute(
                &[StatisticSpec::GwesfPos { alpha }],
                &y,
                &support,
                &NodeAttributes::default(),
            )
            .unwrap();
            assert_abs_diff_eq!(v[0], count_with_one_friend as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn support_violation_detected() {
        let mut support = complete_support(3);
        support.set(0, 1, false);
        let mut y = SignedGraph::new(3);
        y.set_state(0, 1, 1);
        let err = compute(&[StatisticSpec::EdgesPos], &y, &support, &NodeAttributes::default());
        assert!(matches!(err, Err(Error::SupportViolation { i: 0, j: 1 })));
    }

    #[test]
    fn unknown_attribute_rejected() {
        let support = complete_support(3);
        let y = SignedGraph::new(3);
        let err = compute(
            &[StatisticSpec::HomophilyPos { attr: "state".into(), level: "TX".into() }],
            &y,
            &support,
            &party_attrs(3),
        );
        assert!(matches!(err, Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn sign_flip_change_layer_list() {
        use crate::network::{decompose, WeightedSignedNetwork};
        // dyad (0,1) active in layers 1..2 only
        let mut net = WeightedSignedNetwork::zero(4, party_attrs(4));
        net.set_weight(0, 1, -2);
        net.set_weight(1, 2, 3);
        net.set_weight(2, 3, 1);
        let stack = decompose(&net, &[2.0, 3.0]).unwrap();
        let model = ModelSpec {
            layers: vec![vec![StatisticSpec::EdgesPos, StatisticSpec::EdgesNeg]; 2],
        };
        let deltas = sign_flip_change(&model, &stack, 0, 1).unwrap();
        assert_eq!(deltas.len(), 1);
        assert_eq!(deltas[0].0, 2);
        assert_eq!(deltas[0].1, vec![1.0, -1.0]);
        // non-interacting dyad errors
        assert!(sign_flip_change(&model, &stack, 0, 3).is_err());
    }

    #[test]
    fn serde_spec_round_trip() {
        let spec = StatisticSpec::HomophilyPos { attr: "party".into(), level: "GOP".into() };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("homophily_pos"));
        let back: StatisticSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
