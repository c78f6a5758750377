//! Weighted signed networks and their decomposition into nested binary
//! layers plus a sign layer.
//!
//! A weighted signed network with integer weights is equivalent to a stack
//! of nested binary layers `x_1 ⊇ x_2 ⊇ … ⊇ x_K` (layer k holds the dyads
//! whose weight magnitude meets threshold `τ_k`) together with a sign
//! matrix `z` on the support of `x_1`. `decompose` and `recompose` move
//! between the two representations.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{BinaryMatrix, SignMatrix};

/// Named node attribute columns (stored as strings; categorical use only).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeAttributes {
    pub labels: Vec<String>,
    columns: BTreeMap<String, Vec<String>>,
}

impl NodeAttributes {
    pub fn new(labels: Vec<String>) -> Self {
        NodeAttributes {
            labels,
            columns: BTreeMap::new(),
        }
    }

    pub fn with_column(mut self, name: &str, values: Vec<String>) -> Self {
        assert_eq!(values.len(), self.labels.len());
        self.columns.insert(name.to_string(), values);
        self
    }

    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn column_names(&self) -> impl Iterator<Item = &String> {
        self.columns.keys()
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

/// Integer-weighted signed symmetric adjacency over labelled nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSignedNetwork {
    n: usize,
    weights: Vec<i64>,
    pub attrs: NodeAttributes,
}

impl WeightedSignedNetwork {
    /// Builds from a dense row-major weight matrix. Fails on asymmetry or
    /// a nonzero diagonal.
    pub fn from_weights(n: usize, weights: Vec<i64>, attrs: NodeAttributes) -> Result<Self> {
        assert_eq!(weights.len(), n * n);
        for i in 0..n {
            if weights[i * n + i] != 0 {
                return Err(Error::NonZeroDiagonal { i });
            }
            for j in (i + 1)..n {
                if weights[i * n + j] != weights[j * n + i] {
                    return Err(Error::NonSymmetric {
                        i,
                        j,
                        a: weights[i * n + j],
                        b: weights[j * n + i],
                    });
                }
            }
        }
        if attrs.n_nodes() != 0 && attrs.n_nodes() != n {
            return Err(Error::DimensionMismatch(format!(
                "attributes cover {} nodes, network has {}",
                attrs.n_nodes(),
                n
            )));
        }
        Ok(WeightedSignedNetwork { n, weights, attrs })
    }

    pub fn zero(n: usize, attrs: NodeAttributes) -> Self {
        WeightedSignedNetwork::from_weights(n, vec![0; n * n], attrs).unwrap()
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> i64 {
        self.weights[i * self.n + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: i64) {
        assert!(i != j);
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
    }
}

/// Nested binary layers `x_1 ⊇ … ⊇ x_K` plus the sign matrix on `x_1`.
///
/// `thresholds[k-2]` is the weight-magnitude cut for layer `k ≥ 2`; layer 1
/// holds every interacting dyad.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    n: usize,
    pub layers: Vec<BinaryMatrix>,
    pub signs: SignMatrix,
    pub thresholds: Vec<f64>,
    pub attrs: NodeAttributes,
}

impl LayerStack {
    /// Assembles a stack from parts without checking the nesting and
    /// sign-support invariants; run [`validate`] to audit.
    pub fn from_parts(
        layers: Vec<BinaryMatrix>,
        signs: SignMatrix,
        thresholds: Vec<f64>,
        attrs: NodeAttributes,
    ) -> Self {
        assert!(!layers.is_empty());
        let n = layers[0].n_nodes();
        LayerStack {
            n,
            layers,
            signs,
            thresholds,
            attrs,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Number of layers K.
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Signed view of layer `k` (1-based): entries `z_ij * x_{k,ij}`.
    pub fn signed_layer(&self, k: usize) -> crate::graph::SignedGraph {
        crate::graph::SignedGraph::from_sign_layer(&self.signs, &self.layers[k - 1])
    }
}

/// One invariant breach found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Dyad present in layer k but absent from layer k-1.
    Nesting { k: usize, i: usize, j: usize },
    /// Sign entry inconsistent with the x_1 support (zero on an
    /// interacting dyad, or nonzero off the support).
    SignSupport { i: usize, j: usize, sign: i8, interacting: bool },
    /// Thresholds not strictly increasing and positive.
    ThresholdOrder { index: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Nesting { k, i, j } => {
                write!(f, "nesting: dyad ({i},{j}) active in layer {k} but not {}", k - 1)
            }
            Violation::SignSupport { i, j, sign, interacting } => write!(
                f,
                "sign-support: dyad ({i},{j}) sign {sign} with x1 {}",
                if *interacting { 1 } else { 0 }
            ),
            Violation::ThresholdOrder { index } => {
                write!(f, "thresholds: entry {index} breaks strict increase")
            }
        }
    }
}

/// Splits an integer-weighted signed network into nested binary layers.
///
/// Layer 1 marks any nonzero weight; layer k ≥ 2 marks `|w| >= thresholds[k-2]`
/// (inclusive comparison keeps integer weights round-trippable); the sign
/// layer is `sign(w)`.
pub fn decompose(net: &WeightedSignedNetwork, thresholds: &[f64]) -> Result<LayerStack> {
    for (idx, pair) in thresholds.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::BadThresholds { index: idx + 1 });
        }
    }
    if let Some(first) = thresholds.first() {
        if *first <= 0.0 {
            return Err(Error::BadThresholds { index: 0 });
        }
    }
    let n = net.n_nodes();
    let k_total = thresholds.len() + 1;
    let mut layers = vec![BinaryMatrix::new(n); k_total];
    let mut signs = SignMatrix::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = net.weight(i, j);
            if w == 0 {
                continue;
            }
            layers[0].set(i, j, true);
            signs.set(i, j, w.signum() as i8);
            for (idx, tau) in thresholds.iter().enumerate() {
                if (w.abs() as f64) >= *tau {
                    layers[idx + 1].set(i, j, true);
                }
            }
        }
    }
    Ok(LayerStack::from_parts(
        layers,
        signs,
        thresholds.to_vec(),
        net.attrs.clone(),
    ))
}

/// Inverse of [`decompose`] with weight taken as signed layer depth:
/// `w_ij = z_ij * max{k : x_k,ij = 1}`.
pub fn recompose(stack: &LayerStack) -> Result<WeightedSignedNetwork> {
    let violations = validate(stack);
    if let Some(v) = violations.iter().find_map(|v| match v {
        Violation::Nesting { k, i, j } => Some((*k, *i, *j)),
        _ => None,
    }) {
        return Err(Error::NestingViolation { k: v.0, i: v.1, j: v.2 });
    }
    let n = stack.n_nodes();
    let mut net = WeightedSignedNetwork::zero(n, stack.attrs.clone());
    for i in 0..n {
        for j in (i + 1)..n {
            let depth = (0..stack.n_layers())
                .rev()
                .find(|k| stack.layers[*k].get(i, j))
                .map(|k| k as i64 + 1)
                .unwrap_or(0);
            if depth > 0 {
                net.set_weight(i, j, stack.signs.get(i, j) as i64 * depth);
            }
        }
    }
    Ok(net)
}

/// Audits every stack invariant; the empty list means the stack is valid.
pub fn validate(stack: &LayerStack) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = stack.n_nodes();
    for k in 1..stack.n_layers() {
        for i in 0..n {
            for j in (i + 1)..n {
                if stack.layers[k].get(i, j) && !stack.layers[k - 1].get(i, j) {
                    out.push(Violation::Nesting { k: k + 1, i, j });
                }
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let interacting = stack.layers[0].get(i, j);
            let sign = stack.signs.get(i, j);
            if interacting != (sign != 0) {
                out.push(Violation::SignSupport { i, j, sign, interacting });
            }
        }
    }
    for (index, pair) in stack.thresholds.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            out.push(Violation::ThresholdOrder { index: index + 1 });
        }
    }
    if stack.thresholds.first().map_or(false, |t| *t <= 0.0) {
        out.push(Violation::ThresholdOrder { index: 0 });
    }
    out
}

/// Per-layer density and positive-edge fraction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LayerSummary {
    pub layer: usize,
    pub edges: usize,
    pub density: f64,
    /// Absent when the layer has no edges.
    pub pos_frac: Option<f64>,
}

pub fn layer_summary(stack: &LayerStack) -> Vec<LayerSummary> {
    let n = stack.n_nodes();
    let dyads = (n * (n - 1) / 2) as f64;
    (0..stack.n_layers())
        .map(|k| {
            let layer = &stack.layers[k];
            let edges = layer.edge_count();
            let pos = layer
                .edges()
                .iter()
                .filter(|(i, j)| stack.signs.get(*i, *j) == 1)
                .count();
            LayerSummary {
                layer: k + 1,
                edges,
                density: edges as f64 / dyads,
                pos_frac: if edges > 0 {
                    Some(pos as f64 / edges as f64)
                } else {
                    None
                },
            }
        })
        .collect()
}

/// Writes the edge-list exchange format: header `n_nodes K`, then one
/// `i j weight` row per dyad with nonzero weight.
pub fn write_edge_list<W: Write>(net: &WeightedSignedNetwork, k_layers: usize, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", net.n_nodes(), k_layers)?;
    for i in 0..net.n_nodes() {
        for j in (i + 1)..net.n_nodes() {
            let weight = net.weight(i, j);
            if weight != 0 {
                writeln!(w, "{i} {j} {weight}")?;
            }
        }
    }
    Ok(())
}

/// Reads the edge-list format back; returns the network and its layer count.
pub fn read_edge_list<R: BufRead>(r: R) -> Result<(WeightedSignedNetwork, usize)> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty edge-list file".into(),
    })?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let parse_err = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "expected `n_nodes K` header"))?;
    let k: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "expected `n_nodes K` header"))?;
    let mut net = WeightedSignedNetwork::zero(n, NodeAttributes::default());
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let msg = "expected `i j weight`";
        let i: usize = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(idx + 1, msg))?;
        let j: usize = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(idx + 1, msg))?;
        let w: i64 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(idx + 1, msg))?;
        if i >= n || j >= n || i == j {
            return Err(parse_err(idx + 1, "node index out of range"));
        }
        net.set_weight(i, j, w);
    }
    Ok((net, k))
}

/// Writes node attributes as CSV with header `label,attr1,...`.
pub fn write_attributes<W: Write>(attrs: &NodeAttributes, mut w: W) -> Result<()> {
    let names: Vec<&String> = attrs.column_names().collect();
    write!(w, "label")?;
    for name in &names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (i, label) in attrs.labels.iter().enumerate() {
        write!(w, "{label}")?;
        for name in &names {
            write!(w, ",{}", attrs.column(name).unwrap()[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads the attribute CSV produced by [`write_attributes`].
pub fn read_attributes<R: BufRead>(r: R) -> Result<NodeAttributes> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty attribute file".into(),
    })?;
    let header = header?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.is_empty() || cols[0] != "label" {
        return Err(Error::Parse {
            line: 1,
            msg: "attribute header must start with `label`".into(),
        });
    }
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); cols.len() - 1];
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        labels.push(fields[0].trim().to_string());
        for (c, field) in fields[1..].iter().enumerate() {
            columns[c].push(field.trim().to_string());
        }
    }
    let mut attrs = NodeAttributes::new(labels);
    for (c, name) in cols[1..].iter().enumerate() {
        attrs = attrs.with_column(name, std::mem::take(&mut columns[c]));
    }
    Ok(attrs)
}
