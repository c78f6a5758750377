//! Low-level undirected graph storage.
//!
//! Adjacency rows are `u64` bitsets so that shared-partner counts (the hot
//! path of every change-statistic evaluation) reduce to a handful of
//! AND + popcount instructions.

/// Symmetric binary adjacency matrix with zero diagonal, stored as one
/// bitset row per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl BinaryMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BinaryMatrix {
            n,
            words,
            rows: vec![0; n * words],
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Sets both (i, j) and (j, i). The diagonal is untouchable.
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i != j, "no self loops");
        assert!(i < self.n && j < self.n);
        for (a, b) in [(i, j), (j, i)] {
            let idx = a * self.words + b / 64;
            let bit = 1u64 << (b % 64);
            if value {
                self.rows[idx] |= bit;
            } else {
                self.rows[idx] &= !bit;
            }
        }
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = (0..self.n).map(|i| self.degree(i)).sum();
        total / 2
    }

    /// Number of common neighbours of i and j.
    #[inline]
    pub fn common_neighbors(&self, i: usize, j: usize) -> usize {
        let (ri, rj) = (self.row(i), self.row(j));
        ri.iter()
            .zip(rj)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Size of the intersection of row i with an arbitrary node bitmask.
    #[inline]
    pub fn row_intersection(&self, i: usize, mask: &[u64]) -> usize {
        self.row(i)
            .iter()
            .zip(mask)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Neighbours of node i in ascending order.
    pub fn neighbors(&self, i: usize) -> BitIter<'_> {
        BitIter::new(self.row(i))
    }

    /// All edges (i, j) with i < j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.n {
            for j in self.neighbors(i) {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True when every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &BinaryMatrix) -> bool {
        self.rows
            .iter()
            .zip(&other.rows)
            .all(|(a, b)| a & !b == 0)
    }

    /// Count of edges present in both matrices.
    pub fn intersection_count(&self, other: &BinaryMatrix) -> usize {
        let total: usize = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum();
        total / 2
    }
}

/// Iterator over set bit positions of a bitset row.
pub struct BitIter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl<'a> BitIter<'a> {
    fn new(words: &'a [u64]) -> Self {
        let current = if words.is_empty() { 0 } else { words[0] };
        BitIter {
            words,
            word_idx: 0,
            current,
        }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
        let bit = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.word_idx * 64 + bit)
    }
}

/// Symmetric matrix of edge polarities with entries in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    n: usize,
    entries: Vec<i8>,
}

impl SignMatrix {
    pub fn new(n: usize) -> Self {
        SignMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, sign: i8) {
        assert!(i != j, "no self loops");
        assert!((-1..=1).contains(&sign));
        self.entries[i * self.n + j] = sign;
        self.entries[j * self.n + i] = sign;
    }
}

/// A signed undirected graph kept as a pair of disjoint pos/neg bitset
/// layers plus the sign-blind union and cached union degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedGraph {
    n: usize,
    pos: BinaryMatrix,
    neg: BinaryMatrix,
    bin: BinaryMatrix,
    deg: Vec<u32>,
}

impl SignedGraph {
    pub fn new(n: usize) -> Self {
        SignedGraph {
            n,
            pos: BinaryMatrix::new(n),
            neg: BinaryMatrix::new(n),
            bin: BinaryMatrix::new(n),
            deg: vec![0; n],
        }
    }

    /// Builds the signed view of one layer: entries `signs[ij] * layer[ij]`.
    pub fn from_sign_layer(signs: &SignMatrix, layer: &BinaryMatrix) -> Self {
        let n = layer.n_nodes();
        let mut g = SignedGraph::new(n);
        for (i, j) in layer.edges() {
            g.set_state(i, j, signs.get(i, j));
        }
        g
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn state(&self, i: usize, j: usize) -> i8 {
        if self.pos.get(i, j) {
            1
        } else if self.neg.get(i, j) {
            -1
        } else {
            0
        }
    }

    pub fn set_state(&mut self, i: usize, j: usize, state: i8) {
        let old = self.state(i, j);
        if old == state {
            return;
        }
        match old {
            1 => self.pos.set(i, j, false),
            -1 => self.neg.set(i, j, false),
            _ => {}
        }
        match state {
            1 => self.pos.set(i, j, true),
            -1 => self.neg.set(i, j, true),
            _ => {}
        }
        let was = old != 0;
        let is = state != 0;
        if was != is {
            self.bin.set(i, j, is);
            if is {
                self.deg[i] += 1;
                self.deg[j] += 1;
            } else {
                self.deg[i] -= 1;
                self.deg[j] -= 1;
            }
        }
    }

    #[inline]
    pub fn positive(&self) -> &BinaryMatrix {
        &self.pos
    }

    #[inline]
    pub fn negative(&self) -> &BinaryMatrix {
        &self.neg
    }

    /// Sign-blind adjacency (the binary layer this graph induces).
    #[inline]
    pub fn binary(&self) -> &BinaryMatrix {
        &self.bin
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.deg[i] as usize
    }

    /// Partners m with both (i,m) and (j,m) positive.
    #[inline]
    pub fn shared_friends(&self, i: usize, j: usize) -> usize {
        self.pos.common_neighbors(i, j)
    }

    /// Partners m with both (i,m) and (j,m) negative.
    #[inline]
    pub fn shared_enemies(&self, i: usize, j: usize) -> usize {
        self.neg.common_neighbors(i, j)
    }

    pub fn positive_edge_count(&self) -> usize {
        self.pos.edge_count()
    }

    pub fn negative_edge_count(&self) -> usize {
        self.neg.edge_count()
    }
}
