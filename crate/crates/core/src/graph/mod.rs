//! Spatial landmark graph, neighbor partitioning and the normalized adjacency
//! stack used by the graph convolution.
//!
//! Each node `i` samples `B_i`: itself plus its direct neighbors. A partition
//! strategy labels every pair `(i, j in B_i)`; label `p` selects the weight
//! matrix applied to that neighbor. The normalized matrix for label `p` is
//! `D^-1/2 M_p D^-1/2`, where `M_p` keeps only the pairs labeled `p` from
//! `A + I` and `D` is the degree of the full `A + I`, so the masks sum back to
//! the unpartitioned operator.

mod cache;

use serde::{Deserialize, Serialize};

pub use cache::{parse_graph_cache, read_graph_cache, write_graph_cache, write_graph_cache_to};

use crate::landmarks::{LandmarkKind, LandmarkSet};
use crate::mesh::squared_distance;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("landmark id {0} is not in the graph")]
    UnknownId(usize),
    #[error("graph needs at least one node")]
    Empty,
    #[error("knn neighbor count must be at least 1")]
    ZeroNeighbors,
    #[error("graph cache line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStrategy {
    /// Connect each landmark to its `m` nearest landmarks, symmetrized.
    Knn(usize),
    /// Fixed id pairs, plus edges from each augmented landmark to its sources.
    Template(Vec<(usize, usize)>),
}

impl Default for EdgeStrategy {
    fn default() -> Self {
        EdgeStrategy::Knn(4)
    }
}

/// Undirected simple graph over `J` landmarks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialGraph {
    nodes: usize,
    adjacency: Vec<bool>,
}

impl SpatialGraph {
    pub fn new(nodes: usize) -> Self {
        SpatialGraph {
            nodes,
            adjacency: vec![false; nodes * nodes],
        }
    }

    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = SpatialGraph::new(nodes);
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Adds `a`-`b`; self-loops are ignored since `B_i` always holds `i`.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        for v in [a, b] {
            if v >= self.nodes {
                return Err(GraphError::UnknownId(v));
            }
        }
        if a != b {
            self.adjacency[a * self.nodes + b] = true;
            self.adjacency[b * self.nodes + a] = true;
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.nodes + b]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes).filter(move |&j| self.has_edge(i, j))
    }

    /// `B_i`: the node itself and its neighbors, ascending.
    pub fn sampling_area(&self, i: usize) -> Vec<usize> {
        (0..self.nodes).filter(|&j| j == i || self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.nodes {
            for b in a + 1..self.nodes {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Dense `A` as 0/1 values.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        self.adjacency.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut g = SpatialGraph::new(self.nodes);
        for (a, b) in self.edges() {
            g.add_edge(perm[a], perm[b]).unwrap();
        }
        g
    }
}

/// Builds spatial edges over the landmarks of a reference frame.
pub fn build_spatial_edges(landmarks: &LandmarkSet, strategy: &EdgeStrategy) -> Result<SpatialGraph, GraphError> {
    let j = landmarks.len();
    if j == 0 {
        return Err(GraphError::Empty);
    }
    match strategy {
        EdgeStrategy::Knn(m) => knn_graph(&landmarks.positions(), *m),
        EdgeStrategy::Template(pairs) => {
            let mut g = SpatialGraph::from_edges(j, pairs)?;
            for l in landmarks.entries() {
                if let (LandmarkKind::Augmented, Some((a, b))) = (l.kind, l.sources) {
                    g.add_edge(l.id, a)?;
                    g.add_edge(l.id, b)?;
                }
            }
            Ok(g)
        }
    }
}

/// Symmetrized `m`-nearest-neighbor graph; distance ties go to the lower id.
pub fn knn_graph(positions: &[[f64; 3]], m: usize) -> Result<SpatialGraph, GraphError> {
    if positions.is_empty() {
        return Err(GraphError::Empty);
    }
    if m == 0 {
        return Err(GraphError::ZeroNeighbors);
    }
    let j = positions.len();
    let mut g = SpatialGraph::new(j);
    for i in 0..j {
        let mut others: Vec<(f64, usize)> = (0..j)
            .filter(|&o| o != i)
            .map(|o| (squared_distance(&positions[i], &positions[o]), o))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, o) in others.iter().take(m) {
            g.add_edge(i, o)?;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// One label for the whole sampling area.
    Uniform,
    /// Label 0 for the node itself, 1 for its neighbors.
    #[default]
    Distance,
}

impl PartitionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PartitionStrategy::Uniform => "uniform",
            PartitionStrategy::Distance => "distance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(PartitionStrategy::Uniform),
            "distance" => Some(PartitionStrategy::Distance),
            _ => None,
        }
    }

    pub fn partitions(self) -> usize {
        match self {
            PartitionStrategy::Uniform => 1,
            PartitionStrategy::Distance => 2,
        }
    }
}

/// Label of each ordered pair `(i, j)` with `j` in `B_i`; `None` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionLabels {
    nodes: usize,
    strategy: PartitionStrategy,
    labels: Vec<Option<u8>>,
}

impl PartitionLabels {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn partitions(&self) -> usize {
        self.strategy.partitions()
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.strategy
    }

    pub fn label(&self, i: usize, j: usize) -> Option<usize> {
        self.labels[i * self.nodes + j].map(usize::from)
    }

    /// All labeled pairs `(i, j, label)` in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize, usize)> {
        let n = self.nodes;
        (0..n * n)
            .filter_map(|x| self.labels[x].map(|l| (x / n, x % n, usize::from(l))))
            .collect()
    }

    /// Pre-normalization mask `M_p`: entries of `A + I` carrying label `p`.
    pub fn mask(&self, p: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|l| if l.map(usize::from) == Some(p) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.nodes;
        let mut labels = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                labels[perm[i] * n + perm[j]] = self.labels[i * n + j];
            }
        }
        PartitionLabels {
            nodes: n,
            strategy: self.strategy,
            labels,
        }
    }
}

pub fn partition(graph: &SpatialGraph, strategy: PartitionStrategy) -> PartitionLabels {
    let n = graph.nodes();
    let mut labels = vec![None; n * n];
    for i in 0..n {
        for j in graph.sampling_area(i) {
            labels[i * n + j] = Some(match strategy {
                PartitionStrategy::Uniform => 0,
                PartitionStrategy::Distance => u8::from(i != j),
            });
        }
    }
    PartitionLabels {
        nodes: n,
        strategy,
        labels,
    }
}

/// `Z[i][p]`: size of the label-`p` subset of `B_i`.
pub fn cardinalities(labels: &PartitionLabels) -> Vec<Vec<usize>> {
    let n = labels.nodes();
    (0..n)
        .map(|i| {
            let mut z = vec![0usize; labels.partitions()];
            for j in 0..n {
                if let Some(p) = labels.label(i, j) {
                    z[p] += 1;
                }
            }
            z
        })
        .collect()
}

/// Stack of `P` dense `J x J` row-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    nodes: usize,
    matrices: Vec<Vec<f64>>,
}

impl NormalizedAdjacency {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn partitions(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrix(&self, p: usize) -> &[f64] {
        &self.matrices[p]
    }

    pub fn get(&self, p: usize, i: usize, j: usize) -> f64 {
        self.matrices[p][i * self.nodes + j]
    }

    /// Single-matrix stack, used for the unpartitioned identity case in tests
    /// and tools.
    pub fn from_matrices(nodes: usize, matrices: Vec<Vec<f64>>) -> Self {
        assert!(matrices.iter().all(|m| m.len() == nodes * nodes));
        NormalizedAdjacency { nodes, matrices }
    }
}

/// `D^-1/2 M_p D^-1/2` for each label `p`, with `D_ii = sum_j (A + I)_ij`.
pub fn normalize_adjacency(graph: &SpatialGraph, labels: &PartitionLabels) -> NormalizedAdjacency {
    let n = graph.nodes();
    debug_assert_eq!(n, labels.nodes());
    let d: Vec<usize> = (0..n).map(|i| graph.degree(i) + 1).collect();
    let matrices = (0..labels.partitions())
        .map(|p| {
            let mut m = vec![0.0; n * n];
            for (i, j, l) in labels.pairs() {
                if l == p {
                    m[i * n + j] = 1.0 / ((d[i] * d[j]) as f64).sqrt();
                }
            }
            m
        })
        .collect();
    NormalizedAdjacency { nodes: n, matrices }
}
