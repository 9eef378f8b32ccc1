//! Dense simple graphs with optional real node features, node permutations,
//! a seeded Erdős–Rényi generator, and the JSON wire format
//! `{"n": …, "edges": [[i, j], …], "features": [[…], …]}` (0-based, undirected).

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("self-loop at node {index} is not allowed in a simple graph")]
    SelfLoop { index: usize },
    #[error("feature matrix has {rows} rows, expected one per node ({n})")]
    FeatureRows { rows: usize, n: usize },
    #[error("feature row {row} has {len} entries, expected {expected}")]
    RaggedFeatures {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("feature values must be finite; row {row}, column {col} is not")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("mapping of length {len} is not a permutation of 0..{len}")]
    NotAPermutation { len: usize },
    #[error("permutation over {perm} nodes applied to a graph with {n} nodes")]
    PermutationSize { perm: usize, n: usize },
    #[error("graph declares {n} nodes, more than the wire-format limit {max}")]
    TooManyNodes { n: usize, max: usize },
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Largest node count the untrusted wire decoders accept. Dense adjacency
/// costs `8n²` bytes, so the declared `n` must be bounded before allocating.
pub const MAX_WIRE_VERTICES: usize = 4096;

/// Simple undirected graph over `n` nodes, stored as a dense 0/1 adjacency
/// matrix (symmetric, zero diagonal), with optional `n×d₀` node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Array2<f64>,
    features: Option<Array2<f64>>,
}

impl Graph {
    /// Edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adjacency: Array2::zeros((n, n)),
            features: None,
        }
    }

    /// Graph from an undirected edge list; duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.add_edge(i, j).expect("indices in range");
            }
        }
        g
    }

    /// Cycle graph `C_n` (n ≥ 3).
    pub fn cycle(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            g.add_edge(i, (i + 1) % n).expect("indices in range");
        }
        g
    }

    /// Disjoint union; node ids of `other` are shifted by `self.n`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let n = self.n + other.n;
        let mut adjacency = Array2::zeros((n, n));
        adjacency
            .slice_mut(ndarray::s![..self.n, ..self.n])
            .assign(&self.adjacency);
        adjacency
            .slice_mut(ndarray::s![self.n.., self.n..])
            .assign(&other.adjacency);
        // features survive only if both sides carry them with equal width
        let features = match (&self.features, &other.features) {
            (Some(a), Some(b)) if a.ncols() == b.ncols() => {
                let mut f = Array2::zeros((n, a.ncols()));
                f.slice_mut(ndarray::s![..self.n, ..]).assign(a);
                f.slice_mut(ndarray::s![self.n.., ..]).assign(b);
                Some(f)
            }
            _ => None,
        };
        Graph {
            n,
            adjacency,
            features,
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        if i >= self.n {
            return Err(GraphError::NodeOutOfRange {
                index: i,
                n: self.n,
            });
        }
        if j >= self.n {
            return Err(GraphError::NodeOutOfRange {
                index: j,
                n: self.n,
            });
        }
        if i == j {
            return Err(GraphError::SelfLoop { index: i });
        }
        self.adjacency[(i, j)] = 1.0;
        self.adjacency[(j, i)] = 1.0;
        Ok(())
    }

    /// Attaches an `n×d₀` feature matrix (replacing any existing one).
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self, GraphError> {
        if features.nrows() != self.n {
            return Err(GraphError::FeatureRows {
                rows: features.nrows(),
                n: self.n,
            });
        }
        for ((i, j), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(GraphError::NonFiniteFeature { row: i, col: j });
            }
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> ArrayView2<'_, f64> {
        self.adjacency.view()
    }

    pub fn features(&self) -> Option<ArrayView2<'_, f64>> {
        self.features.as_ref().map(|f| f.view())
    }

    /// Feature width d₀ (0 when featureless).
    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |f| f.ncols())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row(i).iter().filter(|&&v| v != 0.0).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(i)
            .into_iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect::<Vec<_>>()
            .into_iter()
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.edge_list().len()
    }

    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let wire: GraphWire = serde_json::from_str(text)?;
        if wire.n > MAX_WIRE_VERTICES {
            return Err(GraphError::TooManyNodes {
                n: wire.n,
                max: MAX_WIRE_VERTICES,
            });
        }
        let mut g = Graph::from_edges(wire.n, &wire.edges)?;
        if let Some(rows) = wire.features {
            if rows.len() != wire.n {
                return Err(GraphError::FeatureRows {
                    rows: rows.len(),
                    n: wire.n,
                });
            }
            let width = rows.first().map_or(0, |r| r.len());
            for (i, r) in rows.iter().enumerate() {
                if r.len() != width {
                    return Err(GraphError::RaggedFeatures {
                        row: i,
                        len: r.len(),
                        expected: width,
                    });
                }
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let features = Array2::from_shape_vec((wire.n, width), flat)
                .expect("row lengths validated above");
            g = g.with_features(features)?;
        }
        Ok(g)
    }

    pub fn to_json_string(&self) -> String {
        let wire = GraphWire {
            n: self.n,
            edges: self.edge_list(),
            features: self
                .features
                .as_ref()
                .map(|f| f.rows().into_iter().map(|r| r.to_vec()).collect()),
        };
        serde_json::to_string(&wire).expect("graph serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
}

/// Node relabeling; `mapping[i]` is the new label of node `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self, GraphError> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || seen[v] {
                return Err(GraphError::NotAPermutation { len: n });
            }
            seen[v] = true;
        }
        Ok(Permutation { mapping })
    }

    /// Fisher–Yates shuffle of the identity, driven by `rng`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            mapping.swap(i, j);
        }
        Permutation { mapping }
    }

    pub fn n(&self) -> usize {
        self.mapping.len()
    }

    pub fn apply_index(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &v) in self.mapping.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { mapping: inv }
    }

    /// Applies the permutation to matrix rows: row `i` moves to row `mapping[i]`.
    pub fn permute_rows(&self, m: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(m.nrows(), self.mapping.len(), "row count mismatch");
        let mut out = Array2::zeros(m.raw_dim());
        for (i, &pi) in self.mapping.iter().enumerate() {
            out.row_mut(pi).assign(&m.row(i));
        }
        out
    }
}

/// Relabels `g` by `p`: edge `(i, j)` becomes `(p(i), p(j))`, feature row `i`
/// moves to row `p(i)`.
pub fn apply_permutation(g: &Graph, p: &Permutation) -> Result<Graph, GraphError> {
    if p.n() != g.n() {
        return Err(GraphError::PermutationSize { perm: p.n(), n: g.n() });
    }
    let n = g.n();
    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            adjacency[(p.apply_index(i), p.apply_index(j))] = g.adjacency[(i, j)];
        }
    }
    let features = g.features.as_ref().map(|f| p.permute_rows(&f.view()));
    Ok(Graph {
        n,
        adjacency,
        features,
    })
}

/// Seeded Erdős–Rényi graph: each pair `(i, j)`, `i < j`, is an edge with
/// probability `edge_prob`, drawn in row-major pair order from ChaCha8.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < edge_prob {
                g.add_edge(i, j).expect("indices in range");
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn from_edges_builds_symmetric_zero_diagonal() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (1, 2)]).unwrap();
        assert_eq!(g.edge_list(), vec![(0, 1), (1, 2)]);
        assert!(g.has_edge(2, 1));
        assert_eq!(g.degree(1), 2);
        for i in 0..4 {
            assert!(!g.has_edge(i, i));
        }
    }

    #[test]
    fn invalid_edges_are_rejected() {
        assert!(matches!(
            Graph::from_edges(3, &[(0, 3)]),
            Err(GraphError::NodeOutOfRange { index: 3, n: 3 })
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(1, 1)]),
            Err(GraphError::SelfLoop { index: 1 })
        ));
    }

    #[test]
    fn permutation_rejects_non_bijections() {
        assert!(Permutation::from_mapping(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_mapping(vec![0, 3, 1]).is_err());
        assert!(Permutation::from_mapping(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn apply_permutation_relabels_edges() {
        // path 0-1-2, swap endpoints 0 and 2: same edge set
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p = Permutation::from_mapping(vec![2, 1, 0]).unwrap();
        let h = apply_permutation(&g, &p).unwrap();
        assert_eq!(h.edge_list(), vec![(0, 1), (1, 2)]);

        // path 0-1-2, rotate 0→1→2→0: edges become (1,2),(2,0)
        let p = Permutation::from_mapping(vec![1, 2, 0]).unwrap();
        let h = apply_permutation(&g, &p).unwrap();
        assert_eq!(h.edge_list(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn apply_permutation_moves_feature_rows() {
        let g = Graph::from_edges(3, &[(0, 1)])
            .unwrap()
            .with_features(ndarray::arr2(&[[1.0], [2.0], [3.0]]))
            .unwrap();
        let p = Permutation::from_mapping(vec![1, 2, 0]).unwrap();
        let h = apply_permutation(&g, &p).unwrap();
        assert_eq!(
            h.features().unwrap(),
            ndarray::arr2(&[[3.0], [1.0], [2.0]]).view()
        );
    }

    #[test]
    fn random_graph_extremes_and_determinism() {
        assert_eq!(random_graph(6, 0.0, 7).edge_count(), 0);
        assert_eq!(random_graph(6, 1.0, 7).edge_count(), 15);
        assert_eq!(random_graph(12, 0.4, 99), random_graph(12, 0.4, 99));
        assert_ne!(random_graph(12, 0.4, 99), random_graph(12, 0.4, 100));
    }

    #[test]
    fn json_round_trip_with_features() {
        let g = Graph::from_edges(3, &[(0, 2), (1, 2)])
            .unwrap()
            .with_features(ndarray::arr2(&[[1.0, 0.5], [2.0, -1.0], [3.0, 0.0]]))
            .unwrap();
        let text = g.to_json_string();
        let back = Graph::from_json_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn json_fixed_document_parses() {
        let g = Graph::from_json_str(r#"{"n":3,"edges":[[2,0],[1,2]]}"#).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_list(), vec![(0, 2), (1, 2)]);
        assert!(g.features().is_none());
    }

    #[test]
    fn json_rejects_bad_documents() {
        assert!(Graph::from_json_str("{").is_err());
        assert!(matches!(
            Graph::from_json_str(r#"{"n":2,"edges":[[0,2]]}"#),
            Err(GraphError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            Graph::from_json_str(r#"{"n":2,"edges":[],"features":[[1.0]]}"#),
            Err(GraphError::FeatureRows { rows: 1, n: 2 })
        ));
        assert!(matches!(
            Graph::from_json_str(r#"{"n":2,"edges":[],"features":[[1.0],[1.0,2.0]]}"#),
            Err(GraphError::RaggedFeatures { row: 1, .. })
        ));
        // A declared node count is an allocation request and must be bounded
        // before the dense adjacency is built.
        assert!(matches!(
            Graph::from_json_str(r#"{"n":1000000000,"edges":[]}"#),
            Err(GraphError::TooManyNodes { n: 1000000000, max: MAX_WIRE_VERTICES })
        ));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..9, proptest::collection::vec(0u8..2, 0..64), 0u64..4).prop_map(
            |(n, bits, fdim)| {
                let mut g = Graph::empty(n);
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if bits.get(k).copied().unwrap_or(0) == 1 {
                            g.add_edge(i, j).unwrap();
                        }
                        k += 1;
                    }
                }
                if fdim > 0 {
                    let f = Array2::from_shape_fn((n, fdim as usize), |(i, j)| {
                        (i * 7 + j * 3) as f64 * 0.25 - 1.0
                    });
                    g = g.with_features(f).unwrap();
                }
                g
            },
        )
    }

    proptest! {
        #[test]
        fn json_round_trip(g in arb_graph()) {
            let back = Graph::from_json_str(&g.to_json_string()).unwrap();
            prop_assert_eq!(g, back);
        }

        #[test]
        fn permutation_preserves_graph_invariants(g in arb_graph(), seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Permutation::random(g.n(), &mut rng);
            let h = apply_permutation(&g, &p).unwrap();
            prop_assert_eq!(g.edge_count(), h.edge_count());
            let mut degs_g: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
            let mut degs_h: Vec<usize> = (0..h.n()).map(|i| h.degree(i)).collect();
            degs_g.sort_unstable();
            degs_h.sort_unstable();
            prop_assert_eq!(degs_g, degs_h);
            // inverse undoes the relabeling
            let back = apply_permutation(&h, &p.inverse()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
