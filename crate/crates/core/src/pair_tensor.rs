//! Tensors over ordered node pairs and the isomorphism-type tensor
//! `𝒴 = [I, 1⊗X, X⊗1, A]`.
//!
//! A [`PairTensor`] assigns a feature vector of fixed depth to every ordered
//! pair `(i, j)`; pairs are flattened row-major wherever a flat index is
//! needed. The isomorphism-type tensor encodes at `(i, j)` exactly the data
//! that defines the pair's isomorphism type: whether `i = j`, the endpoint
//! features, and adjacency — entry `(i, j)` reads `[δ_ij, x_j, x_i, A_ij]`.

use crate::graph::{Graph, Permutation};
use ndarray::{Array2, Array3, ArrayView1, ArrayView2};

/// Depth-`d` feature tensor over ordered node pairs, stored `n×n×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTensor {
    data: Array3<f64>,
}

impl PairTensor {
    pub fn new(data: Array3<f64>) -> Self {
        assert_eq!(data.shape()[0], data.shape()[1], "pair axes must agree");
        PairTensor { data }
    }

    /// Stacks per-channel `n×n` matrices into a tensor.
    pub fn from_channels(channels: &[Array2<f64>]) -> Self {
        assert!(!channels.is_empty(), "need at least one channel");
        let n = channels[0].nrows();
        let mut data = Array3::zeros((n, n, channels.len()));
        for (l, c) in channels.iter().enumerate() {
            assert_eq!(c.nrows(), n, "channel {l} row count");
            assert_eq!(c.ncols(), n, "channel {l} column count");
            data.slice_mut(ndarray::s![.., .., l]).assign(c);
        }
        PairTensor { data }
    }

    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn depth(&self) -> usize {
        self.data.shape()[2]
    }

    /// Feature vector of the ordered pair `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> ArrayView1<'_, f64> {
        self.data.slice(ndarray::s![i, j, ..])
    }

    /// Channel `l` as an `n×n` matrix.
    pub fn channel(&self, l: usize) -> ArrayView2<'_, f64> {
        self.data.slice(ndarray::s![.., .., l])
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Applies `p` to both pair axes: entry `(i, j)` moves to `(p(i), p(j))`.
    pub fn permuted(&self, p: &Permutation) -> PairTensor {
        let n = self.n();
        assert_eq!(p.n(), n, "permutation size");
        let mut out = Array3::zeros(self.data.raw_dim());
        for i in 0..n {
            for j in 0..n {
                let (pi, pj) = (p.apply_index(i), p.apply_index(j));
                out.slice_mut(ndarray::s![pi, pj, ..])
                    .assign(&self.data.slice(ndarray::s![i, j, ..]));
            }
        }
        PairTensor { data: out }
    }

    /// Maximum absolute difference over all entries.
    pub fn max_abs_diff(&self, other: &PairTensor) -> f64 {
        assert_eq!(self.data.shape(), other.data.shape());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the isomorphism-type tensor `[I, 1⊗X, X⊗1, A]` of `g`.
///
/// Depth is `1 + 2d₀ + 1`; featureless graphs yield `[I, A]` of depth 2.
/// `(1⊗X)` broadcasts target features (`x_j`), `(X⊗1)` source features (`x_i`).
pub fn iso_type_tensor(g: &Graph) -> PairTensor {
    let n = g.n();
    let d0 = g.feature_dim();
    let depth = 2 + 2 * d0;
    let mut data = Array3::zeros((n, n, depth));
    for i in 0..n {
        data[(i, i, 0)] = 1.0;
    }
    if let Some(x) = g.features() {
        for i in 0..n {
            for j in 0..n {
                for c in 0..d0 {
                    data[(i, j, 1 + c)] = x[(j, c)];
                    data[(i, j, 1 + d0 + c)] = x[(i, c)];
                }
            }
        }
    }
    let a = g.adjacency();
    for i in 0..n {
        for j in 0..n {
            data[(i, j, depth - 1)] = a[(i, j)];
        }
    }
    PairTensor { data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apply_permutation, random_graph};
    use ndarray::arr2;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn single_node_featureless_tensor() {
        let t = iso_type_tensor(&Graph::empty(1));
        assert_eq!(t.depth(), 2);
        assert_eq!(t.entry(0, 0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn triangle_featureless_tensor() {
        let t = iso_type_tensor(&Graph::complete(3));
        assert_eq!(t.depth(), 2);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                };
                assert_eq!(t.entry(i, j).to_vec(), want, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn path_with_scalar_features_hand_expansion() {
        // path 0-1-2 with features x = (1, 2, 3)ᵀ
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)])
            .unwrap()
            .with_features(arr2(&[[1.0], [2.0], [3.0]]))
            .unwrap();
        let t = iso_type_tensor(&g);
        assert_eq!(t.depth(), 4);
        // entry (0, 2): not a diagonal pair, x_j = 3, x_i = 1, no edge
        assert_eq!(t.entry(0, 2).to_vec(), vec![0.0, 3.0, 1.0, 0.0]);
        // entry (1, 0): x_j = 1, x_i = 2, edge present
        assert_eq!(t.entry(1, 0).to_vec(), vec![0.0, 1.0, 2.0, 1.0]);
        // diagonal entry (2, 2)
        assert_eq!(t.entry(2, 2).to_vec(), vec![1.0, 3.0, 3.0, 0.0]);
    }

    #[test]
    fn channels_expose_identity_and_adjacency() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let t = iso_type_tensor(&g);
        assert_eq!(t.channel(0), Array2::<f64>::eye(3).view());
        assert_eq!(t.channel(1), g.adjacency());
    }

    proptest! {
        #[test]
        fn tensor_is_permutation_equivariant(n in 1usize..8, p_edge in 0.0f64..1.0, seed in 0u64..300) {
            let mut g = random_graph(n, p_edge, seed);
            if seed % 2 == 0 {
                let f = Array2::from_shape_fn((n, 2), |(i, j)| (i as f64) - 0.5 * (j as f64));
                g = g.with_features(f).unwrap();
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let p = Permutation::random(n, &mut rng);
            let direct = iso_type_tensor(&apply_permutation(&g, &p).unwrap());
            let moved = iso_type_tensor(&g).permuted(&p);
            prop_assert_eq!(direct, moved);
        }
    }
}
