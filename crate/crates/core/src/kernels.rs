//! Explicit polynomial-kernel feature maps and node-factorized pair-tensor heads.
//!
//! `phi_homogeneous` realizes the degree-`d` polynomial kernel as an explicit
//! feature map: `⟨φ_d(x), φ_d(y)⟩ = ⟨x, y⟩^d`. `phi_product` extends this to a
//! block-structured vector with one degree per block. A [`NodeFactorization`]
//! stores a pair tensor implicitly as per-channel outer products of node-feature
//! blocks; [`factorized_fwl_head`] then assembles the matrix-product head
//! `Y^β·Y^γ` from two low-rank node factors without ever forming `Y^β` or `Y^γ`.

use ndarray::Array2;
use thiserror::Error;

use crate::graph::Graph;
use crate::multi_index::{count_exact, multi_indices_exact, multinomial, MultiIndex, MultiIndexError};
use crate::pair_tensor::PairTensor;

/// Default bound on the length of any explicit feature map.
pub const DEFAULT_FEATURE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("feature map length {length} exceeds cap {cap}")]
    FeatureCapExceeded { length: u128, cap: usize },
    #[error("multi-index has {beta_len} entries but there are {blocks} blocks")]
    ArityMismatch { beta_len: usize, blocks: usize },
    #[error("block {index} has zero width")]
    EmptyBlock { index: usize },
    #[error("factorization has no blocks")]
    NoBlocks,
    #[error("blocks disagree on row count: block 0 has {expected} rows, block {index} has {found}")]
    RowCountMismatch { index: usize, expected: usize, found: usize },
    #[error("channel {channel} selects block {index} but only {blocks} blocks exist")]
    ChannelOutOfRange { channel: usize, index: usize, blocks: usize },
    #[error("channel {channel} pairs blocks of widths {left} and {right}")]
    ChannelWidthMismatch { channel: usize, left: usize, right: usize },
    #[error("feature map length overflows 128-bit arithmetic")]
    OutputDimOverflow,
    #[error(transparent)]
    MultiIndex(#[from] MultiIndexError),
}

/// Shape metadata for a block feature map: the per-block degrees and widths,
/// and the resulting output length `∏_l C(β_l + D_l − 1, D_l − 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMapSpec {
    beta: MultiIndex,
    block_dims: Vec<usize>,
    output_dim: u128,
}

impl FeatureMapSpec {
    pub fn new(beta: &MultiIndex, block_dims: &[usize]) -> Result<Self, KernelError> {
        if beta.dim() != block_dims.len() {
            return Err(KernelError::ArityMismatch {
                beta_len: beta.dim(),
                blocks: block_dims.len(),
            });
        }
        let mut output_dim: u128 = 1;
        for (l, (&width, &degree)) in block_dims.iter().zip(&beta.0).enumerate() {
            if width == 0 {
                return Err(KernelError::EmptyBlock { index: l });
            }
            output_dim = output_dim
                .checked_mul(count_exact(width, degree)?)
                .ok_or(KernelError::OutputDimOverflow)?;
        }
        Ok(FeatureMapSpec {
            beta: beta.clone(),
            block_dims: block_dims.to_vec(),
            output_dim,
        })
    }

    pub fn beta(&self) -> &MultiIndex {
        &self.beta
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn output_dim(&self) -> u128 {
        self.output_dim
    }
}

fn checked_len(length: u128, cap: Option<usize>) -> Result<usize, KernelError> {
    let cap = cap.unwrap_or(DEFAULT_FEATURE_CAP);
    if length > cap as u128 {
        return Err(KernelError::FeatureCapExceeded { length, cap });
    }
    Ok(length as usize)
}

/// Explicit feature map of the homogeneous polynomial kernel `⟨x, y⟩^degree`.
///
/// Coordinates are `√(multinomial(degree; ν)) · x^ν` over all multi-indices
/// `|ν| = degree`, in the fixed graded-lex order shared by every module.
/// Multinomial coefficients are computed exactly in integers and converted to
/// floating point only at the square root.
pub fn phi_homogeneous(x: &[f64], degree: u32, cap: Option<usize>) -> Result<Vec<f64>, KernelError> {
    if x.is_empty() {
        return Err(KernelError::EmptyBlock { index: 0 });
    }
    let len = checked_len(count_exact(x.len(), degree)?, cap)?;
    let mut out = Vec::with_capacity(len);
    for nu in multi_indices_exact(x.len(), degree) {
        let coeff = multinomial(degree, &nu.0)? as f64;
        out.push(coeff.sqrt() * nu.eval(x));
    }
    Ok(out)
}

/// Feature map of a product of homogeneous kernels, one degree per block:
/// `⟨phi_product(x, β), phi_product(y, β)⟩ = ∏_l ⟨x_l, y_l⟩^{β_l}`.
///
/// The output is the Cartesian product of the per-block maps with the first
/// block varying slowest, so coordinates are reproducible across modules.
pub fn phi_product(blocks: &[&[f64]], beta: &MultiIndex, cap: Option<usize>) -> Result<Vec<f64>, KernelError> {
    let dims: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    let spec = FeatureMapSpec::new(beta, &dims)?;
    let len = checked_len(spec.output_dim(), cap)?;
    let mut out = vec![1.0];
    for (block, &degree) in blocks.iter().zip(&beta.0) {
        let factor = phi_homogeneous(block, degree, cap)?;
        let mut next = Vec::with_capacity(out.len() * factor.len());
        for &a in &out {
            for &b in &factor {
                next.push(a * b);
            }
        }
        out = next;
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

/// A pair tensor stored implicitly as node-feature blocks plus channel
/// selectors: channel `l` of the reconstructed tensor is the outer product
/// `X^{s_l} · (X^{t_l})ᵀ` of the selected blocks.
#[derive(Debug, Clone)]
pub struct NodeFactorization {
    blocks: Vec<Array2<f64>>,
    channels: Vec<(usize, usize)>,
}

impl NodeFactorization {
    pub fn new(blocks: Vec<Array2<f64>>, channels: Vec<(usize, usize)>) -> Result<Self, KernelError> {
        let first = blocks.first().ok_or(KernelError::NoBlocks)?;
        let n = first.nrows();
        for (index, block) in blocks.iter().enumerate() {
            if block.nrows() != n {
                return Err(KernelError::RowCountMismatch {
                    index,
                    expected: n,
                    found: block.nrows(),
                });
            }
            if block.ncols() == 0 {
                return Err(KernelError::EmptyBlock { index });
            }
        }
        for (channel, &(s, t)) in channels.iter().enumerate() {
            for index in [s, t] {
                if index >= blocks.len() {
                    return Err(KernelError::ChannelOutOfRange {
                        channel,
                        index,
                        blocks: blocks.len(),
                    });
                }
            }
            if blocks[s].ncols() != blocks[t].ncols() {
                return Err(KernelError::ChannelWidthMismatch {
                    channel,
                    left: blocks[s].ncols(),
                    right: blocks[t].ncols(),
                });
            }
        }
        Ok(NodeFactorization { blocks, channels })
    }

    /// Exact factorization of the identity-and-adjacency pair tensor of a
    /// graph, ignoring node features: blocks `[I, A]`, channels `[(0,0), (1,0)]`
    /// so that channel 0 reconstructs `I·Iᵀ = I` and channel 1 reconstructs
    /// `A·Iᵀ = A`.
    pub fn from_featureless_graph(g: &Graph) -> Self {
        let eye = Array2::<f64>::eye(g.n());
        NodeFactorization {
            blocks: vec![eye, g.adjacency().to_owned()],
            channels: vec![(0, 0), (1, 0)],
        }
    }

    pub fn n(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn channels(&self) -> &[(usize, usize)] {
        &self.channels
    }

    /// Assemble the dense pair tensor: channel `l` is `X^{s_l}·(X^{t_l})ᵀ`.
    pub fn reconstruct(&self) -> PairTensor {
        let channels: Vec<Array2<f64>> = self
            .channels
            .iter()
            .map(|&(s, t)| self.blocks[s].dot(&self.blocks[t].t()))
            .collect();
        PairTensor::from_channels(&channels)
    }

    /// Widths of the source-side (`pick_source = true`) or target-side blocks,
    /// one per channel.
    fn side_dims(&self, pick_source: bool) -> Vec<usize> {
        self.channels
            .iter()
            .map(|&(s, t)| self.blocks[if pick_source { s } else { t }].ncols())
            .collect()
    }

    /// Stack per-node feature maps into a matrix: row `i` is `phi_product`
    /// applied to node `i`'s rows of the selected side's blocks.
    fn feature_rows(
        &self,
        beta: &MultiIndex,
        pick_source: bool,
        cap: Option<usize>,
    ) -> Result<Array2<f64>, KernelError> {
        let spec = FeatureMapSpec::new(beta, &self.side_dims(pick_source))?;
        let width = checked_len(spec.output_dim(), cap)?;
        let n = self.n();
        let mut out = Array2::<f64>::zeros((n, width));
        for i in 0..n {
            let rows: Vec<Vec<f64>> = self
                .channels
                .iter()
                .map(|&(s, t)| self.blocks[if pick_source { s } else { t }].row(i).to_vec())
                .collect();
            let views: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let phi = phi_product(&views, beta, cap)?;
            out.row_mut(i).iter_mut().zip(phi).for_each(|(o, v)| *o = v);
        }
        Ok(out)
    }
}

/// The low-rank realization of one matrix-product head.
///
/// `left·rightᵀ` equals the dense head `Y^β·Y^γ` of the reconstructed tensor;
/// `product` is that dense matrix, assembled eagerly for verification.
#[derive(Debug, Clone)]
pub struct FactorizedHead {
    pub left: Array2<f64>,
    pub right: Array2<f64>,
    pub product: Array2<f64>,
}

/// Build the node factorization of the head `Y^β·Y^γ` from feature blocks
/// alone.
///
/// With `ψ` mapping source-side rows and `φ` target-side rows through
/// `phi_product`, the head factors as `ψ_β(X)·φ_β(X)ᵀ·ψ_γ(X)·φ_γ(X)ᵀ`; the
/// inner `φ_β(X)ᵀ·ψ_γ(X)` Gram matrix is folded into the left factor, so both
/// returned factors have `width(φ_γ)` columns and no `n×n` intermediate is
/// formed before the final verification product.
pub fn factorized_fwl_head(
    f: &NodeFactorization,
    beta: &MultiIndex,
    gamma: &MultiIndex,
    cap: Option<usize>,
) -> Result<FactorizedHead, KernelError> {
    let psi_beta = f.feature_rows(beta, true, cap)?;
    let phi_beta = f.feature_rows(beta, false, cap)?;
    let psi_gamma = f.feature_rows(gamma, true, cap)?;
    let phi_gamma = f.feature_rows(gamma, false, cap)?;
    let gram = phi_beta.t().dot(&psi_gamma);
    let left = psi_beta.dot(&gram);
    let product = left.dot(&phi_gamma.t());
    Ok(FactorizedHead {
        left,
        right: phi_gamma,
        product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fwl_matrix::{fwl2_update_matrix, tensor_power};
    use crate::graph::{random_graph, Permutation};
    use crate::pair_tensor::iso_type_tensor;
    use proptest::prelude::*;

    fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        let worst = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= tol, "max abs diff {worst} > {tol}");
    }

    #[test]
    fn degree_zero_map_is_the_unit() {
        assert_eq!(phi_homogeneous(&[2.0, 3.0], 0, None).unwrap(), vec![1.0]);
    }

    #[test]
    fn quadratic_map_matches_hand_expansion() {
        // deg-2 monomials on two vars in graded-lex order: (0,2), (1,1), (2,0)
        let phi_x = phi_homogeneous(&[1.0, 2.0], 2, None).unwrap();
        let expect = [4.0, 2.0 * 2.0f64.sqrt(), 1.0];
        for (got, want) in phi_x.iter().zip(expect) {
            assert!((got - want).abs() <= 1e-15);
        }
        let phi_y = phi_homogeneous(&[3.0, 1.0], 2, None).unwrap();
        let dot: f64 = phi_x.iter().zip(&phi_y).map(|(a, b)| a * b).sum();
        assert!((dot - 25.0).abs() <= 1e-12, "{dot} != (1*3 + 2*1)^2");
    }

    #[test]
    fn map_length_matches_binomial_formula() {
        assert_eq!(phi_homogeneous(&[1.0, 2.0, 3.0], 2, None).unwrap().len(), 6);
        let spec = FeatureMapSpec::new(&MultiIndex(vec![2, 3]), &[3, 2]).unwrap();
        assert_eq!(spec.output_dim(), 6 * 4);
    }

    #[test]
    fn feature_cap_is_reported() {
        let err = phi_homogeneous(&[0.0; 5], 6, Some(100)).unwrap_err();
        match err {
            KernelError::FeatureCapExceeded { length, cap } => {
                assert_eq!(length, 210);
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_block_product_reduces_to_homogeneous() {
        let x = [0.5, -1.5, 2.0];
        let product = phi_product(&[&x], &MultiIndex(vec![3]), None).unwrap();
        assert_eq!(product, phi_homogeneous(&x, 3, None).unwrap());
    }

    #[test]
    fn zero_degrees_product_is_the_unit() {
        let product = phi_product(&[&[1.0][..], &[2.0, 3.0][..]], &MultiIndex(vec![0, 0]), None).unwrap();
        assert_eq!(product, vec![1.0]);
    }

    #[test]
    fn product_orders_first_block_slowest() {
        // degree-1 coordinates follow the monomial order (0,1) < (1,0), so the
        // second block contributes [5, 3]; the first block's single coordinate
        // multiplies both.
        let product = phi_product(&[&[2.0][..], &[3.0, 5.0][..]], &MultiIndex(vec![1, 1]), None).unwrap();
        assert_eq!(product, vec![10.0, 6.0]);
        let two_wide = phi_product(&[&[2.0, 7.0][..], &[3.0, 5.0][..]], &MultiIndex(vec![1, 1]), None).unwrap();
        assert_eq!(two_wide, vec![35.0, 21.0, 10.0, 6.0]);
    }

    #[test]
    fn factorization_shape_validation() {
        let eye2 = Array2::<f64>::eye(2);
        let eye3 = Array2::<f64>::eye(3);
        let wide = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            NodeFactorization::new(vec![], vec![]),
            Err(KernelError::NoBlocks)
        ));
        assert!(matches!(
            NodeFactorization::new(vec![eye2.clone(), eye3], vec![]),
            Err(KernelError::RowCountMismatch { index: 1, expected: 2, found: 3 })
        ));
        assert!(matches!(
            NodeFactorization::new(vec![eye2.clone()], vec![(0, 1)]),
            Err(KernelError::ChannelOutOfRange { channel: 0, index: 1, blocks: 1 })
        ));
        assert!(matches!(
            NodeFactorization::new(vec![eye2.clone(), wide], vec![(0, 1)]),
            Err(KernelError::ChannelWidthMismatch { channel: 0, left: 2, right: 3 })
        ));
        assert!(matches!(
            NodeFactorization::new(vec![Array2::<f64>::zeros((2, 0))], vec![]),
            Err(KernelError::EmptyBlock { index: 0 })
        ));
        assert!(NodeFactorization::new(vec![eye2], vec![(0, 0)]).is_ok());
    }

    #[test]
    fn featureless_reconstruction_matches_tensor() {
        for seed in 0..5 {
            let g = random_graph(6, 0.5, seed);
            let rebuilt = NodeFactorization::from_featureless_graph(&g).reconstruct();
            assert_eq!(rebuilt.max_abs_diff(&iso_type_tensor(&g)), 0.0);
        }
    }

    #[test]
    fn zero_degree_head_counts_all_paths() {
        let g = Graph::complete(3);
        let f = NodeFactorization::from_featureless_graph(&g);
        let zero = MultiIndex::zeros(2);
        let head = factorized_fwl_head(&f, &zero, &zero, None).unwrap();
        assert_close(&head.product, &Array2::from_elem((3, 3), 3.0), 1e-12);
        assert_eq!(head.left.ncols(), 1);
        assert_eq!(head.right.ncols(), 1);
    }

    #[test]
    fn adjacency_square_head_matches_matrix_module() {
        let g = Graph::complete(3);
        let f = NodeFactorization::from_featureless_graph(&g);
        let adj = MultiIndex(vec![0, 1]);
        let head = factorized_fwl_head(&f, &adj, &adj, None).unwrap();
        let a2 = ndarray::arr2(&[[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]);
        assert_close(&head.product, &a2, 1e-12);

        let encoded = fwl2_update_matrix(&iso_type_tensor(&g), 2, None).unwrap();
        let matched = encoded
            .heads
            .iter()
            .find(|h| h.beta == adj && h.gamma == adj)
            .expect("adjacency-square head present at degree 2");
        assert_close(&head.product, &matched.values, 1e-12);
    }

    #[test]
    fn factorized_heads_match_dense_tensor_powers() {
        for seed in 0..8 {
            let g = random_graph(6, 0.5, 100 + seed);
            let y = iso_type_tensor(&g);
            let f = NodeFactorization::from_featureless_graph(&g);
            for b_i in 0..=2u32 {
                for b_a in 0..=2u32 {
                    for g_i in 0..=2u32 {
                        for g_a in 0..=2u32 {
                            if b_i + b_a + g_i + g_a > 3 {
                                continue;
                            }
                            let beta = MultiIndex(vec![b_i, b_a]);
                            let gamma = MultiIndex(vec![g_i, g_a]);
                            let head = factorized_fwl_head(&f, &beta, &gamma, None).unwrap();
                            let dense = tensor_power(&y, &beta).dot(&tensor_power(&y, &gamma));
                            assert_close(&head.product, &dense, 1e-8);
                            assert_close(&head.left.dot(&head.right.t()), &head.product, 1e-12);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn product_kernel_identity(
            blocks in prop::collection::vec(
                prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..=3),
                1..=3,
            ),
            degrees in prop::collection::vec(0u32..=3, 3),
        ) {
            let xs: Vec<Vec<f64>> = blocks.iter().map(|b| b.iter().map(|p| p.0).collect()).collect();
            let ys: Vec<Vec<f64>> = blocks.iter().map(|b| b.iter().map(|p| p.1).collect()).collect();
            let beta = MultiIndex(degrees[..blocks.len()].to_vec());
            prop_assume!(beta.degree() <= 4);
            let x_views: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
            let y_views: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
            let phi_x = phi_product(&x_views, &beta, None).unwrap();
            let phi_y = phi_product(&y_views, &beta, None).unwrap();
            let lhs: f64 = phi_x.iter().zip(&phi_y).map(|(a, b)| a * b).sum();
            let mut rhs = 1.0;
            for ((x, y), &d) in xs.iter().zip(&ys).zip(&beta.0) {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                rhs *= dot.powi(d as i32);
            }
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
                "kernel identity violated: {lhs} vs {rhs}");
        }

        #[test]
        fn permutation_conjugates_head_product(seed in 0u64..200) {
            use rand::SeedableRng;
            let g = random_graph(5, 0.5, seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
            let p = Permutation::random(5, &mut rng);
            let gp = crate::graph::apply_permutation(&g, &p).unwrap();
            let beta = MultiIndex(vec![1, 0]);
            let gamma = MultiIndex(vec![0, 2]);
            let head = factorized_fwl_head(
                &NodeFactorization::from_featureless_graph(&g), &beta, &gamma, None).unwrap();
            let head_p = factorized_fwl_head(
                &NodeFactorization::from_featureless_graph(&gp), &beta, &gamma, None).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let diff = (head_p.product[(p.apply_index(i), p.apply_index(j))]
                        - head.product[(i, j)]).abs();
                    prop_assert!(diff <= 1e-9);
                }
            }
        }
    }
}
