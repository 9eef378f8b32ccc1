//! Matrix form of one 2-FWL refinement round.
//!
//! One hashed round recolors pair `(i, j)` by the multiset over `k` of
//! `(color(i,k), color(k,j))`. Over a pair tensor `𝒴` of depth `d`, that
//! multiset is carried by the rows of the pair's context matrix
//! `Z_{(i,j)} = [𝒴_{i,k}, 𝒴_{k,j}]_k ∈ ℝ^{n×2d}`, and the power-sum
//! multi-symmetric polynomials `Σ_k z_k^α` for `|α| ≤ max_degree` encode it.
//! The pairwise encoding coordinate for `α = (β, γ)` equals the `(i, j)`
//! entry of the multiplication head `𝒴^β · 𝒴^γ` (entrywise powers, then a
//! matrix product), so one update is computable head-by-head without touching
//! per-pair multisets. With `max_degree = n` the encoding is injective on
//! multisets of `n` rows, and the head values induce exactly the hashed
//! round's partition.

use crate::multi_index::{self, MultiIndex, MultiIndexError};
use crate::pair_tensor::PairTensor;
use ndarray::Array2;
use thiserror::Error;

/// Default bound on the number of multiplication heads one update may emit.
pub const DEFAULT_HEAD_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FwlMatrixError {
    #[error("update needs {count} heads for depth {depth} at degree {degree}, over the cap of {cap}")]
    HeadCapExceeded {
        depth: usize,
        degree: u32,
        count: u128,
        cap: usize,
    },
    #[error(transparent)]
    MultiIndex(#[from] MultiIndexError),
}

/// Entrywise power `𝒴^β`: the `n×n` matrix `∏_l 𝒴[:,:,l]^{β_l}` (0⁰ = 1).
pub fn tensor_power(y: &PairTensor, beta: &MultiIndex) -> Array2<f64> {
    assert_eq!(beta.dim(), y.depth(), "exponent dim must match tensor depth");
    let n = y.n();
    let mut out = Array2::ones((n, n));
    for (l, &e) in beta.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let ch = y.channel(l);
        out.zip_mut_with(&ch, |acc, &v| *acc *= v.powi(e as i32));
    }
    out
}

/// Context matrix of the ordered pair `(i, j)`: row `k` is `[𝒴_{i,k}, 𝒴_{k,j}]`.
pub fn pair_context(y: &PairTensor, i: usize, j: usize) -> Array2<f64> {
    let (n, d) = (y.n(), y.depth());
    let mut z = Array2::zeros((n, 2 * d));
    for k in 0..n {
        z.slice_mut(ndarray::s![k, ..d]).assign(&y.entry(i, k));
        z.slice_mut(ndarray::s![k, d..]).assign(&y.entry(k, j));
    }
    z
}

/// Power-sum multi-symmetric encoding of a row multiset: `Σ_k rows_k^α` for
/// every `|α| ≤ max_degree` in graded-lex order. Injective on multisets of at
/// most `max_degree` rows.
pub fn pmp_encode(
    rows: &Array2<f64>,
    max_degree: u32,
    cap: usize,
) -> Result<Vec<f64>, MultiIndexError> {
    let alphas = multi_index::multi_indices_up_to(rows.ncols(), max_degree, cap)?;
    Ok(alphas
        .iter()
        .map(|alpha| {
            rows.rows()
                .into_iter()
                .map(|r| alpha.eval(r.as_slice().expect("contiguous row")))
                .sum()
        })
        .collect())
}

/// One multiplication head `𝒴^β · 𝒴^γ` with its exponents.
#[derive(Debug, Clone)]
pub struct Head {
    pub beta: MultiIndex,
    pub gamma: MultiIndex,
    pub values: Array2<f64>,
}

/// Result of one matrix-form update: the carried tensor `𝒴` concatenated with
/// all multiplication heads `𝒴^β 𝒴^γ`, `|β| + |γ| ≤ max_degree`.
#[derive(Debug, Clone)]
pub struct EncodedTensor {
    pub carried: PairTensor,
    pub max_degree: u32,
    pub heads: Vec<Head>,
}

impl EncodedTensor {
    /// Values of every head at the pair `(i, j)`, in head order. These are the
    /// pairwise power-sum coordinates `ENC(Z_{(i,j)})`.
    pub fn head_values_at(&self, i: usize, j: usize) -> Vec<f64> {
        self.heads.iter().map(|h| h.values[(i, j)]).collect()
    }

    /// Partition of ordered pairs by exact equality of `[𝒴_{ij}, head values]`,
    /// as dense ids in row-major pair order.
    pub fn pair_partition(&self) -> Vec<u32> {
        let n = self.carried.n();
        let mut keys: Vec<Vec<u64>> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut key: Vec<u64> =
                    self.carried.entry(i, j).iter().map(|v| v.to_bits()).collect();
                key.extend(self.heads.iter().map(|h| h.values[(i, j)].to_bits()));
                keys.push(key);
            }
        }
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        sorted.dedup();
        keys.iter()
            .map(|k| sorted.binary_search(k).expect("key present") as u32)
            .collect()
    }
}

/// Computes one matrix-form 2-FWL update of `y`.
///
/// Heads are enumerated by the multi-index `α = (β, γ)` over `2·depth`
/// variables in graded-lex order, matching [`pmp_encode`] coordinates over
/// pair contexts one-to-one.
pub fn fwl2_update_matrix(
    y: &PairTensor,
    max_degree: u32,
    head_cap: Option<usize>,
) -> Result<EncodedTensor, FwlMatrixError> {
    let d = y.depth();
    let cap = head_cap.unwrap_or(DEFAULT_HEAD_CAP);
    let count = multi_index::count_up_to(2 * d, max_degree)?;
    if count > cap as u128 {
        return Err(FwlMatrixError::HeadCapExceeded {
            depth: d,
            degree: max_degree,
            count,
            cap,
        });
    }
    let alphas = multi_index::multi_indices_up_to(2 * d, max_degree, cap)?;
    let heads = alphas
        .into_iter()
        .map(|alpha| {
            let (beta, gamma) = alpha.split(d);
            let values = tensor_power(y, &beta).dot(&tensor_power(y, &gamma));
            Head {
                beta,
                gamma,
                values,
            }
        })
        .collect();
    Ok(EncodedTensor {
        carried: y.clone(),
        max_degree,
        heads,
    })
}
