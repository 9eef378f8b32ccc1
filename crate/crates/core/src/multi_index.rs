//! Multi-indices (monomial exponent vectors) in graded lexicographic order.
//!
//! Every module that enumerates monomials — refinement heads, power-sum
//! encodings, feature maps, Vandermonde bases — goes through this one
//! enumeration so that coordinates line up across modules: ascending total
//! degree, and within a degree ascending lexicographic order of the exponent
//! vector.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiIndexError {
    #[error("{count} multi-indices over dim {dim} up to degree {degree} exceed the cap of {cap}")]
    CapExceeded {
        dim: usize,
        degree: u32,
        count: u128,
        cap: usize,
    },
    #[error("binomial({n}, {k}) overflows 128-bit arithmetic")]
    BinomialOverflow { n: u128, k: u128 },
    #[error("multinomial parts sum to {sum}, exceeding the total degree {degree}")]
    MultinomialParts { degree: u32, sum: u32 },
}

/// Exponent vector of a monomial over a fixed set of variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Evaluates `x^self`, with the empty product (and `0^0`) equal to 1.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.0.len());
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Splits into the first `left` coordinates and the rest.
    pub fn split(&self, left: usize) -> (MultiIndex, MultiIndex) {
        let (a, b) = self.0.split_at(left);
        (MultiIndex(a.to_vec()), MultiIndex(b.to_vec()))
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `C(n, k)` in exact 128-bit arithmetic.
pub fn binomial(n: u128, k: u128) -> Result<u128, MultiIndexError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .ok_or(MultiIndexError::BinomialOverflow { n, k })?;
        acc /= i + 1; // exact: acc holds C(n, i+1) * (i+1)! / (i+1)! progressively
    }
    Ok(acc)
}

/// `degree! / (parts_1! · … · parts_m! · (degree − Σ parts)!)` exactly.
///
/// The implicit final part absorbs any remaining degree, so `parts` may sum to
/// less than `degree`; summing past it is an error.
pub fn multinomial(degree: u32, parts: &[u32]) -> Result<u128, MultiIndexError> {
    let sum: u32 = parts.iter().sum();
    if sum > degree {
        return Err(MultiIndexError::MultinomialParts { degree, sum });
    }
    // Product of binomials over the running total: C(p1, p1)·C(p1+p2, p2)·…
    let mut total: u128 = 0;
    let mut acc: u128 = 1;
    for &p in parts {
        total += p as u128;
        acc = acc
            .checked_mul(binomial(total, p as u128)?)
            .ok_or(MultiIndexError::BinomialOverflow {
                n: total,
                k: p as u128,
            })?;
    }
    acc = acc
        .checked_mul(binomial(degree as u128, total)?)
        .ok_or(MultiIndexError::BinomialOverflow {
            n: degree as u128,
            k: total,
        })?;
    Ok(acc)
}

/// Number of multi-indices over `dim` variables with total degree ≤ `max_degree`:
/// `C(max_degree + dim, dim)`.
pub fn count_up_to(dim: usize, max_degree: u32) -> Result<u128, MultiIndexError> {
    binomial(max_degree as u128 + dim as u128, dim as u128)
}

/// Number of multi-indices over `dim` variables with total degree exactly
/// `degree`: `C(degree + dim − 1, dim − 1)`.
pub fn count_exact(dim: usize, degree: u32) -> Result<u128, MultiIndexError> {
    if dim == 0 {
        return Ok(if degree == 0 { 1 } else { 0 });
    }
    binomial(degree as u128 + dim as u128 - 1, dim as u128 - 1)
}

/// All multi-indices over `dim` variables with total degree exactly `degree`,
/// in ascending lexicographic order.
pub fn multi_indices_exact(dim: usize, degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut scratch = vec![0u32; dim];
    fill_exact(&mut out, &mut scratch, 0, degree);
    out
}

fn fill_exact(out: &mut Vec<MultiIndex>, scratch: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos == scratch.len() {
        if remaining == 0 {
            out.push(MultiIndex(scratch.clone()));
        }
        return;
    }
    if pos == scratch.len() - 1 {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.clone()));
        scratch[pos] = 0;
        return;
    }
    for first in 0..=remaining {
        scratch[pos] = first;
        fill_exact(out, scratch, pos + 1, remaining - first);
    }
    scratch[pos] = 0;
}

/// All multi-indices over `dim` variables with total degree ≤ `max_degree`,
/// graded-lexicographically ordered. Errors when the family would exceed `cap`.
pub fn multi_indices_up_to(
    dim: usize,
    max_degree: u32,
    cap: usize,
) -> Result<Vec<MultiIndex>, MultiIndexError> {
    let count = count_up_to(dim, max_degree)?;
    if count > cap as u128 {
        return Err(MultiIndexError::CapExceeded {
            dim,
            degree: max_degree,
            count,
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    for degree in 0..=max_degree {
        out.extend(multi_indices_exact(dim, degree));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert_eq!(binomial(5, 2).unwrap(), 10);
        assert_eq!(binomial(12, 4).unwrap(), 495);
        assert_eq!(binomial(3, 7).unwrap(), 0);
    }

    #[test]
    fn multinomial_matches_factorial_definition() {
        // 4!/(2!·1!·1!) = 12
        assert_eq!(multinomial(4, &[2, 1, 1]).unwrap(), 12);
        // implicit final part: 4!/(2!·2!) = 6
        assert_eq!(multinomial(4, &[2]).unwrap(), 6);
        assert_eq!(multinomial(0, &[]).unwrap(), 1);
        assert!(multinomial(2, &[3]).is_err());
    }

    #[test]
    fn enumeration_dim1_degree2() {
        let idx = multi_indices_up_to(1, 2, 100).unwrap();
        let want: Vec<Vec<u32>> = vec![vec![0], vec![1], vec![2]];
        assert_eq!(idx.iter().map(|m| m.0.clone()).collect::<Vec<_>>(), want);
    }

    #[test]
    fn enumeration_dim2_degree3_is_graded_lex() {
        let idx = multi_indices_up_to(2, 3, 100).unwrap();
        assert_eq!(idx.len(), 10); // C(5, 2)
        let want: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
            vec![0, 3],
            vec![1, 2],
            vec![2, 1],
            vec![3, 0],
        ];
        assert_eq!(idx.iter().map(|m| m.0.clone()).collect::<Vec<_>>(), want);
    }

    #[test]
    fn enumeration_degree_zero_and_dim_zero() {
        assert_eq!(
            multi_indices_up_to(3, 0, 10).unwrap(),
            vec![MultiIndex::zeros(3)]
        );
        assert_eq!(
            multi_indices_up_to(0, 5, 10).unwrap(),
            vec![MultiIndex(vec![])]
        );
    }

    #[test]
    fn cap_is_enforced_with_exact_count() {
        let err = multi_indices_up_to(4, 10, 100).unwrap_err();
        match err {
            MultiIndexError::CapExceeded { count, cap, .. } => {
                assert_eq!(count, 1001); // C(14, 4)
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eval_uses_zero_to_the_zero_equals_one() {
        let m = MultiIndex(vec![0, 2, 0]);
        assert_eq!(m.eval(&[0.0, 3.0, 0.0]), 9.0);
        assert_eq!(MultiIndex::zeros(2).eval(&[0.0, 0.0]), 1.0);
    }

    proptest::proptest! {
        #[test]
        fn counts_match_enumeration(dim in 1usize..5, max_degree in 0u32..6) {
            let idx = multi_indices_up_to(dim, max_degree, 1_000_000).unwrap();
            proptest::prop_assert_eq!(idx.len() as u128, count_up_to(dim, max_degree).unwrap());
            // graded: degrees ascend
            for w in idx.windows(2) {
                proptest::prop_assert!(w[0].degree() <= w[1].degree());
                if w[0].degree() == w[1].degree() {
                    proptest::prop_assert!(w[0].0 < w[1].0);
                }
            }
            // exact-degree slices partition the family
            let exact: usize = (0..=max_degree)
                .map(|d| multi_indices_exact(dim, d).len())
                .sum();
            proptest::prop_assert_eq!(exact, idx.len());
        }

        #[test]
        fn multinomials_sum_to_power(degree in 0u32..8, dim in 1usize..4) {
            // Σ_{|ν| = degree} multinomial(degree; ν) = dim^degree
            let total: u128 = multi_indices_exact(dim, degree)
                .iter()
                .map(|m| multinomial(degree, &m.0[..dim - 1]).unwrap())
                .sum();
            proptest::prop_assert_eq!(total, (dim as u128).pow(degree));
        }
    }
}
