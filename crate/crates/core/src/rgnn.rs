//! Random node features, the one-layer message-passing factorization, and
//! concentration-of-measure checks.
//!
//! A random matrix `R` with unit-variance i.i.d. entries satisfies
//! `(1/d)·R·Rᵀ ≈ I`, which turns `[1, X, R/√d, A·R/√d]` into an approximate
//! node factorization of the identity-and-adjacency pair tensor. The checks
//! here quantify that approximation; sampling is fully reproducible via a
//! seedable, stream-splittable generator.

use ndarray::{concatenate, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Permutation};
use crate::kernels::{KernelError, NodeFactorization};

/// Identifier of the pseudo-random generator recorded in experiment metadata;
/// all feature sampling goes through this algorithm.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Error)]
pub enum RgnnError {
    #[error("cannot sample a {n}×{dim} feature matrix; both dims must be positive")]
    EmptySample { n: usize, dim: usize },
    #[error("distribution parameter {name} = {value} must be positive and finite")]
    DistributionParameter { name: &'static str, value: f64 },
    #[error("adjacency must be square, got {rows}×{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("feature matrix has {found} rows, expected {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("{name} = {value} is outside its valid range")]
    ParameterRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Entry distribution for random node features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureDistribution {
    /// Entries uniform on `[-half_width, +half_width]` (variance
    /// `half_width²/3`; unit variance at `half_width = √3`).
    Uniform { half_width: f64 },
    /// Entries `N(0, variance)`.
    Gaussian { variance: f64 },
}

impl FeatureDistribution {
    fn validate(&self) -> Result<(), RgnnError> {
        let (name, value) = match *self {
            FeatureDistribution::Uniform { half_width } => ("half_width", half_width),
            FeatureDistribution::Gaussian { variance } => ("variance", variance),
        };
        if !value.is_finite() || value <= 0.0 {
            return Err(RgnnError::DistributionParameter { name, value });
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        match *self {
            FeatureDistribution::Uniform { half_width } => half_width * half_width / 3.0,
            FeatureDistribution::Gaussian { variance } => variance,
        }
    }
}

/// Sampling configuration: feature width, entry distribution, and base seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureConfig {
    pub dim: usize,
    pub distribution: FeatureDistribution,
    pub seed: u64,
}

/// The generator for one trial: the base seed picks the keystream, the trial
/// index selects a disjoint stream, so trials are independent and any trial
/// can be regenerated without sampling its predecessors.
pub fn feature_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Sample an `n×dim` matrix of i.i.d. entries. Bitwise-deterministic given
/// `(n, cfg, trial)`; entries are drawn row-major.
pub fn sample_features(
    n: usize,
    cfg: &RandomFeatureConfig,
    trial: u64,
) -> Result<Array2<f64>, RgnnError> {
    if n == 0 || cfg.dim == 0 {
        return Err(RgnnError::EmptySample { n, dim: cfg.dim });
    }
    cfg.distribution.validate()?;
    let mut rng = feature_rng(cfg.seed, trial);
    let out = match cfg.distribution {
        FeatureDistribution::Uniform { half_width } => {
            let dist = Uniform::new_inclusive(-half_width, half_width)
                .expect("validated bounds");
            Array2::from_shape_fn((n, cfg.dim), |_| dist.sample(&mut rng))
        }
        FeatureDistribution::Gaussian { variance } => {
            let dist = Normal::new(0.0, variance.sqrt()).expect("validated variance");
            Array2::from_shape_fn((n, cfg.dim), |_| dist.sample(&mut rng))
        }
    };
    Ok(out)
}

/// One message-passing layer with skip connection: `d^{−1/2}·[A·R, R]`,
/// shape n×2d. Exactly permutation-equivariant.
pub fn message_passing_layer(
    adjacency: &Array2<f64>,
    r: &Array2<f64>,
) -> Result<Array2<f64>, RgnnError> {
    if adjacency.nrows() != adjacency.ncols() {
        return Err(RgnnError::NotSquare {
            rows: adjacency.nrows(),
            cols: adjacency.ncols(),
        });
    }
    if r.nrows() != adjacency.nrows() {
        return Err(RgnnError::RowCount {
            expected: adjacency.nrows(),
            found: r.nrows(),
        });
    }
    let scale = 1.0 / (r.ncols() as f64).sqrt();
    let ar = adjacency.dot(r);
    let mut out = concatenate(Axis(1), &[ar.view(), r.view()]).expect("row counts match");
    out.mapv_inplace(|v| v * scale);
    Ok(out)
}

/// Deviation statistics of the random-feature factorization.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FactorizationDeviation {
    /// `max_{i,j} |(1/d)(R·Rᵀ)_{ij} − I_{ij}|`.
    pub gram_dev: f64,
    /// `‖(1/d)·A·R·Rᵀ − A‖_F`.
    pub adj_dev: f64,
}

/// Measure how far `(1/d)·R·Rᵀ` is from the identity, entrywise and through
/// the adjacency.
///
/// The statistics assume unit-variance entries (uniform at `half_width = √3`,
/// Gaussian at `variance = 1`); rescale `R` first otherwise. Builds n×n
/// intermediates, so this is a measurement utility, not a production path.
pub fn factorization_error(
    adjacency: &Array2<f64>,
    r: &Array2<f64>,
) -> Result<FactorizationDeviation, RgnnError> {
    if adjacency.nrows() != adjacency.ncols() {
        return Err(RgnnError::NotSquare {
            rows: adjacency.nrows(),
            cols: adjacency.ncols(),
        });
    }
    if r.nrows() != adjacency.nrows() {
        return Err(RgnnError::RowCount {
            expected: adjacency.nrows(),
            found: r.nrows(),
        });
    }
    let d = r.ncols() as f64;
    let mut gram = r.dot(&r.t());
    gram.mapv_inplace(|v| v / d);
    let n = gram.nrows();
    let mut gram_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((gram[(i, j)] - target).abs());
        }
    }
    let approx_a = adjacency.dot(&gram);
    let adj_dev = (&approx_a - adjacency)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(FactorizationDeviation { gram_dev, adj_dev })
}

/// Feature dimension sufficient for deviation `xi` with failure probability
/// `delta_fail`: `m'·(n⁶/ξ²)·ln(2n²/δ)`.
///
/// `m_prime` is an unstated constant in the underlying concentration argument;
/// the default of 1 makes this a reported scale, not a certified bound.
pub fn required_dimension(
    n: usize,
    xi: f64,
    delta_fail: f64,
    m_prime: f64,
) -> Result<f64, RgnnError> {
    if n == 0 {
        return Err(RgnnError::ParameterRange { name: "n", value: 0.0 });
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(RgnnError::ParameterRange { name: "xi", value: xi });
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(RgnnError::ParameterRange {
            name: "delta_fail",
            value: delta_fail,
        });
    }
    if !(m_prime > 0.0 && m_prime.is_finite()) {
        return Err(RgnnError::ParameterRange {
            name: "m_prime",
            value: m_prime,
        });
    }
    let nf = n as f64;
    Ok(m_prime * nf.powi(6) / (xi * xi) * (2.0 * nf * nf / delta_fail).ln())
}

/// The random-feature node factorization `[1, X, R/√d, A·R/√d]` of a graph's
/// identity-and-adjacency pair tensor with feature channels.
///
/// The ones/feature-column blocks reconstruct the two feature channels
/// exactly (`1·x_cᵀ` and `x_c·1ᵀ`); the normalized random blocks reconstruct
/// the identity channel as `(1/d)·R·Rᵀ ≈ I` and the adjacency channel as
/// `(1/d)·A·R·Rᵀ ≈ A`. Channel order matches the dense iso-type tensor, so
/// `reconstruct()` converges to it entrywise as `d` grows. The `d^{−1/2}`
/// normalization is folded into the stored blocks; the concatenated block
/// width is `1 + d₀ + 2d` either way.
pub fn extended_factorization(
    g: &Graph,
    r: &Array2<f64>,
) -> Result<NodeFactorization, RgnnError> {
    if r.nrows() != g.n() {
        return Err(RgnnError::RowCount {
            expected: g.n(),
            found: r.nrows(),
        });
    }
    let n = g.n();
    let scale = 1.0 / (r.ncols() as f64).sqrt();
    let ones = Array2::<f64>::ones((n, 1));
    let mut blocks = vec![ones];
    let d0 = g.feature_dim();
    if let Some(x) = g.features() {
        for c in 0..d0 {
            blocks.push(x.column(c).insert_axis(Axis(1)).to_owned());
        }
    }
    let r_block_index = blocks.len();
    blocks.push(r.mapv(|v| v * scale));
    let s_block_index = blocks.len();
    blocks.push(g.adjacency().dot(r).mapv_into(|v| v * scale));

    let mut channels = vec![(r_block_index, r_block_index)];
    for c in 0..d0 {
        channels.push((0, 1 + c));
    }
    for c in 0..d0 {
        channels.push((1 + c, 0));
    }
    channels.push((s_block_index, r_block_index));
    Ok(NodeFactorization::new(blocks, channels)?)
}

/// Estimate `‖E_R[forward(P·g, P·R)] − P·E_R[forward(g, R)]‖_∞` by paired
/// Monte-Carlo.
///
/// Trial `t` couples the two sides through the same sample `R`: the permuted
/// side sees `(P·g, P·R)`. For a pipeline that is genuinely equivariant in
/// law the per-trial difference is identically zero up to rounding, so even
/// `trials = 1` suffices; a non-equivariant pipeline leaves a gap that no
/// amount of averaging removes.
pub fn expectation_equivariance_check<F>(
    g: &Graph,
    p: &Permutation,
    cfg: &RandomFeatureConfig,
    trials: u64,
    forward: F,
) -> Result<f64, RgnnError>
where
    F: Fn(&Graph, &Array2<f64>) -> Array2<f64>,
{
    if trials == 0 {
        return Err(RgnnError::ParameterRange { name: "trials", value: 0.0 });
    }
    let permuted_graph = crate::graph::apply_permutation(g, p)
        .expect("permutation length matches the graph");
    let mut mean_diff: Option<Array2<f64>> = None;
    for trial in 0..trials {
        let r = sample_features(g.n(), cfg, trial)?;
        let base = forward(g, &r);
        let permuted = forward(&permuted_graph, &p.permute_rows(&r.view()));
        let mut diff = Array2::<f64>::zeros(base.raw_dim());
        for i in 0..base.nrows() {
            let back = permuted.row(p.apply_index(i));
            for j in 0..base.ncols() {
                diff[(i, j)] = back[j] - base[(i, j)];
            }
        }
        match &mut mean_diff {
            None => mean_diff = Some(diff),
            Some(acc) => *acc += &diff,
        }
    }
    let acc = mean_diff.expect("at least one trial");
    Ok(acc.iter().map(|v| (v / trials as f64).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair_tensor::iso_type_tensor;
    use proptest::prelude::*;

    fn uniform_cfg(dim: usize, half_width: f64, seed: u64) -> RandomFeatureConfig {
        RandomFeatureConfig {
            dim,
            distribution: FeatureDistribution::Uniform { half_width },
            seed,
        }
    }

    #[test]
    fn sampling_is_bitwise_deterministic() {
        let cfg = uniform_cfg(8, 1.0, 42);
        let a = sample_features(5, &cfg, 3).unwrap();
        let b = sample_features(5, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let other_trial = sample_features(5, &cfg, 4).unwrap();
        assert_ne!(a, other_trial);
        let gauss = RandomFeatureConfig {
            dim: 8,
            distribution: FeatureDistribution::Gaussian { variance: 0.5 },
            seed: 42,
        };
        assert_eq!(
            sample_features(5, &gauss, 0).unwrap(),
            sample_features(5, &gauss, 0).unwrap()
        );
    }

    #[test]
    fn uniform_entries_respect_the_support_bound() {
        let cfg = uniform_cfg(64, 0.7, 9);
        let r = sample_features(64, &cfg, 0).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 0.7));
    }

    #[test]
    fn empirical_mean_is_near_zero() {
        // 10⁶ entries: |mean| should be within 4σ/√(nd) with margin to spare.
        let cfg = uniform_cfg(1000, 1.0, 12345);
        let r = sample_features(1000, &cfg, 0).unwrap();
        let mean = r.sum() / 1e6;
        let sigma = 1.0 / 3.0f64.sqrt();
        assert!(mean.abs() <= 4.0 * sigma / 1e3, "mean {mean} too far from 0");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = uniform_cfg(0, 1.0, 0);
        assert!(matches!(
            sample_features(5, &cfg, 0),
            Err(RgnnError::EmptySample { n: 5, dim: 0 })
        ));
        let bad = RandomFeatureConfig {
            dim: 3,
            distribution: FeatureDistribution::Gaussian { variance: 0.0 },
            seed: 0,
        };
        assert!(matches!(
            sample_features(5, &bad, 0),
            Err(RgnnError::DistributionParameter { name: "variance", .. })
        ));
    }

    #[test]
    fn triangle_with_identity_features_by_hand() {
        let g = Graph::complete(3);
        let r = Array2::<f64>::eye(3);
        let out = message_passing_layer(&g.adjacency().to_owned(), &r).unwrap();
        let scale = 1.0 / 3.0f64.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let a_ij = if i == j { 0.0 } else { 1.0 };
                assert_eq!(out[(i, j)], scale * a_ij);
                let i_ij = if i == j { 1.0 } else { 0.0 };
                assert_eq!(out[(i, 3 + j)], scale * i_ij);
            }
        }
    }

    #[test]
    fn zero_adjacency_passes_features_through() {
        let a = Array2::<f64>::zeros((4, 4));
        let r = sample_features(4, &uniform_cfg(3, 1.0, 5), 0).unwrap();
        let out = message_passing_layer(&a, &r).unwrap();
        let scale = 1.0 / 3.0f64.sqrt();
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(out[(i, j)], 0.0);
                assert_eq!(out[(i, 3 + j)], scale * r[(i, j)]);
            }
        }
    }

    #[test]
    fn orthogonal_rows_factorize_exactly() {
        // R = √d·I has orthogonal rows of squared norm d, so (1/d)RRᵀ = I.
        // d = 4 keeps √d exact in floating point, making the deviation zero
        // to the bit.
        let d = 4;
        let r = Array2::<f64>::eye(d).mapv_into(|v| v * (d as f64).sqrt());
        let g = Graph::cycle(d);
        let dev = factorization_error(&g.adjacency().to_owned(), &r).unwrap();
        assert_eq!(dev.gram_dev, 0.0);
        assert!(dev.adj_dev <= 1e-12);

        let d = 6;
        let r = Array2::<f64>::eye(d).mapv_into(|v| v * (d as f64).sqrt());
        let g = Graph::cycle(d);
        let dev = factorization_error(&g.adjacency().to_owned(), &r).unwrap();
        assert!(dev.gram_dev <= 1e-12);
    }

    #[test]
    fn gram_deviation_concentrates_at_unit_variance() {
        // Unit-variance uniform entries: half_width = √3.
        let g = crate::graph::random_graph(10, 0.5, 77);
        let cfg = uniform_cfg(2000, 3.0f64.sqrt(), 7);
        let r = sample_features(10, &cfg, 0).unwrap();
        let dev = factorization_error(&g.adjacency().to_owned(), &r).unwrap();
        assert!(dev.gram_dev <= 0.3, "gram_dev {} too large at d=2000", dev.gram_dev);
    }

    #[test]
    fn gram_deviation_shrinks_with_dimension() {
        let g = crate::graph::random_graph(20, 0.5, 3);
        let a = g.adjacency().to_owned();
        let median_dev = |d: usize| -> f64 {
            let mut devs: Vec<f64> = (0..7)
                .map(|trial| {
                    let cfg = uniform_cfg(d, 3.0f64.sqrt(), 99);
                    let r = sample_features(20, &cfg, trial).unwrap();
                    factorization_error(&a, &r).unwrap().gram_dev
                })
                .collect();
            devs.sort_by(f64::total_cmp);
            devs[3]
        };
        let coarse = median_dev(100);
        let fine = median_dev(2500);
        assert!(
            fine < coarse,
            "median gram_dev did not shrink: d=100 → {coarse}, d=2500 → {fine}"
        );
    }

    #[test]
    fn required_dimension_evaluates_the_formula() {
        let v = required_dimension(10, 0.1, 0.01, 1.0).unwrap();
        assert!((v / 9.903487552536127e8 - 1.0).abs() <= 1e-9, "got {v}");
        let doubled_xi = required_dimension(10, 0.2, 0.01, 1.0).unwrap();
        assert!((v / doubled_xi - 4.0).abs() <= 1e-9);
        assert!(matches!(
            required_dimension(10, 0.1, 1.5, 1.0),
            Err(RgnnError::ParameterRange { name: "delta_fail", .. })
        ));
    }

    #[test]
    fn extended_factorization_width_contract() {
        let d = 5;
        let featureless = crate::graph::random_graph(6, 0.5, 1);
        let r = sample_features(6, &uniform_cfg(d, 1.0, 2), 0).unwrap();
        let f = extended_factorization(&featureless, &r).unwrap();
        let width: usize = f.blocks().iter().map(|b| b.ncols()).sum();
        assert_eq!(width, 1 + 2 * d);
        assert_eq!(f.depth(), 2);

        let mut g = crate::graph::random_graph(6, 0.5, 4);
        let x = Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64 / 10.0);
        g = g.with_features(x).unwrap();
        let f = extended_factorization(&g, &r).unwrap();
        let width: usize = f.blocks().iter().map(|b| b.ncols()).sum();
        assert_eq!(width, 1 + 3 + 2 * d);
        assert_eq!(f.depth(), 2 + 2 * 3);
    }

    #[test]
    fn feature_channels_reconstruct_exactly() {
        let mut g = crate::graph::random_graph(5, 0.6, 11);
        let x = Array2::from_shape_fn((5, 2), |(i, j)| i as f64 - j as f64 / 2.0);
        g = g.with_features(x.clone()).unwrap();
        let r = sample_features(5, &uniform_cfg(4, 1.0, 13), 0).unwrap();
        let rebuilt = extended_factorization(&g, &r).unwrap().reconstruct();
        let target = iso_type_tensor(&g);
        // Channels 1..=2d₀ are the exact outer products with the ones column.
        for l in 1..=4 {
            let diff = (&rebuilt.channel(l).to_owned() - &target.channel(l))
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            assert_eq!(diff, 0.0, "feature channel {l} must be exact");
        }
    }

    #[test]
    fn random_channels_approximate_identity_and_adjacency() {
        let g = crate::graph::random_graph(8, 0.5, 21);
        let cfg = uniform_cfg(4000, 3.0f64.sqrt(), 23);
        let r = sample_features(8, &cfg, 0).unwrap();
        let rebuilt = extended_factorization(&g, &r).unwrap().reconstruct();
        let target = iso_type_tensor(&g);
        assert!(
            rebuilt.max_abs_diff(&target) <= 0.25,
            "reconstruction off by {}",
            rebuilt.max_abs_diff(&target)
        );
    }

    #[test]
    fn message_passing_is_equivariant_under_the_coupling() {
        let g = crate::graph::random_graph(7, 0.5, 31);
        let mut rng = feature_rng(5, 0);
        let p = Permutation::random(7, &mut rng);
        let cfg = uniform_cfg(6, 1.0, 37);
        let dev = expectation_equivariance_check(&g, &p, &cfg, 1, |graph, r| {
            message_passing_layer(&graph.adjacency().to_owned(), r).unwrap()
        })
        .unwrap();
        assert!(dev <= 1e-9, "deviation {dev}");
    }

    #[test]
    fn first_row_extractor_is_not_equivariant_in_expectation() {
        // Broadcasting node 0's features to every row is the canonical
        // non-equivariant map; with distinct features the gap survives
        // averaging over R.
        let mut g = Graph::cycle(3);
        let x = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 2.0]).unwrap();
        g = g.with_features(x).unwrap();
        let p = Permutation::from_mapping(vec![2, 1, 0]).unwrap();
        let cfg = uniform_cfg(4, 1.0, 41);
        let dev = expectation_equivariance_check(&g, &p, &cfg, 50, |graph, r| {
            let feats = graph.features().unwrap().to_owned();
            let joined = concatenate(Axis(1), &[feats.view(), r.view()]).unwrap();
            let first = joined.row(0).to_owned();
            Array2::from_shape_fn(joined.raw_dim(), |(_, j)| first[j])
        })
        .unwrap();
        assert!(dev >= 1.0, "expected a persistent gap, got {dev}");
    }

    proptest! {
        #[test]
        fn message_passing_layer_permutation_equivariance(seed in 0u64..100) {
            let n = 6;
            let g = crate::graph::random_graph(n, 0.5, seed);
            let cfg = uniform_cfg(3, 1.0, seed ^ 0x55);
            let r = sample_features(n, &cfg, 0).unwrap();
            let mut rng = feature_rng(seed ^ 0xAA, 0);
            let p = Permutation::random(n, &mut rng);
            let gp = crate::graph::apply_permutation(&g, &p).unwrap();
            let base = message_passing_layer(&g.adjacency().to_owned(), &r).unwrap();
            let permuted = message_passing_layer(
                &gp.adjacency().to_owned(),
                &p.permute_rows(&r.view()),
            ).unwrap();
            for i in 0..n {
                for j in 0..base.ncols() {
                    let diff = (permuted[(p.apply_index(i), j)] - base[(i, j)]).abs();
                    prop_assert!(diff <= 1e-12);
                }
            }
        }
    }
}
