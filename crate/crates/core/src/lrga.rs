//! Low-rank global attention: the `[η⁻¹·m₁(X)·(m₂(X)ᵀm₃(X)), m₄(X)]` forward
//! pass and the augmentation layer around it.
//!
//! The association order is load-bearing: the κ×κ Gram product
//! `m₂(X)ᵀm₃(X)` is formed first and the n×n attention matrix is never
//! materialized, which is what keeps the cost at `O(nκ²)` time and `O(nκ)`
//! auxiliary space. [`dense_attention_oracle`] deliberately builds the n×n
//! matrix instead and exists only to cross-check the factored path.

use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default threshold below which `|η|` is treated as degenerate.
pub const DEFAULT_ETA_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LrgaError {
    #[error("normalization eta = {eta:e} is within {epsilon:e} of zero")]
    DegenerateNormalization { eta: f64, epsilon: f64 },
    #[error("head {head}: normalization eta = {eta:e} is within {epsilon:e} of zero")]
    DegenerateHead { head: usize, eta: f64, epsilon: f64 },
    #[error("{map} bias has {found} entries but the map outputs {expected}")]
    BiasLength { map: &'static str, expected: usize, found: usize },
    #[error("{map} weight has {found} entries, expected {expected} (d_in×d_out)")]
    WeightLength { map: &'static str, expected: usize, found: usize },
    #[error("{map} outputs width {found}, expected the shared rank {expected}")]
    MapOutputWidth { map: &'static str, expected: usize, found: usize },
    #[error("{map} consumes width {expected} but the input has {found} columns")]
    MapInputWidth { map: &'static str, expected: usize, found: usize },
    #[error("rank must be positive")]
    ZeroRank,
    #[error("eta_epsilon = {value} must be finite and non-negative")]
    EpsilonRange { value: f64 },
    #[error("{map} contains a non-finite parameter")]
    NonFiniteParameter { map: &'static str },
    #[error("input must have at least one row")]
    EmptyInput,
    #[error("auxiliary input has {found} rows, expected {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("head list is empty")]
    EmptyHeads,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// A single-layer row-wise map: `row ↦ act(row·W + b)`.
#[derive(Debug, Clone)]
pub struct RowMap {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl RowMap {
    pub fn new(
        weight: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
    ) -> Result<Self, LrgaError> {
        if bias.len() != weight.ncols() {
            return Err(LrgaError::BiasLength {
                map: "row map",
                expected: weight.ncols(),
                found: bias.len(),
            });
        }
        Ok(RowMap { weight, bias, activation })
    }

    pub fn d_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.ncols()
    }

    /// Apply row-wise; output row `i` depends only on input row `i`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight) + &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }
}

/// Parameters of one attention head: four maps of shared output width κ and
/// an optional read-out map applied by [`augment_layer`].
#[derive(Debug, Clone)]
pub struct LrgaParams {
    kappa: usize,
    eta_epsilon: f64,
    pub m1: RowMap,
    pub m2: RowMap,
    pub m3: RowMap,
    pub m4: RowMap,
    pub m5: Option<RowMap>,
}

impl LrgaParams {
    pub fn new(
        m1: RowMap,
        m2: RowMap,
        m3: RowMap,
        m4: RowMap,
        m5: Option<RowMap>,
        eta_epsilon: Option<f64>,
    ) -> Result<Self, LrgaError> {
        let kappa = m1.d_out();
        if kappa == 0 {
            return Err(LrgaError::ZeroRank);
        }
        let d_in = m1.d_in();
        for (name, map) in [("m2", &m2), ("m3", &m3), ("m4", &m4)] {
            if map.d_out() != kappa {
                return Err(LrgaError::MapOutputWidth {
                    map: name,
                    expected: kappa,
                    found: map.d_out(),
                });
            }
            if map.d_in() != d_in {
                return Err(LrgaError::MapInputWidth {
                    map: name,
                    expected: d_in,
                    found: map.d_in(),
                });
            }
        }
        let eta_epsilon = eta_epsilon.unwrap_or(DEFAULT_ETA_EPSILON);
        if !eta_epsilon.is_finite() || eta_epsilon < 0.0 {
            return Err(LrgaError::EpsilonRange { value: eta_epsilon });
        }
        Ok(LrgaParams { kappa, eta_epsilon, m1, m2, m3, m4, m5 })
    }

    /// Random ReLU head: weights `N(0, 1/d_in)`, biases 0.1 so the positive
    /// parts keep mass and η stays away from zero almost surely.
    pub fn random_init(d_in: usize, kappa: usize, seed: u64) -> Result<Self, LrgaError> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (1.0 / d_in as f64).sqrt()).expect("finite std");
        let mut sample_map = || -> Result<RowMap, LrgaError> {
            let weight =
                Array2::from_shape_fn((d_in, kappa), |_| normal.sample(&mut rng));
            RowMap::new(weight, Array1::from_elem(kappa, 0.1), Activation::Relu)
        };
        let (m1, m2, m3, m4) = (sample_map()?, sample_map()?, sample_map()?, sample_map()?);
        LrgaParams::new(m1, m2, m3, m4, None, None)
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn d_in(&self) -> usize {
        self.m1.d_in()
    }

    pub fn eta_epsilon(&self) -> f64 {
        self.eta_epsilon
    }

    pub fn from_json_str(s: &str) -> Result<Self, LrgaError> {
        let wire: ParamsWire = serde_json::from_str(s)?;
        wire.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ParamsWire::from(self)).expect("params serialize")
    }
}

#[derive(Serialize, Deserialize)]
struct RowMapWire {
    d_in: usize,
    d_out: usize,
    activation: Activation,
    /// Row-major `d_in×d_out` entries.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsWire {
    kappa: usize,
    eta_epsilon: f64,
    m1: RowMapWire,
    m2: RowMapWire,
    m3: RowMapWire,
    m4: RowMapWire,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m5: Option<RowMapWire>,
}

fn row_map_from_wire(wire: RowMapWire, name: &'static str) -> Result<RowMap, LrgaError> {
    // Checked product: declared dims come from untrusted input and may
    // overflow, in which case no weight vector can match them.
    if wire.d_in.checked_mul(wire.d_out) != Some(wire.weight.len()) {
        return Err(LrgaError::WeightLength {
            map: name,
            expected: wire.d_in.saturating_mul(wire.d_out),
            found: wire.weight.len(),
        });
    }
    if wire.bias.len() != wire.d_out {
        return Err(LrgaError::BiasLength {
            map: name,
            expected: wire.d_out,
            found: wire.bias.len(),
        });
    }
    if wire.weight.iter().chain(&wire.bias).any(|v| !v.is_finite()) {
        return Err(LrgaError::NonFiniteParameter { map: name });
    }
    let weight = Array2::from_shape_vec((wire.d_in, wire.d_out), wire.weight)
        .expect("length checked above");
    RowMap::new(weight, Array1::from_vec(wire.bias), wire.activation)
}

fn row_map_to_wire(map: &RowMap) -> RowMapWire {
    RowMapWire {
        d_in: map.d_in(),
        d_out: map.d_out(),
        activation: map.activation,
        weight: map.weight.iter().copied().collect(),
        bias: map.bias.to_vec(),
    }
}

impl TryFrom<ParamsWire> for LrgaParams {
    type Error = LrgaError;

    fn try_from(wire: ParamsWire) -> Result<Self, LrgaError> {
        let m1 = row_map_from_wire(wire.m1, "m1")?;
        let m2 = row_map_from_wire(wire.m2, "m2")?;
        let m3 = row_map_from_wire(wire.m3, "m3")?;
        let m4 = row_map_from_wire(wire.m4, "m4")?;
        let m5 = wire.m5.map(|w| row_map_from_wire(w, "m5")).transpose()?;
        let params = LrgaParams::new(m1, m2, m3, m4, m5, Some(wire.eta_epsilon))?;
        if params.kappa() != wire.kappa {
            return Err(LrgaError::MapOutputWidth {
                map: "m1",
                expected: wire.kappa,
                found: params.kappa(),
            });
        }
        Ok(params)
    }
}

impl From<&LrgaParams> for ParamsWire {
    fn from(p: &LrgaParams) -> Self {
        ParamsWire {
            kappa: p.kappa,
            eta_epsilon: p.eta_epsilon,
            m1: row_map_to_wire(&p.m1),
            m2: row_map_to_wire(&p.m2),
            m3: row_map_to_wire(&p.m3),
            m4: row_map_to_wire(&p.m4),
            m5: p.m5.as_ref().map(row_map_to_wire),
        }
    }
}

fn check_input(x: &Array2<f64>, params: &LrgaParams) -> Result<(), LrgaError> {
    if x.nrows() == 0 {
        return Err(LrgaError::EmptyInput);
    }
    if x.ncols() != params.d_in() {
        return Err(LrgaError::MapInputWidth {
            map: "m1",
            expected: params.d_in(),
            found: x.ncols(),
        });
    }
    Ok(())
}

/// The normalization scalar `η(X) = (1/n)·⟨colsum(m₁(X)), colsum(m₂(X))⟩`.
///
/// Depends on the input only through column sums, so it is invariant under
/// row permutation.
pub fn eta(x: &Array2<f64>, params: &LrgaParams) -> Result<f64, LrgaError> {
    check_input(x, params)?;
    let s1 = params.m1.apply(x).sum_axis(Axis(0));
    let s2 = params.m2.apply(x).sum_axis(Axis(0));
    Ok(s1.dot(&s2) / x.nrows() as f64)
}

/// The factored forward pass: `[η⁻¹·m₁(X)·(m₂(X)ᵀm₃(X)), m₄(X)]`, shape n×2κ.
///
/// Buffers are dropped as soon as the Gram product is formed, so peak
/// auxiliary allocation stays at a few n×κ matrices.
pub fn lrga_forward(x: &Array2<f64>, params: &LrgaParams) -> Result<Array2<f64>, LrgaError> {
    check_input(x, params)?;
    let n = x.nrows() as f64;
    let m1 = params.m1.apply(x);
    let m2 = params.m2.apply(x);
    let eta = m1.sum_axis(Axis(0)).dot(&m2.sum_axis(Axis(0))) / n;
    if eta.abs() <= params.eta_epsilon {
        return Err(LrgaError::DegenerateNormalization {
            eta,
            epsilon: params.eta_epsilon,
        });
    }
    let gram = {
        let m3 = params.m3.apply(x);
        m2.t().dot(&m3)
    };
    drop(m2);
    let mut attention = m1.dot(&gram);
    drop(m1);
    drop(gram);
    attention.mapv_inplace(|v| v / eta);
    let m4 = params.m4.apply(x);
    Ok(concatenate(Axis(1), &[attention.view(), m4.view()]).expect("row counts match"))
}

/// Reference implementation that materializes the n×n attention matrix
/// `η⁻¹·m₁(X)·m₂(X)ᵀ` explicitly. Only for verification at small n.
pub fn dense_attention_oracle(
    x: &Array2<f64>,
    params: &LrgaParams,
) -> Result<Array2<f64>, LrgaError> {
    check_input(x, params)?;
    let n = x.nrows() as f64;
    let m1 = params.m1.apply(x);
    let m2 = params.m2.apply(x);
    let eta = m1.sum_axis(Axis(0)).dot(&m2.sum_axis(Axis(0))) / n;
    if eta.abs() <= params.eta_epsilon {
        return Err(LrgaError::DegenerateNormalization {
            eta,
            epsilon: params.eta_epsilon,
        });
    }
    let mut dense = m1.dot(&m2.t());
    dense.mapv_inplace(|v| v / eta);
    let attention = dense.dot(&params.m3.apply(x));
    let m4 = params.m4.apply(x);
    Ok(concatenate(Axis(1), &[attention.view(), m4.view()]).expect("row counts match"))
}

/// One augmented layer: `[X, LRGA(X), gnn_out]`, then the read-out map `m₅`
/// if the head has one. Without `m₅` the output width is `d + 2κ + d_gnn`.
pub fn augment_layer(
    x: &Array2<f64>,
    gnn_out: &Array2<f64>,
    params: &LrgaParams,
) -> Result<Array2<f64>, LrgaError> {
    if gnn_out.nrows() != x.nrows() {
        return Err(LrgaError::RowCount {
            expected: x.nrows(),
            found: gnn_out.nrows(),
        });
    }
    let lrga = lrga_forward(x, params)?;
    let stacked = concatenate(Axis(1), &[x.view(), lrga.view(), gnn_out.view()])
        .expect("row counts match");
    match &params.m5 {
        None => Ok(stacked),
        Some(m5) => {
            if m5.d_in() != stacked.ncols() {
                return Err(LrgaError::MapInputWidth {
                    map: "m5",
                    expected: m5.d_in(),
                    found: stacked.ncols(),
                });
            }
            Ok(m5.apply(&stacked))
        }
    }
}

/// Multi-head augmentation: `[X, LRGA₁(X), …, LRGA_k(X), gnn_out]`.
///
/// A degenerate normalization in any head is reported with that head's index.
/// Heads' `m₅` read-outs are not applied here; the concatenation is returned
/// as-is.
pub fn multi_head_forward(
    x: &Array2<f64>,
    heads: &[LrgaParams],
    gnn_out: &Array2<f64>,
) -> Result<Array2<f64>, LrgaError> {
    if heads.is_empty() {
        return Err(LrgaError::EmptyHeads);
    }
    if gnn_out.nrows() != x.nrows() {
        return Err(LrgaError::RowCount {
            expected: x.nrows(),
            found: gnn_out.nrows(),
        });
    }
    let mut blocks = vec![x.to_owned()];
    for (head, params) in heads.iter().enumerate() {
        let out = lrga_forward(x, params).map_err(|e| match e {
            LrgaError::DegenerateNormalization { eta, epsilon } => {
                LrgaError::DegenerateHead { head, eta, epsilon }
            }
            other => other,
        })?;
        blocks.push(out);
    }
    blocks.push(gnn_out.to_owned());
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    Ok(concatenate(Axis(1), &views).expect("row counts match"))
}
