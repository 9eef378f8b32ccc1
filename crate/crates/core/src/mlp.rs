//! A two-layer ReLU network with exact gradients, plus gradient-descent
//! training on monomial-regression tasks and the desk-scale sample-complexity
//! experiment.
//!
//! The theory motivating this module works in the over-parameterized NTK
//! regime and trains only the output layer; at desk widths we train all
//! parameters and check qualitative learnability (test error shrinking with
//! sample size), not quantitative PAC constants.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::multi_index::MultiIndex;
use crate::rgnn::feature_rng;
use crate::vandermonde::{sample_complexity_bound, VandermondeError};

/// Training is flagged as diverged when any recorded loss exceeds this factor
/// times the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("{name} = {value} is outside its valid range")]
    ParameterRange { name: &'static str, value: f64 },
    #[error("input has {found} columns but the first layer consumes {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("{found} targets for {expected} inputs")]
    TargetCount { expected: usize, found: usize },
    #[error("need at least 10 samples, got {m}")]
    SampleBudget { m: usize },
    #[error("sample grid must be strictly ascending at position {position}")]
    GridOrder { position: usize },
    #[error("experiment needs a nonempty {what} list")]
    EmptyList { what: &'static str },
    #[error(transparent)]
    Bound(#[from] VandermondeError),
}

/// `x ↦ a2·relu(x·w1 + b1)`, one scalar output per row.
#[derive(Debug, Clone)]
pub struct TwoLayerMlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub a2: Array1<f64>,
}

impl TwoLayerMlp {
    /// Standard initialization: `w1 ~ N(0, (init_scale/√d_in)²)`,
    /// `a2 ~ N(0, 1/h)`, `b1 = 0`.
    pub fn init<R: Rng>(
        d_in: usize,
        width: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Result<Self, MlpError> {
        if d_in == 0 {
            return Err(MlpError::ParameterRange { name: "d_in", value: 0.0 });
        }
        if width == 0 {
            return Err(MlpError::ParameterRange { name: "width", value: 0.0 });
        }
        if !(init_scale > 0.0 && init_scale.is_finite()) {
            return Err(MlpError::ParameterRange {
                name: "init_scale",
                value: init_scale,
            });
        }
        let w_dist = Normal::new(0.0, init_scale / (d_in as f64).sqrt()).expect("finite scale");
        let a_dist = Normal::new(0.0, 1.0 / (width as f64).sqrt()).expect("finite scale");
        let w1 = Array2::from_shape_fn((d_in, width), |_| w_dist.sample(rng));
        let a2 = Array1::from_shape_fn(width, |_| a_dist.sample(rng));
        Ok(TwoLayerMlp {
            w1,
            b1: Array1::zeros(width),
            a2,
        })
    }

    pub fn d_in(&self) -> usize {
        self.w1.nrows()
    }

    pub fn width(&self) -> usize {
        self.w1.ncols()
    }

    fn check_batch(&self, x: &Array2<f64>, y: Option<&Array1<f64>>) -> Result<(), MlpError> {
        if x.ncols() != self.d_in() {
            return Err(MlpError::InputWidth {
                expected: self.d_in(),
                found: x.ncols(),
            });
        }
        if let Some(y) = y {
            if y.len() != x.nrows() {
                return Err(MlpError::TargetCount {
                    expected: x.nrows(),
                    found: y.len(),
                });
            }
        }
        Ok(())
    }

    /// Pre-activations `x·w1 + b1`.
    fn pre_activations(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w1) + &self.b1
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array1<f64>, MlpError> {
        self.check_batch(x, None)?;
        let mut a = self.pre_activations(x);
        a.mapv_inplace(|v| v.max(0.0));
        Ok(a.dot(&self.a2))
    }

    /// Mean squared error over the batch.
    pub fn loss(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<f64, MlpError> {
        self.check_batch(x, Some(y))?;
        let out = self.forward(x)?;
        Ok(out
            .iter()
            .zip(y)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / x.nrows() as f64)
    }

    /// Exact gradients of the mean-squared error. The ReLU subgradient at
    /// exactly zero is fixed to zero. Also returns the batch loss, which the
    /// forward pass computes for free.
    pub fn gradients(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<Gradients, MlpError> {
        self.check_batch(x, Some(y))?;
        let batch = x.nrows() as f64;
        let z = self.pre_activations(x);
        let a = z.mapv(|v| v.max(0.0));
        let out = a.dot(&self.a2);
        let err = &out - y;
        let loss = err.iter().map(|e| e * e).sum::<f64>() / batch;
        // d(loss)/d(out_i) = 2·err_i / B
        let dout = err.mapv(|e| 2.0 * e / batch);
        let da2 = a.t().dot(&dout);
        // dz = outer(dout, a2) gated by the active units
        let mut dz = Array2::<f64>::zeros(z.raw_dim());
        for i in 0..z.nrows() {
            let g = dout[i];
            for j in 0..z.ncols() {
                if z[(i, j)] > 0.0 {
                    dz[(i, j)] = g * self.a2[j];
                }
            }
        }
        let dw1 = x.t().dot(&dz);
        let db1 = dz.sum_axis(Axis(0));
        Ok(Gradients { w1: dw1, b1: db1, a2: da2, loss })
    }

    fn apply_step(&mut self, grads: &Gradients, lr: f64) {
        self.w1.zip_mut_with(&grads.w1, |w, g| *w -= lr * g);
        self.b1.zip_mut_with(&grads.b1, |b, g| *b -= lr * g);
        self.a2.zip_mut_with(&grads.a2, |a, g| *a -= lr * g);
    }

    /// One gradient-descent step, arithmetically identical to
    /// [`TwoLayerMlp::gradients`] followed by the update but reusing the two
    /// batch×width buffers so long runs don't churn the allocator. Returns
    /// the batch loss at the incoming parameters.
    fn descend_step(
        &mut self,
        x: &Array2<f64>,
        y: &Array1<f64>,
        lr: f64,
        z: &mut Array2<f64>,
        a: &mut Array2<f64>,
    ) -> f64 {
        let batch = x.nrows() as f64;
        general_mat_mul(1.0, x, &self.w1, 0.0, z);
        *z += &self.b1;
        ndarray::Zip::from(&mut *a).and(&*z).for_each(|av, &zv| *av = zv.max(0.0));
        let mut dout = a.dot(&self.a2);
        dout -= y;
        let loss = dout.iter().map(|e| e * e).sum::<f64>() / batch;
        dout.mapv_inplace(|e| 2.0 * e / batch);
        let da2 = a.t().dot(&dout);
        // Reuse z as the pre-activation gradient buffer.
        for (i, mut row) in z.rows_mut().into_iter().enumerate() {
            let g = dout[i];
            for (v, &aj) in row.iter_mut().zip(&self.a2) {
                *v = if *v > 0.0 { g * aj } else { 0.0 };
            }
        }
        let dw1 = x.t().dot(&*z);
        let db1 = z.sum_axis(Axis(0));
        self.w1.zip_mut_with(&dw1, |w, g| *w -= lr * g);
        self.b1.zip_mut_with(&db1, |b, g| *b -= lr * g);
        self.a2.zip_mut_with(&da2, |a2v, g| *a2v -= lr * g);
        loss
    }
}

/// Parameter gradients of the batch MSE, plus the loss at the evaluated point.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub a2: Array1<f64>,
    pub loss: f64,
}

/// Central-finite-difference gradient oracle with the given step size.
/// O(parameters) full forward passes — verification only.
pub fn finite_difference_gradients(
    mlp: &TwoLayerMlp,
    x: &Array2<f64>,
    y: &Array1<f64>,
    step: f64,
) -> Result<Gradients, MlpError> {
    let mut probe = mlp.clone();
    let loss = mlp.loss(x, y)?;
    let mut w1 = Array2::<f64>::zeros(mlp.w1.raw_dim());
    for i in 0..mlp.w1.nrows() {
        for j in 0..mlp.w1.ncols() {
            probe.w1[(i, j)] = mlp.w1[(i, j)] + step;
            let up = probe.loss(x, y)?;
            probe.w1[(i, j)] = mlp.w1[(i, j)] - step;
            let down = probe.loss(x, y)?;
            probe.w1[(i, j)] = mlp.w1[(i, j)];
            w1[(i, j)] = (up - down) / (2.0 * step);
        }
    }
    let mut b1 = Array1::<f64>::zeros(mlp.b1.len());
    for j in 0..mlp.b1.len() {
        probe.b1[j] = mlp.b1[j] + step;
        let up = probe.loss(x, y)?;
        probe.b1[j] = mlp.b1[j] - step;
        let down = probe.loss(x, y)?;
        probe.b1[j] = mlp.b1[j];
        b1[j] = (up - down) / (2.0 * step);
    }
    let mut a2 = Array1::<f64>::zeros(mlp.a2.len());
    for j in 0..mlp.a2.len() {
        probe.a2[j] = mlp.a2[j] + step;
        let up = probe.loss(x, y)?;
        probe.a2[j] = mlp.a2[j] - step;
        let down = probe.loss(x, y)?;
        probe.a2[j] = mlp.a2[j];
        a2[j] = (up - down) / (2.0 * step);
    }
    Ok(Gradients { w1, b1, a2, loss })
}

/// Regression target `x ↦ x^δ` with inputs uniform on `[−1,1]^D`; with
/// `append_one` a constant coordinate 1 is appended, so the network input
/// width is `D + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct MonomialTask {
    pub delta: MultiIndex,
    pub append_one: bool,
}

impl MonomialTask {
    pub fn new(delta: MultiIndex) -> Self {
        MonomialTask { delta, append_one: true }
    }

    pub fn input_dim(&self) -> usize {
        self.delta.dim() + usize::from(self.append_one)
    }

    /// Draw `m` points and their targets.
    fn sample<R: Rng>(&self, m: usize, rng: &mut R) -> (Array2<f64>, Array1<f64>) {
        let d = self.delta.dim();
        let width = self.input_dim();
        let mut x = Array2::<f64>::zeros((m, width));
        let mut y = Array1::<f64>::zeros(m);
        let mut point = vec![0.0; d];
        for i in 0..m {
            for (c, p) in point.iter_mut().enumerate() {
                *p = rng.random_range(-1.0..1.0);
                x[(i, c)] = *p;
            }
            if self.append_one {
                x[(i, d)] = 1.0;
            }
            y[i] = self.delta.eval(&point);
        }
        (x, y)
    }
}

/// Gradient-descent schedule. `batch: None` is full-batch descent; `Some(b)`
/// cycles deterministically through contiguous wrapped blocks of `b` rows (no
/// shuffling, so runs are reproducible).
#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: Option<usize>,
    pub init_scale: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::ParameterRange {
                name: "learning_rate",
                value: self.learning_rate,
            });
        }
        if self.batch == Some(0) {
            return Err(MlpError::ParameterRange { name: "batch", value: 0.0 });
        }
        Ok(())
    }
}

/// Result of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Full-training-set MSE at the final parameters.
    pub train_mse: f64,
    /// MSE on the held-out set (10× the training size, disjoint stream).
    pub test_mse: f64,
    /// `curve[0]` is the initial full-train loss; subsequent entries are the
    /// batch loss before each update, and one final full-train loss.
    pub loss_curve: Vec<f64>,
    /// Loss exceeded [`DIVERGENCE_FACTOR`]× the initial loss; training
    /// stopped early and the report carries the state at that point.
    pub diverged: bool,
}

/// Train a fresh network on `m_samples` draws of the task; evaluate on
/// `10·m_samples` held-out points. Streams: 0 = training data, 1 = test data,
/// 2 = initialization, so every piece is independently reproducible.
pub fn train_monomial(
    task: &MonomialTask,
    m_samples: usize,
    width: usize,
    cfg: &TrainConfig,
) -> Result<TrainReport, MlpError> {
    if m_samples < 10 {
        return Err(MlpError::SampleBudget { m: m_samples });
    }
    cfg.validate()?;
    let (x_train, y_train) = task.sample(m_samples, &mut feature_rng(cfg.seed, 0));
    let (x_test, y_test) = task.sample(10 * m_samples, &mut feature_rng(cfg.seed, 1));
    let mut mlp = TwoLayerMlp::init(
        task.input_dim(),
        width,
        cfg.init_scale,
        &mut feature_rng(cfg.seed, 2),
    )?;

    let initial = mlp.loss(&x_train, &y_train)?;
    let ceiling = DIVERGENCE_FACTOR * initial.max(1e-12);
    let mut curve = vec![initial];
    let mut diverged = false;
    let mut z = Array2::<f64>::zeros((m_samples, width));
    let mut a = Array2::<f64>::zeros((m_samples, width));
    for step in 0..cfg.steps {
        let loss = match cfg.batch {
            None => mlp.descend_step(&x_train, &y_train, cfg.learning_rate, &mut z, &mut a),
            Some(b) => {
                let b = b.min(m_samples);
                let start = (step * b) % m_samples;
                let idx: Vec<usize> = (0..b).map(|k| (start + k) % m_samples).collect();
                let xb = x_train.select(Axis(0), &idx);
                let yb = y_train.select(Axis(0), &idx);
                let grads = mlp.gradients(&xb, &yb)?;
                mlp.apply_step(&grads, cfg.learning_rate);
                grads.loss
            }
        };
        curve.push(loss);
        if !loss.is_finite() || loss > ceiling {
            diverged = true;
            break;
        }
    }
    let train_mse = mlp.loss(&x_train, &y_train)?;
    curve.push(train_mse);
    let test_mse = mlp.loss(&x_test, &y_test)?;
    Ok(TrainReport {
        train_mse,
        test_mse,
        loss_curve: curve,
        diverged,
    })
}

/// One `(m, seed)` cell of the experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentCell {
    pub m: usize,
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub diverged: bool,
}

/// Per-`m` summary row.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub m: usize,
    pub median_test_mse: f64,
    /// Informational PAC-style bound evaluated at ε = median RMSE (absent
    /// when the median is not positive).
    pub bound: Option<f64>,
}

/// Full experiment output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentTable {
    pub cells: Vec<ExperimentCell>,
    pub rows: Vec<ExperimentRow>,
    /// Number of adjacent median pairs that increased.
    pub inversions: usize,
    /// Weak monotonicity: at most one inversion across the grid.
    pub monotone_ok: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Sweep sample sizes × seeds, reporting the median test MSE per sample size
/// and the informational sample-complexity bound alongside.
pub fn sample_complexity_experiment(
    task: &MonomialTask,
    m_grid: &[usize],
    seeds: &[u64],
    width: usize,
    cfg: &TrainConfig,
) -> Result<ExperimentTable, MlpError> {
    if m_grid.is_empty() {
        return Err(MlpError::EmptyList { what: "sample-size" });
    }
    if seeds.is_empty() {
        return Err(MlpError::EmptyList { what: "seed" });
    }
    for (position, pair) in m_grid.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(MlpError::GridOrder { position: position + 1 });
        }
    }
    let mut cells = Vec::with_capacity(m_grid.len() * seeds.len());
    let mut rows = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let mut test_mses = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let run_cfg = TrainConfig { seed, ..cfg.clone() };
            let report = train_monomial(task, m, width, &run_cfg)?;
            test_mses.push(report.test_mse);
            cells.push(ExperimentCell {
                m,
                seed,
                train_mse: report.train_mse,
                test_mse: report.test_mse,
                diverged: report.diverged,
            });
        }
        let median_test_mse = median(&mut test_mses);
        let bound = if median_test_mse > 0.0 {
            Some(
                sample_complexity_bound(
                    task.delta.degree(),
                    task.delta.dim().max(1),
                    median_test_mse.sqrt(),
                    0.1,
                    None,
                )?
                .value,
            )
        } else {
            None
        };
        rows.push(ExperimentRow { m, median_test_mse, bound });
    }
    let inversions = rows
        .windows(2)
        .filter(|pair| pair[1].median_test_mse > pair[0].median_test_mse)
        .count();
    Ok(ExperimentTable {
        cells,
        rows,
        inversions,
        monotone_ok: inversions <= 1,
    })
}
