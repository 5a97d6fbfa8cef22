//! Fully connected ReLU nets trained from scratch with Adam, plus the
//! closed-form baselines they are compared against.
//!
//! One step is one Adam update. With the default full batch a step is also
//! an epoch.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CsvSplit, Dataset};
use crate::deepen::{check_student, deepen, make_plan, DeepenFlavor};
use crate::error::{invalid, Result};
use crate::net::{AffineMap, ReluNet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden layers.
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    /// Step budget.
    pub epochs: usize,
    pub seed: u64,
    /// Mini-batch size; `None` trains on the full batch.
    pub batch: Option<usize>,
    pub split_ratio: f64,
    /// Record RMSE every this many steps (the last step is always recorded).
    pub record_every: usize,
    /// Stop once the train RMSE reaches this value.
    pub target_rmse: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            width: 64,
            lr: 1e-3,
            epochs: 50_000,
            seed: 0,
            batch: None,
            split_ratio: 2.0 / 3.0,
            record_every: 1,
            target_rmse: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.width == 0 || self.depth == 0 || self.epochs == 0 {
            return Err(invalid("width, depth and epochs must all be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        if self.batch == Some(0) {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return Err(invalid(format!(
                "split ratio must lie in (0, 1], got {}",
                self.split_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.adam_eps > 0.0)
        {
            return Err(invalid("Adam needs β₁, β₂ ∈ [0, 1) and ε > 0"));
        }
        Ok(())
    }
}

/// Train fold plus optional test fold.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl From<CsvSplit> for TrainData {
    fn from(s: CsvSplit) -> Self {
        Self {
            train: s.train,
            test: s.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainHistory {
    pub steps: Vec<usize>,
    pub train_rmse: Vec<f64>,
    /// Empty when there is no test fold.
    pub test_rmse: Vec<f64>,
    pub params: usize,
    /// Not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
    pub diverged: bool,
    pub steps_run: usize,
}

impl TrainHistory {
    pub fn final_train(&self) -> f64 {
        self.train_rmse.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_test(&self) -> Option<f64> {
        self.test_rmse.last().copied()
    }

    pub fn min_test(&self) -> Option<f64> {
        self.test_rmse.iter().copied().reduce(f64::min)
    }
}

/// Dense ReLU MLP with a scalar linear output and output bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// `weights[l]` has shape `(out, in)`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub readout: Array1<f64>,
    pub out_bias: f64,
}

struct Grads {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    readout: Array1<f64>,
    out_bias: f64,
}

fn to_matrix(points: &[Vec<f64>]) -> Array2<f64> {
    let d = points[0].len();
    Array2::from_shape_fn((points.len(), d), |(i, k)| points[i][k])
}

impl Mlp {
    /// Uniform initialization on `±√(1/fan_in)` for every weight and bias.
    pub fn init(d: usize, depth: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        let mut fan_in = d;
        for _ in 0..depth {
            let b = (1.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((width, fan_in), |_| {
                rng.gen_range(-b..=b)
            }));
            biases.push(Array1::from_shape_fn(width, |_| rng.gen_range(-b..=b)));
            fan_in = width;
        }
        let b = (1.0 / fan_in as f64).sqrt();
        let readout = Array1::from_shape_fn(fan_in, |_| rng.gen_range(-b..=b));
        let out_bias = rng.gen_range(-b..=b);
        Self {
            weights,
            biases,
            readout,
            out_bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
            + self.readout.len()
            + 1
    }

    /// Hidden activations per layer (post-ReLU) and the outputs.
    fn forward(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Array1<f64>) {
        let mut acts = Vec::with_capacity(self.weights.len());
        let mut h = x.clone();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut z = h.dot(&w.t());
            z += b;
            z.mapv_inplace(|v| v.max(0.0));
            acts.push(z.clone());
            h = z;
        }
        let out = h.dot(&self.readout) + self.out_bias;
        (acts, out)
    }

    pub fn predict(&self, points: &[Vec<f64>]) -> Vec<f64> {
        self.forward(&to_matrix(points)).1.to_vec()
    }

    /// Mean squared error and its gradient.
    fn loss_and_grad(&self, x: &Array2<f64>, y: &Array1<f64>) -> (f64, Grads) {
        let (acts, out) = self.forward(x);
        let m = y.len() as f64;
        let resid = &out - y;
        let loss = resid.dot(&resid) / m;
        let g = resid * (2.0 / m);
        let last = acts.last().unwrap();
        let readout = last.t().dot(&g);
        let out_bias = g.sum();
        // δ = ∂loss/∂z for the current layer
        let mut delta = Array2::from_shape_fn(last.raw_dim(), |(i, j)| {
            if last[(i, j)] > 0.0 {
                g[i] * self.readout[j]
            } else {
                0.0
            }
        });
        let depth = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for l in (0..depth).rev() {
            let input = if l == 0 { x } else { &acts[l - 1] };
            gw[l] = delta.t().dot(input);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l]);
                ndarray::Zip::from(&mut prev)
                    .and(&acts[l - 1])
                    .for_each(|p, &a| {
                        if a <= 0.0 {
                            *p = 0.0;
                        }
                    });
                delta = prev;
            }
        }
        (
            loss,
            Grads {
                weights: gw,
                biases: gb,
                readout,
                out_bias,
            },
        )
    }

    fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.extend(w.iter_mut());
            out.extend(b.iter_mut());
        }
        out.extend(self.readout.iter_mut());
        out.push(&mut self.out_bias);
        out
    }

    /// The same function as a [`ReluNet`]. A nonzero output bias becomes a
    /// constant unit in the last hidden layer.
    pub fn to_relu_net(&self) -> Result<ReluNet> {
        let d = self.weights[0].ncols();
        let depth = self.weights.len();
        let mut layers = Vec::with_capacity(depth);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (rows, cols) = w.dim();
            let mut dense: Vec<f64> = w.iter().copied().collect();
            let mut bias = b.to_vec();
            let mut rows_out = rows;
            if l == depth - 1 && self.out_bias != 0.0 {
                dense.extend(std::iter::repeat_n(0.0, cols));
                bias.push(1.0);
                rows_out += 1;
            }
            layers.push(AffineMap::from_dense(rows_out, cols, &dense, bias)?);
        }
        let mut readout = self.readout.to_vec();
        if self.out_bias != 0.0 {
            readout.push(self.out_bias);
        }
        ReluNet::new(d, layers, readout)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn flatten(g: &Grads) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in g.weights.iter().zip(&g.biases) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out.extend(g.readout.iter());
    out.push(g.out_bias);
    out
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// `θ ← θ − lr · m̂ / (√v̂ + ε)` with bias-corrected moments.
    fn step(&mut self, net: &mut Mlp, grads: &Grads, cfg: &TrainConfig) {
        self.t += 1;
        let g = flatten(grads);
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (i, p) in net.params_mut().into_iter().enumerate() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            *p -= cfg.lr * mh / (vh.sqrt() + cfg.adam_eps);
        }
    }
}

fn rmse(pred: &Array1<f64>, y: &Array1<f64>) -> f64 {
    let r = pred - y;
    (r.dot(&r) / y.len() as f64).sqrt()
}

/// Largest relative error between the analytic gradient and central
/// differences on `coords` randomly chosen parameters.
pub fn gradient_check(net: &Mlp, ds: &Dataset, coords: usize, seed: u64) -> f64 {
    let x = to_matrix(ds.points());
    let y = Array1::from_vec(ds.labels().to_vec());
    let analytic = flatten(&net.loss_and_grad(&x, &y).1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = analytic.len();
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let i = rng.gen_range(0..n);
        let h = 1e-6;
        let mut plus = net.clone();
        *plus.params_mut()[i] += h;
        let mut minus = net.clone();
        *minus.params_mut()[i] -= h;
        let lp = plus.loss_and_grad(&x, &y).0;
        let lm = minus.loss_and_grad(&x, &y).0;
        let numeric = (lp - lm) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

/// Trains a fresh net; returns the history and the final net.
pub fn train_model(config: &TrainConfig, data: &TrainData) -> Result<(TrainHistory, Mlp)> {
    config.validate()?;
    let start = Instant::now();
    let train = &data.train;
    let x = to_matrix(train.points());
    let y = Array1::from_vec(train.labels().to_vec());
    let test = data
        .test
        .as_ref()
        .map(|t| (to_matrix(t.points()), Array1::from_vec(t.labels().to_vec())));
    let mut net = Mlp::init(train.dim(), config.depth, config.width, config.seed);
    let mut adam = Adam::new(net.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut hist = TrainHistory {
        steps: Vec::new(),
        train_rmse: Vec::new(),
        test_rmse: Vec::new(),
        params: net.param_count(),
        wall_seconds: 0.0,
        diverged: false,
        steps_run: 0,
    };
    let record = |net: &Mlp, step: usize, train_rmse: f64, hist: &mut TrainHistory| {
        hist.steps.push(step);
        hist.train_rmse.push(train_rmse);
        if let Some((tx, ty)) = &test {
            hist.test_rmse.push(rmse(&net.forward(tx).1, ty));
        }
    };
    for step in 1..=config.epochs {
        let (loss, grads) = match config.batch {
            Some(b) if b < train.len() => {
                if (step - 1) * b % train.len() < b {
                    order.shuffle(&mut rng);
                }
                let off = (step - 1) * b % train.len();
                let idx: Vec<usize> = (0..b).map(|k| order[(off + k) % train.len()]).collect();
                net.loss_and_grad(&x.select(Axis(0), &idx), &y.select(Axis(0), &idx))
            }
            _ => net.loss_and_grad(&x, &y),
        };
        if !loss.is_finite() {
            hist.diverged = true;
            break;
        }
        adam.step(&mut net, &grads, config);
        hist.steps_run = step;
        let pred = net.forward(&x).1;
        let train_rmse = rmse(&pred, &y);
        if !train_rmse.is_finite() {
            hist.diverged = true;
            break;
        }
        let reached = config.target_rmse.is_some_and(|t| train_rmse <= t);
        if step % config.record_every == 0 || step == config.epochs || reached {
            record(&net, step, train_rmse, &mut hist);
        }
        if reached {
            break;
        }
    }
    hist.wall_seconds = start.elapsed().as_secs_f64();
    Ok((hist, net))
}

pub fn train(config: &TrainConfig, data: &TrainData) -> Result<TrainHistory> {
    train_model(config, data).map(|(h, _)| h)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub depth: usize,
    pub width: usize,
    pub params: usize,
    pub final_train_rmse: f64,
    pub final_test_rmse: Option<f64>,
    pub min_test_rmse: Option<f64>,
    pub steps_run: usize,
    pub diverged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub train_size: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// Beyond `params ≥ m`, train RMSE does not grow with width by more
    /// than 10% (per depth), ignoring failed cells.
    pub fn train_nonincreasing_beyond_threshold(&self) -> bool {
        let mut depths: Vec<usize> = self.cells.iter().map(|c| c.depth).collect();
        depths.dedup();
        depths.iter().all(|&d| {
            let mut row: Vec<&SweepCell> = self
                .cells
                .iter()
                .filter(|c| c.depth == d && c.error.is_none() && c.params >= self.train_size)
                .collect();
            row.sort_by_key(|c| c.width);
            row.windows(2)
                .all(|w| w[1].final_train_rmse <= 1.1 * w[0].final_train_rmse.max(1e-12))
        })
    }
}

/// Trains every `(depth, width)` cell; a failing cell is reported and the
/// sweep continues.
pub fn width_sweep(
    depths: &[usize],
    widths: &[usize],
    data: &TrainData,
    base: &TrainConfig,
) -> Result<SweepReport> {
    if depths.is_empty() || widths.is_empty() {
        return Err(invalid("sweep needs at least one depth and one width"));
    }
    let grid: Vec<(usize, usize)> = depths
        .iter()
        .flat_map(|&d| widths.iter().map(move |&w| (d, w)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(depth, width)| {
            let cfg = TrainConfig {
                depth,
                width,
                ..base.clone()
            };
            match train(&cfg, data) {
                Ok(h) => SweepCell {
                    depth,
                    width,
                    params: h.params,
                    final_train_rmse: h.final_train(),
                    final_test_rmse: h.final_test(),
                    min_test_rmse: h.min_test(),
                    steps_run: h.steps_run,
                    diverged: h.diverged,
                    error: None,
                },
                Err(e) => SweepCell {
                    depth,
                    width,
                    params: 0,
                    final_train_rmse: f64::NAN,
                    final_test_rmse: None,
                    min_test_rmse: None,
                    steps_run: 0,
                    diverged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepReport {
        train_size: data.train.len(),
        cells,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochCurve {
    pub config: TrainConfig,
    pub history: Option<TrainHistory>,
    pub error: Option<String>,
}

/// Full train/test curves for each configuration.
pub fn epoch_sweep(configs: &[TrainConfig], data: &TrainData) -> Result<Vec<EpochCurve>> {
    if configs.is_empty() {
        return Err(invalid("epoch sweep needs at least one configuration"));
    }
    Ok(configs
        .par_iter()
        .map(|cfg| match train(cfg, data) {
            Ok(h) => EpochCurve {
                config: cfg.clone(),
                history: Some(h),
                error: None,
            },
            Err(e) => EpochCurve {
                config: cfg.clone(),
                history: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// Ordinary least squares with intercept.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let d = ds.dim();
        let a = DMatrix::from_fn(
            ds.len(),
            d + 1,
            |i, k| if k < d { ds.points()[i][k] } else { 1.0 },
        );
        let y = DVector::from_column_slice(ds.labels());
        let svd = a.svd(true, true);
        let sol = svd
            .solve(&y, 1e-12)
            .map_err(|e| invalid(format!("linear regression failed: {e}")))?;
        Ok(Self {
            weights: sol.rows(0, d).iter().copied().collect(),
            intercept: sol[d],
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Kernel ridge regression with `k(x, x') = exp(−‖x − x'‖² / (2σ²))`,
/// solving `(K + λI) c = y`.
#[derive(Clone, Debug)]
pub struct KernelRidge {
    pub sigma: f64,
    pub lambda: f64,
    centers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
}

pub const KRR_SIGMA: f64 = 20.0;
pub const KRR_LAMBDA: f64 = 2e-4;

impl KernelRidge {
    pub fn fit(ds: &Dataset, sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma > 0.0 && lambda > 0.0) {
            return Err(invalid("kernel width and regularizer must be positive"));
        }
        let pts = ds.points();
        let m = pts.len();
        let mut k = DMatrix::from_fn(m, m, |i, j| gauss(&pts[i], &pts[j], sigma));
        for i in 0..m {
            k[(i, i)] += lambda;
        }
        let y = DVector::from_column_slice(ds.labels());
        let coeffs = k
            .cholesky()
            .ok_or_else(|| invalid("kernel matrix is not positive definite"))?
            .solve(&y);
        Ok(Self {
            sigma,
            lambda,
            centers: pts.to_vec(),
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(c, a)| a * gauss(c, x, self.sigma))
            .sum()
    }
}

fn gauss(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-r2 / (2.0 * sigma * sigma)).exp()
}

fn rmse_of(pred: impl Fn(&[f64]) -> f64, ds: &Dataset) -> f64 {
    let s: f64 = ds
        .points()
        .iter()
        .zip(ds.labels())
        .map(|(x, y)| (pred(x) - y).powi(2))
        .sum();
    (s / ds.len() as f64).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub model: String,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub params: Option<usize>,
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub epsilon: f64,
    /// `C′ε` for the constructed student.
    pub closeness_bound: f64,
    pub l2_distance: f64,
    pub l2_stderr: f64,
}

impl CompareReport {
    pub fn row(&self, model: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Trains `trained` from scratch, trains a small `teacher`, deepens the
/// teacher into an exact interpolant of the training fold, and tabulates
/// all of them together with the linear and kernel baselines.
pub fn compare_constructed(
    trained: &TrainConfig,
    teacher_fit: &TrainConfig,
    data: &TrainData,
    epsilon: f64,
) -> Result<CompareReport> {
    let test = data.test.as_ref();
    let mut rows = Vec::new();
    let mut push =
        |model: &str, f: &dyn Fn(&[f64]) -> f64, params: Option<usize>, depth: Option<usize>| {
            rows.push(CompareRow {
                model: model.to_string(),
                train_rmse: rmse_of(f, &data.train),
                test_rmse: test.map(|t| rmse_of(f, t)),
                params,
                depth,
            });
        };
    let (_, adam) = train_model(trained, data)?;
    let adam_net = adam.to_relu_net()?;
    push(
        "adam",
        &|x| adam_net.eval(x),
        Some(adam.param_count()),
        Some(trained.depth),
    );
    let (_, small) = train_model(teacher_fit, data)?;
    let teacher = small.to_relu_net()?;
    push(
        "teacher",
        &|x| teacher.eval(x),
        Some(teacher.param_count()),
        Some(teacher.depth()),
    );
    let plan = make_plan(
        &data.train,
        &teacher,
        epsilon,
        2.0,
        1.0,
        1,
        DeepenFlavor::FixedDepth,
    )?;
    let student = deepen(&teacher, &data.train, &plan)?;
    push(
        "constructed",
        &|x| student.eval(x),
        Some(student.param_count()),
        Some(student.depth()),
    );
    let check = check_student(
        &student,
        &teacher,
        &data.train,
        &plan,
        100_000,
        trained.seed,
    )?;
    let lr = LinearModel::fit(&data.train)?;
    push(
        "linear-regression",
        &|x| lr.predict(x),
        Some(data.train.dim() + 1),
        None,
    );
    let krr = KernelRidge::fit(&data.train, KRR_SIGMA, KRR_LAMBDA)?;
    push(
        "kernel-ridge",
        &|x| krr.predict(x),
        Some(data.train.len()),
        None,
    );
    Ok(CompareReport {
        rows,
        epsilon,
        closeness_bound: check.distance_bound,
        l2_distance: check.distance.value,
        l2_stderr: check.distance.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_dataset, target, TargetKind};

    fn toy(m: usize, seed: u64) -> Dataset {
        let f = target(&TargetKind::Additive, 2).unwrap();
        sample_dataset(&*f, 2, m, 0.0, seed).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let ds = toy(30, 1);
        let net = Mlp::init(2, 3, 7, 4);
        assert!(gradient_check(&net, &ds, 20, 0) <= 1e-5);
    }

    #[test]
    fn conversion_matches_predictions() {
        let ds = toy(20, 2);
        let mut net = Mlp::init(2, 2, 5, 3);
        net.out_bias = 0.37;
        let relu = net.to_relu_net().unwrap();
        let pred = net.predict(ds.points());
        for (x, p) in ds.points().iter().zip(pred) {
            assert!((relu.eval(x) - p).abs() < 1e-12);
        }
        assert_eq!(relu.depth(), 2);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data = TrainData {
            train: toy(40, 3),
            test: Some(toy(20, 4)),
        };
        let cfg = TrainConfig {
            depth: 2,
            width: 16,
            epochs: 200,
            record_every: 10,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.train_rmse, b.train_rmse);
        assert_eq!(a.test_rmse, b.test_rmse);
        assert_eq!(a.steps.len(), 20);
        assert!(a.final_train() < a.train_rmse[0]);
    }

    #[test]
    fn minibatch_runs() {
        let data = TrainData {
            train: toy(30, 5),
            test: None,
        };
        let cfg = TrainConfig {
            depth: 1,
            width: 8,
            epochs: 50,
            batch: Some(8),
            ..TrainConfig::default()
        };
        let h = train(&cfg, &data).unwrap();
        assert_eq!(h.train_rmse.len(), 50);
        assert!(h.test_rmse.is_empty());
    }

    #[test]
    fn invalid_configs() {
        let data = TrainData {
            train: toy(10, 0),
            test: None,
        };
        for cfg in [
            TrainConfig {
                lr: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                width: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(train(&cfg, &data).is_err());
        }
    }

    #[test]
    fn baselines() {
        let ds = Dataset::new(
            vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]],
            vec![-1.0, 0.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        let lr = LinearModel::fit(&ds).unwrap();
        assert!((lr.weights[0] - 2.0).abs() < 1e-12 && (lr.intercept - 1.0).abs() < 1e-12);
        let krr = KernelRidge::fit(&ds, 0.5, 1e-8).unwrap();
        for (x, y) in ds.points().iter().zip(ds.labels()) {
            assert!((krr.predict(x) - y).abs() < 1e-3);
        }
    }
}
