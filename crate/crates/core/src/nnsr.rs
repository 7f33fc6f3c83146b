//! Stimulus reconstruction with a two-unit tanh network and a Pearson loss.
//!
//! `ŝ(t) = w2ᵀ tanh(W1 x(t) + b1) + b2`, where `x(t)` is the anti-causal lag
//! vector of the EEG at time `t`. Training minimizes `1 − ρ(ŝ, s)` over
//! batches of `M` consecutive samples with plain gradient descent; the
//! gradient is derived by hand through the Pearson statistic.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, read_matrix, sibling, write_json, write_matrix, RawMatrix};
use crate::error::{AadError, Result};
use crate::lagged::{LagDirection, LaggedDesign};
use crate::signal::pearson;

pub const HIDDEN: usize = 2;

/// Loss above this for `patience` consecutive epochs counts as divergence.
const DIVERGED_LOSS: f64 = 1.999;

#[derive(Debug, Clone, PartialEq)]
pub struct NnSrModel {
    /// HIDDEN × (L·C)
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
    pub lags: usize,
    pub channels: usize,
}

/// Gradient of the loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
    /// The network output was constant; the gradient is zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub degenerate: bool,
}

impl NnSrModel {
    pub fn zeros(lags: usize, channels: usize) -> Self {
        let d = lags * channels;
        Self {
            w1: DMatrix::zeros(HIDDEN, d),
            b1: DVector::zeros(HIDDEN),
            w2: DVector::zeros(HIDDEN),
            b2: 0.0,
            lags,
            channels,
        }
    }

    /// Uniform weights in `[−a, a]` with `a = 1/√(L·C)`; biases start at zero.
    pub fn init(lags: usize, channels: usize, seed: u64) -> Self {
        let mut m = Self::zeros(lags, channels);
        let a = 1.0 / ((lags * channels) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-a..=a));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-a..=a));
        m
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_params(&self) -> usize {
        HIDDEN * (self.input_dim() + 1) + HIDDEN + 1
    }

    /// Parameters as one vector: W1 row-major, b1, w2, b2.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for k in 0..HIDDEN {
            v.extend(self.w1.row(k).iter());
        }
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }

    pub fn set_from_slice(&mut self, p: &[f64]) {
        let d = self.input_dim();
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        for k in 0..HIDDEN {
            for j in 0..d {
                self.w1[(k, j)] = p[k * d + j];
            }
        }
        let o = HIDDEN * d;
        for k in 0..HIDDEN {
            self.b1[k] = p[o + k];
            self.w2[k] = p[o + HIDDEN + k];
        }
        self.b2 = p[o + 2 * HIDDEN];
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(AadError::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: d,
            });
        }
        Ok(())
    }

    /// Output for one lag vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut out = self.b2;
        for k in 0..HIDDEN {
            let z: f64 = self.w1.row(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[k];
            out += self.w2[k] * z.tanh();
        }
        Ok(out)
    }

    /// Hidden activations (rows × HIDDEN) and outputs for a batch of lag vectors.
    fn forward_batch(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut h = x * self.w1.transpose();
        for mut row in h.row_iter_mut() {
            for k in 0..HIDDEN {
                row[k] = (row[k] + self.b1[k]).tanh();
            }
        }
        let y = (&h * &self.w2).add_scalar(self.b2);
        (h, y)
    }

    /// Outputs for every row of a design.
    pub fn predict(&self, x: &LaggedDesign) -> Result<Vec<f64>> {
        self.check_dim(x.cols())?;
        Ok(self.forward_batch(x.matrix()).1.as_slice().to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    /// Writes `<path>.json`, `<path>.w1.bin` (2 × L·C) and `<path>.out.bin`
    /// (1 × 5: b1, w2, b2).
    pub fn save(&self, path: &Path) -> Result<()> {
        let w1_file = sibling(path, ".w1.bin");
        let out_file = sibling(path, ".out.bin");
        let w1 = RawMatrix {
            rows: HIDDEN,
            cols: self.input_dim(),
            data: (0..HIDDEN)
                .flat_map(|k| self.w1.row(k).iter().map(|v| *v as f32).collect::<Vec<_>>())
                .collect(),
        };
        let tail: Vec<f32> = self
            .b1
            .iter()
            .chain(self.w2.iter())
            .chain(std::iter::once(&self.b2))
            .map(|v| *v as f32)
            .collect();
        write_matrix(&w1_file, &w1)?;
        write_matrix(
            &out_file,
            &RawMatrix {
                rows: 1,
                cols: tail.len(),
                data: tail,
            },
        )?;
        let name = |p: &Path| p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        write_json(
            &sibling(path, ".json"),
            &NnDescriptor {
                kind: "nn-sr".into(),
                hidden: HIDDEN,
                lags: self.lags,
                channels: self.channels,
                parameters: self.n_params(),
                blocks: vec![name(&w1_file), name(&out_file)],
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = sibling(path, ".json");
        let desc: NnDescriptor = read_json(&json)?;
        if desc.hidden != HIDDEN || desc.blocks.len() != 2 {
            return Err(AadError::format(&json, "unsupported network layout"));
        }
        let w1 = read_matrix(&json.with_file_name(&desc.blocks[0]))?;
        let tail = read_matrix(&json.with_file_name(&desc.blocks[1]))?;
        let d = desc.lags * desc.channels;
        if (w1.rows, w1.cols) != (HIDDEN, d) || tail.data.len() != 2 * HIDDEN + 1 {
            return Err(AadError::format(&json, "weight blocks disagree with descriptor"));
        }
        let mut m = Self::zeros(desc.lags, desc.channels);
        let mut p: Vec<f64> = w1.data.iter().map(|v| *v as f64).collect();
        p.extend(tail.data.iter().map(|v| *v as f64));
        m.set_from_slice(&p);
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct NnDescriptor {
    kind: String,
    hidden: usize,
    lags: usize,
    channels: usize,
    parameters: usize,
    blocks: Vec<String>,
}

fn check_batch(model: &NnSrModel, x: &DMatrix<f64>, s: &[f64]) -> Result<()> {
    model.check_dim(x.ncols())?;
    if x.nrows() != s.len() {
        return Err(AadError::DimensionMismatch {
            context: "batch targets",
            expected: x.nrows(),
            got: s.len(),
        });
    }
    if s.len() < 2 {
        return Err(AadError::InsufficientData("a batch needs at least 2 samples".into()));
    }
    Ok(())
}

/// `1 − pearson(ŝ, s)` over a batch (rows of `x` are lag vectors).
pub fn nnsr_loss(model: &NnSrModel, x: &DMatrix<f64>, s: &[f64]) -> Result<Loss> {
    check_batch(model, x, s)?;
    let (_, y) = model.forward_batch(x);
    let target = pearson(s, s)?;
    if target.degenerate {
        return Err(AadError::ConstantTarget);
    }
    let r = pearson(y.as_slice(), s)?;
    Ok(Loss {
        value: 1.0 - r.value,
        degenerate: r.degenerate,
    })
}

/// Analytic gradient of [`nnsr_loss`].
pub fn nnsr_grad(model: &NnSrModel, x: &DMatrix<f64>, s: &[f64]) -> Result<(Loss, Gradient)> {
    check_batch(model, x, s)?;
    let m = s.len() as f64;
    let (h, y) = model.forward_batch(x);
    let s_mean = s.iter().sum::<f64>() / m;
    let b: DVector<f64> = DVector::from_iterator(s.len(), s.iter().map(|v| v - s_mean));
    let a = y.add_scalar(-y.mean());
    let (na, nb) = (a.norm(), b.norm());
    let target = pearson(s, s)?;
    if target.degenerate {
        return Err(AadError::ConstantTarget);
    }
    let r = pearson(y.as_slice(), s)?;
    let loss = Loss {
        value: 1.0 - r.value,
        degenerate: r.degenerate,
    };
    let mut grad = Gradient {
        w1: DMatrix::zeros(HIDDEN, model.input_dim()),
        b1: DVector::zeros(HIDDEN),
        w2: DVector::zeros(HIDDEN),
        b2: 0.0,
        degenerate: r.degenerate,
    };
    if r.degenerate {
        return Ok((loss, grad));
    }
    let rho = a.dot(&b) / (na * nb);
    // dL/dy = −dρ/dy, with dρ/dy_i = b_i/(‖a‖‖b‖) − ρ a_i/‖a‖².
    let g: DVector<f64> = -(&b / (na * nb) - &a * (rho / (na * na)));
    grad.b2 = g.sum();
    grad.w2 = h.tr_mul(&g);
    // Back through tanh: dz = g w2ᵀ ⊙ (1 − h²).
    let mut dz = DMatrix::zeros(h.nrows(), HIDDEN);
    for i in 0..h.nrows() {
        for k in 0..HIDDEN {
            dz[(i, k)] = g[i] * model.w2[k] * (1.0 - h[(i, k)] * h[(i, k)]);
        }
    }
    grad.w1 = dz.tr_mul(x);
    for k in 0..HIDDEN {
        grad.b1[k] = dz.column(k).sum();
    }
    Ok((loss, grad))
}

impl Gradient {
    /// Same layout as [`NnSrModel::to_vec`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for k in 0..HIDDEN {
            v.extend(self.w1.row(k).iter());
        }
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Lags per channel (27 = 420 ms at 64 Hz).
    pub lags: usize,
    /// Samples per loss window `M`.
    pub batch_len: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Fraction of batches, taken from the end of each sequence, held out
    /// for early stopping.
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lags: 27,
            batch_len: 640,
            lr: 1e-3,
            max_epochs: 100,
            seed: 0,
            validation_fraction: 0.2,
            patience: 10,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_len < 2 {
            return Err(AadError::param("batch_len", "must be at least 2"));
        }
        if self.lags == 0 {
            return Err(AadError::param("lags", "must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(AadError::param("lr", "must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(AadError::param("validation_fraction", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// One training sequence: EEG channels and the attended envelope, equally long.
#[derive(Debug, Clone, Copy)]
pub struct Sequence<'a> {
    pub eeg: &'a [Vec<f64>],
    pub target: &'a [f64],
}

struct Batch {
    x: DMatrix<f64>,
    s: Vec<f64>,
}

/// Consecutive, non-overlapping batches of `m` design rows.
fn batches(seq: &Sequence<'_>, lags: usize, m: usize) -> Result<Vec<Batch>> {
    let t = seq.target.len();
    if seq.eeg.iter().any(|c| c.len() != t) {
        return Err(AadError::param("sequence", "EEG and target differ in length"));
    }
    let rows = (t + 1).saturating_sub(lags);
    let mut out = Vec::with_capacity(rows / m);
    let mut start = 0;
    while start + m <= rows {
        let window: Vec<&[f64]> = seq.eeg.iter().map(|c| &c[start..start + m + lags - 1]).collect();
        let x = LaggedDesign::build(&window, lags, LagDirection::AntiCausal)?;
        let s = seq.target[start..start + m].to_vec();
        // Constant targets carry no gradient and make the loss undefined.
        if !pearson(&s, &s)?.degenerate {
            out.push(Batch {
                x: x.matrix().clone(),
                s,
            });
        }
        start += m;
    }
    Ok(out)
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// Trains from the seeded initialization; returns the model with the lowest
/// validation loss (or the last model when there is no validation data).
pub fn nnsr_train(data: &[Sequence<'_>], cfg: &TrainConfig) -> Result<(NnSrModel, TrainReport)> {
    cfg.validate()?;
    let channels = data
        .first()
        .map(|s| s.eeg.len())
        .ok_or_else(|| AadError::InsufficientData("no training sequences".into()))?;
    let model = NnSrModel::init(cfg.lags, channels, cfg.seed);
    nnsr_train_from(model, data, cfg)
}

pub fn nnsr_train_from(
    mut model: NnSrModel,
    data: &[Sequence<'_>],
    cfg: &TrainConfig,
) -> Result<(NnSrModel, TrainReport)> {
    cfg.validate()?;
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for seq in data {
        if seq.eeg.len() != model.channels {
            return Err(AadError::DimensionMismatch {
                context: "training channels",
                expected: model.channels,
                got: seq.eeg.len(),
            });
        }
        let mut b = batches(seq, cfg.lags, cfg.batch_len)?;
        let n_val = (b.len() as f64 * cfg.validation_fraction).round() as usize;
        let n_val = if b.len() > 1 { n_val.min(b.len() - 1) } else { 0 };
        valid.extend(b.drain(b.len() - n_val..));
        train.extend(b);
    }
    if train.is_empty() {
        return Err(AadError::InsufficientData(format!(
            "no complete training batch of {} samples",
            cfg.batch_len
        )));
    }
    let mean_loss = |m: &NnSrModel, set: &[Batch]| -> Result<f64> {
        let mut acc = 0.0;
        for b in set {
            acc += nnsr_loss(m, &b.x, &b.s)?.value;
        }
        Ok(acc / set.len() as f64)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ba7c4e5);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        best_epoch: 0,
    };
    let mut best = model.clone();
    let mut best_val = if valid.is_empty() { f64::INFINITY } else { mean_loss(&model, &valid)? };
    let mut since_best = 0;
    let mut diverged_run = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (loss, g) = nnsr_grad(&model, &train[i].x, &train[i].s)?;
            epoch_loss += loss.value;
            if cfg.lr > 0.0 && !g.degenerate {
                model.w1 -= &g.w1 * cfg.lr;
                model.b1 -= &g.b1 * cfg.lr;
                model.w2 -= &g.w2 * cfg.lr;
                model.b2 -= g.b2 * cfg.lr;
            }
        }
        epoch_loss /= train.len() as f64;
        report.train_loss.push(epoch_loss);
        if !model.is_finite() || !epoch_loss.is_finite() {
            return Err(AadError::Diverged(format!("non-finite parameters at epoch {epoch}")));
        }
        diverged_run = if epoch_loss > DIVERGED_LOSS { diverged_run + 1 } else { 0 };
        if diverged_run >= cfg.patience.max(1) {
            return Err(AadError::Diverged(format!(
                "training loss above {DIVERGED_LOSS} for {diverged_run} epochs (last {epoch_loss:.6}, lr {})",
                cfg.lr
            )));
        }
        if valid.is_empty() {
            best = model.clone();
            report.best_epoch = epoch;
            continue;
        }
        let v = mean_loss(&model, &valid)?;
        report.validation_loss.push(v);
        if v < best_val {
            best_val = v;
            best = model.clone();
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, report))
}
