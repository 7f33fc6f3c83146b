//! Least-squares stimulus-reconstruction decoders.
//!
//! Training works on per-segment second-order statistics. Ridge weights are
//! relative to `z = trace(XᵀX)/(L·C)` and lasso weights to `q = ‖Xᵀs‖_∞`, so a
//! single grid of relative values applies to any data scale. Late
//! integration (`AvgDec`) solves per segment with per-segment anchors and
//! averages the decoders; early integration (`AvgCorr`) sums the statistics
//! and solves once.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, read_matrix, sibling, write_json, write_matrix, RawMatrix};
use crate::decision::Decision;
use crate::error::{AadError, Result};
use crate::lagged::{lag_column, LaggedDesign};
use crate::lasso::{AdmmOptions, AdmmSolver, LassoSolution};
use crate::linalg::{gram, relative_residual, spd_solve};
use crate::signal::pearson;

/// Ridge solves whose normal-equation residual exceeds this are rejected.
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Ridge,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integration {
    /// Average per-segment decoders.
    AvgDec,
    /// Sum per-segment statistics, then solve once.
    AvgCorr,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::Ridge => "ridge",
            Penalty::Lasso => "lasso",
        })
    }
}

impl fmt::Display for Integration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integration::AvgDec => "avgdec",
            Integration::AvgCorr => "avgcorr",
        })
    }
}

/// Ordered, strictly increasing, nonnegative relative regularization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AadError::param("lambda grid", "must not be empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(AadError::param("lambda grid", "values must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AadError::param("lambda grid", "values must be strictly increasing"));
        }
        Ok(Self(values))
    }

    /// `n` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(AadError::param("lambda grid", "need 0 < lo < hi and n >= 2"));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let values = (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
                }
            })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for LambdaGrid {
    /// Ten values log-spaced over `[1e-6, 1]`.
    fn default() -> Self {
        Self::log_spaced(1e-6, 1.0, 10).expect("valid default grid")
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = AadError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.0
    }
}

/// Second-order statistics of one training segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub rxx: DMatrix<f64>,
    pub rxs: DVector<f64>,
    /// `sᵀs`, needed only to evaluate objectives.
    pub target_energy: f64,
    pub nsamples: usize,
    pub lags: usize,
    pub channels: usize,
}

impl SegmentStats {
    pub fn dim(&self) -> usize {
        self.rxs.len()
    }

    /// Ridge anchor `z = trace(Rxx)/(L·C)`.
    pub fn ridge_anchor(&self) -> f64 {
        self.rxx.trace() / self.dim() as f64
    }

    /// Lasso anchor `q = ‖rxs‖_∞`.
    pub fn lasso_anchor(&self) -> f64 {
        self.rxs.amax()
    }

    /// Sum of statistics, accumulated in slice order.
    pub fn sum(parts: &[&SegmentStats]) -> Result<SegmentStats> {
        let first = parts
            .first()
            .ok_or_else(|| AadError::InsufficientData("no segments to sum".into()))?;
        let mut acc = (*first).clone();
        for p in &parts[1..] {
            if p.dim() != acc.dim() || p.lags != acc.lags {
                return Err(AadError::DimensionMismatch {
                    context: "segment statistics",
                    expected: acc.dim(),
                    got: p.dim(),
                });
            }
            acc.rxx += &p.rxx;
            acc.rxs += &p.rxs;
            acc.target_energy += p.target_energy;
            acc.nsamples += p.nsamples;
        }
        Ok(acc)
    }
}

/// `XᵀX`, `Xᵀs` and `sᵀs` of one segment.
pub fn segment_stats(x: &LaggedDesign, s: &[f64]) -> Result<SegmentStats> {
    if x.rows() != s.len() {
        return Err(AadError::DimensionMismatch {
            context: "segment_stats target length",
            expected: x.rows(),
            got: s.len(),
        });
    }
    if x.rows() == 0 {
        return Err(AadError::InsufficientData("segment has no valid rows".into()));
    }
    let sv = DVector::from_column_slice(s);
    Ok(SegmentStats {
        rxx: gram(x.matrix()),
        rxs: x.matrix().tr_mul(&sv),
        target_energy: sv.norm_squared(),
        nsamples: x.rows(),
        lags: x.lags(),
        channels: x.channels(),
    })
}

/// How a decoder was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderMeta {
    pub penalty: Penalty,
    /// `None` for a direct single-problem solve.
    pub integration: Option<Integration>,
    pub lambda: f64,
    /// False if any lasso solve hit its iteration limit.
    pub converged: bool,
}

impl DecoderMeta {
    pub fn flavor(&self) -> String {
        match self.integration {
            Some(i) => format!("mmse-{i}-{}", self.penalty),
            None => self.penalty.to_string(),
        }
    }
}

/// Backward decoder: one weight per (channel, lag), channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    weights: DVector<f64>,
    lags: usize,
    channels: usize,
    labels: Vec<String>,
    pub meta: DecoderMeta,
}

#[derive(Serialize, Deserialize)]
struct DecoderDescriptor {
    kind: String,
    flavor: String,
    meta: DecoderMeta,
    lags: usize,
    channels: usize,
    channel_labels: Vec<String>,
    weights_file: String,
}

impl Decoder {
    pub fn new(weights: DVector<f64>, lags: usize, channels: usize, meta: DecoderMeta) -> Result<Self> {
        if weights.len() != lags * channels {
            return Err(AadError::DimensionMismatch {
                context: "decoder weights",
                expected: lags * channels,
                got: weights.len(),
            });
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(AadError::NonFinite("decoder weights"));
        }
        let labels = (1..=channels).map(|i| format!("ch{i}")).collect();
        Ok(Self {
            weights,
            lags,
            channels,
            labels,
            meta,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.channels {
            return Err(AadError::DimensionMismatch {
                context: "decoder channel labels",
                expected: self.channels,
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weight(&self, channel: usize, lag: usize) -> f64 {
        self.weights[lag_column(channel, lag, self.lags)]
    }

    /// Weights as a C×L matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.channels, self.lags, |c, l| self.weight(c, l))
    }

    /// Inverse of [`Decoder::to_matrix`].
    pub fn from_matrix(m: &DMatrix<f64>, meta: DecoderMeta) -> Result<Self> {
        let (channels, lags) = m.shape();
        let mut w = DVector::zeros(channels * lags);
        for c in 0..channels {
            for l in 0..lags {
                w[lag_column(c, l, lags)] = m[(c, l)];
            }
        }
        Self::new(w, lags, channels, meta)
    }

    /// Writes `<path>.json` (descriptor) and `<path>.bin` (weights, C×L).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bin = sibling(path, ".bin");
        let desc = DecoderDescriptor {
            kind: "decoder".into(),
            flavor: self.meta.flavor(),
            meta: self.meta.clone(),
            lags: self.lags,
            channels: self.channels,
            channel_labels: self.labels.clone(),
            weights_file: bin.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        };
        let data = RawMatrix {
            rows: self.channels,
            cols: self.lags,
            data: (0..self.channels)
                .flat_map(|c| (0..self.lags).map(move |l| (c, l)))
                .map(|(c, l)| self.weight(c, l) as f32)
                .collect(),
        };
        write_matrix(&bin, &data)?;
        write_json(&sibling(path, ".json"), &desc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = sibling(path, ".json");
        let desc: DecoderDescriptor = read_json(&json)?;
        let bin = json.with_file_name(&desc.weights_file);
        let raw = read_matrix(&bin)?;
        if (raw.rows, raw.cols) != (desc.channels, desc.lags) {
            return Err(AadError::format(&bin, "weight block shape disagrees with descriptor"));
        }
        let m = DMatrix::from_fn(raw.rows, raw.cols, |r, c| raw.data[r * raw.cols + c] as f64);
        Self::from_matrix(&m, desc.meta)?.with_labels(desc.channel_labels)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(AadError::param("lambda", format!("{lambda} is not a finite value >= 0")));
    }
    Ok(())
}

fn ridge_weights(stats: &SegmentStats, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    let n = stats.dim();
    let shift = lambda * stats.ridge_anchor();
    let a = &stats.rxx + DMatrix::identity(n, n) * shift;
    let d = spd_solve(&a, &stats.rxs)?;
    let res = relative_residual(&a, &d, &stats.rxs);
    if res > RESIDUAL_TOL {
        return Err(AadError::Singular {
            dim: n,
            deficiency: crate::linalg::rank_deficiency(&a).max(1),
        });
    }
    Ok(d)
}

/// Solves `(Rxx + λ·z·I) d = rxs`.
pub fn solve_ridge(stats: &SegmentStats, lambda: f64) -> Result<Decoder> {
    let d = ridge_weights(stats, lambda)?;
    let meta = DecoderMeta {
        penalty: Penalty::Ridge,
        integration: None,
        lambda,
        converged: true,
    };
    Decoder::new(d, stats.lags, stats.channels, meta)
}

/// Ridge decoders of one design for every λ in `lambdas`, each solved
/// independently so that one singular value of λ does not hide the others.
///
/// Designs with fewer rows than columns are solved in the dual,
/// `d = Xᵀ(XXᵀ + λzI)⁻¹s`, which yields the same weights for λ > 0.
pub fn ridge_path(x: &LaggedDesign, s: &[f64], lambdas: &[f64]) -> Result<Vec<Result<Decoder>>> {
    let (n, dim) = (x.rows(), x.cols());
    if n >= dim {
        let stats = segment_stats(x, s)?;
        return Ok(lambdas.iter().map(|&l| solve_ridge(&stats, l)).collect());
    }
    if s.len() != n {
        return Err(AadError::DimensionMismatch {
            context: "ridge_path target length",
            expected: n,
            got: s.len(),
        });
    }
    let k = x.matrix() * x.matrix().transpose();
    let z = k.trace() / dim as f64;
    let sv = DVector::from_column_slice(s);
    let solve_one = |lambda: f64| -> Result<Decoder> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Err(AadError::Singular {
                dim,
                deficiency: dim - n,
            });
        }
        let a = &k + DMatrix::identity(n, n) * (lambda * z);
        let alpha = spd_solve(&a, &sv)?;
        let meta = DecoderMeta {
            penalty: Penalty::Ridge,
            integration: None,
            lambda,
            converged: true,
        };
        Decoder::new(x.matrix().tr_mul(&alpha), x.lags(), x.channels(), meta)
    };
    Ok(lambdas.iter().map(|&l| solve_one(l)).collect())
}

/// Lasso decoders for every λ in `lambdas`, sharing one factorization and
/// warm-starting from larger to smaller λ. Results follow the input order.
pub fn lasso_path(stats: &SegmentStats, lambdas: &[f64], opts: &AdmmOptions) -> Result<Vec<Decoder>> {
    for &l in lambdas {
        check_lambda(l)?;
    }
    let solver = AdmmSolver::new(&stats.rxx, *opts)?;
    let q = stats.lasso_anchor();
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<Decoder>> = vec![None; lambdas.len()];
    let mut warm: Option<LassoSolution> = None;
    for i in order {
        let sol = solver.solve(&stats.rxs, lambdas[i] * q, warm.as_ref());
        let meta = DecoderMeta {
            penalty: Penalty::Lasso,
            integration: None,
            lambda: lambdas[i],
            converged: sol.converged,
        };
        out[i] = Some(Decoder::new(sol.weights.clone(), stats.lags, stats.channels, meta)?);
        warm = Some(sol);
    }
    Ok(out.into_iter().map(|d| d.expect("every lambda solved")).collect())
}

fn lasso_weights(stats: &SegmentStats, lambda: f64, opts: &AdmmOptions) -> Result<LassoSolution> {
    check_lambda(lambda)?;
    let solver = AdmmSolver::new(&stats.rxx, *opts)?;
    Ok(solver.solve(&stats.rxs, lambda * stats.lasso_anchor(), None))
}

/// Minimizes `½‖s − Xd‖² + λ·q·‖d‖₁` with ADMM.
pub fn solve_lasso_admm(stats: &SegmentStats, lambda: f64, opts: &AdmmOptions) -> Result<Decoder> {
    let sol = lasso_weights(stats, lambda, opts)?;
    if !sol.converged {
        log::warn!("lasso (lambda {lambda}) stopped after {} iterations without converging", sol.iterations);
    }
    let meta = DecoderMeta {
        penalty: Penalty::Lasso,
        integration: None,
        lambda,
        converged: sol.converged,
    };
    Decoder::new(sol.weights, stats.lags, stats.channels, meta)
}

fn solve(stats: &SegmentStats, lambda: f64, penalty: Penalty, opts: &AdmmOptions) -> Result<Decoder> {
    match penalty {
        Penalty::Ridge => solve_ridge(stats, lambda),
        Penalty::Lasso => solve_lasso_admm(stats, lambda, opts),
    }
}

/// Per-segment solves averaged with equal weights.
pub fn train_avgdec(
    segments: &[SegmentStats],
    lambda: f64,
    penalty: Penalty,
    opts: &AdmmOptions,
) -> Result<Decoder> {
    let first = segments
        .first()
        .ok_or_else(|| AadError::InsufficientData("no training segments".into()))?;
    let mut sum = DVector::zeros(first.dim());
    let mut converged = true;
    for (k, seg) in segments.iter().enumerate() {
        if seg.dim() != first.dim() {
            return Err(AadError::DimensionMismatch {
                context: "segment statistics",
                expected: first.dim(),
                got: seg.dim(),
            }
            .in_segment(k));
        }
        let d = solve(seg, lambda, penalty, opts).map_err(|e| e.in_segment(k))?;
        converged &= d.meta.converged;
        sum += d.weights();
    }
    let meta = DecoderMeta {
        penalty,
        integration: Some(Integration::AvgDec),
        lambda,
        converged,
    };
    Decoder::new(sum / segments.len() as f64, first.lags, first.channels, meta)
}

/// One solve on the summed statistics with global anchors.
pub fn train_avgcorr(
    segments: &[SegmentStats],
    lambda: f64,
    penalty: Penalty,
    opts: &AdmmOptions,
) -> Result<Decoder> {
    let refs: Vec<&SegmentStats> = segments.iter().collect();
    let total = SegmentStats::sum(&refs)?;
    let mut d = solve(&total, lambda, penalty, opts)?;
    d.meta.integration = Some(Integration::AvgCorr);
    Ok(d)
}

pub fn train(
    integration: Integration,
    segments: &[SegmentStats],
    lambda: f64,
    penalty: Penalty,
    opts: &AdmmOptions,
) -> Result<Decoder> {
    match integration {
        Integration::AvgDec => train_avgdec(segments, lambda, penalty, opts),
        Integration::AvgCorr => train_avgcorr(segments, lambda, penalty, opts),
    }
}

/// `ŝ(t) = dᵀx(t)` for every row of the design.
pub fn reconstruct(d: &Decoder, x: &LaggedDesign) -> Result<Vec<f64>> {
    if x.cols() != d.weights().len() || x.lags() != d.lags() {
        return Err(AadError::DimensionMismatch {
            context: "reconstruct design columns",
            expected: d.weights().len(),
            got: x.cols(),
        });
    }
    Ok((x.matrix() * d.weights()).as_slice().to_vec())
}

/// Picks the envelope most correlated with the reconstruction on `window`.
///
/// `recon` and every envelope are indexed on the same time axis.
pub fn decide<S: AsRef<[f64]>>(recon: &[f64], envelopes: &[S], window: Range<usize>) -> Result<Decision> {
    if envelopes.len() < 2 {
        return Err(AadError::param("envelopes", "need at least two speakers"));
    }
    let in_bounds = |n: usize| window.start < window.end && window.end <= n;
    if !in_bounds(recon.len()) || envelopes.iter().any(|e| !in_bounds(e.as_ref().len())) {
        return Err(AadError::param("window", format!("{window:?} outside the signals")));
    }
    let r = &recon[window.clone()];
    let mut scores = Vec::with_capacity(envelopes.len());
    let mut all_degenerate = true;
    for e in envelopes {
        let c = pearson(r, &e.as_ref()[window.clone()])?;
        all_degenerate &= c.degenerate;
        scores.push(c.value);
    }
    Ok(Decision::argmax(scores, all_degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagged::LagDirection;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn seeded_segment(seed: u64, t: usize, c: usize, lags: usize) -> (LaggedDesign, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chans: Vec<Vec<f64>> = (0..c).map(|_| randn(&mut rng, t)).collect();
        let x = LaggedDesign::build(&chans, lags, LagDirection::AntiCausal).unwrap();
        let s = randn(&mut rng, x.rows());
        (x, s)
    }

    fn toy_stats(rxx: DMatrix<f64>, rxs: DVector<f64>) -> SegmentStats {
        SegmentStats {
            lags: rxs.len(),
            channels: 1,
            rxx,
            rxs,
            target_energy: 0.0,
            nsamples: 1,
        }
    }

    #[test]
    fn dual_ridge_matches_primal() {
        // 12 rows, 4 channels x 5 lags: wider than tall.
        let (x, s) = seeded_segment(8, 16, 4, 5);
        assert!(x.rows() < x.cols());
        let lambdas = [1e-3, 0.1, 1.0];
        let dual = ridge_path(&x, &s, &lambdas).unwrap();
        let dual: Vec<Decoder> = dual.into_iter().map(|d| d.unwrap()).collect();
        let stats = segment_stats(&x, &s).unwrap();
        for (d, &l) in dual.iter().zip(&lambdas) {
            let primal = solve_ridge(&stats, l).unwrap();
            let diff = (d.weights() - primal.weights()).amax();
            assert!(diff < 1e-9 * primal.weights().amax().max(1.0), "lambda {l}: {diff}");
        }
        let zero = ridge_path(&x, &s, &[0.0]).unwrap();
        assert!(matches!(zero[0], Err(AadError::Singular { .. })));
    }

    #[test]
    fn lasso_path_matches_cold_solves() {
        let (x, s) = seeded_segment(5, 120, 3, 4);
        let stats = segment_stats(&x, &s).unwrap();
        let lambdas = [0.01, 0.1, 0.5];
        let path = lasso_path(&stats, &lambdas, &AdmmOptions::default()).unwrap();
        for (d, &l) in path.iter().zip(&lambdas) {
            let cold = solve_lasso_admm(&stats, l, &AdmmOptions::default()).unwrap();
            assert_eq!(d.meta.lambda, l);
            assert!((d.weights() - cold.weights()).amax() < 1e-5);
        }
    }

    #[test]
    fn stats_of_ones() {
        let x = LaggedDesign::anti_causal(&[1.0; 7], 1).unwrap();
        let st = segment_stats(&x, &[1.0; 7]).unwrap();
        assert_eq!(st.rxx[(0, 0)], 7.0);
        assert_eq!(st.rxs[0], 7.0);
        assert_eq!(st.nsamples, 7);
    }

    #[test]
    fn stats_match_naive_products() {
        let (x, s) = seeded_segment(3, 50, 3, 4);
        let st = segment_stats(&x, &s).unwrap();
        let m = x.matrix();
        for i in 0..m.ncols() {
            let mut r = 0.0;
            for t in 0..m.nrows() {
                r += m[(t, i)] * s[t];
            }
            assert!((st.rxs[i] - r).abs() < 1e-10);
            for j in 0..m.ncols() {
                let mut acc = 0.0;
                for t in 0..m.nrows() {
                    acc += m[(t, i)] * m[(t, j)];
                }
                assert!((st.rxx[(i, j)] - acc).abs() < 1e-10);
                assert_eq!(st.rxx[(i, j)], st.rxx[(j, i)]);
            }
        }
    }

    #[test]
    fn ridge_closed_form() {
        let v = DVector::from_vec(vec![2.0, -4.0, 6.0]);
        let st = toy_stats(DMatrix::identity(3, 3), v.clone());
        let d = solve_ridge(&st, 1.0).unwrap();
        assert!((d.weights() - v / 2.0).amax() < 1e-15);
    }

    #[test]
    fn ridge_rank_deficient_without_regularization() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let design = LaggedDesign::build(&[&x[..], &x[..]], 1, LagDirection::AntiCausal).unwrap();
        let st = segment_stats(&design, &x).unwrap();
        assert!(matches!(solve_ridge(&st, 0.0), Err(AadError::Singular { deficiency: 1, .. })));
        assert!(solve_ridge(&st, 1e-3).is_ok());
    }

    #[test]
    fn ridge_heavy_shrinkage() {
        let (x, s) = seeded_segment(5, 200, 2, 3);
        let st = segment_stats(&x, &s).unwrap();
        let ls = solve_ridge(&st, 0.0).unwrap();
        let big = solve_ridge(&st, 1e6).unwrap();
        assert!(big.weights().norm() <= 1e-4 * ls.weights().norm());
    }

    #[test]
    fn delayed_copy_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let env = randn(&mut rng, 300);
        // EEG channel lags the envelope by 2 samples: x(t + 2) = s(t).
        let mut eeg = vec![0.0; 300];
        eeg[2..].copy_from_slice(&env[..298]);
        let x = LaggedDesign::anti_causal(&eeg, 4).unwrap();
        let s = &env[..x.rows()];
        let d = solve_ridge(&segment_stats(&x, s).unwrap(), 0.0).unwrap();
        for l in 0..4 {
            let expect = if l == 2 { 1.0 } else { 0.0 };
            assert!((d.weight(0, l) - expect).abs() < 1e-8, "lag {l}: {}", d.weight(0, l));
        }
        let recon = reconstruct(&d, &x).unwrap();
        assert!(pearson(&recon, s).unwrap().value >= 0.999);
    }

    #[test]
    fn avgcorr_equals_concatenated_ridge() {
        let segs: Vec<_> = (0..3).map(|k| seeded_segment(10 + k, 120, 3, 4)).collect();
        let stats: Vec<_> = segs.iter().map(|(x, s)| segment_stats(x, s).unwrap()).collect();
        let opts = AdmmOptions::default();
        let early = train_avgcorr(&stats, 0.01, Penalty::Ridge, &opts).unwrap();
        // Oracle: normal equations on the row-concatenated design.
        let rows: usize = segs.iter().map(|(x, _)| x.rows()).sum();
        let cols = segs[0].0.cols();
        let mut big = DMatrix::zeros(rows, cols);
        let mut target = DVector::zeros(rows);
        let mut r0 = 0;
        for (x, s) in &segs {
            big.rows_mut(r0, x.rows()).copy_from(x.matrix());
            target.rows_mut(r0, x.rows()).copy_from_slice(s);
            r0 += x.rows();
        }
        let xtx = big.transpose() * &big;
        let z = xtx.trace() / cols as f64;
        let a = &xtx + DMatrix::identity(cols, cols) * (0.01 * z);
        let oracle = a.lu().solve(&(big.transpose() * &target)).unwrap();
        assert!((early.weights() - oracle).amax() < 1e-9);
        assert_eq!(early.meta.flavor(), "mmse-avgcorr-ridge");
    }

    #[test]
    fn avgdec_is_mean_of_segment_solves() {
        let stats: Vec<_> = (0..3)
            .map(|k| {
                let (x, s) = seeded_segment(20 + k, 80, 2, 3);
                segment_stats(&x, &s).unwrap()
            })
            .collect();
        let opts = AdmmOptions::default();
        let late = train_avgdec(&stats, 0.1, Penalty::Ridge, &opts).unwrap();
        let mean = stats
            .iter()
            .map(|s| solve_ridge(s, 0.1).unwrap().weights().clone())
            .fold(DVector::zeros(6), |a, b| a + b)
            / 3.0;
        assert!((late.weights() - mean).amax() < 1e-12);
        let single = train_avgdec(&stats[..1], 0.1, Penalty::Ridge, &opts).unwrap();
        assert_eq!(single.weights(), solve_ridge(&stats[0], 0.1).unwrap().weights());
        let twice = train_avgdec(&[stats[1].clone(), stats[1].clone()], 0.1, Penalty::Lasso, &opts).unwrap();
        let once = solve_lasso_admm(&stats[1], 0.1, &opts).unwrap();
        assert!((twice.weights() - once.weights()).amax() < 1e-15);
    }

    #[test]
    fn avgdec_names_failing_segment() {
        let good = segment_stats(&seeded_segment(1, 50, 1, 2).0, &seeded_segment(1, 50, 1, 2).1).unwrap();
        let x = [1.0, 2.0, 3.0];
        let design = LaggedDesign::build(&[&x[..], &x[..]], 1, LagDirection::AntiCausal).unwrap();
        let mut bad = segment_stats(&design, &x).unwrap();
        bad.lags = 2;
        bad.channels = 1;
        let err = train_avgdec(&[good, bad], 0.0, Penalty::Ridge, &AdmmOptions::default()).unwrap_err();
        assert!(matches!(err, AadError::Segment { index: 1, .. }), "{err}");
    }

    #[test]
    fn lasso_edges() {
        let (x, s) = seeded_segment(7, 100, 2, 3);
        let st = segment_stats(&x, &s).unwrap();
        let opts = AdmmOptions::default();
        let ls = solve_ridge(&st, 0.0).unwrap();
        let l0 = solve_lasso_admm(&st, 0.0, &opts).unwrap();
        assert!((l0.weights() - ls.weights()).norm() <= 1e-5 * ls.weights().norm());
        let l1 = solve_lasso_admm(&st, 1.0, &opts).unwrap();
        assert!(l1.weights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lasso_summed_objective_equals_concatenated() {
        let segs: Vec<_> = (0..3).map(|k| seeded_segment(40 + k, 60, 2, 3)).collect();
        let stats: Vec<_> = segs.iter().map(|(x, s)| segment_stats(x, s).unwrap()).collect();
        let lam = 0.05;
        let d = train_avgcorr(&stats, lam, Penalty::Lasso, &AdmmOptions::default()).unwrap();
        let total = SegmentStats::sum(&stats.iter().collect::<Vec<_>>()).unwrap();
        let kappa = lam * total.lasso_anchor();
        let summed = crate::lasso::lasso_objective(&total.rxx, &total.rxs, total.target_energy, d.weights(), kappa);
        let mut direct = 0.0;
        for (x, s) in &segs {
            let r = x.matrix() * d.weights() - DVector::from_column_slice(s);
            direct += 0.5 * r.norm_squared();
        }
        direct += kappa * d.weights().lp_norm(1);
        assert!((summed - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn lasso_monotone_shrinkage() {
        let (x, s) = seeded_segment(8, 150, 3, 3);
        let st = segment_stats(&x, &s).unwrap();
        let grid = LambdaGrid::default();
        let norms: Vec<f64> = grid
            .values()
            .iter()
            .map(|&l| solve_lasso_admm(&st, l, &AdmmOptions::default()).unwrap().weights().lp_norm(1))
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{norms:?}");
        }
    }

    #[test]
    fn ridge_is_continuous_in_lambda() {
        let (x, s) = seeded_segment(2, 100, 2, 4);
        let st = segment_stats(&x, &s).unwrap();
        let a = solve_ridge(&st, 0.1).unwrap();
        let b = solve_ridge(&st, 0.1 + 1e-7).unwrap();
        assert!((a.weights() - b.weights()).norm() < 1e-5 * a.weights().norm());
    }

    #[test]
    fn reconstruct_selector_and_naive() {
        let (x, _) = seeded_segment(12, 40, 3, 4);
        let meta = DecoderMeta {
            penalty: Penalty::Ridge,
            integration: None,
            lambda: 0.0,
            converged: true,
        };
        let zero = Decoder::new(DVector::zeros(12), 4, 3, meta.clone()).unwrap();
        assert!(reconstruct(&zero, &x).unwrap().iter().all(|&v| v == 0.0));
        let mut w = DVector::zeros(12);
        w[lag_column(1, 2, 4)] = 1.0;
        let sel = Decoder::new(w, 4, 3, meta.clone()).unwrap();
        let out = reconstruct(&sel, &x).unwrap();
        for t in 0..x.rows() {
            assert_eq!(out[t], x.matrix()[(t, lag_column(1, 2, 4))]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Decoder::new(DVector::from_vec(randn(&mut rng, 12)), 4, 3, meta).unwrap();
        let out = reconstruct(&d, &x).unwrap();
        for t in 0..x.rows() {
            let mut acc = 0.0;
            for c in 0..3 {
                for l in 0..4 {
                    acc += d.weight(c, l) * x.matrix()[(t, c * 4 + l)];
                }
            }
            assert!((out[t] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn decide_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let envs: Vec<Vec<f64>> = (0..3).map(|_| randn(&mut rng, 100)).collect();
        let d = decide(&envs[2], &envs, 0..100).unwrap();
        assert_eq!(d.speaker, 2);
        let scaled: Vec<Vec<f64>> = envs.iter().enumerate().map(|(i, e)| e.iter().map(|v| v * (i + 1) as f64 * 3.0).collect()).collect();
        assert_eq!(decide(&envs[1], &scaled, 10..60).unwrap().speaker, decide(&envs[1], &envs, 10..60).unwrap().speaker);
        let tie = decide(&envs[0], &[envs[1].clone(), envs[1].clone()], 0..100).unwrap();
        assert!(tie.tie && tie.speaker == 0);
        let flat = decide(&[1.0; 100], &envs, 0..100).unwrap();
        assert!(flat.degenerate && flat.speaker == 0);
        assert!(decide(&envs[0], &envs, 50..101).is_err());
    }

    #[test]
    fn matrix_round_trip_and_serialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let meta = DecoderMeta {
            penalty: Penalty::Lasso,
            integration: Some(Integration::AvgDec),
            lambda: 0.25,
            converged: true,
        };
        // f32-representable weights survive the raw-float format exactly.
        let w: Vec<f64> = randn(&mut rng, 15).iter().map(|v| *v as f32 as f64).collect();
        let d = Decoder::new(DVector::from_vec(w), 5, 3, meta).unwrap();
        let back = Decoder::from_matrix(&d.to_matrix(), d.meta.clone()).unwrap();
        assert_eq!(back, d);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dec");
        let d = d.with_labels(vec!["Fz".into(), "Cz".into(), "Pz".into()]).unwrap();
        d.save(&path).unwrap();
        assert_eq!(Decoder::load(&path).unwrap(), d);
    }

    #[test]
    fn lambda_grid_default() {
        let g = LambdaGrid::default();
        assert_eq!(g.len(), 10);
        assert_eq!(g.values()[0], 1e-6);
        assert_eq!(g.values()[9], 1.0);
        assert!(LambdaGrid::new(vec![1.0, 0.5]).is_err());
        assert!(LambdaGrid::new(vec![-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn decide_invariant_to_affine_reconstruction(seed in 0u64..1000, a in 0.01f64..100.0, b in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let envs: Vec<Vec<f64>> = (0..2).map(|_| randn(&mut rng, 64)).collect();
            let r = randn(&mut rng, 64);
            let r2: Vec<f64> = r.iter().map(|v| a * v + b).collect();
            prop_assert_eq!(decide(&r, &envs, 0..64).unwrap().speaker, decide(&r2, &envs, 0..64).unwrap().speaker);
        }

        #[test]
        fn reshape_round_trip(c in 1usize..6, l in 1usize..8, seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let meta = DecoderMeta { penalty: Penalty::Ridge, integration: None, lambda: 0.0, converged: true };
            let d = Decoder::new(DVector::from_vec(randn(&mut rng, c * l)), l, c, meta.clone()).unwrap();
            prop_assert_eq!(Decoder::from_matrix(&d.to_matrix(), meta).unwrap(), d);
        }
    }
}
