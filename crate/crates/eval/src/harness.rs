//! Outer leave-one-segment-out loop and the multi-subject driver.

use aad_core::{NormStats, Pipeline, Trial};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{AadAlgorithm, TrainContext, Window};
use crate::algorithms::build_algorithm;
use crate::config::EvalConfig;
use crate::curve::{CurvePoint, MesdRow, MesdValue, PerformanceCurve};
use crate::error::{EvalError, Result};
use crate::mesd::{mesd, MesdResult};
use crate::metrics::Tally;
use crate::segment::{extract, samples, segment_dataset, windows};

/// One subject's trials after filtering, cut into segments.
#[derive(Debug, Clone)]
pub struct SubjectData {
    pub subject: String,
    pub pipeline: Pipeline,
    /// Filtered, not yet normalized.
    pub segments: Vec<Trial>,
    pub dropped_samples: usize,
}

impl SubjectData {
    pub fn prepare(subject: &str, trials: &[Trial], pipeline: Pipeline, segment_s: f64) -> Result<Self> {
        let filtered = trials
            .iter()
            .map(|t| pipeline.filter_trial(t))
            .collect::<aad_core::Result<Vec<_>>>()?;
        Self::from_filtered(subject, &filtered, pipeline, segment_s)
    }

    /// Segments trials that are already at the pipeline's rate and band.
    pub fn from_filtered(subject: &str, trials: &[Trial], pipeline: Pipeline, segment_s: f64) -> Result<Self> {
        let seg = segment_dataset(trials, segment_s)?;
        let segments = seg
            .segments
            .iter()
            .map(|s| extract(trials, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            subject: subject.to_string(),
            pipeline,
            segments,
            dropped_samples: seg.dropped_samples,
        })
    }

    pub fn fs(&self) -> f64 {
        self.segments.first().map_or(self.pipeline.fs, |s| s.fs())
    }
}

/// Seed for one (subject, algorithm, fold) task, independent of scheduling.
pub fn derive_seed(base: u64, subject: &str, algorithm: &str, fold: usize) -> u64 {
    // FNV-1a over the labels, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for b in subject.bytes().chain([0xff]).chain(algorithm.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ (fold as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one outer fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    /// One tally per window length.
    pub tallies: Vec<Tally>,
    pub fingerprint: u64,
}

/// Window lengths in samples at rate `fs`.
pub fn window_samples(taus: &[f64], fs: f64) -> Vec<usize> {
    taus.iter().map(|&t| samples(t, fs)).collect()
}

/// Trains on every segment but `fold`, normalized with training statistics
/// only, and decides each window of the held-out segment.
pub fn run_fold(alg: &dyn AadAlgorithm, data: &SubjectData, fold: usize, cfg: &EvalConfig) -> Result<FoldOutcome> {
    let n = data.segments.len();
    if fold >= n {
        return Err(EvalError::Config(format!("fold {fold} of {n} segments")));
    }
    let train_ids: Vec<usize> = (0..n).filter(|&i| i != fold).collect();
    let raw_train: Vec<Trial> = train_ids.iter().map(|&i| data.segments[i].clone()).collect();
    let norm = NormStats::fit_trials(&raw_train)?;
    let train = raw_train.iter().map(|t| norm.apply(t)).collect::<aad_core::Result<Vec<_>>>()?;
    let test = norm.apply(&data.segments[fold])?;
    let window_lens = window_samples(&cfg.taus, data.fs());
    let ctx = TrainContext {
        subject: &data.subject,
        fold,
        train: &train,
        train_ids: &train_ids,
        fs: data.fs(),
        windows: &window_lens,
        inner_folds: cfg.inner_folds,
        seed: derive_seed(cfg.seed, &data.subject, alg.id(), fold),
    };
    let trained = alg.train(&ctx)?;
    let mut tallies = Vec::with_capacity(window_lens.len());
    for (t, &len) in window_lens.iter().enumerate() {
        let mut tally = Tally::default();
        for (index, range) in windows(test.len(), len).into_iter().enumerate() {
            let w = Window {
                segment: &test,
                segment_id: fold,
                range,
                index,
            };
            tally.record(trained.decide(t, &w)?.is_correct(test.attended));
        }
        tallies.push(tally);
    }
    Ok(FoldOutcome {
        tallies,
        fingerprint: trained.fingerprint(),
    })
}

/// Leave-one-segment-out accuracy curve of one algorithm on one subject.
pub fn run_loso_cv(alg: &dyn AadAlgorithm, data: &SubjectData, cfg: &EvalConfig) -> Result<PerformanceCurve> {
    let n = data.segments.len();
    if n < 2 {
        return Err(EvalError::InsufficientData(format!(
            "subject {} has {n} segment(s); need at least 2",
            data.subject
        )));
    }
    let mut totals = vec![Tally::default(); cfg.taus.len()];
    for fold in 0..n {
        let out = run_fold(alg, data, fold, cfg).map_err(|e| EvalError::Fold {
            subject: data.subject.clone(),
            algorithm: alg.id().to_string(),
            fold,
            source: Box::new(e),
        })?;
        for (t, o) in totals.iter_mut().zip(out.tallies) {
            t.merge(o);
        }
    }
    let points = cfg
        .taus
        .iter()
        .zip(&totals)
        .filter_map(|(&tau, t)| {
            t.percent().map(|accuracy| CurvePoint {
                tau,
                accuracy,
                n_decisions: t.total,
            })
        })
        .collect();
    PerformanceCurve::new(alg.id(), &data.subject, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub subject: String,
    pub algorithm: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Algorithm-major, subjects in input order.
    pub curves: Vec<PerformanceCurve>,
    pub mesd: Vec<(MesdRow, MesdResult)>,
    pub failures: Vec<Failure>,
}

/// Runs every configured algorithm on every subject with `workers` threads.
/// Results do not depend on the worker count.
pub fn evaluate(subjects: &[(String, Vec<Trial>)], cfg: &EvalConfig, workers: usize) -> Result<Evaluation> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Config(format!("worker pool: {e}")))?;
    let per_subject: Vec<Vec<Result<PerformanceCurve>>> = pool.install(|| {
        subjects
            .par_iter()
            .map(|(id, trials)| evaluate_subject(id, trials, cfg))
            .collect()
    });
    let mut out = Evaluation {
        curves: Vec::new(),
        mesd: Vec::new(),
        failures: Vec::new(),
    };
    for (a, alg) in cfg.algorithms.iter().enumerate() {
        for ((subject, _), results) in subjects.iter().zip(&per_subject) {
            match &results[a] {
                Ok(curve) => {
                    let m = mesd(curve, &cfg.mesd)?;
                    out.mesd.push((
                        MesdRow {
                            algorithm: alg.clone(),
                            subject: subject.clone(),
                            value: MesdValue::from_result(&m, cfg.mesd.bound_s),
                            tau: m.tau,
                        },
                        m,
                    ));
                    out.curves.push(curve.clone());
                }
                Err(e) => {
                    log::error!("{subject} / {alg}: {e}");
                    out.failures.push(Failure {
                        subject: subject.clone(),
                        algorithm: alg.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Curves of every configured algorithm for one subject, in config order.
pub fn evaluate_subject(subject: &str, trials: &[Trial], cfg: &EvalConfig) -> Vec<Result<PerformanceCurve>> {
    let algorithms: Vec<Result<Box<dyn AadAlgorithm>>> =
        cfg.algorithms.iter().map(|id| build_algorithm(id, cfg)).collect();
    // Prepare each distinct pipeline once.
    let mut prepared: Vec<(Pipeline, Result<SubjectData>)> = Vec::new();
    for alg in algorithms.iter().flatten() {
        let p = alg.pipeline();
        if !prepared.iter().any(|(q, _)| *q == p) {
            let data = SubjectData::prepare(subject, trials, p, cfg.segment_s);
            if let Ok(d) = &data {
                if d.segments.len().saturating_sub(1) < cfg.inner_folds {
                    log::warn!(
                        "subject {subject}: {} training segments per fold; inner cross-validation uses that many folds instead of {}",
                        d.segments.len().saturating_sub(1),
                        cfg.inner_folds
                    );
                }
            }
            prepared.push((p, data));
        }
    }
    algorithms
        .into_par_iter()
        .map(|alg| {
            let alg = alg?;
            let data = prepared
                .iter()
                .find(|(p, _)| *p == alg.pipeline())
                .map(|(_, d)| d)
                .expect("pipeline prepared");
            let data = data.as_ref().map_err(|e| EvalError::InsufficientData(e.to_string()))?;
            run_loso_cv(alg.as_ref(), data, cfg)
        })
        .collect()
}
