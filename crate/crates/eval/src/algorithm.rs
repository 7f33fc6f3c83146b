//! The interface every benchmarked decoder implements, and the inner
//! hyperparameter search shared by the trainable ones.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::ops::Range;

use aad_core::{Decision, Pipeline, Trial};

use crate::error::{EvalError, Result};
use crate::metrics::Tally;

/// Everything an algorithm may learn from in one outer fold.
#[derive(Debug, Clone, Copy)]
pub struct TrainContext<'a> {
    pub subject: &'a str,
    pub fold: usize,
    /// Normalized training segments.
    pub train: &'a [Trial],
    /// Index of each training segment in the subject's segment list.
    pub train_ids: &'a [usize],
    pub fs: f64,
    /// Decision window length in samples, one entry per τ.
    pub windows: &'a [usize],
    pub inner_folds: usize,
    pub seed: u64,
}

/// One decision window of a held-out segment.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub segment: &'a Trial,
    /// Index of the segment in the subject's segment list.
    pub segment_id: usize,
    pub range: Range<usize>,
    /// Position of the window within the segment.
    pub index: usize,
}

pub trait AadAlgorithm: Send + Sync {
    fn id(&self) -> &str;
    /// Resampling and filtering applied before segmentation.
    fn pipeline(&self) -> Pipeline;
    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>>;
}

pub trait TrainedAad: Send {
    fn decide(&self, tau_index: usize, window: &Window<'_>) -> Result<Decision>;
    /// Hash of everything learned from the training data.
    fn fingerprint(&self) -> u64;
}

/// Stable hash of a float sequence, bit for bit.
pub fn hash_floats<'a>(parts: impl IntoIterator<Item = &'a f64>) -> u64 {
    let mut h = DefaultHasher::new();
    for v in parts {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Contiguous, nearly equal blocks of `0..n`, at most `max_folds` of them.
pub fn inner_folds(n: usize, max_folds: usize) -> Vec<Range<usize>> {
    let k = n.min(max_folds).max(1);
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerCvResult {
    /// Index into the grid.
    pub best: usize,
    /// Mean validation accuracy per grid value; `-inf` where a fit failed.
    pub scores: Vec<f64>,
    pub folds: usize,
}

/// Picks the grid value with the highest mean validation accuracy over
/// contiguous folds of `n` training segments; ties go to the lowest index,
/// so grids should be ordered from least to most complex.
///
/// `eval(train, validation)` returns one tally per grid value, `None`
/// marking a failed fit; a value that fails in any fold is never selected.
pub fn inner_cv<F>(n: usize, grid_len: usize, max_folds: usize, mut eval: F) -> Result<InnerCvResult>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<Option<Tally>>>,
{
    if n < 2 {
        return Err(EvalError::InsufficientData(format!(
            "inner cross-validation needs 2 segments, got {n}"
        )));
    }
    if grid_len == 0 {
        return Err(EvalError::Config("empty hyperparameter grid".into()));
    }
    if n < max_folds {
        log::debug!("inner cross-validation with {n} folds instead of {max_folds}");
    }
    let folds = inner_folds(n, max_folds);
    let mut sums = vec![0.0; grid_len];
    let mut counted = vec![0usize; grid_len];
    let mut failed = vec![false; grid_len];
    for (f, val) in folds.iter().enumerate() {
        let val: Vec<usize> = val.clone().collect();
        let train: Vec<usize> = (0..n).filter(|i| !val.contains(i)).collect();
        let tallies = eval(&train, &val).map_err(|e| EvalError::InnerFold {
            fold: f,
            source: Box::new(e),
        })?;
        if tallies.len() != grid_len {
            return Err(EvalError::Config(format!(
                "inner fold {f} scored {} grid values, expected {grid_len}",
                tallies.len()
            )));
        }
        for (g, t) in tallies.into_iter().enumerate() {
            match t {
                None => failed[g] = true,
                Some(t) => {
                    if let Some(p) = t.percent() {
                        sums[g] += p;
                        counted[g] += 1;
                    }
                }
            }
        }
    }
    let scores: Vec<f64> = (0..grid_len)
        .map(|g| {
            if failed[g] || counted[g] == 0 {
                f64::NEG_INFINITY
            } else {
                sums[g] / counted[g] as f64
            }
        })
        .collect();
    let mut best = 0;
    for g in 1..grid_len {
        if scores[g] > scores[best] {
            best = g;
        }
    }
    if scores[best] == f64::NEG_INFINITY {
        return Err(EvalError::InsufficientData(
            "every hyperparameter value failed in inner cross-validation".into(),
        ));
    }
    Ok(InnerCvResult {
        best,
        scores,
        folds: folds.len(),
    })
}

/// Index of the highest tally, ties to the lowest index; `None` if nothing was decided.
pub fn best_tally(tallies: &[Tally]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in tallies.iter().enumerate() {
        if let Some(p) = t.percent() {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
    }
    best.map(|(i, _)| i)
}
