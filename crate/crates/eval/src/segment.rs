//! Cutting trials into cross-validation segments and decision windows.

use std::ops::Range;

use aad_core::{Signal, Trial};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// A contiguous stretch `[start, end)` of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub trial: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    /// Samples at trial ends that did not fill a whole segment.
    pub dropped_samples: usize,
    /// Trials shorter than one segment.
    pub skipped_trials: Vec<usize>,
}

/// Samples in `seconds` at rate `fs`.
pub fn samples(seconds: f64, fs: f64) -> usize {
    (seconds * fs).round() as usize
}

/// Maximal set of disjoint `seg_len_s` segments per trial, in trial order.
pub fn segment_dataset(trials: &[Trial], seg_len_s: f64) -> Result<Segmentation> {
    if !(seg_len_s.is_finite() && seg_len_s > 0.0) {
        return Err(EvalError::Config(format!("segment length {seg_len_s} s must be positive")));
    }
    let mut out = Segmentation {
        segments: Vec::new(),
        dropped_samples: 0,
        skipped_trials: Vec::new(),
    };
    for (k, trial) in trials.iter().enumerate() {
        let n = samples(seg_len_s, trial.fs());
        let count = trial.len() / n;
        if count == 0 {
            log::warn!(
                "trial {k} of subject {} ({:.1} s) is shorter than one {seg_len_s} s segment; skipped",
                trial.subject_id,
                trial.duration_s()
            );
            out.skipped_trials.push(k);
            out.dropped_samples += trial.len();
            continue;
        }
        out.segments.extend((0..count).map(|i| Segment {
            trial: k,
            start: i * n,
            end: (i + 1) * n,
        }));
        out.dropped_samples += trial.len() - count * n;
    }
    Ok(out)
}

/// Copies the samples of `seg` out of its trial.
pub fn extract(trials: &[Trial], seg: &Segment) -> Result<Trial> {
    let t = trials
        .get(seg.trial)
        .ok_or_else(|| EvalError::Config(format!("segment refers to missing trial {}", seg.trial)))?;
    if seg.end > t.len() || seg.start >= seg.end {
        return Err(EvalError::Config(format!(
            "segment {}..{} outside trial {} of {} samples",
            seg.start,
            seg.end,
            seg.trial,
            t.len()
        )));
    }
    let envelopes: Vec<Signal> = t.envelopes.iter().map(|e| e.slice(seg.start, seg.end)).collect();
    Ok(Trial::new(t.eeg.slice(seg.start, seg.end), envelopes, t.attended, t.subject_id.clone())?)
}

/// Disjoint windows of `window` samples tiling `[0, len)` from the start;
/// a remainder shorter than one window is left out.
pub fn windows(len: usize, window: usize) -> Vec<Range<usize>> {
    if window == 0 {
        return Vec::new();
    }
    (0..len / window).map(|i| i * window..(i + 1) * window).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use aad_core::MultiChannel;
    use proptest::prelude::*;

    fn trial(seconds: f64, fs: f64) -> Trial {
        let n = samples(seconds, fs);
        let eeg = MultiChannel::unlabeled(vec![vec![0.5; n]; 2], fs).unwrap();
        let env = vec![Signal::new(vec![1.0; n], fs).unwrap(), Signal::new(vec![2.0; n], fs).unwrap()];
        Trial::new(eeg, env, 0, "s01").unwrap()
    }

    #[test]
    fn seventy_two_minutes_give_seventy_two_segments() {
        let seg = segment_dataset(&[trial(72.0 * 60.0, 20.0)], 60.0).unwrap();
        assert_eq!(seg.segments.len(), 72);
        assert_eq!(seg.dropped_samples, 0);
    }

    #[test]
    fn remainder_dropped_and_short_trial_skipped() {
        let seg = segment_dataset(&[trial(61.0, 20.0), trial(59.0, 20.0)], 60.0).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(seg.skipped_trials, vec![1]);
        assert_eq!(seg.dropped_samples, 20 + 59 * 20);
    }

    #[test]
    fn extract_copies_samples() {
        let trials = [trial(130.0, 20.0)];
        let seg = segment_dataset(&trials, 60.0).unwrap();
        let second = extract(&trials, &seg.segments[1]).unwrap();
        assert_eq!(second.len(), 1200);
        assert_eq!(second.envelopes[1].samples()[0], 2.0);
    }

    proptest! {
        #[test]
        fn windows_tile_without_overlap(len in 1usize..5000, w in 1usize..700) {
            let ws = windows(len, w);
            prop_assert!(ws.len() * w <= len);
            prop_assert!(len - ws.len() * w < w);
            for (i, r) in ws.iter().enumerate() {
                prop_assert_eq!(r.len(), w);
                prop_assert_eq!(r.start, i * w);
            }
        }
    }
}
