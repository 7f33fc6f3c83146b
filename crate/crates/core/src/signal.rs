//! Time-series containers shared by every decoder: single-channel signals,
//! multichannel EEG and labelled trials.

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};

fn check_fs(fs: f64) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(AadError::param("fs", format!("sample rate must be positive, got {fs}")));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AadError::NonFinite(what))
    }
}

/// A single real-valued sequence sampled at `fs` Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        check_fs(fs)?;
        check_finite(&samples, "signal")?;
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples `[start, end)` as a new signal.
    pub fn slice(&self, start: usize, end: usize) -> Signal {
        Signal {
            samples: self.samples[start..end].to_vec(),
            fs: self.fs,
        }
    }
}

/// `C` equally long channels sampled at a common rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiChannel {
    channels: Vec<Vec<f64>>,
    fs: f64,
    labels: Vec<String>,
}

impl MultiChannel {
    pub fn new(channels: Vec<Vec<f64>>, fs: f64, labels: Vec<String>) -> Result<Self> {
        check_fs(fs)?;
        if channels.is_empty() {
            return Err(AadError::param("channels", "at least one channel is required"));
        }
        if labels.len() != channels.len() {
            return Err(AadError::DimensionMismatch {
                context: "channel labels",
                expected: channels.len(),
                got: labels.len(),
            });
        }
        let len = channels[0].len();
        for ch in &channels {
            if ch.len() != len {
                return Err(AadError::DimensionMismatch {
                    context: "channel length",
                    expected: len,
                    got: ch.len(),
                });
            }
            check_finite(ch, "EEG channel")?;
        }
        Ok(Self {
            channels,
            fs,
            labels,
        })
    }

    /// Builds a recording with generated labels `ch1..chC`.
    pub fn unlabeled(channels: Vec<Vec<f64>>, fs: f64) -> Result<Self> {
        let labels = (1..=channels.len()).map(|i| format!("ch{i}")).collect();
        Self::new(channels, fs, labels)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn slice(&self, start: usize, end: usize) -> MultiChannel {
        MultiChannel {
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            fs: self.fs,
            labels: self.labels.clone(),
        }
    }

    /// Keeps only the channels at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<MultiChannel> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_channels()) {
            return Err(AadError::param(
                "channel index",
                format!("{bad} out of range for {} channels", self.n_channels()),
            ));
        }
        Ok(MultiChannel {
            channels: indices.iter().map(|&i| self.channels[i].clone()).collect(),
            fs: self.fs,
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        })
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

/// One labelled recording: EEG plus one envelope per competing speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub eeg: MultiChannel,
    pub envelopes: Vec<Signal>,
    pub attended: usize,
    pub subject_id: String,
}

impl Trial {
    pub fn new(
        eeg: MultiChannel,
        envelopes: Vec<Signal>,
        attended: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if envelopes.len() < 2 {
            return Err(AadError::param("envelopes", "at least two speakers are required"));
        }
        if attended >= envelopes.len() {
            return Err(AadError::param(
                "attended",
                format!("index {attended} but only {} envelopes", envelopes.len()),
            ));
        }
        for env in &envelopes {
            if env.fs() != eeg.fs() {
                return Err(AadError::param(
                    "envelopes",
                    format!("envelope fs {} differs from EEG fs {}", env.fs(), eeg.fs()),
                ));
            }
            if env.len() != eeg.len() {
                return Err(AadError::DimensionMismatch {
                    context: "envelope length",
                    expected: eeg.len(),
                    got: env.len(),
                });
            }
        }
        Ok(Self {
            eeg,
            envelopes,
            attended,
            subject_id: subject_id.into(),
        })
    }

    pub fn fs(&self) -> f64 {
        self.eeg.fs()
    }

    pub fn len(&self) -> usize {
        self.eeg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eeg.is_empty()
    }

    pub fn n_speakers(&self) -> usize {
        self.envelopes.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs()
    }
}

/// Sample Pearson correlation with a flag for zero-variance inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// Set when either input has (numerically) zero variance; `value` is then 0.
    pub degenerate: bool,
}

/// Sample Pearson correlation coefficient between `a` and `b`.
///
/// A zero-variance input yields `0.0` with the `degenerate` flag instead of NaN.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(AadError::DimensionMismatch {
            context: "pearson",
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(AadError::InsufficientData(format!(
            "pearson needs at least 2 samples, got {n}"
        )));
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if is_flat(saa, a) || is_flat(sbb, b) {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(Correlation {
        value: r.clamp(-1.0, 1.0),
        degenerate: false,
    })
}

// Centered sum of squares indistinguishable from rounding noise of the mean.
fn is_flat(centered_ss: f64, x: &[f64]) -> bool {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    centered_ss <= 1e-24 * x.len() as f64 * peak * peak
}

pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_hand_example() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.value - 0.8).abs() < 1e-15);
        assert!(!r.degenerate);
    }

    #[test]
    fn pearson_self_and_negation() {
        let a = [0.3, -1.2, 2.5, 0.0, 4.1];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &a).unwrap().value - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap().value + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_is_degenerate_zero() {
        let r = pearson(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.degenerate);
        let r = pearson(&[0.1; 7], &[0.1; 7]).unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn pearson_rejects_bad_lengths() {
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn signal_rejects_nan_and_bad_fs() {
        assert!(Signal::new(vec![1.0, f64::NAN], 10.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(MultiChannel::unlabeled(vec![vec![1.0, 2.0], vec![1.0]], 10.0).is_err());
    }

    #[test]
    fn trial_validates_alignment() {
        let eeg = MultiChannel::unlabeled(vec![vec![0.0; 4]], 8.0).unwrap();
        let env = |n| Signal::new(vec![0.0; n], 8.0).unwrap();
        assert!(Trial::new(eeg.clone(), vec![env(4), env(4)], 1, "s").is_ok());
        assert!(Trial::new(eeg.clone(), vec![env(4), env(3)], 0, "s").is_err());
        assert!(Trial::new(eeg.clone(), vec![env(4), env(4)], 2, "s").is_err());
        assert!(Trial::new(eeg, vec![env(4)], 0, "s").is_err());
    }

    proptest::proptest! {
        #[test]
        fn pearson_affine_invariance(
            a in proptest::collection::vec(-10.0f64..10.0, 8..40),
            alpha in 0.1f64..10.0,
            beta in -5.0f64..5.0,
            seed in 0u64..1000,
        ) {
            let b: Vec<f64> = a.iter().enumerate()
                .map(|(i, v)| v * 0.5 + ((i as u64 * 7919 + seed) % 13) as f64 * 0.3)
                .collect();
            let r0 = pearson(&a, &b).unwrap();
            let moved: Vec<f64> = a.iter().map(|v| alpha * v + beta).collect();
            let r1 = pearson(&moved, &b).unwrap();
            proptest::prop_assume!(!r0.degenerate);
            proptest::prop_assert!((r0.value - r1.value).abs() < 1e-12);
            let sym = pearson(&b, &a).unwrap();
            proptest::prop_assert!((r0.value - sym.value).abs() < 1e-15);
        }
    }
}
