//! Resampling, band filtering and z-scoring of trials.

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::filter::TimeSeries;
use crate::signal::{mean_std, MultiChannel, Signal, Trial};

/// Target rate and pass band of one preprocessing path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub fs: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Pipeline {
    /// 20 Hz, 1-9 Hz: the path used by all linear decoders.
    pub const LINEAR: Pipeline = Pipeline {
        fs: 20.0,
        f_lo: 1.0,
        f_hi: 9.0,
    };
    /// 64 Hz, 1-32 Hz: the path used by the neural decoder.
    pub const NN: Pipeline = Pipeline {
        fs: 64.0,
        f_lo: 1.0,
        f_hi: 32.0,
    };

    fn apply<T: TimeSeries>(&self, x: &T) -> Result<T> {
        let y = x.resample(self.fs)?;
        // An upper edge at or above Nyquist is already enforced by the resampler.
        if self.f_hi >= self.fs / 2.0 {
            y.highpass(self.f_lo)
        } else {
            y.bandpass(self.f_lo, self.f_hi)
        }
    }

    /// Resamples and band-filters EEG and envelopes; no normalization.
    pub fn filter_trial(&self, trial: &Trial) -> Result<Trial> {
        if trial.fs() < self.fs {
            return Err(AadError::param(
                "fs",
                format!("trial at {} Hz is below the {} Hz target", trial.fs(), self.fs),
            ));
        }
        let eeg = self.apply(&trial.eeg)?;
        let envelopes = trial
            .envelopes
            .iter()
            .map(|e| self.apply(e))
            .collect::<Result<Vec<_>>>()?;
        Trial::new(eeg, envelopes, trial.attended, trial.subject_id.clone())
    }
}

/// Per-channel and per-envelope mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub eeg_mean: Vec<f64>,
    pub eeg_std: Vec<f64>,
    pub env_mean: Vec<f64>,
    pub env_std: Vec<f64>,
}

fn pooled(parts: &[&[f64]]) -> (f64, f64) {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = parts.iter().flat_map(|p| p.iter()).sum::<f64>() / n as f64;
    let var = parts
        .iter()
        .flat_map(|p| p.iter())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    (mean, var.sqrt())
}

impl NormStats {
    /// Statistics pooled over the given (training) recordings.
    pub fn fit<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a MultiChannel, &'a [Signal])>,
    {
        let parts: Vec<_> = parts.into_iter().collect();
        let Some((first_eeg, first_env)) = parts.first() else {
            return Err(AadError::InsufficientData("no data to fit normalization".into()));
        };
        let (n_ch, n_env) = (first_eeg.n_channels(), first_env.len());
        let mut stats = NormStats {
            eeg_mean: Vec::with_capacity(n_ch),
            eeg_std: Vec::with_capacity(n_ch),
            env_mean: Vec::with_capacity(n_env),
            env_std: Vec::with_capacity(n_env),
        };
        for c in 0..n_ch {
            let chunks: Vec<&[f64]> = parts.iter().map(|(e, _)| e.channel(c)).collect();
            let (m, s) = pooled(&chunks);
            stats.eeg_mean.push(m);
            stats.eeg_std.push(s);
        }
        for i in 0..n_env {
            let chunks: Vec<&[f64]> = parts.iter().map(|(_, env)| env[i].samples()).collect();
            let (m, s) = pooled(&chunks);
            stats.env_mean.push(m);
            stats.env_std.push(s);
        }
        Ok(stats)
    }

    pub fn fit_trials(trials: &[Trial]) -> Result<Self> {
        Self::fit(trials.iter().map(|t| (&t.eeg, t.envelopes.as_slice())))
    }

    fn scale(x: &[f64], mean: f64, std: f64) -> Vec<f64> {
        let inv = if std > 0.0 { 1.0 / std } else { 1.0 };
        x.iter().map(|v| (v - mean) * inv).collect()
    }

    pub fn apply_eeg(&self, eeg: &MultiChannel) -> Result<MultiChannel> {
        if eeg.n_channels() != self.eeg_mean.len() {
            return Err(AadError::DimensionMismatch {
                context: "normalization channels",
                expected: self.eeg_mean.len(),
                got: eeg.n_channels(),
            });
        }
        let channels = eeg
            .channels()
            .iter()
            .enumerate()
            .map(|(c, x)| Self::scale(x, self.eeg_mean[c], self.eeg_std[c]))
            .collect();
        MultiChannel::new(channels, eeg.fs(), eeg.labels().to_vec())
    }

    pub fn apply_envelope(&self, index: usize, env: &Signal) -> Result<Signal> {
        let (m, s) = match (self.env_mean.get(index), self.env_std.get(index)) {
            (Some(&m), Some(&s)) => (m, s),
            _ => {
                return Err(AadError::param(
                    "envelope index",
                    format!("{index} has no normalization statistics"),
                ))
            }
        };
        Signal::new(Self::scale(env.samples(), m, s), env.fs())
    }

    pub fn apply(&self, trial: &Trial) -> Result<Trial> {
        let eeg = self.apply_eeg(&trial.eeg)?;
        let envelopes = trial
            .envelopes
            .iter()
            .enumerate()
            .map(|(i, e)| self.apply_envelope(i, e))
            .collect::<Result<Vec<_>>>()?;
        Trial::new(eeg, envelopes, trial.attended, trial.subject_id.clone())
    }
}

fn preprocess(trial: &Trial, pipeline: Pipeline) -> Result<(Trial, NormStats)> {
    let filtered = pipeline.filter_trial(trial)?;
    let stats = NormStats::fit_trials(std::slice::from_ref(&filtered))?;
    Ok((stats.apply(&filtered)?, stats))
}

/// Linear-decoder path: 20 Hz, 1-9 Hz, z-scored with the trial's own statistics.
///
/// The returned statistics are what a held-out trial should be normalized with.
pub fn preprocess_linear(trial: &Trial) -> Result<(Trial, NormStats)> {
    preprocess(trial, Pipeline::LINEAR)
}

/// Neural-decoder path: 64 Hz, 1-32 Hz, z-scored.
pub fn preprocess_nn(trial: &Trial) -> Result<(Trial, NormStats)> {
    preprocess(trial, Pipeline::NN)
}

/// RMS of a sequence, used by tests and the synthetic generator.
pub fn rms(x: &[f64]) -> f64 {
    let (m, s) = mean_std(x);
    (m * m + s * s).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy_trial(fs: f64, secs: f64, seed: u64) -> Trial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (fs * secs) as usize;
        let mut draw = |scale: f64, offset: f64| -> Vec<f64> {
            (0..n)
                .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); offset + scale * z })
                .collect()
        };
        let eeg = MultiChannel::unlabeled(vec![draw(3.0, 1.0), draw(0.5, -2.0)], fs).unwrap();
        let envs = vec![
            Signal::new(draw(1.0, 4.0), fs).unwrap(),
            Signal::new(draw(2.0, 0.0), fs).unwrap(),
        ];
        Trial::new(eeg, envs, 0, "s1").unwrap()
    }

    #[test]
    fn output_rates() {
        let t = noisy_trial(64.0, 30.0, 1);
        let (lin, _) = preprocess_linear(&t).unwrap();
        assert_eq!(lin.fs(), 20.0);
        assert_eq!(lin.len(), 600);
        let (nn, _) = preprocess_nn(&t).unwrap();
        assert_eq!(nn.fs(), 64.0);
        assert_eq!(nn.len(), t.len());
    }

    #[test]
    fn output_is_standardized() {
        let (p, stats) = preprocess_linear(&noisy_trial(128.0, 20.0, 2)).unwrap();
        for c in p.eeg.channels() {
            let (m, s) = mean_std(c);
            assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        }
        assert_eq!(stats.eeg_mean.len(), 2);
        assert_eq!(stats.env_mean.len(), 2);
    }

    #[test]
    fn preprocessing_is_idempotent() {
        for (pipe, fs) in [(Pipeline::LINEAR, 64.0), (Pipeline::NN, 128.0)] {
            let t = noisy_trial(fs, 40.0, 5);
            let (once, _) = preprocess(&t, pipe).unwrap();
            let (twice, _) = preprocess(&once, pipe).unwrap();
            let mut sq = 0.0;
            let mut n = 0usize;
            for (a, b) in once.eeg.channels().iter().zip(twice.eeg.channels()) {
                for (x, y) in a.iter().zip(b) {
                    sq += (x - y).powi(2);
                    n += 1;
                }
            }
            for (a, b) in once.envelopes.iter().zip(&twice.envelopes) {
                for (x, y) in a.samples().iter().zip(b.samples()) {
                    sq += (x - y).powi(2);
                    n += 1;
                }
            }
            let rms = (sq / n as f64).sqrt();
            assert!(rms < 1e-6, "rms change {rms}");
        }
    }

    #[test]
    fn held_out_trial_reuses_training_statistics() {
        let train = Pipeline::LINEAR.filter_trial(&noisy_trial(64.0, 30.0, 7)).unwrap();
        let test = Pipeline::LINEAR.filter_trial(&noisy_trial(64.0, 30.0, 8)).unwrap();
        let stats = NormStats::fit_trials(std::slice::from_ref(&train)).unwrap();
        let normed = stats.apply(&test).unwrap();
        let c = 0;
        let expect = (test.eeg.channel(c)[10] - stats.eeg_mean[c]) / stats.eeg_std[c];
        assert!((normed.eeg.channel(c)[10] - expect).abs() < 1e-15);
    }

    #[test]
    fn below_target_rate_is_rejected() {
        assert!(Pipeline::NN.filter_trial(&noisy_trial(20.0, 10.0, 1)).is_err());
    }
}
