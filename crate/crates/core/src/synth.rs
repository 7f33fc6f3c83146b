//! Synthetic two-speaker EEG from a linear forward model.
//!
//! Envelopes are rectified white noise smoothed by a zero-phase low-pass,
//! hence nonnegative and slowly varying. Each EEG channel is the attended
//! envelope convolved with a biphasic response kernel, plus the unattended
//! envelope through an independent kernel scaled by `g`, plus noise scaled
//! relative to the stimulus-driven part of that channel. Every sample is
//! rounded to `f32` so a dataset written to disk reloads bit-identically.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, Manifest};
use crate::error::{AadError, Result};
use crate::preprocess::rms;
use crate::signal::{MultiChannel, Signal, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    White,
    /// 1/f power spectrum.
    Pink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub channels: usize,
    pub fs: f64,
    pub trial_duration_s: f64,
    pub trials_per_subject: usize,
    pub subjects: usize,
    pub n_speakers: usize,
    /// Length of the response kernels.
    pub trf_duration_s: f64,
    /// Gain of the unattended speaker's contribution, in `[0, 1]`.
    pub unattended_gain: f64,
    /// Noise standard deviation relative to each channel's stimulus-driven RMS.
    pub noise: f64,
    pub noise_kind: NoiseKind,
    /// Cut-off of the envelope smoothing low-pass.
    pub envelope_cutoff_hz: f64,
    /// Relative per-subject perturbation of the response kernels.
    pub jitter: f64,
    pub seed: u64,
    /// Explicit attended kernels (channels × taps); generated when absent.
    pub trf: Option<Vec<Vec<f64>>>,
    /// Explicit unattended kernels; generated when absent.
    pub unattended_trf: Option<Vec<Vec<f64>>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            fs: 64.0,
            trial_duration_s: 120.0,
            trials_per_subject: 5,
            subjects: 16,
            n_speakers: 2,
            trf_duration_s: 0.25,
            unattended_gain: 0.7,
            noise: 1.0,
            noise_kind: NoiseKind::White,
            envelope_cutoff_hz: 4.0,
            jitter: 0.2,
            seed: 1,
            trf: None,
            unattended_trf: None,
        }
    }
}

/// Streams separating the independent random draws of one configuration.
#[derive(Clone, Copy)]
enum Stream {
    BaseKernels = 1,
    SubjectKernels = 2,
    Envelopes = 3,
    Noise = 4,
}

fn rng_for(seed: u64, stream: Stream, subject: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) ^ (subject << 28) ^ trial);
    rng
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.channels == 0 {
            return Err(AadError::param("channels", "must be at least 1"));
        }
        if !positive(self.fs) {
            return Err(AadError::param("fs", "must be positive"));
        }
        if !positive(self.trial_duration_s) {
            return Err(AadError::param("trial_duration_s", "must be positive"));
        }
        if self.trials_per_subject == 0 || self.subjects == 0 {
            return Err(AadError::param("subjects", "subjects and trials_per_subject must be positive"));
        }
        if self.n_speakers < 2 {
            return Err(AadError::param("n_speakers", "need at least two speakers"));
        }
        if !positive(self.trf_duration_s) {
            return Err(AadError::param("trf_duration_s", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.unattended_gain) {
            return Err(AadError::param("unattended_gain", "must lie in [0, 1]"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(AadError::param("noise", "must be finite and nonnegative"));
        }
        if !(positive(self.envelope_cutoff_hz) && self.envelope_cutoff_hz < self.fs / 2.0) {
            return Err(AadError::param("envelope_cutoff_hz", "must lie in (0, fs/2)"));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(AadError::param("jitter", "must be finite and nonnegative"));
        }
        if self.samples_per_trial() <= self.taps() {
            return Err(AadError::param("trial_duration_s", "trial shorter than the response kernel"));
        }
        for (name, k) in [("trf", &self.trf), ("unattended_trf", &self.unattended_trf)] {
            if let Some(k) = k {
                if k.len() != self.channels || k.iter().any(|row| row.is_empty()) {
                    return Err(AadError::param(name, "needs one nonempty kernel per channel"));
                }
            }
        }
        Ok(())
    }

    pub fn samples_per_trial(&self) -> usize {
        (self.trial_duration_s * self.fs).round() as usize
    }

    /// Kernel taps covering `[0, trf_duration_s]`.
    pub fn taps(&self) -> usize {
        (self.trf_duration_s * self.fs).round() as usize + 1
    }
}

/// Attended and unattended kernels of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub attended: Vec<Vec<f64>>,
    pub unattended: Vec<Vec<f64>>,
}

/// Positive peak near 80 ms followed by a smaller negative one near 180 ms.
fn biphasic(taps: usize, fs: f64, duration: f64) -> Vec<f64> {
    let bump = |t: f64, centre: f64, width: f64| (-((t - centre) / width).powi(2)).exp();
    let scale = duration / 0.25;
    (0..taps)
        .map(|l| {
            let t = l as f64 / fs;
            bump(t, 0.08 * scale, 0.03 * scale) - 0.6 * bump(t, 0.18 * scale, 0.04 * scale)
        })
        .collect()
}

fn random_kernels(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let shape = biphasic(cfg.taps(), cfg.fs, cfg.trf_duration_s);
    (0..cfg.channels)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let gain = rng.random_range(0.5..1.5);
            shape.iter().map(|v| sign * gain * v).collect()
        })
        .collect()
}

fn jittered(base: &[Vec<f64>], jitter: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    base.iter()
        .map(|k| {
            let scale = jitter * rms(k);
            k.iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(rng);
                    v + scale * z
                })
                .collect()
        })
        .collect()
}

/// Kernels of subject `subject`; with zero jitter every subject shares the base kernels.
pub fn forward_model(cfg: &SynthConfig, subject: usize) -> Result<ForwardModel> {
    cfg.validate()?;
    let mut base_rng = rng_for(cfg.seed, Stream::BaseKernels, 0, 0);
    let attended = match &cfg.trf {
        Some(k) => k.clone(),
        None => random_kernels(cfg, &mut base_rng),
    };
    let unattended = match &cfg.unattended_trf {
        Some(k) => k.clone(),
        None => random_kernels(cfg, &mut base_rng),
    };
    if cfg.jitter == 0.0 {
        return Ok(ForwardModel { attended, unattended });
    }
    let mut rng = rng_for(cfg.seed, Stream::SubjectKernels, subject as u64, 0);
    Ok(ForwardModel {
        attended: jittered(&attended, cfg.jitter, &mut rng),
        unattended: jittered(&unattended, cfg.jitter, &mut rng),
    })
}

/// Rectified white noise through a zero-phase two-stage one-pole low-pass.
fn envelope(n: usize, fs: f64, cutoff: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z.abs()
        })
        .collect();
    let a = (-2.0 * PI * cutoff / fs).exp();
    let pass = |x: &mut Vec<f64>| {
        let mut y = x[0];
        for v in x.iter_mut() {
            y = a * y + (1.0 - a) * *v;
            *v = y;
        }
    };
    for _ in 0..2 {
        pass(&mut x);
        x.reverse();
        pass(&mut x);
        x.reverse();
    }
    x
}

fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit-variance noise with a 1/f power spectrum (DC removed).
fn pink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut spec: Vec<Complex<f64>> = white(n, rng).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    for (k, c) in spec.iter_mut().enumerate() {
        let f = k.min(n - k);
        *c = if f == 0 { Complex::new(0.0, 0.0) } else { *c / (f as f64).sqrt() };
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let r = rms(&x);
    if r > 0.0 {
        x.iter().map(|v| v / r).collect()
    } else {
        x
    }
}

/// Causal convolution `y(t) = Σ_l h(l) s(t − l)` with zero history.
fn convolve(s: &[f64], h: &[f64]) -> Vec<f64> {
    (0..s.len())
        .map(|t| h.iter().enumerate().take(t + 1).map(|(l, w)| w * s[t - l]).sum())
        .collect()
}

fn quantize(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| *v as f32 as f64).collect()
}

fn make_trial(
    cfg: &SynthConfig,
    model: &ForwardModel,
    attended: usize,
    subject: usize,
    trial: usize,
    subject_id: String,
) -> Result<Trial> {
    if attended >= cfg.n_speakers {
        return Err(AadError::param("attended", format!("{attended} >= {} speakers", cfg.n_speakers)));
    }
    let n = cfg.samples_per_trial();
    let (sub, tr) = (subject as u64, trial as u64);
    let mut env_rng = rng_for(cfg.seed, Stream::Envelopes, sub, tr);
    let envs: Vec<Vec<f64>> = (0..cfg.n_speakers)
        .map(|_| quantize(&envelope(n, cfg.fs, cfg.envelope_cutoff_hz, &mut env_rng)))
        .collect();
    let mut noise_rng = rng_for(cfg.seed, Stream::Noise, sub, tr);
    let mut eeg = Vec::with_capacity(cfg.channels);
    for c in 0..cfg.channels {
        let mut driven = convolve(&envs[attended], &model.attended[c]);
        if cfg.unattended_gain > 0.0 {
            for (i, env) in envs.iter().enumerate() {
                if i != attended {
                    let u = convolve(env, &model.unattended[c]);
                    driven.iter_mut().zip(&u).for_each(|(d, v)| *d += cfg.unattended_gain * v);
                }
            }
        }
        let noise = match cfg.noise_kind {
            NoiseKind::White => white(n, &mut noise_rng),
            NoiseKind::Pink => pink(n, &mut noise_rng),
        };
        let scale = cfg.noise * rms(&driven);
        let x: Vec<f64> = driven.iter().zip(&noise).map(|(d, z)| d + scale * z).collect();
        eeg.push(quantize(&x));
    }
    let eeg = MultiChannel::unlabeled(eeg, cfg.fs)?;
    let envelopes = envs
        .into_iter()
        .map(|e| Signal::new(e, cfg.fs))
        .collect::<Result<Vec<_>>>()?;
    Trial::new(eeg, envelopes, attended, subject_id)
}

/// One trial from the base (subject 0) forward model.
pub fn generate_trial(cfg: &SynthConfig, attended: usize) -> Result<Trial> {
    let model = forward_model(cfg, 0)?;
    make_trial(cfg, &model, attended, 0, 0, "s01".into())
}

pub fn subject_id(subject: usize) -> String {
    format!("s{:02}", subject + 1)
}

/// All trials of one subject; the attended speaker cycles over trials.
pub fn generate_subject(cfg: &SynthConfig, subject: usize) -> Result<Vec<Trial>> {
    let model = forward_model(cfg, subject)?;
    (0..cfg.trials_per_subject)
        .map(|k| make_trial(cfg, &model, k % cfg.n_speakers, subject, k, subject_id(subject)))
        .collect()
}

pub fn generate_trials(cfg: &SynthConfig) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for s in 0..cfg.subjects {
        out.extend(generate_subject(cfg, s)?);
    }
    Ok(out)
}

/// Writes every subject's trials to `dir` in the dataset format.
pub fn generate_dataset(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let trials = generate_trials(cfg)?;
    write_dataset(dir, &trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_dataset;

    fn small() -> SynthConfig {
        SynthConfig {
            channels: 4,
            trial_duration_s: 10.0,
            trials_per_subject: 2,
            subjects: 2,
            ..Default::default()
        }
    }

    #[test]
    fn identity_kernel_copies_envelope() {
        let mut trf = vec![vec![0.0; 3]; 4];
        trf[0][0] = 1.0;
        let cfg = SynthConfig {
            noise: 0.0,
            unattended_gain: 0.0,
            jitter: 0.0,
            trf: Some(trf),
            ..small()
        };
        let t = generate_trial(&cfg, 1).unwrap();
        assert_eq!(t.eeg.channel(0), t.envelopes[1].samples());
        assert_eq!(t.attended, 1);
        assert!(t.eeg.channel(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_nonnegative_envelopes() {
        let a = generate_trial(&small(), 0).unwrap();
        let b = generate_trial(&small(), 0).unwrap();
        assert_eq!(a, b);
        assert!(a.envelopes.iter().all(|e| e.samples().iter().all(|&v| v >= 0.0)));
        let other = generate_trial(&SynthConfig { seed: 2, ..small() }, 0).unwrap();
        assert_ne!(a.eeg, other.eeg);
    }

    #[test]
    fn noise_level_is_relative() {
        let cfg = SynthConfig {
            noise: 2.0,
            trial_duration_s: 200.0,
            ..small()
        };
        let noisy = generate_trial(&cfg, 0).unwrap();
        let clean = generate_trial(&SynthConfig { noise: 0.0, ..cfg.clone() }, 0).unwrap();
        for c in 0..4 {
            let resid: Vec<f64> = noisy.eeg.channel(c).iter().zip(clean.eeg.channel(c)).map(|(a, b)| a - b).collect();
            let ratio = rms(&resid) / rms(clean.eeg.channel(c));
            assert!((ratio - 2.0).abs() < 0.1, "channel {c}: {ratio}");
        }
    }

    #[test]
    fn pink_noise_has_falling_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = pink(4096, &mut rng);
        assert!((rms(&x) - 1.0).abs() < 1e-12);
        // Low-frequency half carries most power.
        let mut spec: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(4096).process(&mut spec);
        let power = |r: std::ops::Range<usize>| r.map(|k| spec[k].norm_sqr()).sum::<f64>();
        assert!(power(1..64) > power(1024..2048));
    }

    #[test]
    fn jitter_zero_shares_kernels() {
        let cfg = SynthConfig { jitter: 0.0, ..small() };
        assert_eq!(forward_model(&cfg, 0).unwrap(), forward_model(&cfg, 5).unwrap());
        let j = SynthConfig { jitter: 0.3, ..small() };
        assert_ne!(forward_model(&j, 0).unwrap(), forward_model(&j, 1).unwrap());
        let s0 = generate_subject(&cfg, 0).unwrap();
        let s1 = generate_subject(&cfg, 1).unwrap();
        assert_ne!(s0[0].envelopes, s1[0].envelopes);
    }

    #[test]
    fn dataset_round_trip() {
        let cfg = small();
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.subjects(), vec!["s01".to_string(), "s02".to_string()]);
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, generate_trials(&cfg).unwrap());
        assert_eq!(loaded[0].attended, 0);
        assert_eq!(loaded[1].attended, 1);
    }

    #[test]
    fn invalid_config_names_field() {
        let err = SynthConfig { unattended_gain: 1.5, ..small() }.validate().unwrap_err();
        assert!(err.to_string().contains("unattended_gain"));
    }
}
