//! Speech envelope extraction with a gammatone filterbank.
//!
//! Each band is a fourth-order gammatone realised as a cascade of four
//! identical complex one-pole low-pass filters applied to the input after
//! demodulation by the band centre frequency. The magnitude of the complex
//! output is the band envelope. Band envelopes are compressed with a power
//! law and summed into one broadband envelope.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::signal::Signal;

/// Glasberg & Moore equivalent rectangular bandwidth at `f` Hz.
pub fn erb(f: f64) -> f64 {
    24.7 * (4.37e-3 * f + 1.0)
}

fn erb_number(f: f64) -> f64 {
    21.4 * (4.37e-3 * f + 1.0).log10()
}

fn erb_number_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 4.37e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammatoneConfig {
    pub bands: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Power-law compression exponent applied per band.
    pub exponent: f64,
}

impl Default for GammatoneConfig {
    fn default() -> Self {
        Self {
            bands: 28,
            f_min: 50.0,
            f_max: 5000.0,
            exponent: 0.6,
        }
    }
}

impl GammatoneConfig {
    /// Band centre frequencies, equally spaced on the ERB-number scale.
    pub fn centre_frequencies(&self) -> Vec<f64> {
        if self.bands == 1 {
            return vec![self.f_min];
        }
        let (lo, hi) = (erb_number(self.f_min), erb_number(self.f_max));
        (0..self.bands)
            .map(|i| erb_number_to_hz(lo + (hi - lo) * i as f64 / (self.bands - 1) as f64))
            .collect()
    }
}

/// Broadband power-law envelope of `audio`, at the input sample rate.
pub fn gammatone_envelope(audio: &Signal, cfg: &GammatoneConfig) -> Result<Signal> {
    if cfg.bands == 0 {
        return Err(AadError::param("bands", "need at least one band"));
    }
    if !(cfg.f_min > 0.0 && cfg.f_max >= cfg.f_min) {
        return Err(AadError::param("f_min/f_max", "need 0 < f_min <= f_max"));
    }
    if !(cfg.exponent > 0.0) {
        return Err(AadError::param("exponent", "must be positive"));
    }
    let fs = audio.fs();
    let top = cfg.f_max + erb(cfg.f_max);
    if fs / 2.0 <= top {
        return Err(AadError::param(
            "fs",
            format!("{fs} Hz audio cannot resolve the top band (needs > {} Hz)", 2.0 * top),
        ));
    }
    let x = audio.samples();
    let mut out = vec![0.0; x.len()];
    for cf in cfg.centre_frequencies() {
        let bw = 1.019 * erb(cf);
        let pole = (-2.0 * PI * bw / fs).exp();
        let gain = 1.0 - pole;
        let w = 2.0 * PI * cf / fs;
        let mut state = [(0.0f64, 0.0f64); 4];
        for (n, (&v, acc)) in x.iter().zip(out.iter_mut()).enumerate() {
            let (s, c) = (w * n as f64).sin_cos();
            // Demodulate: v * exp(-i w n).
            let (mut re, mut im) = (v * c, -v * s);
            for st in state.iter_mut() {
                st.0 = gain * re + pole * st.0;
                st.1 = gain * im + pole * st.1;
                re = st.0;
                im = st.1;
            }
            // A unit sinusoid at cf demodulates to magnitude 1/2.
            let band_env = 2.0 * (re * re + im * im).sqrt();
            *acc += band_env.powf(cfg.exponent);
        }
    }
    Signal::new(out, fs)
}
