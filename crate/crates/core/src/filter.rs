//! Rational polyphase resampling and zero-phase band filtering.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{AadError, Result};
use crate::signal::{MultiChannel, Signal};

/// Largest numerator/denominator accepted for the rational rate ratio.
const MAX_RATIO_TERM: u64 = 1000;
/// Half-length of the anti-aliasing FIR, in zero-crossings of the sinc.
const FIR_ZERO_CROSSINGS: usize = 10;
const KAISER_BETA: f64 = 5.0;

/// Operations every time-series container supports channel by channel.
pub trait TimeSeries: Sized {
    fn sample_rate(&self) -> f64;

    /// Applies `f` to every channel, producing a container at rate `fs_out`.
    fn try_map_channels<F>(&self, fs_out: f64, f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>;

    /// Downsamples to `fs_out` with anti-alias filtering.
    fn resample(&self, fs_out: f64) -> Result<Self> {
        let fs_in = self.sample_rate();
        let plan = ResamplePlan::new(fs_in, fs_out)?;
        self.try_map_channels(fs_out, |x| Ok(plan.apply(x)))
    }

    /// Zero-phase band-pass between `f_lo` and `f_hi` Hz.
    fn bandpass(&self, f_lo: f64, f_hi: f64) -> Result<Self> {
        let fs = self.sample_rate();
        check_band(fs, f_lo, Some(f_hi))?;
        self.try_map_channels(fs, |x| Ok(band_mask_filter(x, fs, f_lo, f_hi)))
    }

    /// Zero-phase high-pass above `f_lo` Hz.
    fn highpass(&self, f_lo: f64) -> Result<Self> {
        let fs = self.sample_rate();
        check_band(fs, f_lo, None)?;
        self.try_map_channels(fs, |x| Ok(band_mask_filter(x, fs, f_lo, f64::INFINITY)))
    }
}

impl TimeSeries for Signal {
    fn sample_rate(&self) -> f64 {
        self.fs()
    }

    fn try_map_channels<F>(&self, fs_out: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        Signal::new(f(self.samples())?, fs_out)
    }
}

impl TimeSeries for MultiChannel {
    fn sample_rate(&self) -> f64 {
        self.fs()
    }

    fn try_map_channels<F>(&self, fs_out: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let channels = self
            .channels()
            .iter()
            .map(|c| f(c))
            .collect::<Result<Vec<_>>>()?;
        MultiChannel::new(channels, fs_out, self.labels().to_vec())
    }
}

fn check_band(fs: f64, f_lo: f64, f_hi: Option<f64>) -> Result<()> {
    let nyquist = fs / 2.0;
    if !(f_lo > 0.0 && f_lo < nyquist) {
        return Err(AadError::param(
            "f_lo",
            format!("must lie in (0, {nyquist}) Hz, got {f_lo}"),
        ));
    }
    if let Some(hi) = f_hi {
        if !(hi > f_lo && hi < nyquist) {
            return Err(AadError::param(
                "f_hi",
                format!("must lie in ({f_lo}, {nyquist}) Hz, got {hi}"),
            ));
        }
    }
    Ok(())
}

/// Ideal zero-phase band filter in the cosine-transform domain.
///
/// The input is extended by half-sample mirroring to length `2N`, masked in
/// the DFT domain and cropped back. The mirrored extension removes edge
/// discontinuities, and because the mask is real and symmetric the filtered
/// extension stays mirror-symmetric, so the operation is an exact projection:
/// filtering twice equals filtering once.
pub fn band_mask_filter(x: &[f64], fs: f64, f_lo: f64, f_hi: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = 2 * n;
    let mut buf: Vec<Complex64> = x
        .iter()
        .chain(x.iter().rev())
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(m - k) as f64 * fs / m as f64;
        if f < f_lo || f > f_hi {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf[..n].iter().map(|c| c.re / m as f64).collect()
}

/// Precomputed polyphase anti-aliasing filter for a rational rate change.
#[derive(Debug, Clone)]
pub struct ResamplePlan {
    up: usize,
    down: usize,
    half: usize,
    /// `phases[p]` holds `(k, h[k])` for taps with `k % up == p`, normalized to unit DC gain.
    phases: Vec<Vec<(usize, f64)>>,
}

impl ResamplePlan {
    pub fn new(fs_in: f64, fs_out: f64) -> Result<Self> {
        if !(fs_out.is_finite() && fs_out > 0.0) {
            return Err(AadError::param("fs_out", format!("must be positive, got {fs_out}")));
        }
        if fs_out > fs_in {
            return Err(AadError::UnsupportedRate {
                fs_in,
                fs_out,
                reason: "only downsampling is supported".into(),
            });
        }
        let (up, down) = rational_ratio(fs_out / fs_in).ok_or_else(|| AadError::UnsupportedRate {
            fs_in,
            fs_out,
            reason: format!("ratio is not p/q with p, q <= {MAX_RATIO_TERM}"),
        })?;
        let (up, down) = (up as usize, down as usize);
        let span = up.max(down);
        let half = FIR_ZERO_CROSSINGS * span;
        let cutoff = 0.5 / span as f64;
        let i0_beta = bessel_i0(KAISER_BETA);
        let taps: Vec<f64> = (0..=2 * half)
            .map(|k| {
                let t = k as f64 - half as f64;
                let sinc = if t == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * t).sin() / (PI * t)
                };
                let r = t / half as f64;
                let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                sinc * w
            })
            .collect();
        let mut phases = vec![Vec::new(); up];
        for (k, &h) in taps.iter().enumerate() {
            phases[k % up].push((k, h));
        }
        for phase in &mut phases {
            let sum: f64 = phase.iter().map(|&(_, h)| h).sum();
            for tap in phase.iter_mut() {
                tap.1 /= sum;
            }
        }
        Ok(Self {
            up,
            down,
            half,
            phases,
        })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// Number of output samples produced for `n` input samples.
    pub fn output_len(&self, n: usize) -> usize {
        (n * self.up).div_ceil(self.down)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if self.up == 1 && self.down == 1 {
            return x.to_vec();
        }
        if n == 0 {
            return Vec::new();
        }
        // Odd reflection about the end samples keeps constants and linear trends intact.
        let pad = self.half / self.up + 2;
        let mut padded = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            let j = i.min(n - 1);
            padded.push(2.0 * x[0] - x[j]);
        }
        padded.extend_from_slice(x);
        for i in 1..=pad {
            let j = (n - 1).saturating_sub(i);
            padded.push(2.0 * x[n - 1] - x[j]);
        }
        let out_len = self.output_len(n);
        (0..out_len)
            .map(|m| {
                let centre = m * self.down + pad * self.up + self.half;
                self.phases[centre % self.up]
                    .iter()
                    .map(|&(k, h)| h * padded[(centre - k) / self.up])
                    .sum()
            })
            .collect()
    }
}

fn rational_ratio(ratio: f64) -> Option<(u64, u64)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return None;
    }
    (1..=MAX_RATIO_TERM).find_map(|down| {
        let up = (ratio * down as f64).round();
        if up < 1.0 || up > MAX_RATIO_TERM as f64 {
            return None;
        }
        if ((up / down as f64) - ratio).abs() <= 1e-12 * ratio {
            let up = up as u64;
            let g = gcd(up, down);
            Some((up / g, down / g))
        } else {
            None
        }
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}
