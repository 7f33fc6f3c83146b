#![allow(dead_code)]

use aad_core::synth::{generate_subject, subject_id, SynthConfig};
use aad_core::Trial;
use statrs::distribution::{Binomial, DiscreteCDF};

pub fn subjects(cfg: &SynthConfig, n: usize) -> Vec<(String, Vec<Trial>)> {
    (0..n)
        .map(|s| (subject_id(s), generate_subject(cfg, s).expect("synthetic subject")))
        .collect()
}

/// Central 95% acceptance region of Binomial(n, 0.5), as counts.
pub fn chance_interval(n: u64) -> (u64, u64) {
    let b = Binomial::new(0.5, n).expect("binomial");
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.025).expect("lower quantile");
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.975).expect("upper quantile");
    (lo, hi)
}

pub fn within_chance(accuracy: f64, n: usize) -> bool {
    let correct = (accuracy * n as f64 / 100.0).round() as u64;
    let (lo, hi) = chance_interval(n as u64);
    (lo..=hi).contains(&correct)
}
