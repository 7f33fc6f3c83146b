mod common;

use aad_core::synth::forward_model;
use aad_core::SynthConfig;
use aad_eval::{build_algorithm, run_loso_cv, EvalConfig, SubjectData};
use common::{subjects, within_chance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pools one algorithm's decisions over subjects at the single configured τ.
fn pooled(data: &[SubjectData], alg: &str, cfg: &EvalConfig) -> (f64, usize) {
    let mut correct = 0.0;
    let mut n = 0;
    for d in data {
        let a = build_algorithm(alg, cfg).unwrap();
        let c = run_loso_cv(a.as_ref(), d, cfg).unwrap();
        let p = &c.points[0];
        correct += p.accuracy * p.n_decisions as f64 / 100.0;
        n += p.n_decisions;
    }
    (100.0 * correct / n as f64, n)
}

#[test]
fn symmetric_encoding_gives_chance_accuracy() {
    let base = SynthConfig {
        jitter: 0.0,
        ..Default::default()
    };
    let kernels = forward_model(&base, 0).unwrap().attended;
    let synth = SynthConfig {
        trf: Some(kernels.clone()),
        unattended_trf: Some(kernels),
        unattended_gain: 1.0,
        ..base
    };
    // One decision per 10 s segment keeps decisions independent.
    let cfg = EvalConfig {
        taus: vec![10.0],
        segment_s: 10.0,
        ..Default::default()
    };
    let data: Vec<SubjectData> = subjects(&synth, 3)
        .iter()
        .map(|(id, t)| SubjectData::prepare(id, t, aad_core::Pipeline::LINEAR, cfg.segment_s).unwrap())
        .collect();
    let (acc, n) = pooled(&data, "mmse-avgcorr-ridge", &cfg);
    assert!(within_chance(acc, n), "{acc}% of {n}");
}

fn shuffled(n_subjects: usize, segment_s: f64) -> Vec<SubjectData> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    subjects(&SynthConfig::default(), n_subjects)
        .iter()
        .map(|(id, t)| {
            let mut d = SubjectData::prepare(id, t, aad_core::Pipeline::LINEAR, segment_s).unwrap();
            for seg in &mut d.segments {
                seg.attended = rng.random_range(0..2);
            }
            d
        })
        .collect()
}

#[test]
fn shuffled_labels_give_chance_accuracy_for_linear_decoders() {
    let cfg = EvalConfig {
        taus: vec![10.0],
        segment_s: 10.0,
        ..Default::default()
    };
    let data = shuffled(3, cfg.segment_s);
    for alg in ["mmse-avgcorr-ridge", "mmse-avgdec-ridge"] {
        let (acc, n) = pooled(&data, alg, &cfg);
        assert!(within_chance(acc, n), "{alg}: {acc}% of {n}");
    }
}

#[test]
fn shuffled_labels_give_chance_accuracy_for_adaptive_decoder() {
    let cfg = EvalConfig {
        taus: vec![30.0],
        segment_s: 30.0,
        ..Default::default()
    };
    let data = shuffled(4, cfg.segment_s);
    let (acc, n) = pooled(&data, "mmse-adap-lasso", &cfg);
    assert!(within_chance(acc, n), "{acc}% of {n}");
}
