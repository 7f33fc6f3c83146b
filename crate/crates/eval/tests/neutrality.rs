mod common;

use aad_core::SynthConfig;
use aad_eval::{evaluate, EvalConfig};
use common::{chance_interval, subjects, within_chance};

fn baseline_run() -> aad_eval::Evaluation {
    let data = subjects(&SynthConfig::default(), 4);
    let cfg = EvalConfig {
        algorithms: vec!["oracle".into(), "anti-oracle".into(), "coin".into()],
        ..Default::default()
    };
    evaluate(&data, &cfg, 2).expect("evaluation")
}

#[test]
fn oracle_anti_oracle_and_coin_are_neutral() {
    let ev = baseline_run();
    assert!(ev.failures.is_empty(), "{:?}", ev.failures);
    let cfg = EvalConfig::default();
    for alg in ["oracle", "anti-oracle", "coin"] {
        let curves: Vec<_> = ev.curves.iter().filter(|c| c.algorithm == alg).collect();
        assert_eq!(curves.len(), 4);
        for (t, &tau) in cfg.taus.iter().enumerate() {
            let n: usize = curves.iter().map(|c| c.points[t].n_decisions).sum();
            let correct: f64 = curves
                .iter()
                .map(|c| c.points[t].accuracy * c.points[t].n_decisions as f64 / 100.0)
                .sum();
            let pooled = 100.0 * correct / n as f64;
            match alg {
                "oracle" => assert_eq!(pooled, 100.0, "tau {tau}"),
                "anti-oracle" => assert_eq!(pooled, 0.0, "tau {tau}"),
                _ => assert!(within_chance(pooled, n), "coin at tau {tau}: {pooled}% of {n}"),
            }
        }
    }
}

#[test]
fn decision_counts_follow_the_window_tiling() {
    let ev = baseline_run();
    let cfg = EvalConfig::default();
    // 600 s per subject gives 10 segments of 60 s.
    let segments = 10;
    for c in &ev.curves {
        for (p, &tau) in c.points.iter().zip(&cfg.taus) {
            let per_segment = (60.0 / tau).floor() as usize;
            assert_eq!(p.n_decisions, segments * per_segment, "{} tau {tau}", c.algorithm);
        }
    }
}

#[test]
fn oracle_mesd_is_the_shortest_window() {
    let ev = baseline_run();
    for (row, m) in ev.mesd.iter().filter(|(r, _)| r.algorithm == "oracle") {
        let s = m.mesd_seconds.expect("bounded");
        assert!((s - 1.0).abs() < 1e-12, "{}: {s}", row.subject);
    }
    for (_, m) in ev.mesd.iter().filter(|(r, _)| r.algorithm == "anti-oracle") {
        assert!(m.mesd_seconds.is_none() || m.mesd_seconds.unwrap() > 50.0);
    }
}

#[test]
fn chance_interval_is_symmetric() {
    for n in [10, 57, 240, 1000] {
        let (lo, hi) = chance_interval(n);
        assert_eq!(lo + hi, n, "n = {n}");
    }
}
