//! Deciders that ignore the EEG: harness sanity checks.

use aad_core::{Decision, Pipeline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithm::{AadAlgorithm, TrainContext, TrainedAad, Window};
use crate::error::Result;

fn pick(speaker: usize, n: usize) -> Decision {
    let mut scores = vec![0.0; n];
    scores[speaker] = 1.0;
    Decision::argmax(scores, false)
}

/// Always answers the attended speaker.
pub struct Oracle;

/// Always answers a speaker that is not attended.
pub struct AntiOracle;

/// Answers uniformly at random, seeded per fold and window.
pub struct Coin;

struct Fixed {
    wrong: bool,
}

impl TrainedAad for Fixed {
    fn decide(&self, _: usize, w: &Window<'_>) -> Result<Decision> {
        let n = w.segment.n_speakers();
        let truth = w.segment.attended;
        Ok(pick(if self.wrong { (truth + 1) % n } else { truth }, n))
    }

    fn fingerprint(&self) -> u64 {
        u64::from(self.wrong)
    }
}

impl AadAlgorithm for Oracle {
    fn id(&self) -> &str {
        "oracle"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, _: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        Ok(Box::new(Fixed { wrong: false }))
    }
}

impl AadAlgorithm for AntiOracle {
    fn id(&self) -> &str {
        "anti-oracle"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, _: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        Ok(Box::new(Fixed { wrong: true }))
    }
}

struct SeededCoin {
    seed: u64,
}

impl TrainedAad for SeededCoin {
    fn decide(&self, tau_index: usize, w: &Window<'_>) -> Result<Decision> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((tau_index as u64) << 32) | w.index as u64);
        let n = w.segment.n_speakers();
        Ok(pick(rng.random_range(0..n), n))
    }

    fn fingerprint(&self) -> u64 {
        self.seed
    }
}

impl AadAlgorithm for Coin {
    fn id(&self) -> &str {
        "coin"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        Ok(Box::new(SeededCoin { seed: ctx.seed }))
    }
}
