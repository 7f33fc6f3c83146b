//! Attention decisions shared by all decoders.

use serde::{Deserialize, Serialize};

/// Outcome of one attention decision over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub speaker: usize,
    /// Per-speaker evidence the decision was taken on (higher wins).
    pub scores: Vec<f64>,
    /// More than one speaker shared the winning score; the lowest index won.
    pub tie: bool,
    /// The evidence carried no information (e.g. constant reconstruction).
    pub degenerate: bool,
}

impl Decision {
    /// Argmax over `scores`, ties resolved to the lowest index.
    pub fn argmax(scores: Vec<f64>, degenerate: bool) -> Self {
        let mut best = 0;
        for (i, &v) in scores.iter().enumerate().skip(1) {
            if v > scores[best] {
                best = i;
            }
        }
        let tie = scores
            .iter()
            .enumerate()
            .any(|(i, &v)| i != best && v == scores[best]);
        Self {
            speaker: best,
            scores,
            tie,
            degenerate,
        }
    }

    pub fn is_correct(&self, attended: usize) -> bool {
        self.speaker == attended
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        let d = Decision::argmax(vec![0.1, 0.5, 0.2], false);
        assert_eq!((d.speaker, d.tie), (1, false));
        let d = Decision::argmax(vec![0.3, 0.3], false);
        assert_eq!((d.speaker, d.tie), (0, true));
        let d = Decision::argmax(vec![0.0, 0.7, 0.7], true);
        assert_eq!((d.speaker, d.tie, d.degenerate), (1, true, true));
    }
}
