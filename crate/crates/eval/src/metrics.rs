//! Decision tallies and accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Percentage of `(predicted, truth)` pairs that agree.
pub fn accuracy(decisions: &[(usize, usize)]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(EvalError::InsufficientData("accuracy of zero decisions".into()));
    }
    let correct = decisions.iter().filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / decisions.len() as f64)
}

/// Running count of correct decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn record(&mut self, correct: bool) {
        self.correct += usize::from(correct);
        self.total += 1;
    }

    pub fn merge(&mut self, other: Tally) {
        self.correct += other.correct;
        self.total += other.total;
    }

    /// Percentage correct, `None` without decisions.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}
