//! Minimal expected switch duration of a performance curve.
//!
//! Gain control is modelled as a random walk on `K` states indexed
//! `0..K`, higher states favouring the newly attended speaker. A window
//! decision moves the state one step up with probability `p` and one step
//! down otherwise; both ends reflect. The new speaker's comfort region is
//! `{c, …, K−1}` and the previous speaker's is its mirror image
//! `{0, …, K−1−c}`, so a switch starts at `K−1−c` and ends on first reaching
//! `c`. A design `(K, c)` is admissible when the stationary mass of the
//! comfort region is at least the comfort threshold. The MESD is the
//! smallest `τ · E[steps]` over the curve's points and admissible designs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curve::PerformanceCurve;
use crate::error::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MesdOptions {
    pub min_states: usize,
    pub max_states: usize,
    /// Required stationary probability of the comfort region.
    pub comfort_threshold: f64,
    /// MESD values above this are reported as unbounded.
    pub bound_s: f64,
}

impl Default for MesdOptions {
    fn default() -> Self {
        Self {
            min_states: 2,
            max_states: 10,
            comfort_threshold: 0.9,
            bound_s: 50.0,
        }
    }
}

impl MesdOptions {
    pub fn validate(&self) -> Result<()> {
        if self.min_states < 2 || self.max_states < self.min_states {
            return Err(EvalError::Config("mesd: need 2 <= min_states <= max_states".into()));
        }
        if !(self.comfort_threshold > 0.0 && self.comfort_threshold < 1.0) {
            return Err(EvalError::Config("mesd: comfort_threshold must lie in (0, 1)".into()));
        }
        if !(self.bound_s.is_finite() && self.bound_s > 0.0) {
            return Err(EvalError::Config("mesd: bound_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDesign {
    pub states: usize,
    /// Lowest comfort state of the new speaker.
    pub target: usize,
    pub start: usize,
    pub expected_steps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MesdStatus {
    Finite,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesdResult {
    /// Minimum over admissible designs; `None` when no design is admissible.
    pub mesd_seconds: Option<f64>,
    pub tau: Option<f64>,
    pub design: Option<ChainDesign>,
    /// `Unbounded` when nothing is admissible or the minimum exceeds the bound.
    pub status: MesdStatus,
}

fn check_step(p: f64) -> Result<()> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(EvalError::Config(format!("step probability {p} must lie in (0.5, 1]")));
    }
    Ok(())
}

/// Stationary probability of `{target, …, states−1}` for the reflecting walk.
pub fn comfort_mass(p: f64, states: usize, target: usize) -> Result<f64> {
    check_step(p)?;
    if target >= states {
        return Err(EvalError::Config("comfort target must be below the state count".into()));
    }
    // π_i ∝ (p/q)^i; scaled by the top state's weight to stay finite.
    let ratio = (1.0 - p) / p;
    let weight = |i: usize| ratio.powi((states - 1 - i) as i32);
    let total: f64 = (0..states).map(weight).sum();
    let upper: f64 = (target..states).map(weight).sum();
    Ok(upper / total)
}

/// Expected steps from `start` until first reaching `target > start`,
/// from the absorbing-chain system `(I − Q) t = 1` on states `0..target`.
pub fn expected_hitting_time(p: f64, states: usize, start: usize, target: usize) -> Result<f64> {
    check_step(p)?;
    if !(start < target && target < states) {
        return Err(EvalError::Config("need start < target < states".into()));
    }
    let q = 1.0 - p;
    let n = target;
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        if i == 0 {
            // Reflection: a down-step from the bottom stays put.
            a[(0, 0)] -= q;
        } else {
            a[(i, i - 1)] -= q;
        }
        if i + 1 < n {
            a[(i, i + 1)] -= p;
        }
    }
    let t = a
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| EvalError::Config("absorbing chain system is singular".into()))?;
    Ok(t[start])
}

/// Fastest admissible design for step probability `p`, if any.
pub fn best_design(p: f64, opts: &MesdOptions) -> Result<Option<ChainDesign>> {
    opts.validate()?;
    if p <= 0.5 {
        return Ok(None);
    }
    let mut best: Option<ChainDesign> = None;
    for states in opts.min_states..=opts.max_states {
        // Disjoint comfort regions need target > start = states − 1 − target.
        for target in states / 2..states {
            let start = states - 1 - target;
            if start >= target || comfort_mass(p, states, target)? < opts.comfort_threshold {
                continue;
            }
            let steps = expected_hitting_time(p, states, start, target)?;
            if best.is_none_or(|b| steps < b.expected_steps) {
                best = Some(ChainDesign {
                    states,
                    target,
                    start,
                    expected_steps: steps,
                });
            }
        }
    }
    Ok(best)
}

pub fn mesd(curve: &PerformanceCurve, opts: &MesdOptions) -> Result<MesdResult> {
    opts.validate()?;
    let mut best: Option<(f64, f64, ChainDesign)> = None;
    for pt in &curve.points {
        let p = pt.accuracy / 100.0;
        if let Some(design) = best_design(p, opts)? {
            let seconds = pt.tau * design.expected_steps;
            if best.is_none_or(|(s, _, _)| seconds < s) {
                best = Some((seconds, pt.tau, design));
            }
        }
    }
    Ok(match best {
        Some((seconds, tau, design)) => MesdResult {
            mesd_seconds: Some(seconds),
            tau: Some(tau),
            design: Some(design),
            status: if seconds > opts.bound_s {
                MesdStatus::Unbounded
            } else {
                MesdStatus::Finite
            },
        },
        None => MesdResult {
            mesd_seconds: None,
            tau: None,
            design: None,
            status: MesdStatus::Unbounded,
        },
    })
}
