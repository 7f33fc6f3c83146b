//! Training-free attention decisions from per-window lasso decoders.
//!
//! For every decision window a lasso decoder is fitted to each speaker's
//! envelope on that window alone; the speaker whose decoder has the largest
//! L1 norm is taken as attended.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::{AadError, Result};
use crate::lagged::{LagDirection, LaggedDesign};
use crate::lasso::{AdmmOptions, AdmmSolver, LassoSolution};
use crate::linalg::gram;
use crate::signal::{pearson, MultiChannel};

/// A priori selection of EEG channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSubset {
    indices: Vec<usize>,
    labels: Vec<String>,
}

impl ChannelSubset {
    /// Every channel of the recording.
    pub fn all(eeg: &MultiChannel) -> Self {
        Self {
            indices: (0..eeg.n_channels()).collect(),
            labels: eeg.labels().to_vec(),
        }
    }

    /// Looks the labels up in the recording (case-insensitive).
    pub fn from_labels(eeg: &MultiChannel, wanted: &[String]) -> Result<Self> {
        let mut indices = Vec::with_capacity(wanted.len());
        for w in wanted {
            let i = eeg
                .labels()
                .iter()
                .position(|l| l.eq_ignore_ascii_case(w))
                .ok_or_else(|| AadError::param("channel subset", format!("no channel labelled `{w}`")))?;
            indices.push(i);
        }
        Self::from_indices(eeg, indices)
    }

    pub fn from_indices(eeg: &MultiChannel, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(AadError::param("channel subset", "must not be empty"));
        }
        for (k, &i) in indices.iter().enumerate() {
            if i >= eeg.n_channels() {
                return Err(AadError::param("channel subset", format!("index {i} out of range")));
            }
            if indices[..k].contains(&i) {
                return Err(AadError::param("channel subset", format!("index {i} repeated")));
            }
        }
        let labels = indices.iter().map(|&i| eeg.labels()[i].clone()).collect();
        Ok(Self { indices, labels })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn apply(&self, eeg: &MultiChannel) -> Result<MultiChannel> {
        eeg.select(&self.indices)
    }
}

/// Attention marker compared across speakers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    /// L1 norm of each speaker's decoder.
    #[default]
    L1Norm,
    /// Correlation between each decoder's reconstruction and its envelope.
    Correlation,
}

/// Per-speaker outcome of one window at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveDecision {
    pub decision: Decision,
    pub lambda: f64,
    pub decoders: Vec<DVector<f64>>,
    pub l1_norms: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

/// Decides one window. `eeg` holds the selected channels and `envelopes`
/// the speakers' envelopes on the same samples.
pub fn adap_decide<S: AsRef<[f64]>, E: AsRef<[f64]>>(
    eeg: &[S],
    envelopes: &[E],
    lags: usize,
    lambda: f64,
    marker: Marker,
    opts: &AdmmOptions,
) -> Result<AdaptiveDecision> {
    let mut out = adap_decide_path(eeg, envelopes, lags, &[lambda], marker, opts)?;
    Ok(out.pop().expect("one lambda"))
}

/// Decides one window for several λ values, sharing the factorization and
/// warm-starting from larger to smaller λ. Results follow the input order.
pub fn adap_decide_path<S: AsRef<[f64]>, E: AsRef<[f64]>>(
    eeg: &[S],
    envelopes: &[E],
    lags: usize,
    lambdas: &[f64],
    marker: Marker,
    opts: &AdmmOptions,
) -> Result<Vec<AdaptiveDecision>> {
    if envelopes.len() < 2 {
        return Err(AadError::param("envelopes", "need at least two speakers"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(AadError::param("lambda", "values must be finite and nonnegative"));
    }
    let t = eeg.first().map_or(0, |c| c.as_ref().len());
    if envelopes.iter().any(|e| e.as_ref().len() != t) {
        return Err(AadError::param("envelopes", "must match the EEG window length"));
    }
    if t < lags {
        return Err(AadError::InsufficientData(format!("window of {t} samples is shorter than {lags} lags")));
    }
    let x = LaggedDesign::build(eeg, lags, LagDirection::AntiCausal)?;
    let rows = x.rows();
    let solver = AdmmSolver::new(&gram(x.matrix()), *opts)?;
    let targets: Vec<DVector<f64>> = envelopes
        .iter()
        .map(|e| DVector::from_column_slice(&e.as_ref()[..rows]))
        .collect();
    let rhs: Vec<DVector<f64>> = targets.iter().map(|s| x.matrix().tr_mul(s)).collect();

    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut warm: Vec<Option<LassoSolution>> = vec![None; envelopes.len()];
    let mut results: Vec<Option<AdaptiveDecision>> = vec![None; lambdas.len()];
    for &k in &order {
        let lambda = lambdas[k];
        let mut decoders = Vec::with_capacity(envelopes.len());
        let mut converged = Vec::with_capacity(envelopes.len());
        let mut iterations = Vec::with_capacity(envelopes.len());
        for (i, r) in rhs.iter().enumerate() {
            let sol = solver.solve(r, lambda * r.amax(), warm[i].as_ref());
            decoders.push(sol.weights.clone());
            converged.push(sol.converged);
            iterations.push(sol.iterations);
            warm[i] = Some(sol);
        }
        let l1_norms: Vec<f64> = decoders.iter().map(|d| d.lp_norm(1)).collect();
        let all_zero = l1_norms.iter().all(|&n| n == 0.0);
        let decision = match marker {
            Marker::L1Norm => Decision::argmax(l1_norms.clone(), all_zero),
            Marker::Correlation => {
                let mut scores = Vec::with_capacity(decoders.len());
                let mut degenerate = true;
                for (d, s) in decoders.iter().zip(&targets) {
                    let c = pearson((x.matrix() * d).as_slice(), s.as_slice())?;
                    degenerate &= c.degenerate;
                    scores.push(c.value);
                }
                Decision::argmax(scores, degenerate)
            }
        };
        results[k] = Some(AdaptiveDecision {
            decision,
            lambda,
            decoders,
            l1_norms,
            converged,
            iterations,
        });
    }
    Ok(results.into_iter().map(|r| r.expect("every lambda solved")).collect())
}

/// One CSV row of per-window diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub window: usize,
    pub lambda: f64,
    pub speaker: usize,
    pub l1_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub chosen: bool,
}

impl AdaptiveDecision {
    pub fn diagnostics(&self, window: usize) -> Vec<DiagnosticRow> {
        (0..self.decoders.len())
            .map(|i| DiagnosticRow {
                window,
                lambda: self.lambda,
                speaker: i,
                l1_norm: self.l1_norms[i],
                converged: self.converged[i],
                iterations: self.iterations[i],
                chosen: i == self.decision.speaker,
            })
            .collect()
    }
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let to_err = |e: csv::Error| AadError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| AadError::io(path, e))
}
