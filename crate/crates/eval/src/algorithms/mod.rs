//! Benchmarked decoders behind the [`AadAlgorithm`] interface.

mod adaptive;
mod baseline;
mod canonical;
mod mmse;
mod neural;

use std::ops::Range;

use aad_core::lagged::LagDirection;
use aad_core::linear::decide;
use aad_core::{Decision, Integration, LaggedDesign, Penalty, Trial};

pub use adaptive::AdaptiveLasso;
pub use baseline::{AntiOracle, Coin, Oracle};
pub use canonical::Cca;
pub use mmse::Mmse;
pub use neural::NnSr;

use crate::algorithm::AadAlgorithm;
use crate::config::EvalConfig;
use crate::error::{EvalError, Result};
use crate::metrics::Tally;
use crate::segment::windows;

/// A fresh instance of algorithm `id`; instances may cache per-subject work,
/// so use one per subject.
pub fn build_algorithm(id: &str, cfg: &EvalConfig) -> Result<Box<dyn AadAlgorithm>> {
    let mmse = |integration, penalty| -> Box<dyn AadAlgorithm> {
        Box::new(Mmse::new(integration, penalty, cfg.mmse.clone()))
    };
    Ok(match id {
        "oracle" => Box::new(Oracle),
        "anti-oracle" => Box::new(AntiOracle),
        "coin" => Box::new(Coin),
        "mmse-avgcorr-ridge" => mmse(Integration::AvgCorr, Penalty::Ridge),
        "mmse-avgdec-ridge" => mmse(Integration::AvgDec, Penalty::Ridge),
        "mmse-avgcorr-lasso" => mmse(Integration::AvgCorr, Penalty::Lasso),
        "mmse-avgdec-lasso" => mmse(Integration::AvgDec, Penalty::Lasso),
        "cca" => Box::new(Cca::new(cfg.cca.clone())),
        "mmse-adap-lasso" => Box::new(AdaptiveLasso::new(cfg.adaptive.clone())),
        "nn-sr" => Box::new(NnSr::new(cfg.nn.clone())),
        other => return Err(EvalError::UnknownAlgorithm(other.to_string())),
    })
}

/// Times whose anti-causal lag window of `lags` samples stays inside `window`.
pub(crate) fn design_rows(window: &Range<usize>, lags: usize) -> Result<Range<usize>> {
    if window.len() < lags + 1 {
        return Err(EvalError::InsufficientData(format!(
            "window of {} samples is too short for {lags} lags",
            window.len()
        )));
    }
    Ok(window.start..window.end + 1 - lags)
}

/// Anti-causal design of the EEG inside `window` only.
pub(crate) fn window_design(seg: &Trial, window: &Range<usize>, lags: usize) -> Result<LaggedDesign> {
    let eeg: Vec<&[f64]> = seg.eeg.channels().iter().map(|c| &c[window.clone()]).collect();
    Ok(LaggedDesign::build(&eeg, lags, LagDirection::AntiCausal)?)
}

/// Anti-causal design of a whole segment; row `t` is time `t`.
pub(crate) fn segment_design(seg: &Trial, lags: usize) -> Result<LaggedDesign> {
    Ok(LaggedDesign::build(seg.eeg.channels(), lags, LagDirection::AntiCausal)?)
}

pub(crate) fn envelope_slices<'a>(seg: &'a Trial, rows: &Range<usize>) -> Vec<&'a [f64]> {
    seg.envelopes.iter().map(|e| &e.samples()[rows.clone()]).collect()
}

/// Decision from a reconstruction aligned with `rows` of the segment.
pub(crate) fn decide_rows(recon: &[f64], seg: &Trial, rows: &Range<usize>) -> Result<Decision> {
    let envs = envelope_slices(seg, rows);
    Ok(decide(recon, &envs, 0..recon.len())?)
}

/// Scores a whole-segment reconstruction (row `t` = time `t`) on every
/// window of `window` samples.
pub(crate) fn tally_reconstruction(recon: &[f64], seg: &Trial, window: usize, lags: usize) -> Result<Tally> {
    let mut t = Tally::default();
    for w in windows(seg.len(), window) {
        let rows = design_rows(&w, lags)?;
        let d = decide_rows(&recon[rows.clone()], seg, &rows)?;
        t.record(d.is_correct(seg.attended));
    }
    Ok(t)
}
