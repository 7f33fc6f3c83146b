//! Evaluation settings with per-algorithm hyperparameter blocks.

use aad_core::adaptive::Marker;
use aad_core::cca::{PcaRetain, PcaSpace};
use aad_core::nnsr::TrainConfig;
use aad_core::{AdmmOptions, LambdaGrid};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::mesd::MesdOptions;

/// Identifiers accepted in [`EvalConfig::algorithms`].
pub const KNOWN_ALGORITHMS: &[&str] = &[
    "oracle",
    "anti-oracle",
    "coin",
    "mmse-avgcorr-ridge",
    "mmse-avgdec-ridge",
    "mmse-avgcorr-lasso",
    "mmse-avgdec-lasso",
    "cca",
    "mmse-adap-lasso",
    "nn-sr",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmseConfig {
    /// Anti-causal lags per channel (5 = 250 ms at 20 Hz).
    pub lags: usize,
    pub lambdas: LambdaGrid,
    pub admm: AdmmOptions,
}

impl Default for MmseConfig {
    fn default() -> Self {
        Self {
            lags: 5,
            lambdas: LambdaGrid::default(),
            admm: AdmmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcaConfig {
    pub eeg_lags: usize,
    /// Causal envelope lags (25 = 1.25 s at 20 Hz).
    pub env_lags: usize,
    pub pca: PcaRetain,
    pub pca_space: PcaSpace,
    /// Upper end of the component-count search; all components when absent.
    pub max_components: Option<usize>,
}

impl Default for CcaConfig {
    fn default() -> Self {
        Self {
            eeg_lags: 5,
            env_lags: 25,
            pca: PcaRetain::All,
            pca_space: PcaSpace::Channel,
            max_components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub lags: usize,
    pub lambdas: LambdaGrid,
    /// Channel labels to use; every channel when absent.
    pub channels: Option<Vec<String>>,
    pub marker: Marker,
    pub admm: AdmmOptions,
}

/// Ten values evenly spaced over `[0.05, 0.95]`. The per-window rule only
/// separates speakers under strong shrinkage, so the grid covers large λ.
pub fn adaptive_grid() -> LambdaGrid {
    LambdaGrid::new((0..10).map(|k| (5 + 10 * k) as f64 / 100.0).collect()).expect("valid adaptive grid")
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            lags: 5,
            lambdas: adaptive_grid(),
            channels: None,
            marker: Marker::L1Norm,
            admm: AdmmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub algorithms: Vec<String>,
    /// Decision window lengths in seconds.
    pub taus: Vec<f64>,
    /// Length of the held-out segments of the outer loop.
    pub segment_s: f64,
    /// Fold count of the inner hyperparameter search.
    pub inner_folds: usize,
    pub seed: u64,
    pub mmse: MmseConfig,
    pub cca: CcaConfig,
    pub adaptive: AdaptiveConfig,
    pub nn: TrainConfig,
    pub mesd: MesdOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            algorithms: vec!["mmse-avgcorr-ridge".into(), "mmse-avgdec-ridge".into(), "cca".into()],
            taus: vec![1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0],
            segment_s: 60.0,
            inner_folds: 10,
            seed: 0,
            mmse: MmseConfig::default(),
            cca: CcaConfig::default(),
            adaptive: AdaptiveConfig::default(),
            nn: TrainConfig::default(),
            mesd: MesdOptions::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(EvalError::Config("algorithms: list is empty".into()));
        }
        for a in &self.algorithms {
            if !KNOWN_ALGORITHMS.contains(&a.as_str()) {
                return Err(EvalError::UnknownAlgorithm(a.clone()));
            }
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(EvalError::Config("algorithms: duplicate entries".into()));
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(EvalError::Config("taus: need positive window lengths".into()));
        }
        if self.taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EvalError::Config("taus: must be strictly increasing".into()));
        }
        if !(self.segment_s.is_finite() && self.segment_s > 0.0) {
            return Err(EvalError::Config("segment_s: must be positive".into()));
        }
        if self.taus.iter().any(|&t| t > self.segment_s) {
            return Err(EvalError::Config("taus: window longer than a segment".into()));
        }
        if self.inner_folds < 2 {
            return Err(EvalError::Config("inner_folds: need at least 2".into()));
        }
        if self.mmse.lags == 0 || self.adaptive.lags == 0 || self.cca.eeg_lags == 0 || self.cca.env_lags == 0 {
            return Err(EvalError::Config("lags: must be at least 1".into()));
        }
        if self.cca.max_components == Some(0) {
            return Err(EvalError::Config("cca.max_components: must be at least 1".into()));
        }
        self.mesd.validate()
    }
}
