//! Training-free per-window lasso decoders compared across speakers; only
//! λ is chosen on the training windows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use aad_core::adaptive::{adap_decide_path, ChannelSubset};
use aad_core::{Decision, Pipeline, Trial};

use super::design_rows;
use crate::algorithm::{best_tally, hash_floats, AadAlgorithm, TrainContext, TrainedAad};
use crate::algorithm::Window;
use crate::config::AdaptiveConfig;
use crate::error::{EvalError, Result};
use crate::metrics::Tally;
use crate::segment::windows;

/// Decisions for every λ, keyed by (segment, window length, window index).
type Cache = Arc<Mutex<HashMap<(usize, usize, usize), Vec<Decision>>>>;

pub struct AdaptiveLasso {
    cfg: AdaptiveConfig,
    cache: Cache,
}

impl AdaptiveLasso {
    pub fn new(cfg: AdaptiveConfig) -> Self {
        Self {
            cfg,
            cache: Arc::default(),
        }
    }
}

fn zscore(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let inv = if sd > 0.0 { 1.0 / sd } else { 1.0 };
    x.iter().map(|v| (v - mean) * inv).collect()
}

/// Every window is standardized on its own, so decisions do not depend on
/// the fold's normalization and can be shared across folds.
fn decide_all(cfg: &AdaptiveConfig, cache: &Cache, seg: &Trial, seg_id: usize, window: usize, index: usize) -> Result<Vec<Decision>> {
    let key = (seg_id, window, index);
    if let Some(d) = cache.lock().expect("cache lock").get(&key) {
        return Ok(d.clone());
    }
    let range = index * window..(index + 1) * window;
    design_rows(&range, cfg.lags)?;
    let subset = match &cfg.channels {
        Some(labels) => ChannelSubset::from_labels(&seg.eeg, labels)?,
        None => ChannelSubset::all(&seg.eeg),
    };
    let eeg: Vec<Vec<f64>> = subset
        .indices()
        .iter()
        .map(|&c| zscore(&seg.eeg.channel(c)[range.clone()]))
        .collect();
    let envs: Vec<Vec<f64>> = seg.envelopes.iter().map(|e| zscore(&e.samples()[range.clone()])).collect();
    let decisions: Vec<Decision> =
        adap_decide_path(&eeg, &envs, cfg.lags, cfg.lambdas.values(), cfg.marker, &cfg.admm)?
            .into_iter()
            .map(|a| a.decision)
            .collect();
    cache.lock().expect("cache lock").insert(key, decisions.clone());
    Ok(decisions)
}

struct TrainedAdaptive {
    cfg: AdaptiveConfig,
    cache: Cache,
    /// Grid index chosen per window length.
    chosen: Vec<usize>,
    windows: Vec<usize>,
}

impl TrainedAad for TrainedAdaptive {
    fn decide(&self, tau_index: usize, w: &Window<'_>) -> Result<Decision> {
        let window = self.windows[tau_index];
        if w.range.len() != window || w.range.start != w.index * window {
            return Err(EvalError::Config("adaptive decoder expects tiled windows".into()));
        }
        let all = decide_all(&self.cfg, &self.cache, w.segment, w.segment_id, window, w.index)?;
        Ok(all[self.chosen[tau_index]].clone())
    }

    fn fingerprint(&self) -> u64 {
        let lambdas: Vec<f64> = self.chosen.iter().map(|&g| self.cfg.lambdas.values()[g]).collect();
        hash_floats(&lambdas)
    }
}

impl AadAlgorithm for AdaptiveLasso {
    fn id(&self) -> &str {
        "mmse-adap-lasso"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        let grid = self.cfg.lambdas.len();
        let mut chosen = Vec::with_capacity(ctx.windows.len());
        for &window in ctx.windows {
            let mut tallies = vec![Tally::default(); grid];
            for (seg, &id) in ctx.train.iter().zip(ctx.train_ids) {
                for (i, _) in windows(seg.len(), window).iter().enumerate() {
                    let all = decide_all(&self.cfg, &self.cache, seg, id, window, i)?;
                    for (t, d) in tallies.iter_mut().zip(&all) {
                        t.record(d.is_correct(seg.attended));
                    }
                }
            }
            chosen.push(best_tally(&tallies).ok_or_else(|| {
                EvalError::InsufficientData(format!("no training windows of {window} samples"))
            })?);
        }
        Ok(Box::new(TrainedAdaptive {
            cfg: self.cfg.clone(),
            cache: self.cache.clone(),
            chosen,
            windows: ctx.windows.to_vec(),
        }))
    }
}
