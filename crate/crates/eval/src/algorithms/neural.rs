//! The two-neuron stimulus-reconstruction network.

use aad_core::nnsr::{nnsr_train, NnSrModel, Sequence, TrainConfig};
use aad_core::{Decision, Pipeline};

use super::{decide_rows, design_rows, window_design};
use crate::algorithm::{hash_floats, AadAlgorithm, TrainContext, TrainedAad, Window};
use crate::error::Result;

pub struct NnSr {
    cfg: TrainConfig,
}

impl NnSr {
    pub fn new(cfg: TrainConfig) -> Self {
        Self { cfg }
    }
}

struct TrainedNn {
    model: NnSrModel,
}

impl TrainedAad for TrainedNn {
    fn decide(&self, _: usize, w: &Window<'_>) -> Result<Decision> {
        let rows = design_rows(&w.range, self.model.lags)?;
        let x = window_design(w.segment, &w.range, self.model.lags)?;
        decide_rows(&self.model.predict(&x)?, w.segment, &rows)
    }

    fn fingerprint(&self) -> u64 {
        hash_floats(&self.model.to_vec())
    }
}

impl AadAlgorithm for NnSr {
    fn id(&self) -> &str {
        "nn-sr"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::NN
    }

    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        let data: Vec<Sequence<'_>> = ctx
            .train
            .iter()
            .map(|s| Sequence {
                eeg: s.eeg.channels(),
                target: s.envelopes[s.attended].samples(),
            })
            .collect();
        let cfg = TrainConfig {
            seed: ctx.seed,
            ..self.cfg.clone()
        };
        let (model, report) = nnsr_train(&data, &cfg)?;
        log::debug!(
            "{} fold {}: network best epoch {} of {}",
            ctx.subject,
            ctx.fold,
            report.best_epoch,
            report.train_loss.len()
        );
        Ok(Box::new(TrainedNn { model }))
    }
}
