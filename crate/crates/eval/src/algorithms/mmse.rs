//! Least-squares backward decoders with ridge or lasso penalty and early or
//! late integration of the training segments.

use aad_core::linear::{lasso_path, reconstruct, ridge_path, segment_stats, Decoder, DecoderMeta};
use aad_core::{Decision, Integration, LaggedDesign, Penalty, Pipeline, SegmentStats, Trial};
use nalgebra::DVector;

use super::{decide_rows, design_rows, segment_design, tally_reconstruction, window_design};
use crate::algorithm::{hash_floats, inner_cv, AadAlgorithm, TrainContext, TrainedAad, Window};
use crate::config::MmseConfig;
use crate::error::Result;
use crate::metrics::Tally;
use crate::segment::windows;

pub struct Mmse {
    id: String,
    integration: Integration,
    penalty: Penalty,
    cfg: MmseConfig,
}

impl Mmse {
    pub fn new(integration: Integration, penalty: Penalty, cfg: MmseConfig) -> Self {
        Self {
            id: format!("mmse-{integration}-{penalty}"),
            integration,
            penalty,
            cfg,
        }
    }

    /// Weights for every λ of the grid; `None` where the solve failed.
    fn path(&self, stats: &SegmentStats) -> Result<Vec<Option<DVector<f64>>>> {
        let lambdas = self.cfg.lambdas.values();
        Ok(match self.penalty {
            Penalty::Ridge => lambdas
                .iter()
                .map(|&l| aad_core::linear::solve_ridge(stats, l).ok().map(|d| d.weights().clone()))
                .collect(),
            Penalty::Lasso => lasso_path(stats, lambdas, &self.cfg.admm)?
                .into_iter()
                .map(|d| Some(d.weights().clone()))
                .collect(),
        })
    }

    /// Per-window decoders of one design, for every λ.
    fn window_path(&self, x: &LaggedDesign, s: &[f64]) -> Result<Vec<Option<DVector<f64>>>> {
        match self.penalty {
            Penalty::Ridge => Ok(ridge_path(x, s, self.cfg.lambdas.values())?
                .into_iter()
                .map(|d| d.ok().map(|d| d.weights().clone()))
                .collect()),
            Penalty::Lasso => self.path(&segment_stats(x, s)?),
        }
    }

    fn decoder(&self, weights: DVector<f64>, lambda: f64, x: &LaggedDesign) -> Result<Decoder> {
        let meta = DecoderMeta {
            penalty: self.penalty,
            integration: Some(self.integration),
            lambda,
            converged: true,
        };
        Ok(Decoder::new(weights, x.lags(), x.channels(), meta)?)
    }

    fn train_avgcorr(&self, ctx: &TrainContext<'_>, designs: &[(LaggedDesign, Vec<f64>)]) -> Result<Vec<Decoder>> {
        let stats: Vec<SegmentStats> = designs
            .iter()
            .map(|(x, s)| segment_stats(x, s))
            .collect::<aad_core::Result<_>>()?;
        let longest = *ctx.windows.last().expect("at least one window length");
        let lambdas = self.cfg.lambdas.values();
        let lags = self.cfg.lags;
        let cv = inner_cv(stats.len(), lambdas.len(), ctx.inner_folds, |train, val| {
            let parts: Vec<&SegmentStats> = train.iter().map(|&i| &stats[i]).collect();
            let path = self.path(&SegmentStats::sum(&parts)?)?;
            path.iter()
                .map(|w| {
                    let Some(w) = w else { return Ok(None) };
                    let mut t = Tally::default();
                    for &v in val {
                        let recon = (designs[v].0.matrix() * w).as_slice().to_vec();
                        t.merge(tally_reconstruction(&recon, &ctx.train[v], longest, lags)?);
                    }
                    Ok(Some(t))
                })
                .collect()
        })?;
        let all: Vec<&SegmentStats> = stats.iter().collect();
        let lambda = lambdas[cv.best];
        let w = self.path(&SegmentStats::sum(&all)?)?[cv.best]
            .clone()
            .ok_or_else(|| crate::error::EvalError::InsufficientData(format!("final solve failed at lambda {lambda}")))?;
        let d = self.decoder(w, lambda, &designs[0].0)?;
        Ok(vec![d; ctx.windows.len()])
    }

    fn train_avgdec(&self, ctx: &TrainContext<'_>, designs: &[(LaggedDesign, Vec<f64>)]) -> Result<Vec<Decoder>> {
        let lambdas = self.cfg.lambdas.values();
        let lags = self.cfg.lags;
        let dim = designs[0].0.cols();
        let mut out = Vec::with_capacity(ctx.windows.len());
        for &window in ctx.windows {
            // Per segment: sum of window decoders per λ (None once any failed) and window count.
            let mut sums: Vec<(Vec<Option<DVector<f64>>>, usize)> = Vec::with_capacity(designs.len());
            for (k, (x, s)) in designs.iter().enumerate() {
                let mut acc: Vec<Option<DVector<f64>>> = vec![Some(DVector::zeros(dim)); lambdas.len()];
                let mut count = 0;
                for w in windows(ctx.train[k].len(), window) {
                    let rows = design_rows(&w, lags)?;
                    let xw = x.restrict(rows.clone())?;
                    for (a, d) in acc.iter_mut().zip(self.window_path(&xw, &s[rows])?) {
                        *a = match (a.take(), d) {
                            (Some(sum), Some(d)) => Some(sum + d),
                            _ => None,
                        };
                    }
                    count += 1;
                }
                sums.push((acc, count));
            }
            let average = |members: &[usize], g: usize| -> Option<DVector<f64>> {
                let mut total = DVector::zeros(dim);
                let mut n = 0;
                for &m in members {
                    total += sums[m].0[g].as_ref()?;
                    n += sums[m].1;
                }
                (n > 0).then(|| total / n as f64)
            };
            let cv = inner_cv(designs.len(), lambdas.len(), ctx.inner_folds, |train, val| {
                (0..lambdas.len())
                    .map(|g| {
                        let Some(w) = average(train, g) else { return Ok(None) };
                        let mut t = Tally::default();
                        for &v in val {
                            let recon = (designs[v].0.matrix() * &w).as_slice().to_vec();
                            t.merge(tally_reconstruction(&recon, &ctx.train[v], window, lags)?);
                        }
                        Ok(Some(t))
                    })
                    .collect()
            })?;
            let everyone: Vec<usize> = (0..designs.len()).collect();
            let w = average(&everyone, cv.best).ok_or_else(|| {
                crate::error::EvalError::InsufficientData(format!("no training window of {window} samples"))
            })?;
            out.push(self.decoder(w, lambdas[cv.best], &designs[0].0)?);
        }
        Ok(out)
    }
}

struct TrainedMmse {
    /// One decoder per window length.
    decoders: Vec<Decoder>,
}

impl TrainedAad for TrainedMmse {
    fn decide(&self, tau_index: usize, w: &Window<'_>) -> Result<Decision> {
        let d = &self.decoders[tau_index];
        let rows = design_rows(&w.range, d.lags())?;
        let x = window_design(w.segment, &w.range, d.lags())?;
        decide_rows(&reconstruct(d, &x)?, w.segment, &rows)
    }

    fn fingerprint(&self) -> u64 {
        hash_floats(
            self.decoders
                .iter()
                .flat_map(|d| d.weights().iter().chain(std::iter::once(&d.meta.lambda))),
        )
    }
}

pub(crate) fn attended_designs(train: &[Trial], lags: usize) -> Result<Vec<(LaggedDesign, Vec<f64>)>> {
    train
        .iter()
        .map(|seg| {
            let x = segment_design(seg, lags)?;
            let s = seg.envelopes[seg.attended].samples()[..x.rows()].to_vec();
            Ok((x, s))
        })
        .collect()
}

impl AadAlgorithm for Mmse {
    fn id(&self) -> &str {
        &self.id
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        let designs = attended_designs(ctx.train, self.cfg.lags)?;
        let decoders = match self.integration {
            Integration::AvgCorr => self.train_avgcorr(ctx, &designs)?,
            Integration::AvgDec => self.train_avgdec(ctx, &designs)?,
        };
        Ok(Box::new(TrainedMmse { decoders }))
    }
}
