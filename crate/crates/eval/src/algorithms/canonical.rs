//! CCA between the lagged EEG and the lagged attended envelope, with
//! correlation-difference features classified by LDA.

use std::ops::Range;

use aad_core::cca::{
    cca_correlations, cca_decide, envelope_design, fit_cca_stats, fit_lda, reduced_eeg_design, CcaFilters, CcaStats,
    Lda, Pca, PcaSpace,
};
use aad_core::lagged::LagDirection;
use aad_core::{pearson, Decision, LaggedDesign, Pipeline, Trial};
use nalgebra::{DMatrix, DVector};

use super::design_rows;
use crate::algorithm::{hash_floats, inner_cv, AadAlgorithm, TrainContext, TrainedAad, Window};
use crate::config::CcaConfig;
use crate::error::{EvalError, Result};
use crate::metrics::Tally;
use crate::segment::windows;

pub struct Cca {
    cfg: CcaConfig,
}

impl Cca {
    pub fn new(cfg: CcaConfig) -> Self {
        Self { cfg }
    }

    fn fit_pca(&self, train: &[Trial]) -> Result<Pca> {
        match self.cfg.pca_space {
            PcaSpace::Channel => {
                let parts: Vec<&[Vec<f64>]> = train.iter().map(|t| t.eeg.channels()).collect();
                Ok(Pca::fit_channels(&parts, self.cfg.pca)?)
            }
            PcaSpace::Lag => {
                let mut sxx: Option<DMatrix<f64>> = None;
                let mut sum: Option<DVector<f64>> = None;
                let mut n = 0usize;
                for t in train {
                    let x = LaggedDesign::build(t.eeg.channels(), self.cfg.eeg_lags, LagDirection::AntiCausal)?;
                    let m = x.matrix();
                    let g = m.tr_mul(m);
                    let s = m.row_sum().transpose();
                    sxx = Some(sxx.map_or(g.clone(), |a| a + g));
                    sum = Some(sum.map_or(s.clone(), |a| a + s));
                    n += x.rows();
                }
                let (sxx, sum) = (sxx.expect("training data"), sum.expect("training data"));
                let mean = sum / n as f64;
                let cov = sxx / n as f64 - &mean * mean.transpose();
                Ok(Pca::from_covariance(&((&cov + cov.transpose()) * 0.5), self.cfg.pca)?)
            }
        }
    }
}

/// Component outputs of one segment for the EEG and every speaker.
struct Projected {
    eeg: DMatrix<f64>,
    speakers: Vec<DMatrix<f64>>,
}

struct SegmentDesigns {
    eeg: LaggedDesign,
    /// Causal envelope designs restricted to the EEG rows.
    envs: Vec<LaggedDesign>,
}

fn segment_designs(seg: &Trial, pca: &Pca, cfg: &CcaConfig) -> Result<SegmentDesigns> {
    let eeg = reduced_eeg_design(pca, cfg.pca_space, seg.eeg.channels(), cfg.eeg_lags)?;
    let envs = seg
        .envelopes
        .iter()
        .map(|e| Ok(envelope_design(e.samples(), cfg.env_lags)?.restrict(eeg.time_range())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentDesigns { eeg, envs })
}

fn project(d: &SegmentDesigns, f: &CcaFilters) -> Projected {
    Projected {
        eeg: d.eeg.matrix() * &f.wx,
        speakers: d.envs.iter().map(|x| x.matrix() * &f.ws).collect(),
    }
}

/// Per-speaker component correlations over `rows` (times, starting at 0).
fn window_rhos(p: &Projected, rows: &Range<usize>) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut degenerate = false;
    let mut out = Vec::with_capacity(p.speakers.len());
    for ys in &p.speakers {
        let mut rho = Vec::with_capacity(ys.ncols());
        for k in 0..ys.ncols() {
            let c = pearson(&p.eeg.column(k).as_slice()[rows.clone()], &ys.column(k).as_slice()[rows.clone()])?;
            degenerate |= c.degenerate;
            rho.push(c.value);
        }
        out.push(rho);
    }
    Ok((out, degenerate))
}

/// Attended-minus-other features of every window; all labelled "first attended".
fn window_features(p: &Projected, seg: &Trial, window: usize, lags: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for w in windows(seg.len(), window) {
        let (rhos, _) = window_rhos(p, &design_rows(&w, lags)?)?;
        let att = &rhos[seg.attended];
        for (i, r) in rhos.iter().enumerate() {
            if i != seg.attended {
                out.push(att.iter().zip(r).map(|(a, b)| a - b).collect());
            }
        }
    }
    Ok(out)
}

fn truncate(features: &[Vec<f64>], j: usize) -> Vec<Vec<f64>> {
    features.iter().map(|f| f[..j].to_vec()).collect()
}

struct TrainedCca {
    pca: Pca,
    cfg: CcaConfig,
    filters: CcaFilters,
    /// One classifier per window length; its dimension is the selected J.
    ldas: Vec<Lda>,
}

impl TrainedAad for TrainedCca {
    fn decide(&self, tau_index: usize, w: &Window<'_>) -> Result<Decision> {
        let rows = design_rows(&w.range, self.cfg.eeg_lags)?;
        let eeg: Vec<&[f64]> = w.segment.eeg.channels().iter().map(|c| &c[w.range.clone()]).collect();
        let xe = reduced_eeg_design(&self.pca, self.cfg.pca_space, &eeg, self.cfg.eeg_lags)?;
        let mut rhos = Vec::with_capacity(w.segment.n_speakers());
        let mut degenerate = false;
        for env in &w.segment.envelopes {
            let xs = envelope_design(env.samples(), self.cfg.env_lags)?.restrict(rows.clone())?;
            let (r, deg) = cca_correlations(&self.filters, &xe, &xs)?;
            degenerate |= deg;
            rhos.push(r);
        }
        Ok(cca_decide(&self.ldas[tau_index], &rhos, degenerate)?)
    }

    fn fingerprint(&self) -> u64 {
        let lda = self.ldas.iter().flat_map(|l| l.weights.iter().chain(std::iter::once(&l.bias)));
        hash_floats(
            self.pca
                .basis()
                .iter()
                .chain(self.filters.wx.iter())
                .chain(self.filters.ws.iter())
                .chain(lda),
        )
    }
}

impl AadAlgorithm for Cca {
    fn id(&self) -> &str {
        "cca"
    }

    fn pipeline(&self) -> Pipeline {
        Pipeline::LINEAR
    }

    fn train(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn TrainedAad>> {
        let n = ctx.train.len();
        let pca = self.fit_pca(ctx.train)?;
        let designs: Vec<SegmentDesigns> = ctx
            .train
            .iter()
            .map(|s| segment_designs(s, &pca, &self.cfg))
            .collect::<Result<_>>()?;
        let stats: Vec<CcaStats> = designs
            .iter()
            .zip(ctx.train)
            .map(|(d, s)| Ok(CcaStats::from_designs(&d.eeg, &d.envs[s.attended])?))
            .collect::<Result<_>>()?;
        let mut j_max = designs[0].eeg.cols().min(self.cfg.env_lags);
        if let Some(cap) = self.cfg.max_components {
            j_max = j_max.min(cap);
        }
        let sum = |members: &mut dyn Iterator<Item = usize>| -> Result<CcaStats> {
            let parts: Vec<&CcaStats> = members.map(|i| &stats[i]).collect();
            Ok(CcaStats::sum(&parts)?)
        };
        // Features of each training segment from a CCA fitted without it.
        let mut features: Vec<Vec<Vec<Vec<f64>>>> = vec![Vec::with_capacity(n); ctx.windows.len()];
        for k in 0..n {
            let filters = fit_cca_stats(&sum(&mut (0..n).filter(|&i| i != k))?, j_max).map_err(|e| {
                EvalError::InnerFold {
                    fold: k,
                    source: Box::new(e.into()),
                }
            })?;
            let p = project(&designs[k], &filters);
            for (t, &window) in ctx.windows.iter().enumerate() {
                features[t].push(window_features(&p, &ctx.train[k], window, self.cfg.eeg_lags)?);
            }
        }
        let filters = fit_cca_stats(&sum(&mut (0..n))?, j_max)?;
        let mut ldas = Vec::with_capacity(ctx.windows.len());
        for groups in &features {
            let pooled = |members: &[usize]| -> Vec<Vec<f64>> {
                members.iter().flat_map(|&m| groups[m].iter().cloned()).collect()
            };
            let cv = inner_cv(n, j_max, ctx.inner_folds, |train, val| {
                let (tr, va) = (pooled(train), pooled(val));
                (1..=j_max)
                    .map(|j| {
                        if tr.is_empty() {
                            return Ok(None);
                        }
                        let lda = fit_lda(&truncate(&tr, j), &vec![true; tr.len()])?;
                        let mut t = Tally::default();
                        for f in &va {
                            t.record(lda.score(&f[..j]) > 0.0);
                        }
                        Ok(Some(t))
                    })
                    .collect()
            })?;
            let j = cv.best + 1;
            let all = pooled(&(0..n).collect::<Vec<_>>());
            ldas.push(fit_lda(&truncate(&all, j), &vec![true; all.len()])?);
        }
        Ok(Box::new(TrainedCca {
            pca,
            cfg: self.cfg.clone(),
            filters,
            ldas,
        }))
    }
}
