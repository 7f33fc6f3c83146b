//! Canonical correlation analysis between lagged EEG and lagged envelopes,
//! with PCA pre-reduction of the EEG and an LDA classifier on correlation
//! differences.
//!
//! The backward (EEG) side is anti-causal with `L` lags, the forward
//! (envelope) side causal with `L_a` lags. Both designs must cover the same
//! time indices; [`envelope_design`] pads the stimulus history with zeros so
//! that a causal design has a row for every sample.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, read_matrix, sibling, write_json, write_matrix, RawMatrix};
use crate::decision::Decision;
use crate::error::{AadError, Result};
use crate::lagged::{LagDirection, LaggedDesign};
use crate::linalg::sorted_eigen;
use crate::signal::pearson;

/// Covariances with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum PcaRetain {
    All,
    /// Smallest number of components explaining at least this variance fraction.
    Fraction(f64),
    Count(usize),
}

/// Where PCA acts on the EEG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaSpace {
    /// On channels, before lag expansion.
    Channel,
    /// On the lag-expanded design columns.
    Lag,
}

/// Orthonormal basis of leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// d × k, columns sorted by decreasing variance.
    basis: DMatrix<f64>,
    /// All d eigenvalues of the fitted covariance, descending.
    variances: DVector<f64>,
}

impl Pca {
    /// Keeps the leading components of a covariance matrix. Directions with
    /// variance below `1/MAX_CONDITION` of the largest are never kept.
    pub fn from_covariance(cov: &DMatrix<f64>, retain: PcaRetain) -> Result<Self> {
        let d = cov.nrows();
        if d == 0 {
            return Err(AadError::InsufficientData("PCA on zero dimensions".into()));
        }
        let (values, vectors) = sorted_eigen(cov);
        let top = values[0].max(0.0);
        if !(top > 0.0) {
            return Err(AadError::InsufficientData("PCA input has zero variance".into()));
        }
        let rank = values.iter().filter(|&&v| v > top / MAX_CONDITION).count();
        let wanted = match retain {
            PcaRetain::All => d,
            PcaRetain::Count(k) => {
                if k == 0 || k > d {
                    return Err(AadError::param("pca count", format!("{k} not in 1..={d}")));
                }
                k
            }
            PcaRetain::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(AadError::param("pca fraction", format!("{f} not in (0, 1]")));
                }
                let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
                let mut acc = 0.0;
                let mut k = d;
                for (i, v) in values.iter().enumerate() {
                    acc += v.max(0.0);
                    if acc >= f * total * (1.0 - 1e-12) {
                        k = i + 1;
                        break;
                    }
                }
                k
            }
        };
        let k = if wanted > rank {
            if !matches!(retain, PcaRetain::All) {
                log::warn!("PCA: {wanted} components requested but data rank is {rank}; keeping {rank}");
            }
            rank
        } else {
            wanted
        };
        Ok(Self {
            basis: vectors.columns(0, k).into_owned(),
            variances: values,
        })
    }

    /// Fits on channel data pooled over several recordings.
    pub fn fit_channels<S: AsRef<[f64]>>(parts: &[&[S]], retain: PcaRetain) -> Result<Self> {
        let cov = channel_covariance(parts)?;
        Self::from_covariance(&cov, retain)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    /// Projects channels (each a time series) onto the basis.
    pub fn project_channels<S: AsRef<[f64]>>(&self, channels: &[S]) -> Result<Vec<Vec<f64>>> {
        if channels.len() != self.input_dim() {
            return Err(AadError::DimensionMismatch {
                context: "PCA channels",
                expected: self.input_dim(),
                got: channels.len(),
            });
        }
        let t = channels.first().map_or(0, |c| c.as_ref().len());
        let mut out = vec![vec![0.0; t]; self.output_dim()];
        for (k, o) in out.iter_mut().enumerate() {
            for (c, ch) in channels.iter().enumerate() {
                let w = self.basis[(c, k)];
                if w != 0.0 {
                    for (acc, v) in o.iter_mut().zip(ch.as_ref()) {
                        *acc += w * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Projects the rows of a sample matrix (n × d → n × k).
    pub fn project_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.basis
    }

    /// Maps projected rows back to the input space.
    pub fn reconstruct_rows(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        y * self.basis.transpose()
    }
}

/// Centered channel covariance pooled over recordings.
pub fn channel_covariance<S: AsRef<[f64]>>(parts: &[&[S]]) -> Result<DMatrix<f64>> {
    let d = parts.first().map_or(0, |p| p.len());
    if d == 0 || parts.iter().any(|p| p.len() != d) {
        return Err(AadError::param("channels", "recordings must share a nonzero channel count"));
    }
    let n: usize = parts.iter().map(|p| p[0].as_ref().len()).sum();
    if n < 2 {
        return Err(AadError::InsufficientData("covariance needs at least 2 samples".into()));
    }
    let mut mean = vec![0.0; d];
    for p in parts {
        for (c, ch) in p.iter().enumerate() {
            mean[c] += ch.as_ref().iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for p in parts {
        for i in 0..d {
            let a = p[i].as_ref();
            for j in 0..=i {
                let b = p[j].as_ref();
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - mean[i]) * (y - mean[j])).sum();
                cov[(i, j)] += s;
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[(i, j)] /= n as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

/// Causal envelope design with one row per sample, the history before the
/// first sample taken as zero.
pub fn envelope_design(env: &[f64], lags: usize) -> Result<LaggedDesign> {
    let mut padded = vec![0.0; lags.saturating_sub(1)];
    padded.extend_from_slice(env);
    LaggedDesign::build(&[&padded], lags, LagDirection::Causal)?.with_time_origin_shift(lags - 1)
}

/// Accumulated uncentered cross products of an EEG/envelope design pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaStats {
    pub sxx: DMatrix<f64>,
    pub sxs: DMatrix<f64>,
    pub sss: DMatrix<f64>,
    pub sum_x: DVector<f64>,
    pub sum_s: DVector<f64>,
    pub n: usize,
}

impl CcaStats {
    pub fn from_designs(xe: &LaggedDesign, xs: &LaggedDesign) -> Result<Self> {
        if xe.rows() != xs.rows() || xe.time_range() != xs.time_range() {
            return Err(AadError::param(
                "designs",
                format!("EEG rows {:?} and envelope rows {:?} are not aligned", xe.time_range(), xs.time_range()),
            ));
        }
        let (x, s) = (xe.matrix(), xs.matrix());
        let ones = DVector::from_element(x.nrows(), 1.0);
        let sxx = x.tr_mul(x);
        let sss = s.tr_mul(s);
        Ok(Self {
            sxx: (&sxx + sxx.transpose()) * 0.5,
            sxs: x.tr_mul(s),
            sss: (&sss + sss.transpose()) * 0.5,
            sum_x: x.tr_mul(&ones),
            sum_s: s.tr_mul(&ones),
            n: x.nrows(),
        })
    }

    pub fn sum(parts: &[&CcaStats]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| AadError::InsufficientData("no CCA statistics to sum".into()))?;
        let mut acc = (*first).clone();
        for p in &parts[1..] {
            if p.sxs.shape() != acc.sxs.shape() {
                return Err(AadError::DimensionMismatch {
                    context: "CCA statistics",
                    expected: acc.sxs.nrows(),
                    got: p.sxs.nrows(),
                });
            }
            acc.sxx += &p.sxx;
            acc.sxs += &p.sxs;
            acc.sss += &p.sss;
            acc.sum_x += &p.sum_x;
            acc.sum_s += &p.sum_s;
            acc.n += p.n;
        }
        Ok(acc)
    }

    /// Centered covariances `(Cxx, Cxs, Css)`.
    pub fn covariances(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n as f64;
        let (mx, ms) = (&self.sum_x / n, &self.sum_s / n);
        let cxx = &self.sxx / n - &mx * mx.transpose();
        let cxs = &self.sxs / n - &mx * ms.transpose();
        let css = &self.sss / n - &ms * ms.transpose();
        (
            (&cxx + cxx.transpose()) * 0.5,
            cxs,
            (&css + css.transpose()) * 0.5,
        )
    }
}

/// Backward and forward canonical filters.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaFilters {
    /// (L·C′) × J
    pub wx: DMatrix<f64>,
    /// L_a × J
    pub ws: DMatrix<f64>,
    /// Canonical correlations on the training data, non-increasing.
    pub train_correlations: Vec<f64>,
}

fn cholesky_checked(c: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let eig = c.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(AadError::IllConditioned { what, condition });
    }
    c.clone()
        .cholesky()
        .map(|ch| ch.unpack())
        .ok_or(AadError::IllConditioned { what, condition })
}

/// Top-`j` canonical directions from accumulated statistics.
///
/// With `Cxx = LxLxᵀ` and `Css = LsLsᵀ`, the generalized eigenproblem
/// reduces to the SVD of `Lx⁻¹ Cxs Ls⁻ᵀ`; filters are mapped back through
/// `Lx⁻ᵀ` and `Ls⁻ᵀ`.
pub fn fit_cca_stats(stats: &CcaStats, j: usize) -> Result<CcaFilters> {
    let (p, q) = stats.sxs.shape();
    if j == 0 || j > p.min(q) {
        return Err(AadError::param("components", format!("{j} not in 1..={}", p.min(q))));
    }
    if stats.n <= p.max(q) {
        return Err(AadError::InsufficientData(format!(
            "{} aligned samples for a {p}x{q} CCA",
            stats.n
        )));
    }
    let (cxx, cxs, css) = stats.covariances();
    let lx = cholesky_checked(&cxx, "EEG")?;
    let ls = cholesky_checked(&css, "envelope")?;
    // g = Lx⁻¹ Cxs Ls⁻ᵀ
    let a = lx.solve_lower_triangular(&cxs).expect("nonsingular factor");
    let g = ls
        .solve_lower_triangular(&a.transpose())
        .expect("nonsingular factor")
        .transpose();
    let svd = g.svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let lxt = lx.transpose();
    let lst = ls.transpose();
    let mut wx = DMatrix::zeros(p, j);
    let mut ws = DMatrix::zeros(q, j);
    let mut rho = Vec::with_capacity(j);
    for (k, &i) in order.iter().take(j).enumerate() {
        let mut x = lxt.solve_upper_triangular(&u.column(i).into_owned()).expect("nonsingular factor");
        let v = vt.row(i).transpose();
        let mut s = lst.solve_upper_triangular(&v).expect("nonsingular factor");
        let pivot = s.iter().fold(0.0f64, |m, &c| if c.abs() > m.abs() { c } else { m });
        if pivot < 0.0 {
            x.neg_mut();
            s.neg_mut();
        }
        wx.set_column(k, &x);
        ws.set_column(k, &s);
        rho.push(svd.singular_values[i].clamp(0.0, 1.0));
    }
    Ok(CcaFilters {
        wx,
        ws,
        train_correlations: rho,
    })
}

/// CCA on an aligned pair of designs.
pub fn fit_cca(xe: &LaggedDesign, xs: &LaggedDesign, j: usize) -> Result<CcaFilters> {
    fit_cca_stats(&CcaStats::from_designs(xe, xs)?, j)
}

/// Per-component correlations with a flag set if any component was degenerate.
pub fn cca_correlations(filters: &CcaFilters, xe: &LaggedDesign, xs: &LaggedDesign) -> Result<(Vec<f64>, bool)> {
    if xe.rows() != xs.rows() {
        return Err(AadError::DimensionMismatch {
            context: "CCA window rows",
            expected: xe.rows(),
            got: xs.rows(),
        });
    }
    if xe.cols() != filters.wx.nrows() || xs.cols() != filters.ws.nrows() {
        return Err(AadError::DimensionMismatch {
            context: "CCA filter length",
            expected: filters.wx.nrows(),
            got: xe.cols(),
        });
    }
    let ye = xe.matrix() * &filters.wx;
    let ys = xs.matrix() * &filters.ws;
    let mut out = Vec::with_capacity(ye.ncols());
    let mut degenerate = false;
    for k in 0..ye.ncols() {
        let c = pearson(ye.column(k).as_slice(), ys.column(k).as_slice())?;
        degenerate |= c.degenerate;
        out.push(c.value);
    }
    Ok((out, degenerate))
}

/// `f = ρ₁ − ρ₂`.
pub fn cca_feature(rho_1: &[f64], rho_2: &[f64]) -> Result<Vec<f64>> {
    if rho_1.len() != rho_2.len() {
        return Err(AadError::DimensionMismatch {
            context: "CCA feature",
            expected: rho_1.len(),
            got: rho_2.len(),
        });
    }
    Ok(rho_1.iter().zip(rho_2).map(|(a, b)| a - b).collect())
}

/// Linear discriminant on correlation-difference features.
///
/// A positive score means the first speaker of the pair is attended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// The pooled covariance needed a diagonal ridge to be invertible.
    pub regularized: bool,
}

impl Lda {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

/// Fits LDA on features augmented with their negations (labels flipped).
///
/// `labels[i]` is true when the first speaker of the pair was attended.
pub fn fit_lda(features: &[Vec<f64>], labels: &[bool]) -> Result<Lda> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(AadError::param("features", "need one label per feature and at least one feature"));
    }
    let j = features[0].len();
    if j == 0 || features.iter().any(|f| f.len() != j) {
        return Err(AadError::param("features", "features must share a nonzero dimension"));
    }
    // Class "first attended" after augmentation; the other class is its negation.
    let pos: Vec<DVector<f64>> = features
        .iter()
        .zip(labels)
        .map(|(f, &y)| {
            let v = DVector::from_column_slice(f);
            if y {
                v
            } else {
                -v
            }
        })
        .collect();
    let neg: Vec<DVector<f64>> = pos.iter().map(|v| -v).collect();
    let n = pos.len();
    let mean = |set: &[DVector<f64>]| set.iter().fold(DVector::zeros(j), |a, v| a + v) / n as f64;
    let (mu1, mu2) = (mean(&pos), mean(&neg));
    let mut scatter = DMatrix::zeros(j, j);
    for (set, mu) in [(&pos, &mu1), (&neg, &mu2)] {
        for v in set.iter() {
            let d = v - mu;
            scatter += &d * d.transpose();
        }
    }
    let dof = (2 * n).saturating_sub(2).max(1) as f64;
    let mut cov = scatter / dof;
    let diff = &mu1 - &mu2;
    let mut regularized = false;
    let solve = |c: &DMatrix<f64>| -> Option<DVector<f64>> {
        let top = c.diagonal().amax();
        let ch = c.clone().cholesky()?;
        let min_pivot = ch.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        (top > 0.0 && min_pivot > 1e-13 * top).then(|| ch.solve(&diff))
    };
    let w = match solve(&cov) {
        Some(w) => w,
        None => {
            regularized = true;
            let ridge = 1e-6 * cov.trace() / j as f64;
            let ridge = if ridge > 0.0 { ridge } else { 1e-6 };
            cov += DMatrix::identity(j, j) * ridge;
            solve(&cov).ok_or(AadError::Singular { dim: j, deficiency: j })?
        }
    };
    let bias = -w.dot(&(&mu1 + &mu2)) / 2.0;
    Ok(Lda {
        weights: w.as_slice().to_vec(),
        bias,
        regularized,
    })
}

/// Decides among speakers from per-speaker CCA correlation vectors.
///
/// Two speakers: the sign of the LDA score of `ρ₀ − ρ₁`, zero going to
/// speaker 0 with a tie flag. More speakers: every pair is scored and the
/// speaker with most pairwise wins is chosen, ties to the lowest index.
pub fn cca_decide(lda: &Lda, rhos: &[Vec<f64>], degenerate: bool) -> Result<Decision> {
    let n = rhos.len();
    if n < 2 {
        return Err(AadError::param("envelopes", "need at least two speakers"));
    }
    let j = lda.dim();
    if rhos.iter().any(|r| r.len() < j) {
        return Err(AadError::DimensionMismatch {
            context: "CCA correlations vs LDA",
            expected: j,
            got: rhos.iter().map(|r| r.len()).min().unwrap_or(0),
        });
    }
    if n == 2 {
        let f = cca_feature(&rhos[0][..j], &rhos[1][..j])?;
        let s = lda.score(&f);
        return Ok(Decision {
            speaker: usize::from(s < 0.0),
            scores: vec![s, -s],
            tie: s == 0.0,
            degenerate,
        });
    }
    let mut wins = vec![0.0; n];
    for a in 0..n {
        for b in a + 1..n {
            let s = lda.score(&cca_feature(&rhos[a][..j], &rhos[b][..j])?);
            if s >= 0.0 {
                wins[a] += 1.0;
            } else {
                wins[b] += 1.0;
            }
        }
    }
    Ok(Decision::argmax(wins, degenerate))
}

/// Fitted CCA model including the EEG PCA and the lag configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub pca: Pca,
    pub space: PcaSpace,
    pub eeg_lags: usize,
    pub env_lags: usize,
    pub filters: CcaFilters,
}

#[derive(Serialize, Deserialize)]
struct CcaDescriptor {
    kind: String,
    space: PcaSpace,
    eeg_lags: usize,
    env_lags: usize,
    components: usize,
    train_correlations: Vec<f64>,
    pca_variances: Vec<f64>,
    lda: Option<Lda>,
    blocks: Vec<String>,
}

impl CcaModel {
    /// EEG design in the model's reduced space.
    pub fn eeg_design<S: AsRef<[f64]>>(&self, channels: &[S]) -> Result<LaggedDesign> {
        reduced_eeg_design(&self.pca, self.space, channels, self.eeg_lags)
    }

    pub fn components(&self) -> usize {
        self.filters.wx.ncols()
    }

    /// Writes `<path>.json` and one raw-float block each for Wx, Ws and the PCA basis.
    pub fn save(&self, path: &Path, lda: Option<&Lda>) -> Result<()> {
        let blocks = ["wx", "ws", "pca"];
        let mats = [&self.filters.wx, &self.filters.ws, self.pca.basis()];
        let mut names = Vec::new();
        for (name, m) in blocks.iter().zip(mats) {
            let file = sibling(path, &format!(".{name}.bin"));
            let raw = RawMatrix {
                rows: m.nrows(),
                cols: m.ncols(),
                data: (0..m.nrows())
                    .flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)] as f32))
                    .collect(),
            };
            write_matrix(&file, &raw)?;
            names.push(file.file_name().unwrap_or_default().to_string_lossy().into_owned());
        }
        let desc = CcaDescriptor {
            kind: "cca".into(),
            space: self.space,
            eeg_lags: self.eeg_lags,
            env_lags: self.env_lags,
            components: self.components(),
            train_correlations: self.filters.train_correlations.clone(),
            pca_variances: self.pca.variances.iter().copied().collect(),
            lda: lda.cloned(),
            blocks: names,
        };
        write_json(&sibling(path, ".json"), &desc)
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Lda>)> {
        let json = sibling(path, ".json");
        let desc: CcaDescriptor = read_json(&json)?;
        if desc.blocks.len() != 3 {
            return Err(AadError::format(&json, "expected wx, ws and pca blocks"));
        }
        let mut mats = Vec::new();
        for name in &desc.blocks {
            let raw = read_matrix(&json.with_file_name(name))?;
            mats.push(DMatrix::from_fn(raw.rows, raw.cols, |r, c| raw.data[r * raw.cols + c] as f64));
        }
        let pca = mats.pop().expect("three blocks");
        let ws = mats.pop().expect("three blocks");
        let wx = mats.pop().expect("three blocks");
        let model = CcaModel {
            pca: Pca {
                basis: pca,
                variances: DVector::from_vec(desc.pca_variances),
            },
            space: desc.space,
            eeg_lags: desc.eeg_lags,
            env_lags: desc.env_lags,
            filters: CcaFilters {
                wx,
                ws,
                train_correlations: desc.train_correlations,
            },
        };
        Ok((model, desc.lda))
    }
}

/// Builds the anti-causal EEG design after PCA in the given space.
pub fn reduced_eeg_design<S: AsRef<[f64]>>(
    pca: &Pca,
    space: PcaSpace,
    channels: &[S],
    lags: usize,
) -> Result<LaggedDesign> {
    match space {
        PcaSpace::Channel => {
            let reduced = pca.project_channels(channels)?;
            LaggedDesign::build(&reduced, lags, LagDirection::AntiCausal)
        }
        PcaSpace::Lag => {
            let full = LaggedDesign::build(channels, lags, LagDirection::AntiCausal)?;
            if full.cols() != pca.input_dim() {
                return Err(AadError::DimensionMismatch {
                    context: "lag-space PCA",
                    expected: pca.input_dim(),
                    got: full.cols(),
                });
            }
            let reduced = pca.project_rows(full.matrix());
            LaggedDesign::from_parts(reduced, LagDirection::AntiCausal, 1, pca.output_dim(), full.time_range().start)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inv_sqrt_sym;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// Canonical correlations as singular values of Cxx^{-1/2} Cxs Css^{-1/2}.
    fn svd_oracle(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Vec<f64> {
        let n = x.nrows() as f64;
        let center = |m: &DMatrix<f64>| {
            let mut c = m.clone();
            for mut col in c.column_iter_mut() {
                let mu = col.mean();
                col.add_scalar_mut(-mu);
            }
            c
        };
        let (xc, sc) = (center(x), center(s));
        let cxx = xc.tr_mul(&xc) / n;
        let css = sc.tr_mul(&sc) / n;
        let cxs = xc.tr_mul(&sc) / n;
        let (a, _) = inv_sqrt_sym(&cxx);
        let (b, _) = inv_sqrt_sym(&css);
        let mut sv: Vec<f64> = (a * cxs * b).singular_values().iter().copied().collect();
        sv.sort_by(|p, q| q.total_cmp(p));
        sv
    }

    fn correlated_pair(seed: u64, t: usize, c: usize, l: usize, la: usize) -> (LaggedDesign, LaggedDesign) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = randn(&mut rng, t);
        let chans: Vec<Vec<f64>> = (0..c)
            .map(|k| {
                let noise = randn(&mut rng, t);
                (0..t)
                    .map(|i| {
                        let lagged = if i >= k + 1 { env[i - k - 1] } else { 0.0 };
                        0.5 * lagged + noise[i]
                    })
                    .collect()
            })
            .collect();
        let xe = LaggedDesign::build(&chans, l, LagDirection::AntiCausal).unwrap();
        let xs = envelope_design(&env, la).unwrap();
        let xs = xs.restrict(xe.time_range()).unwrap();
        (xe, xs)
    }

    #[test]
    fn matches_svd_oracle() {
        for seed in 0..4 {
            let (xe, xs) = correlated_pair(seed, 800, 3, 3, 4);
            let f = fit_cca(&xe, &xs, 4).unwrap();
            let oracle = svd_oracle(xe.matrix(), xs.matrix());
            for (a, b) in f.train_correlations.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
            assert!(f.train_correlations.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn perfect_linear_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 400;
        let env = randn(&mut rng, t);
        let other = randn(&mut rng, t);
        // Channel 0 carries the envelope itself, channel 1 is unrelated.
        let xe = LaggedDesign::build(&[&env, &other], 3, LagDirection::AntiCausal).unwrap();
        let xs = envelope_design(&env, 2).unwrap().restrict(xe.time_range()).unwrap();
        // Lags 0 and 1 of the envelope: lag 0 is in the EEG design, lag 1
        // (s(t-1)) is not, so exactly one perfect component exists.
        let f = fit_cca(&xe, &xs, 2).unwrap();
        assert!((f.train_correlations[0] - 1.0).abs() < 1e-8);
        assert!(f.train_correlations[1] < 0.5);
    }

    #[test]
    fn noise_correlations_are_small() {
        // One dimension per side: ρ is approximately N(0, 1/T) under the null.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = 4000;
        let chan = randn(&mut rng, t);
        let env = randn(&mut rng, t);
        let xe = LaggedDesign::anti_causal(&chan, 1).unwrap();
        let xs = envelope_design(&env, 1).unwrap();
        let f = fit_cca(&xe, &xs, 1).unwrap();
        assert!(f.train_correlations[0] < 3.0 / (t as f64).sqrt(), "{:?}", f.train_correlations);

        // Larger designs: the top correlation stays below the 99th percentile
        // of a null built by circularly shifting the envelope.
        let chans: Vec<Vec<f64>> = (0..3).map(|_| randn(&mut rng, t)).collect();
        let env = randn(&mut rng, t);
        let xe = LaggedDesign::build(&chans, 2, LagDirection::AntiCausal).unwrap();
        let top = |e: &[f64]| {
            let xs = envelope_design(e, 3).unwrap().restrict(xe.time_range()).unwrap();
            fit_cca(&xe, &xs, 1).unwrap().train_correlations[0]
        };
        let observed = top(&env);
        let mut null: Vec<f64> = (1..=200)
            .map(|k| {
                let shift = k * 17 + 50;
                let rotated: Vec<f64> = (0..t).map(|i| env[(i + shift) % t]).collect();
                top(&rotated)
            })
            .collect();
        null.sort_by(|a, b| a.total_cmp(b));
        assert!(observed < null[197], "{observed} vs {}", null[197]);
    }

    #[test]
    fn outputs_are_mutually_uncorrelated() {
        let (xe, xs) = correlated_pair(5, 1000, 3, 2, 3);
        let f = fit_cca(&xe, &xs, 3).unwrap();
        let ye = xe.matrix() * &f.wx;
        for a in 0..3 {
            for b in 0..a {
                let r = pearson(ye.column(a).as_slice(), ye.column(b).as_slice()).unwrap();
                assert!(r.value.abs() < 1e-6);
            }
        }
        // Sign convention: largest forward coefficient positive.
        for k in 0..3 {
            let col = f.ws.column(k);
            let big = col.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn training_correlations_reproduced() {
        let (xe, xs) = correlated_pair(6, 900, 2, 3, 3);
        let f = fit_cca(&xe, &xs, 3).unwrap();
        let (rho, deg) = cca_correlations(&f, &xe, &xs).unwrap();
        assert!(!deg);
        for (a, b) in rho.iter().zip(&f.train_correlations) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn maximality_spot_check() {
        let (xe, xs) = correlated_pair(11, 600, 2, 2, 3);
        let f = fit_cca(&xe, &xs, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = DVector::from_vec(randn(&mut rng, xe.cols()));
            let v = DVector::from_vec(randn(&mut rng, xs.cols()));
            let r = pearson((xe.matrix() * u).as_slice(), (xs.matrix() * v).as_slice()).unwrap();
            assert!(f.train_correlations[0] >= r.value.abs() - 1e-12);
        }
    }

    #[test]
    fn ill_conditioned_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = randn(&mut rng, 300);
        let env = randn(&mut rng, 300);
        let xe = LaggedDesign::build(&[&a, &a], 2, LagDirection::AntiCausal).unwrap();
        let xs = envelope_design(&env, 2).unwrap().restrict(xe.time_range()).unwrap();
        assert!(matches!(fit_cca(&xe, &xs, 1), Err(AadError::IllConditioned { what: "EEG", .. })));
    }

    #[test]
    fn pca_full_retention_keeps_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = 700;
        let env = randn(&mut rng, t);
        let chans: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let n = randn(&mut rng, t);
                (0..t).map(|i| n[i] + if i > k { env[i - k - 1] } else { 0.0 }).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chans.iter().map(|c| c.as_slice()).collect();
        let pca = Pca::fit_channels(&[&refs[..]], PcaRetain::All).unwrap();
        assert_eq!(pca.output_dim(), 4);
        let raw = LaggedDesign::build(&chans, 3, LagDirection::AntiCausal).unwrap();
        let red = reduced_eeg_design(&pca, PcaSpace::Channel, &chans, 3).unwrap();
        let xs = envelope_design(&env, 3).unwrap().restrict(raw.time_range()).unwrap();
        let a = fit_cca(&raw, &xs, 3).unwrap();
        let b = fit_cca(&red, &xs, 3).unwrap();
        for (x, y) in a.train_correlations.iter().zip(&b.train_correlations) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn pca_drops_null_direction_and_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 500;
        let a = randn(&mut rng, t);
        let b = randn(&mut rng, t);
        // Third channel is a combination of the first two: rank 2.
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let chans = [a, b, c];
        let pca = Pca::fit_channels(&[&chans[..]], PcaRetain::Count(2)).unwrap();
        assert_eq!(pca.output_dim(), 2);
        let x = DMatrix::from_fn(t, 3, |i, j| chans[j][i]);
        let mut xc = x.clone();
        for mut col in xc.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        let err = (&xc - pca.reconstruct_rows(&pca.project_rows(&xc))).norm_squared();
        assert!(err < 1e-9 * xc.norm_squared());
        // Low-rank case with a real discarded direction: error equals the
        // discarded eigenvalue mass.
        let one = Pca::fit_channels(&[&chans[..]], PcaRetain::Count(1)).unwrap();
        let err1 = (&xc - one.reconstruct_rows(&one.project_rows(&xc))).norm_squared() / t as f64;
        let eig = (xc.tr_mul(&xc) / t as f64).symmetric_eigenvalues();
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(|p, q| q.total_cmp(p));
        assert!((err1 - (e[1] + e[2])).abs() < 1e-9 * e[0]);
        // More components than the rank: reduced.
        assert_eq!(Pca::fit_channels(&[&chans[..]], PcaRetain::Count(3)).unwrap().output_dim(), 2);
        assert_eq!(Pca::fit_channels(&[&chans[..]], PcaRetain::All).unwrap().output_dim(), 2);
        let f = Pca::fit_channels(&[&chans[..]], PcaRetain::Fraction(0.999_999)).unwrap();
        assert_eq!(f.output_dim(), 2);
    }

    #[test]
    fn lag_space_pca() {
        let (xe, xs) = correlated_pair(13, 600, 2, 3, 2);
        let cov = {
            let st = CcaStats::from_designs(&xe, &xs).unwrap();
            st.covariances().0
        };
        let pca = Pca::from_covariance(&cov, PcaRetain::All).unwrap();
        let red = LaggedDesign::from_parts(pca.project_rows(xe.matrix()), LagDirection::AntiCausal, 1, 6, 0).unwrap();
        let a = fit_cca(&xe, &xs, 2).unwrap();
        let b = fit_cca(&red, &xs, 2).unwrap();
        for (x, y) in a.train_correlations.iter().zip(&b.train_correlations) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn features_and_lda() {
        assert_eq!(cca_feature(&[0.3, 0.1], &[0.3, 0.1]).unwrap(), vec![0.0, 0.0]);
        let f = cca_feature(&[0.5, 0.2], &[0.1, 0.4]).unwrap();
        let g = cca_feature(&[0.1, 0.4], &[0.5, 0.2]).unwrap();
        assert!(f.iter().zip(&g).all(|(a, b)| *a == -*b));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let feats: Vec<Vec<f64>> = (0..60).map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let z: f64 = StandardNormal.sample(&mut rng);
            vec![sign * 2.0 + 0.3 * z]
        }).collect();
        let labels: Vec<bool> = (0..60).map(|i| i % 2 == 0).collect();
        let lda = fit_lda(&feats, &labels).unwrap();
        assert!(lda.weights[0] > 0.0);
        assert_eq!(lda.bias, 0.0);
    }

    #[test]
    fn lda_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let feats: Vec<Vec<f64>> = (0..n).map(|_| randn(&mut rng, 3)).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let lda = fit_lda(&feats, &labels).unwrap();
        // Oracle: explicit augmented set, pooled covariance, dense LU solve.
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for (f, &y) in feats.iter().zip(&labels) {
            let v = DVector::from_column_slice(f);
            if y {
                c1.push(v.clone());
                c2.push(-v);
            } else {
                c2.push(v.clone());
                c1.push(-v);
            }
        }
        let m1 = c1.iter().fold(DVector::zeros(3), |a, v| a + v) / c1.len() as f64;
        let m2 = c2.iter().fold(DVector::zeros(3), |a, v| a + v) / c2.len() as f64;
        let mut s = DMatrix::zeros(3, 3);
        for v in &c1 {
            s += (v - &m1) * (v - &m1).transpose();
        }
        for v in &c2 {
            s += (v - &m2) * (v - &m2).transpose();
        }
        let s = s / (c1.len() + c2.len() - 2) as f64;
        let w = s.lu().solve(&(&m1 - &m2)).unwrap();
        for k in 0..3 {
            assert!((lda.weights[k] - w[k]).abs() < 1e-10);
        }
        assert!(!lda.regularized);
    }

    #[test]
    fn lda_singular_covariance_is_regularized() {
        let feats = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let lda = fit_lda(&feats, &[true, true]).unwrap();
        assert!(lda.regularized);
        assert!(lda.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn decisions() {
        let lda = Lda {
            weights: vec![1.0, 0.5],
            bias: 0.0,
            regularized: false,
        };
        let r1 = vec![0.4, 0.2];
        let r2 = vec![0.1, 0.0];
        assert_eq!(cca_decide(&lda, &[r1.clone(), r2.clone()], false).unwrap().speaker, 0);
        assert_eq!(cca_decide(&lda, &[r2.clone(), r1.clone()], false).unwrap().speaker, 1);
        let tie = cca_decide(&lda, &[r1.clone(), r1.clone()], false).unwrap();
        assert!(tie.tie && tie.speaker == 0);
        let three = cca_decide(&lda, &[r2.clone(), r1.clone(), vec![0.2, 0.1]], false).unwrap();
        assert_eq!(three.speaker, 1);
    }

    #[test]
    fn model_round_trip() {
        let (xe, xs) = correlated_pair(21, 500, 2, 2, 3);
        let filters = fit_cca(&xe, &xs, 2).unwrap();
        let round = |m: &DMatrix<f64>| m.map(|v| v as f32 as f64);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let mut pca = Pca::from_covariance(&cov, PcaRetain::All).unwrap();
        pca.basis = round(&pca.basis);
        let model = CcaModel {
            pca,
            space: PcaSpace::Channel,
            eeg_lags: 2,
            env_lags: 3,
            filters: CcaFilters {
                wx: round(&filters.wx),
                ws: round(&filters.ws),
                train_correlations: filters.train_correlations,
            },
        };
        let lda = Lda {
            weights: vec![0.25, -1.5],
            bias: 0.0,
            regularized: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cca");
        model.save(&p, Some(&lda)).unwrap();
        let (back, back_lda) = CcaModel::load(&p).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_lda, Some(lda));
    }
}
