//! Time-lagged design matrices.
//!
//! Column layout is channel-major: all lags of channel 0, then all lags of
//! channel 1, and so on. Every decoder flattens and reshapes its weights with
//! [`lag_column`], so this module is the single source of truth for ordering.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagDirection {
    /// Row `t` holds `x_c(t), ..., x_c(t+L-1)` (EEG following the stimulus).
    AntiCausal,
    /// Row `t` holds `s(t), s(t-1), ..., s(t-L+1)` (stimulus history).
    Causal,
}

/// Column index of (`channel`, `lag`) in a design with `lags` lags per channel.
pub fn lag_column(channel: usize, lag: usize, lags: usize) -> usize {
    channel * lags + lag
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    matrix: DMatrix<f64>,
    direction: LagDirection,
    lags: usize,
    channels: usize,
    /// Time index (in the source sequence) of row 0.
    first_time: usize,
}

impl LaggedDesign {
    /// Builds a design from equally long channels. Only rows whose full lag
    /// window lies inside the data are kept.
    pub fn build<S: AsRef<[f64]>>(
        channels: &[S],
        lags: usize,
        direction: LagDirection,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(AadError::param("channels", "need at least one channel"));
        }
        if lags == 0 {
            return Err(AadError::param("lags", "need at least one lag"));
        }
        let t = channels[0].as_ref().len();
        if channels.iter().any(|c| c.as_ref().len() != t) {
            return Err(AadError::param("channels", "channels differ in length"));
        }
        if lags > t {
            return Err(AadError::InsufficientData(format!(
                "{lags} lags requested but only {t} samples"
            )));
        }
        let rows = t - lags + 1;
        let n_ch = channels.len();
        let mut matrix = DMatrix::zeros(rows, n_ch * lags);
        for (c, ch) in channels.iter().enumerate() {
            let ch = ch.as_ref();
            for l in 0..lags {
                let mut col = matrix.column_mut(lag_column(c, l, lags));
                match direction {
                    LagDirection::AntiCausal => {
                        col.copy_from_slice(&ch[l..l + rows]);
                    }
                    LagDirection::Causal => {
                        let start = lags - 1 - l;
                        col.copy_from_slice(&ch[start..start + rows]);
                    }
                }
            }
        }
        let first_time = match direction {
            LagDirection::AntiCausal => 0,
            LagDirection::Causal => lags - 1,
        };
        Ok(Self {
            matrix,
            direction,
            lags,
            channels: n_ch,
            first_time,
        })
    }

    /// Wraps an existing matrix, e.g. a design projected onto a reduced basis.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        direction: LagDirection,
        lags: usize,
        channels: usize,
        first_time: usize,
    ) -> Result<Self> {
        if matrix.ncols() != lags * channels {
            return Err(AadError::DimensionMismatch {
                context: "design columns",
                expected: lags * channels,
                got: matrix.ncols(),
            });
        }
        Ok(Self {
            matrix,
            direction,
            lags,
            channels,
            first_time,
        })
    }

    /// Anti-causal design of a single sequence.
    pub fn anti_causal(x: &[f64], lags: usize) -> Result<Self> {
        Self::build(&[x], lags, LagDirection::AntiCausal)
    }

    /// Causal design of a single sequence.
    pub fn causal(x: &[f64], lags: usize) -> Result<Self> {
        Self::build(&[x], lags, LagDirection::Causal)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn direction(&self) -> LagDirection {
        self.direction
    }

    /// Source time indices covered by the rows, `[first, last + 1)`.
    pub fn time_range(&self) -> Range<usize> {
        self.first_time..self.first_time + self.rows()
    }

    /// Reinterprets row 0 as time `first_time`, for designs built on a
    /// sequence that starts before the time origin (stimulus history).
    pub fn with_time_origin_shift(mut self, history: usize) -> Result<Self> {
        if self.first_time < history {
            return Err(AadError::param("history", "shift exceeds the design's first row time"));
        }
        self.first_time -= history;
        Ok(self)
    }

    /// Keeps only the rows whose time index lies in `times`.
    pub fn restrict(&self, times: Range<usize>) -> Result<Self> {
        let own = self.time_range();
        if times.start < own.start || times.end > own.end || times.start > times.end {
            return Err(AadError::param(
                "times",
                format!("{times:?} not inside design rows {own:?}"),
            ));
        }
        let start = times.start - self.first_time;
        let matrix = self.matrix.rows(start, times.len()).into_owned();
        Ok(Self {
            matrix,
            first_time: times.start,
            ..*self
        })
    }
}

/// Intersection of the row time ranges of two designs.
pub fn common_times(a: &LaggedDesign, b: &LaggedDesign) -> Range<usize> {
    let (ra, rb) = (a.time_range(), b.time_range());
    let start = ra.start.max(rb.start);
    let end = ra.end.min(rb.end).max(start);
    start..end
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lag_is_the_signal() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let d = LaggedDesign::anti_causal(&x, 1).unwrap();
        assert_eq!(d.rows(), 4);
        assert_eq!(d.matrix().column(0).as_slice(), &x);
    }

    #[test]
    fn channel_major_indexing() {
        let x1: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let x2: Vec<f64> = (0..10).map(|t| 100.0 + t as f64).collect();
        let d = LaggedDesign::build(&[&x1, &x2], 3, LagDirection::AntiCausal).unwrap();
        assert_eq!((d.rows(), d.cols()), (8, 6));
        // Column 4 = channel 2 (index 1), lag 1.
        assert_eq!(d.matrix()[(0, 4)], x2[1]);
        for r in 0..8 {
            for c in 0..2 {
                for l in 0..3 {
                    let src = if c == 0 { &x1 } else { &x2 };
                    assert_eq!(d.matrix()[(r, lag_column(c, l, 3))], src[r + l]);
                }
            }
        }
    }

    #[test]
    fn causal_rows_hold_history() {
        let s: Vec<f64> = (0..6).map(|t| t as f64).collect();
        let d = LaggedDesign::causal(&s, 3).unwrap();
        assert_eq!(d.time_range(), 2..6);
        assert_eq!(d.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 1.0, 0.0]);
        assert_eq!(d.matrix().row(3).iter().copied().collect::<Vec<_>>(), vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn too_many_lags() {
        assert!(matches!(
            LaggedDesign::anti_causal(&[1.0, 2.0], 3),
            Err(AadError::InsufficientData(_))
        ));
    }

    #[test]
    fn restrict_and_common_times() {
        let s: Vec<f64> = (0..20).map(|t| t as f64).collect();
        let a = LaggedDesign::anti_causal(&s, 4).unwrap();
        let c = LaggedDesign::causal(&s, 6).unwrap();
        let common = common_times(&a, &c);
        assert_eq!(common, 5..17);
        let ar = a.restrict(common.clone()).unwrap();
        let cr = c.restrict(common).unwrap();
        assert_eq!(ar.rows(), cr.rows());
        assert_eq!(ar.matrix()[(0, 0)], 5.0);
        assert_eq!(cr.matrix()[(0, 0)], 5.0);
        assert_eq!(cr.matrix()[(0, 5)], 0.0);
    }
}
