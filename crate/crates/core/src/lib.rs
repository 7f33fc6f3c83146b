//! Auditory attention decoding from EEG.
//!
//! The crate covers the signal path (resampling, band filtering, gammatone
//! envelopes, lagged designs), the linear stimulus-reconstruction decoders
//! (ridge/lasso with decoder or covariance averaging), CCA with LDA, the
//! training-free adaptive lasso rule, a small stimulus-reconstruction network
//! and a synthetic forward-model data generator.

pub mod adaptive;
pub mod cca;
pub mod dataset;
pub mod decision;
pub mod error;
pub mod filter;
pub mod gammatone;
pub mod lagged;
pub mod lasso;
pub mod linalg;
pub mod linear;
pub mod nnsr;
pub mod preprocess;
pub mod signal;
pub mod synth;

pub use error::{AadError, Result};
pub use decision::Decision;
pub use filter::TimeSeries;
pub use lagged::{LagDirection, LaggedDesign};
pub use lasso::AdmmOptions;
pub use linear::{Decoder, Integration, LambdaGrid, Penalty, SegmentStats};
pub use preprocess::{preprocess_linear, preprocess_nn, NormStats, Pipeline};
pub use signal::{pearson, Correlation, MultiChannel, Signal, Trial};
pub use synth::{NoiseKind, SynthConfig};
