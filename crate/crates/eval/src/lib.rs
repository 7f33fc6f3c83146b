//! Cross-validated evaluation of auditory attention decoders: segmentation,
//! the two-level cross-validation harness, accuracy curves, the minimal
//! expected switch duration, and across-subject summaries.

pub mod aggregate;
pub mod algorithm;
pub mod algorithms;
pub mod config;
pub mod curve;
pub mod error;
pub mod harness;
pub mod mesd;
pub mod metrics;
pub mod segment;

pub use algorithm::{inner_cv, AadAlgorithm, TrainContext, TrainedAad, Window};
pub use algorithms::build_algorithm;
pub use config::EvalConfig;
pub use curve::{CurvePoint, PerformanceCurve};
pub use error::{EvalError, Result};
pub use harness::{evaluate, run_fold, run_loso_cv, Evaluation, SubjectData};
pub use mesd::{mesd, MesdOptions, MesdResult, MesdStatus};
pub use metrics::{accuracy, Tally};
pub use segment::{segment_dataset, Segment};
