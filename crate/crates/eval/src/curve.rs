//! Performance curves and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::mesd::{MesdResult, MesdStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Decision window length in seconds.
    pub tau: f64,
    /// Percentage of correct decisions.
    pub accuracy: f64,
    pub n_decisions: usize,
}

/// Accuracy as a function of decision window length for one subject and algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCurve {
    pub algorithm: String,
    pub subject: String,
    pub points: Vec<CurvePoint>,
}

impl PerformanceCurve {
    pub fn new(algorithm: impl Into<String>, subject: impl Into<String>, points: Vec<CurvePoint>) -> Result<Self> {
        let c = Self {
            algorithm: algorithm.into(),
            subject: subject.into(),
            points,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.iter().any(|p| !(0.0..=100.0).contains(&p.accuracy)) {
            return Err(EvalError::Config(format!(
                "{}/{}: accuracies must lie in [0, 100]",
                self.algorithm, self.subject
            )));
        }
        if self.points.windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(EvalError::Config(format!(
                "{}/{}: window lengths must be strictly increasing",
                self.algorithm, self.subject
            )));
        }
        Ok(())
    }

    pub fn accuracy_at(&self, tau: f64) -> Option<f64> {
        self.points.iter().find(|p| p.tau == tau).map(|p| p.accuracy)
    }
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    algorithm: String,
    subject: String,
    tau: f64,
    accuracy: f64,
    n_decisions: usize,
}

/// CSV with one row per curve point: `algorithm,subject,tau,accuracy,n_decisions`.
pub fn curves_to_csv(curves: &[PerformanceCurve]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in curves {
        for p in &c.points {
            w.serialize(CurveRow {
                algorithm: c.algorithm.clone(),
                subject: c.subject.clone(),
                tau: p.tau,
                accuracy: p.accuracy,
                n_decisions: p.n_decisions,
            })
            .map_err(|e| EvalError::Config(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses CSV written by [`curves_to_csv`]; consecutive rows sharing
/// algorithm and subject form one curve.
pub fn curves_from_csv(text: &str, origin: &Path) -> Result<Vec<PerformanceCurve>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<PerformanceCurve> = Vec::new();
    for row in r.deserialize::<CurveRow>() {
        let row = row.map_err(|e| EvalError::format(origin, e.to_string()))?;
        let point = CurvePoint {
            tau: row.tau,
            accuracy: row.accuracy,
            n_decisions: row.n_decisions,
        };
        match out.last_mut() {
            Some(c) if c.algorithm == row.algorithm && c.subject == row.subject => c.points.push(point),
            _ => out.push(PerformanceCurve {
                algorithm: row.algorithm,
                subject: row.subject,
                points: vec![point],
            }),
        }
    }
    for c in &out {
        c.validate().map_err(|e| EvalError::format(origin, e.to_string()))?;
    }
    Ok(out)
}

pub fn write_curves(path: &Path, curves: &[PerformanceCurve]) -> Result<()> {
    write_text(path, &curves_to_csv(curves)?)
}

pub fn read_curves(path: &Path) -> Result<Vec<PerformanceCurve>> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    curves_from_csv(&text, path)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| EvalError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| EvalError::io(path, e))
}

/// MESD value of one (algorithm, subject) pair as stored in the MESD table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MesdValue {
    Seconds(f64),
    /// Larger than the bound (or no admissible operating point).
    AboveBound(f64),
}

impl MesdValue {
    pub fn from_result(r: &MesdResult, bound_s: f64) -> Self {
        match (r.status, r.mesd_seconds) {
            (MesdStatus::Finite, Some(s)) => MesdValue::Seconds(s),
            _ => MesdValue::AboveBound(bound_s),
        }
    }

    /// Literal table cell: the value, or `>bound` (e.g. `>50.0`).
    pub fn cell(&self) -> String {
        match self {
            MesdValue::Seconds(s) => format!("{s}"),
            MesdValue::AboveBound(b) => format!(">{b:.1}"),
        }
    }

    pub fn parse(cell: &str) -> Option<Self> {
        match cell.strip_prefix('>') {
            Some(b) => b.parse().ok().map(MesdValue::AboveBound),
            None => cell.parse().ok().map(MesdValue::Seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesdRow {
    pub algorithm: String,
    pub subject: String,
    pub value: MesdValue,
    pub tau: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct MesdCsvRow {
    algorithm: String,
    subject: String,
    mesd: String,
    tau: String,
}

pub fn mesd_to_csv(rows: &[MesdRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(MesdCsvRow {
            algorithm: r.algorithm.clone(),
            subject: r.subject.clone(),
            mesd: r.value.cell(),
            tau: r.tau.map(|t| format!("{t}")).unwrap_or_default(),
        })
        .map_err(|e| EvalError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn mesd_from_csv(text: &str, origin: &Path) -> Result<Vec<MesdRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.deserialize::<MesdCsvRow>() {
        let row = row.map_err(|e| EvalError::format(origin, e.to_string()))?;
        let value = MesdValue::parse(&row.mesd)
            .ok_or_else(|| EvalError::format(origin, format!("bad MESD cell '{}'", row.mesd)))?;
        let tau = if row.tau.is_empty() {
            None
        } else {
            Some(row.tau.parse().map_err(|_| EvalError::format(origin, format!("bad tau '{}'", row.tau)))?)
        };
        out.push(MesdRow {
            algorithm: row.algorithm,
            subject: row.subject,
            value,
            tau,
        });
    }
    Ok(out)
}
