//! Across-subject summaries of curves and MESD tables.

use serde::Serialize;

use crate::curve::{MesdRow, MesdValue, PerformanceCurve};
use crate::error::{EvalError, Result};

/// Mean and standard error of the mean; the error needs two or more values.
pub fn mean_se(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, None));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, Some((var / n).sqrt())))
}

fn order(v: &MesdValue) -> (u8, f64) {
    match v {
        MesdValue::Seconds(s) => (0, *s),
        MesdValue::AboveBound(b) => (1, *b),
    }
}

/// Median where values above the bound sort after every finite value and
/// still count towards the position of the median.
pub fn censored_median(values: &[MesdValue]) -> Option<MesdValue> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| order(a).partial_cmp(&order(b)).expect("finite MESD values"));
    let n = v.len();
    if n % 2 == 1 {
        return Some(v[n / 2]);
    }
    Some(match (v[n / 2 - 1], v[n / 2]) {
        (MesdValue::Seconds(a), MesdValue::Seconds(b)) => MesdValue::Seconds((a + b) / 2.0),
        (_, above) => above,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub algorithm: String,
    pub tau: f64,
    pub mean: f64,
    pub se: Option<f64>,
    pub n_subjects: usize,
}

/// Mean ± standard error across subjects per algorithm and window length,
/// algorithms in order of first appearance, window lengths ascending.
pub fn summarize_curves(curves: &[PerformanceCurve]) -> Result<Vec<CurveSummary>> {
    if curves.is_empty() {
        return Err(EvalError::InsufficientData("no curves to summarize".into()));
    }
    let mut algorithms: Vec<&str> = Vec::new();
    for c in curves {
        if !algorithms.contains(&c.algorithm.as_str()) {
            algorithms.push(&c.algorithm);
        }
    }
    let mut out = Vec::new();
    for alg in algorithms {
        let mine: Vec<&PerformanceCurve> = curves.iter().filter(|c| c.algorithm == alg).collect();
        let mut taus: Vec<f64> = mine.iter().flat_map(|c| c.points.iter().map(|p| p.tau)).collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        for tau in taus {
            let values: Vec<f64> = mine.iter().filter_map(|c| c.accuracy_at(tau)).collect();
            let (mean, se) = mean_se(&values).expect("at least one curve has this tau");
            out.push(CurveSummary {
                algorithm: alg.to_string(),
                tau,
                mean,
                se,
                n_subjects: values.len(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesdSummary {
    pub algorithm: String,
    pub median: MesdValue,
    pub n_subjects: usize,
    pub n_above_bound: usize,
}

pub fn summarize_mesd(rows: &[MesdRow]) -> Vec<MesdSummary> {
    let mut algorithms: Vec<&str> = Vec::new();
    for r in rows {
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    algorithms
        .into_iter()
        .map(|alg| {
            let values: Vec<MesdValue> = rows.iter().filter(|r| r.algorithm == alg).map(|r| r.value).collect();
            MesdSummary {
                algorithm: alg.to_string(),
                median: censored_median(&values).expect("algorithm has rows"),
                n_subjects: values.len(),
                n_above_bound: values.iter().filter(|v| matches!(v, MesdValue::AboveBound(_))).count(),
            }
        })
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

pub fn curve_summary_csv(rows: &[CurveSummary]) -> String {
    let mut s = String::from("algorithm,tau,mean,se,n_subjects\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.algorithm, r.tau, r.mean, opt_cell(r.se), r.n_subjects));
    }
    s
}

pub fn mesd_summary_csv(rows: &[MesdSummary]) -> String {
    let mut s = String::from("algorithm,median_mesd,n_subjects,n_above_bound\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.algorithm, r.median.cell(), r.n_subjects, r.n_above_bound));
    }
    s
}
