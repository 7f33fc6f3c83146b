use std::fs;
use std::path::{Path, PathBuf};

use aad_core::dataset::{load_dataset, Manifest};
use aad_core::synth::generate_dataset;
use aad_core::Trial;
use aad_eval::aggregate::{curve_summary_csv, mesd_summary_csv, summarize_curves, summarize_mesd};
use aad_eval::curve::{curves_to_csv, mesd_from_csv, mesd_to_csv, read_curves, MesdRow, MesdValue};
use aad_eval::harness::Failure;
use aad_eval::{evaluate, mesd, MesdResult, PerformanceCurve};
use serde::Serialize;

use crate::checksum::dir_digest;
use crate::cli::{EvaluateArgs, InspectArgs, MesdArgs, ReportArgs, SynthArgs};
use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, Result};

pub const CURVES_CSV: &str = "curves.csv";
pub const MESD_CSV: &str = "mesd.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const MESD_SUMMARY_CSV: &str = "mesd_summary.csv";

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(format!("json: {e}")))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.synth.seed = seed;
    }
    let dir = args
        .out
        .clone()
        .or(cfg.dataset.clone())
        .ok_or_else(|| CliError::Usage("no dataset directory: pass --out or set `dataset`".into()))?;
    cfg.synth.validate()?;
    create_dir(&dir)?;
    let manifest = generate_dataset(&cfg.synth, &dir)?;
    let synth_toml =
        toml::to_string(&cfg.synth).map_err(|e| CliError::Internal(format!("config serialization: {e}")))?;
    write(&dir.join("synth.toml"), &synth_toml)?;
    println!(
        "wrote {} trials of {} subjects to {}",
        manifest.trials.len(),
        manifest.subjects().len(),
        dir.display()
    );
    Ok(())
}

/// Trials grouped by subject in manifest order.
pub fn load_subjects(dir: &Path) -> Result<Vec<(String, Vec<Trial>)>> {
    let manifest = Manifest::load(dir)?;
    let trials = load_dataset(dir)?;
    let mut out: Vec<(String, Vec<Trial>)> = manifest.subjects().into_iter().map(|s| (s, Vec::new())).collect();
    for t in trials {
        let slot = out
            .iter_mut()
            .find(|(s, _)| *s == t.subject_id)
            .expect("subject listed in manifest");
        slot.1.push(t);
    }
    Ok(out)
}

#[derive(Serialize)]
struct MesdEntry<'a> {
    algorithm: &'a str,
    subject: &'a str,
    mesd: String,
    #[serde(flatten)]
    result: &'a MesdResult,
}

#[derive(Serialize)]
struct Results<'a> {
    curves: &'a [PerformanceCurve],
    mesd: Vec<MesdEntry<'a>>,
    failures: &'a [Failure],
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_sha256: String,
    config_file: &'a str,
    seed: u64,
    seed_derivation: &'a str,
    workers: usize,
    dataset: String,
    dataset_sha256: String,
    subjects: Vec<&'a str>,
    algorithms: &'a [String],
    failures: usize,
    outputs: Vec<(String, String)>,
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = args.seed {
        cfg.eval.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(a) = &args.algorithms {
        cfg.eval.algorithms = a.clone();
    }
    if cfg.workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    cfg.eval.validate()?;
    let dataset = cfg
        .dataset
        .clone()
        .ok_or_else(|| CliError::Usage("no dataset: pass --dataset or set `dataset`".into()))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("no results directory: pass --out or set `out`".into()))?;
    if !dataset.is_dir() {
        return Err(CliError::Data(format!("dataset directory {} not found", dataset.display())));
    }

    let before = dir_digest(&dataset)?;
    let subjects = load_subjects(&dataset)?;
    log::info!(
        "evaluating {} algorithm(s) on {} subject(s) with {} worker(s)",
        cfg.eval.algorithms.len(),
        subjects.len(),
        cfg.workers
    );
    let ev = evaluate(&subjects, &cfg.eval, cfg.workers)?;
    let after = dir_digest(&dataset)?;
    if before != after {
        return Err(CliError::Internal(format!("dataset {} changed during the run", dataset.display())));
    }

    create_dir(&out)?;
    let rows: Vec<MesdRow> = ev.mesd.iter().map(|(r, _)| r.clone()).collect();
    let curves_csv = curves_to_csv(&ev.curves)?;
    let mesd_csv = mesd_to_csv(&rows)?;
    let results = json(&Results {
        curves: &ev.curves,
        mesd: ev
            .mesd
            .iter()
            .map(|(r, m)| MesdEntry {
                algorithm: &r.algorithm,
                subject: &r.subject,
                mesd: r.value.cell(),
                result: m,
            })
            .collect(),
        failures: &ev.failures,
    })?;
    let config_toml = cfg.to_toml()?;
    let mut outputs = Vec::new();
    for (name, text) in [
        (CURVES_CSV, &curves_csv),
        (MESD_CSV, &mesd_csv),
        (RESULTS_JSON, &results),
        (RESOLVED_CONFIG, &config_toml),
    ] {
        write(&out.join(name), text)?;
        outputs.push((name.to_string(), sha256_hex(text.as_bytes())));
    }
    let manifest = RunManifest {
        tool: "aad-bench",
        version: env!("CARGO_PKG_VERSION"),
        command: "evaluate",
        config_sha256: sha256_hex(config_toml.as_bytes()),
        config_file: RESOLVED_CONFIG,
        seed: cfg.eval.seed,
        seed_derivation: "per (subject, algorithm, outer fold): FNV-1a of the labels xor seed, splitmix64 finalizer",
        workers: cfg.workers,
        dataset: dataset.display().to_string(),
        dataset_sha256: before,
        subjects: subjects.iter().map(|(s, _)| s.as_str()).collect(),
        algorithms: &cfg.eval.algorithms,
        failures: ev.failures.len(),
        outputs,
    };
    write(&out.join(RUN_MANIFEST), &json(&manifest)?)?;
    println!(
        "wrote {} curve(s) for {} subject(s) to {}",
        ev.curves.len(),
        subjects.len(),
        out.display()
    );
    if !ev.failures.is_empty() {
        for f in &ev.failures {
            eprintln!("failed: {} / {}: {}", f.subject, f.algorithm, f.message);
        }
        return Err(CliError::Data(format!(
            "{} of {} (subject, algorithm) runs failed",
            ev.failures.len(),
            subjects.len() * cfg.eval.algorithms.len()
        )));
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let curves_path = args.results.join(CURVES_CSV);
    if !curves_path.is_file() {
        return Err(CliError::Data(format!("{} not found", curves_path.display())));
    }
    let curves = read_curves(&curves_path)?;
    if curves.is_empty() {
        return Err(CliError::Data(format!("{} has no results", curves_path.display())));
    }
    let mesd_path = args.results.join(MESD_CSV);
    let rows = if mesd_path.is_file() {
        let text = fs::read_to_string(&mesd_path).map_err(|e| CliError::io(&mesd_path, e))?;
        mesd_from_csv(&text, &mesd_path)?
    } else {
        Vec::new()
    };
    let summary = curve_summary_csv(&summarize_curves(&curves)?);
    let mesd_summary = mesd_summary_csv(&summarize_mesd(&rows));
    let out: PathBuf = args.out.clone().unwrap_or_else(|| args.results.clone());
    create_dir(&out)?;
    write(&out.join(SUMMARY_CSV), &summary)?;
    write(&out.join(MESD_SUMMARY_CSV), &mesd_summary)?;
    println!("{summary}");
    println!("{mesd_summary}");
    Ok(())
}

pub fn mesd_cmd(args: &MesdArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    cfg.eval.mesd.validate()?;
    let curves = read_curves(&args.curves)?;
    if curves.is_empty() {
        return Err(CliError::Data(format!("{} has no curves", args.curves.display())));
    }
    let mut rows = Vec::with_capacity(curves.len());
    for c in &curves {
        let m = mesd(c, &cfg.eval.mesd)?;
        rows.push(MesdRow {
            algorithm: c.algorithm.clone(),
            subject: c.subject.clone(),
            value: MesdValue::from_result(&m, cfg.eval.mesd.bound_s),
            tau: m.tau,
        });
    }
    let text = mesd_to_csv(&rows)?;
    match &args.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SubjectSummary {
    pub subject: String,
    pub trials: usize,
    pub duration_s: f64,
    pub channels: usize,
    pub fs: f64,
    pub speakers: usize,
    /// Trials per attended speaker index.
    pub attended: Vec<usize>,
}

pub fn summarize_dataset(dir: &Path) -> Result<Vec<SubjectSummary>> {
    let subjects = load_subjects(dir)?;
    Ok(subjects
        .into_iter()
        .map(|(subject, trials)| {
            let speakers = trials.iter().map(Trial::n_speakers).max().unwrap_or(0);
            let mut attended = vec![0; speakers];
            for t in &trials {
                attended[t.attended] += 1;
            }
            SubjectSummary {
                duration_s: trials.iter().map(Trial::duration_s).sum(),
                channels: trials.first().map_or(0, |t| t.eeg.n_channels()),
                fs: trials.first().map_or(0.0, Trial::fs),
                trials: trials.len(),
                speakers,
                attended,
                subject,
            }
        })
        .collect())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let rows = summarize_dataset(&args.dataset)?;
    println!("subject,trials,duration_s,channels,fs,speakers,attended");
    for r in &rows {
        let attended: Vec<String> = r.attended.iter().map(usize::to_string).collect();
        println!(
            "{},{},{},{},{},{},{}",
            r.subject,
            r.trials,
            r.duration_s,
            r.channels,
            r.fs,
            r.speakers,
            attended.join("/")
        );
    }
    if let Some(p) = &args.out {
        write(p, &json(&rows)?)?;
    }
    Ok(())
}
