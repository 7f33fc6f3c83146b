//! On-disk dataset format.
//!
//! A dataset is a directory holding `manifest.json` and one matrix file per
//! EEG recording and per envelope. Matrix files start with a 16-byte header
//! (`AADM`, u32 rows, u32 cols, u32 reserved, all little-endian) followed by
//! row-major little-endian `f32` values with rows = time. EEG may instead be
//! given as a CSV file with a header row of channel labels.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::signal::{MultiChannel, Signal, Trial};

pub const MAGIC: &[u8; 4] = b"AADM";
pub const MANIFEST: &str = "manifest.json";
const HEADER_LEN: usize = 16;

/// A dense matrix as stored on disk (`f32`, row-major, rows = time).
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl RawMatrix {
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c] as f64).collect()
    }

    /// Packs equally long columns, rounding to `f32`.
    pub fn from_columns<S: AsRef<[f64]>>(columns: &[S]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in columns {
                data.push(c.as_ref()[r] as f32);
            }
        }
        Self { rows, cols, data }
    }
}

pub fn write_matrix(path: &Path, m: &RawMatrix) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| AadError::format(path, format!("{what} {v} exceeds u32")))
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * m.data.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&to_u32(m.rows, "rows")?.to_le_bytes());
    bytes.extend_from_slice(&to_u32(m.cols, "cols")?.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    for v in &m.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let file = fs::File::create(path).map_err(|e| AadError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| AadError::io(path, e))?;
    w.flush().map_err(|e| AadError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<RawMatrix> {
    let bytes = fs::read(path).map_err(|e| AadError::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(AadError::format(path, "missing AADM header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = HEADER_LEN + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(AadError::format(
            path,
            format!("{rows}x{cols} header needs {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawMatrix { rows, cols, data })
}

/// Reads a CSV with a header row of labels and one column per channel.
pub fn read_csv_channels(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); labels.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                AadError::format(path, format!("row {}: `{field}` is not a number", line + 2))
            })?;
            columns[c].push(v);
        }
    }
    Ok((labels, columns))
}

fn csv_error(path: &Path, e: csv::Error) -> AadError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AadError::io(path, io),
        other => AadError::format(path, format!("{other:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub id: String,
    pub subject_id: String,
    pub attended: usize,
    pub fs: f64,
    /// EEG file relative to the dataset directory (`.bin` matrix or `.csv`).
    pub eeg: String,
    pub envelopes: Vec<String>,
    #[serde(default)]
    pub channel_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub trials: Vec<TrialEntry>,
}

impl Manifest {
    pub const FORMAT: &'static str = "aad-dataset";

    pub fn new(trials: Vec<TrialEntry>) -> Self {
        Self {
            format: Self::FORMAT.into(),
            version: 1,
            trials,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| AadError::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| AadError::format(&path, e.to_string()))?;
        if manifest.format != Self::FORMAT {
            return Err(AadError::format(&path, format!("unknown format `{}`", manifest.format)));
        }
        Ok(manifest)
    }

    /// Distinct subject ids in first-appearance order.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.trials {
            if !out.contains(&t.subject_id) {
                out.push(t.subject_id.clone());
            }
        }
        out
    }
}

fn load_entry(dir: &Path, entry: &TrialEntry) -> Result<Trial> {
    let eeg_path = dir.join(&entry.eeg);
    let (file_labels, channels) = if eeg_path.extension().is_some_and(|e| e == "csv") {
        let (labels, cols) = read_csv_channels(&eeg_path)?;
        (labels, cols)
    } else {
        let m = read_matrix(&eeg_path)?;
        (Vec::new(), (0..m.cols).map(|c| m.column(c)).collect())
    };
    let labels = if !entry.channel_labels.is_empty() {
        entry.channel_labels.clone()
    } else if !file_labels.is_empty() {
        file_labels
    } else {
        (1..=channels.len()).map(|i| format!("ch{i}")).collect()
    };
    let eeg = MultiChannel::new(channels, entry.fs, labels)?;
    let envelopes = entry
        .envelopes
        .iter()
        .map(|p| {
            let path = dir.join(p);
            let m = read_matrix(&path)?;
            if m.cols != 1 {
                return Err(AadError::format(&path, format!("envelope must have 1 column, has {}", m.cols)));
            }
            Signal::new(m.column(0), entry.fs)
        })
        .collect::<Result<Vec<_>>>()?;
    Trial::new(eeg, envelopes, entry.attended, entry.subject_id.clone())
        .map_err(|e| AadError::format(dir.join(MANIFEST), format!("trial `{}`: {e}", entry.id)))
}

/// Loads every trial listed in `dir/manifest.json`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<Trial>> {
    let manifest = Manifest::load(dir)?;
    manifest.trials.iter().map(|e| load_entry(dir, e)).collect()
}

/// Loads the trials of one subject.
pub fn load_subject(dir: &Path, subject_id: &str) -> Result<Vec<Trial>> {
    let manifest = Manifest::load(dir)?;
    manifest
        .trials
        .iter()
        .filter(|e| e.subject_id == subject_id)
        .map(|e| load_entry(dir, e))
        .collect()
}

/// Writes trials in the dataset format, creating `dir` if needed.
///
/// Samples are stored as `f32`; trials whose samples are already
/// `f32`-representable reload bit-identically.
pub fn write_dataset(dir: &Path, trials: &[Trial]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| AadError::io(dir, e))?;
    let mut entries = Vec::with_capacity(trials.len());
    let mut per_subject: Vec<(String, usize)> = Vec::new();
    for trial in trials {
        let k = match per_subject.iter_mut().find(|(s, _)| *s == trial.subject_id) {
            Some((_, n)) => {
                *n += 1;
                *n - 1
            }
            None => {
                per_subject.push((trial.subject_id.clone(), 1));
                0
            }
        };
        let id = format!("{}_t{k:02}", trial.subject_id);
        let eeg_file = format!("{id}_eeg.bin");
        write_matrix(&dir.join(&eeg_file), &RawMatrix::from_columns(trial.eeg.channels()))?;
        let mut env_files = Vec::new();
        for (i, env) in trial.envelopes.iter().enumerate() {
            let name = format!("{id}_env{i}.bin");
            write_matrix(&dir.join(&name), &RawMatrix::from_columns(&[env.samples()]))?;
            env_files.push(name);
        }
        entries.push(TrialEntry {
            id,
            subject_id: trial.subject_id.clone(),
            attended: trial.attended,
            fs: trial.fs(),
            eeg: eeg_file,
            envelopes: env_files,
            channel_labels: trial.eeg.labels().to_vec(),
        });
    }
    let manifest = Manifest::new(entries);
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| AadError::io(&path, e))?;
    Ok(manifest)
}

/// JSON descriptor written next to a model's raw weight blocks.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("descriptor serializes");
    fs::write(path, text).map_err(|e| AadError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AadError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AadError::format(path, e.to_string()))
}

/// Path of a sibling file named `<stem>.<ext>`.
pub(crate) fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = RawMatrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
        };
        write_matrix(&p, &m).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"AADM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 0);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), 1.0);
        // Row-major: second value on disk is row 0, col 1.
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 2.0);
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(read_matrix(&p).unwrap(), m);
        assert_eq!(read_matrix(&p).unwrap().column(2), vec![3.0, 6.5]);
    }

    #[test]
    fn truncated_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        fs::write(&p, b"AADM\x02\0\0\0\x02\0\0\0\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_matrix(&p), Err(AadError::Format { .. })));
        fs::write(&p, b"XXXX").unwrap();
        assert!(read_matrix(&p).is_err());
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eeg.csv");
        fs::write(&p, "Fz,Cz\n1.0,2.0\n3.5,-1\n").unwrap();
        let (labels, cols) = read_csv_channels(&p).unwrap();
        assert_eq!(labels, vec!["Fz", "Cz"]);
        assert_eq!(cols, vec![vec![1.0, 3.5], vec![2.0, -1.0]]);
    }

    #[test]
    fn dataset_with_csv_eeg() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("e.csv"), "A,B\n1,2\n3,4\n5,6\n").unwrap();
        for i in 0..2 {
            let env = RawMatrix::from_columns(&[vec![i as f64, 1.0, 2.0]]);
            write_matrix(&dir.path().join(format!("env{i}.bin")), &env).unwrap();
        }
        let manifest = Manifest::new(vec![TrialEntry {
            id: "t".into(),
            subject_id: "s".into(),
            attended: 1,
            fs: 64.0,
            eeg: "e.csv".into(),
            envelopes: vec!["env0.bin".into(), "env1.bin".into()],
            channel_labels: vec![],
        }]);
        write_json(&dir.path().join(MANIFEST), &manifest).unwrap();
        let trials = load_dataset(dir.path()).unwrap();
        assert_eq!(trials[0].eeg.labels(), &["A".to_string(), "B".to_string()]);
        assert_eq!(trials[0].eeg.channel(1), &[2.0, 4.0, 6.0]);
        assert_eq!(trials[0].attended, 1);
    }
}
