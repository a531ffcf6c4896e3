//! On-disk datasets: `<dir>/inst_<idx>.wcnf` plus an optional `labels.jsonl`.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::OracleResult;
use crate::wcnf::{Assignment, ParseError, WcnfFormula};

pub const LABELS_FILE: &str = "labels.jsonl";

/// One line of `labels.jsonl`. Assignments are stored as `±1` entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub optimal_cost: u64,
    pub optimal_assignment: Vec<i8>,
    pub proven: bool,
}

impl LabelRecord {
    pub fn from_oracle(id: impl Into<String>, result: &OracleResult) -> Self {
        Self {
            id: id.into(),
            optimal_cost: result.optimal_cost,
            optimal_assignment: result.optimal_assignment.signs().to_vec(),
            proven: result.proven,
        }
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::from_signs(self.optimal_assignment.clone())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}:{line}: {source}")]
    Label { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("no instances found in {0}")]
    Empty(PathBuf),
}

pub fn instance_id(idx: usize) -> String {
    format!("inst_{idx:04}")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_owned(), source }
}

/// A named instance loaded from disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub formula: WcnfFormula,
}

pub fn write_instance(dir: &Path, id: &str, formula: &WcnfFormula) -> Result<PathBuf, DatasetError> {
    let path = dir.join(format!("{id}.wcnf"));
    fs::write(&path, formula.to_dimacs()).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_instance(path: &Path) -> Result<Instance, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let formula =
        WcnfFormula::parse_dimacs(&bytes).map_err(|source| DatasetError::Parse { path: path.to_owned(), source })?;
    let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(Instance { id, formula })
}

/// All `*.wcnf` / `*.cnf` files in `dir`, sorted by file name.
pub fn read_dataset(dir: &Path) -> Result<Vec<Instance>, DatasetError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "wcnf" || e == "cnf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::Empty(dir.to_owned()));
    }
    paths.iter().map(|p| read_instance(p)).collect()
}

pub fn write_labels(dir: &Path, labels: &[LabelRecord]) -> Result<(), DatasetError> {
    let path = dir.join(LABELS_FILE);
    let mut out = io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
    for label in labels {
        let line = serde_json::to_string(label).expect("label serializes");
        writeln!(out, "{line}").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

/// Labels in file order, or `None` when the dataset has no label file.
pub fn read_labels(dir: &Path) -> Result<Option<Vec<LabelRecord>>, DatasetError> {
    let path = dir.join(LABELS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let mut labels = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|source| DatasetError::Label { path: path.clone(), line: i + 1, source })?;
        labels.push(record);
    }
    Ok(Some(labels))
}
