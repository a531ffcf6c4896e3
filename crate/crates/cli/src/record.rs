use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// One solver run on one instance with one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    /// Weight of falsified clauses; `None` when no feasible assignment was found.
    pub delta_obj: Option<u64>,
    pub var_acc: Option<f64>,
    pub wall_time_ms: Option<u64>,
    pub seed: u64,
    pub params: serde_json::Value,
    /// `±1` per variable; empty when `delta_obj` is `None`.
    pub assignment: Vec<i8>,
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}: bad run record", path.display(), i + 1))?);
    }
    Ok(out)
}
