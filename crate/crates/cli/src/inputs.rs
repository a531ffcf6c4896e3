use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use splitgnn_core::dataset::{read_dataset, read_instance, read_labels, Instance, LabelRecord};
use splitgnn_core::Assignment;

pub struct Loaded {
    pub instance: Instance,
    pub label: Option<LabelRecord>,
}

/// Expands files and dataset directories; directory labels are attached by id.
pub fn load(paths: &[PathBuf]) -> Result<Vec<Loaded>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let instances = read_dataset(path)?;
            let labels = labels_by_id(path)?;
            for instance in instances {
                let label = labels.as_ref().and_then(|l| l.get(&instance.id).cloned());
                out.push(Loaded { instance, label });
            }
        } else {
            out.push(Loaded { instance: read_instance(path)?, label: None });
        }
    }
    let mut seen = std::collections::HashSet::new();
    for l in &out {
        if !seen.insert(l.instance.id.clone()) {
            bail!("instance id {:?} appears more than once", l.instance.id);
        }
    }
    Ok(out)
}

pub fn labels_by_id(dir: &Path) -> Result<Option<HashMap<String, LabelRecord>>> {
    Ok(read_labels(dir)?.map(|labels| labels.into_iter().map(|l| (l.id.clone(), l)).collect()))
}

/// One `±1` per line.
pub fn write_solution(path: &Path, assignment: &Assignment) -> Result<()> {
    let mut text = String::with_capacity(3 * assignment.len());
    for &s in assignment.signs() {
        text.push_str(if s > 0 { "1\n" } else { "-1\n" });
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_reals(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: not a number: {t:?}", path.display())))
        .collect()
}
