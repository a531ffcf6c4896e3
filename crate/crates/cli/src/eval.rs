use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use splitgnn_core::dataset::{read_dataset, LabelRecord};
use splitgnn_core::metrics::{max_regret, var_acc};
use splitgnn_core::{Assignment, WcnfFormula};

use crate::args::EvalArgs;
use crate::inputs::labels_by_id;
use crate::record::read_records;
use crate::Failure;

#[derive(Clone, Debug)]
struct Outcome {
    cost: u64,
    var_acc: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SolverSummary {
    solver: String,
    instances: usize,
    mean_delta_obj: f64,
    mean_var_acc: Option<f64>,
    max_regret: i64,
    /// Instances on which this solver matches the pooled best.
    best_count: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    instances: usize,
    solvers: Vec<SolverSummary>,
    /// Mean labeled optimum over the same instances, when labels exist.
    mean_optimal_cost: Option<f64>,
    all_labels_proven: Option<bool>,
}

/// External results: `<id> <cost>` per line (comma or whitespace separated, `#` comments).
fn read_external(path: &Path) -> Result<BTreeMap<String, Outcome>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let [id, cost] = fields[..] else {
            bail!("{}:{}: expected `<instance id> <cost>`", path.display(), i + 1);
        };
        let cost: u64 = cost.parse().with_context(|| format!("{}:{}: bad cost {cost:?}", path.display(), i + 1))?;
        if out.insert(id.to_owned(), Outcome { cost, var_acc: None }).is_some() {
            bail!("{}: instance {id} listed twice", path.display());
        }
    }
    Ok(out)
}

fn build_report(
    by_solver: &BTreeMap<String, BTreeMap<String, Outcome>>,
    labels: Option<&HashMap<String, LabelRecord>>,
) -> Result<Report> {
    let mut sets = by_solver.iter().map(|(s, m)| (s, m.keys().cloned().collect::<BTreeSet<_>>()));
    let Some((first_solver, ids)) = sets.next() else { bail!(Failure::usage("no results to evaluate")) };
    for (solver, other) in sets {
        if other != ids {
            let missing: Vec<_> = ids.symmetric_difference(&other).take(5).cloned().collect();
            bail!("instance sets differ between {first_solver} and {solver} (e.g. {missing:?})");
        }
    }
    let ids: Vec<String> = ids.into_iter().collect();
    let best: Vec<u64> =
        ids.iter().map(|id| by_solver.values().map(|m| m[id].cost).min().expect("at least one solver")).collect();

    let mut solvers = Vec::new();
    for (name, results) in by_solver {
        let costs: Vec<u64> = ids.iter().map(|id| results[id].cost).collect();
        let regret = max_regret(&costs, &best)?;
        let accs: Option<Vec<f64>> = ids.iter().map(|id| results[id].var_acc).collect();
        solvers.push(SolverSummary {
            solver: name.clone(),
            instances: ids.len(),
            mean_delta_obj: costs.iter().sum::<u64>() as f64 / ids.len() as f64,
            mean_var_acc: accs.map(|a| a.iter().sum::<f64>() / a.len() as f64),
            max_regret: regret.max_regret,
            best_count: costs.iter().zip(&best).filter(|(c, b)| c == b).count(),
        });
    }
    let labeled: Option<Vec<&LabelRecord>> = labels.and_then(|l| ids.iter().map(|id| l.get(id)).collect());
    Ok(Report {
        instances: ids.len(),
        solvers,
        mean_optimal_cost: labeled
            .as_ref()
            .map(|l| l.iter().map(|r| r.optimal_cost).sum::<u64>() as f64 / l.len() as f64),
        all_labels_proven: labeled.as_ref().map(|l| l.iter().all(|r| r.proven)),
    })
}

fn render(report: &Report) -> String {
    let width = report.solvers.iter().map(|s| s.solver.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>9}  {:>12}  {:>12}  {:>10}  {:>6}", "solver", "instances", "mean_dobj", "mean_varacc", "max_regret", "best");
    for s in &report.solvers {
        let acc = s.mean_var_acc.map_or_else(|| "-".to_owned(), |a| format!("{a:.2}"));
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>12.3}  {:>12}  {:>10}  {:>6}",
            s.solver, s.instances, s.mean_delta_obj, acc, s.max_regret, s.best_count
        );
    }
    if let Some(opt) = report.mean_optimal_cost {
        let proven = if report.all_labels_proven == Some(true) { "proven" } else { "not all proven" };
        let _ = writeln!(out, "labeled optimum: mean cost {opt:.3} ({proven})");
    }
    out
}

pub fn run(a: &EvalArgs) -> Result<()> {
    if a.records.is_empty() && a.external.is_empty() {
        bail!(Failure::usage("give run-record files and/or --external files"));
    }
    let (formulas, labels): (HashMap<String, WcnfFormula>, Option<HashMap<String, LabelRecord>>) = match &a.dataset {
        Some(dir) => (
            read_dataset(dir)?.into_iter().map(|i| (i.id, i.formula)).collect(),
            labels_by_id(dir)?,
        ),
        None if !a.records.is_empty() => {
            bail!(Failure::usage("run records are re-verified against their instances; pass --dataset"))
        }
        None => (HashMap::new(), None),
    };

    let mut by_solver: BTreeMap<String, BTreeMap<String, Outcome>> = BTreeMap::new();
    for path in &a.records {
        for r in read_records(path)? {
            let formula = formulas
                .get(&r.instance)
                .ok_or_else(|| anyhow!("{}: instance {} is not in the dataset", path.display(), r.instance))?;
            let stored = r
                .delta_obj
                .ok_or_else(|| anyhow!("{}: {} on {} has no feasible solution", path.display(), r.solver, r.instance))?;
            let assignment = Assignment::from_signs(r.assignment.clone());
            let cost = formula.cost(&assignment).with_context(|| format!("{}: {}", path.display(), r.instance))?;
            if cost != stored {
                bail!("{}: {} on {}: stored cost {stored} but assignment evaluates to {cost}", path.display(), r.solver, r.instance);
            }
            let acc = match labels.as_ref().and_then(|l| l.get(&r.instance)) {
                Some(label) => Some(var_acc(&assignment, &label.assignment())?),
                None => None,
            };
            let slot = by_solver.entry(r.solver.clone()).or_default();
            if slot.insert(r.instance.clone(), Outcome { cost, var_acc: acc }).is_some() {
                bail!("{}: more than one record for {} on {}; evaluate one seed at a time", path.display(), r.solver, r.instance);
            }
        }
    }
    for path in &a.external {
        let name = path.file_stem().map_or_else(|| "external".to_owned(), |s| s.to_string_lossy().into_owned());
        if by_solver.contains_key(&name) {
            bail!("solver name {name} (from {}) is already in use", path.display());
        }
        by_solver.insert(name, read_external(path)?);
    }

    let report = build_report(&by_solver, labels.as_ref())?;
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", render(&report));
    Ok(())
}
