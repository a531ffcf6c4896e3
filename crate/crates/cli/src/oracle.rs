use std::io::Write;

use anyhow::Result;
use rayon::prelude::*;
use serde_json::json;
use splitgnn_core::dataset::{write_labels, LabelRecord};
use splitgnn_core::oracle::exact_solve_with_budget;

use crate::args::OracleArgs;
use crate::inputs;

pub fn run(a: &OracleArgs) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    for path in &a.inputs {
        let items = inputs::load(std::slice::from_ref(path))?;
        let results: Vec<_> = items
            .par_iter()
            .map(|item| exact_solve_with_budget(&item.instance.formula, a.node_budget))
            .collect();
        for (item, r) in items.iter().zip(&results) {
            let line = json!({
                "instance": item.instance.id,
                "optimal_cost": r.optimal_cost,
                "proven": r.proven,
                "nodes_explored": r.nodes_explored,
                "assignment": r.optimal_assignment.signs(),
            });
            writeln!(stdout, "{line}")?;
        }
        if a.write_labels && path.is_dir() {
            let labels: Vec<LabelRecord> =
                items.iter().zip(&results).map(|(item, r)| LabelRecord::from_oracle(item.instance.id.clone(), r)).collect();
            write_labels(path, &labels)?;
        }
    }
    Ok(())
}
