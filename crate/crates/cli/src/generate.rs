use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use splitgnn_core::dataset::{instance_id, write_instance, write_labels, LabelRecord};
use splitgnn_core::generate::{GenSpec, DEFAULT_BETA};
use splitgnn_core::oracle::exact_solve_with_budget;

use crate::args::{FamilyArg, GenerateArgs, GlobalArgs};
use crate::Failure;

#[derive(Serialize)]
struct Manifest<'a> {
    name: String,
    count: usize,
    spec: &'a GenSpec,
}

fn spec_from(g: &GlobalArgs, a: &GenerateArgs) -> Result<GenSpec> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::usage(format!("--family {:?} needs {flag}", a.family)));
    Ok(match a.family {
        FamilyArg::Uf => GenSpec::uniform(need(a.k, "-k")?, need(a.n, "-n")?, need(a.m, "-m")?, a.weighted, g.seed),
        FamilyArg::Pl => GenSpec::power_law(
            need(a.k, "-k")?,
            need(a.n, "-n")?,
            need(a.m, "-m")?,
            a.beta.unwrap_or(DEFAULT_BETA),
            a.weighted,
            g.seed,
        ),
        FamilyArg::Php => {
            GenSpec { hard: a.hard, ..GenSpec::pigeonhole(need(a.pigeons, "-p")?, need(a.holes, "--holes")?) }
        }
    })
}

pub fn run(g: &GlobalArgs, a: &GenerateArgs) -> Result<()> {
    if a.count == 0 {
        bail!(Failure::usage("--count must be positive"));
    }
    let spec = spec_from(g, a)?;
    let formulas = (0..a.count)
        .map(|i| spec.with_seed(g.seed.wrapping_add(i as u64)).generate())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::usage(format!("invalid generator spec: {e}")))?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, f) in formulas.iter().enumerate() {
        write_instance(&a.out, &instance_id(i), f)?;
    }
    let manifest = Manifest { name: spec.name(), count: a.count, spec: &spec };
    let manifest_path = a.out.join("generate.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    if a.label {
        let labels: Vec<LabelRecord> = formulas
            .par_iter()
            .enumerate()
            .map(|(i, f)| LabelRecord::from_oracle(instance_id(i), &exact_solve_with_budget(f, a.node_budget)))
            .collect();
        let unproven = labels.iter().filter(|l| !l.proven).count();
        if unproven > 0 {
            eprintln!("warning: {unproven} labels hit the node budget and are not proven optimal");
        }
        write_labels(&a.out, &labels)?;
    }
    eprintln!("wrote {} x {} to {}{}", a.count, spec.name(), a.out.display(), if a.label { " with labels" } else { "" });
    Ok(())
}
