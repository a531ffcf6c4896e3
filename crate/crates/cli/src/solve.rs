use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use splitgnn_core::metrics::var_acc;
use splitgnn_core::sparse::InstanceMatrices;
use splitgnn_core::usb::{init_relaxed, usb_solve, RelaxedState, UsbParams};
use splitgnn_core::Assignment;
use splitgnn_nn::checkpoint::Checkpoint;
use splitgnn_nn::model::round_probs;
use splitgnn_nn::{GraphInputs, SplitGnn};

use crate::args::{GlobalArgs, Mode, SolveArgs};
use crate::inputs::{self, Loaded};
use crate::record::RunRecord;
use crate::Failure;

/// Offset between the seed of the initial relaxed values and the solver's own stream.
const INIT_STREAM: u64 = 0x5EED_1417;

fn usb_params(g: &GlobalArgs, a: &SolveArgs) -> UsbParams {
    UsbParams {
        time_limit_secs: g.time_limit,
        learning_rate: a.lr,
        len: a.len,
        k: a.flips,
        tau: a.tau,
        epsilon: a.epsilon,
        seed: g.seed,
        max_steps: g.max_steps,
    }
}

struct Solved {
    assignment: Option<Assignment>,
    claimed_cost: Option<u64>,
    params: serde_json::Value,
}

fn solve_one(
    item: &Loaded,
    mode: Mode,
    model: Option<&SplitGnn>,
    params: &UsbParams,
    init: Option<&[f64]>,
) -> Result<Solved> {
    let f = &item.instance.formula;
    let n = f.num_vars();
    let predict = || model.expect("checkpoint loaded").forward(&GraphInputs::from_formula(f));
    let boost = |start: RelaxedState, probs: Option<&[f64]>| -> Result<Solved> {
        let mats = InstanceMatrices::build(f);
        let out = usb_solve(f, &mats, start, probs, params).with_context(|| format!("solving {}", item.instance.id))?;
        let (assignment, claimed_cost) = match out.best {
            Some(s) => (Some(s.assignment), Some(s.cost)),
            None => (None, None),
        };
        Ok(Solved {
            assignment,
            claimed_cost,
            params: json!({ "usb": params, "steps": out.steps, "restarts": out.restarts }),
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ INIT_STREAM);
    match mode {
        Mode::Usb => {
            let start = match init {
                Some(x) => {
                    if x.len() != n {
                        bail!(Failure::usage(format!("--init has {} values, instance has {n} variables", x.len())));
                    }
                    RelaxedState::new(x.to_vec())
                }
                None => init_relaxed(n, None, &mut rng),
            };
            boost(start, None)
        }
        Mode::Mp => {
            let assignment = round_probs(&predict());
            let cost = f.cost(&assignment)?;
            let feasible = f.is_feasible(&assignment);
            Ok(Solved {
                assignment: feasible.then_some(assignment),
                claimed_cost: feasible.then_some(cost),
                params: json!({ "model": model.map(|m| m.config()) }),
            })
        }
        Mode::MpUsb => {
            let probs = predict();
            let start = init_relaxed(n, Some(&probs), &mut rng);
            let mut solved = boost(start, Some(&probs))?;
            solved.params["model"] = json!(model.map(|m| m.config()));
            Ok(solved)
        }
    }
}

pub fn run(g: &GlobalArgs, a: &SolveArgs) -> Result<()> {
    let params = usb_params(g, a);
    if let Err(e) = params.validate() {
        bail!(Failure::usage(e.to_string()));
    }
    let model = match (a.mode, &a.checkpoint) {
        (Mode::Usb, _) => None,
        (_, None) => bail!(Failure::usage(format!("--mode {} needs --checkpoint", a.mode.name()))),
        (_, Some(path)) => Some(
            Checkpoint::load(path)
                .and_then(|c| c.model())
                .with_context(|| format!("loading checkpoint {}", path.display()))?,
        ),
    };
    let items = inputs::load(&a.inputs)?;
    let init = match &a.init {
        Some(_) if a.mode != Mode::Usb || items.len() != 1 => {
            bail!(Failure::usage("--init applies to a single instance in mode usb"))
        }
        Some(path) => Some(inputs::read_reals(path)?),
        None => None,
    };
    let solver = a.solver_name.clone().unwrap_or_else(|| a.mode.name().to_owned());

    let records: Vec<(RunRecord, Option<Assignment>)> = items
        .par_iter()
        .map(|item| -> Result<_> {
            let start = Instant::now();
            let solved = solve_one(item, a.mode, model.as_ref(), &params, init.as_deref())?;
            let elapsed = start.elapsed().as_millis() as u64;
            let f = &item.instance.formula;
            let delta_obj = match &solved.assignment {
                Some(asg) => {
                    let cost = f.cost(asg)?;
                    if Some(cost) != solved.claimed_cost {
                        bail!(
                            "{}: solver reported cost {:?} but the assignment evaluates to {cost}",
                            item.instance.id,
                            solved.claimed_cost
                        );
                    }
                    Some(cost)
                }
                None => None,
            };
            let acc = match (&item.label, &solved.assignment) {
                (Some(label), Some(asg)) => Some(var_acc(asg, &label.assignment())?),
                _ => None,
            };
            let record = RunRecord {
                instance: item.instance.id.clone(),
                solver: solver.clone(),
                delta_obj,
                var_acc: acc,
                wall_time_ms: (!a.no_timing).then_some(elapsed),
                seed: g.seed,
                params: solved.params,
                assignment: solved.assignment.as_ref().map(|s| s.signs().to_vec()).unwrap_or_default(),
            };
            Ok((record, solved.assignment))
        })
        .collect::<Result<_>>()?;

    let mut lines = String::new();
    for (r, _) in &records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (r, asg) in &records {
                if let Some(asg) = asg {
                    inputs::write_solution(&dir.join(format!("{}.sol", r.instance)), asg)?;
                }
            }
            let path = dir.join("records.jsonl");
            std::fs::write(&path, &lines).with_context(|| format!("writing {}", path.display()))?;
        }
        None => std::io::stdout().write_all(lines.as_bytes())?,
    }

    let solved: Vec<u64> = records.iter().filter_map(|(r, _)| r.delta_obj).collect();
    let missing = records.len() - solved.len();
    if !solved.is_empty() {
        let mean = solved.iter().sum::<u64>() as f64 / solved.len() as f64;
        eprintln!("{solver}: {} instances, mean cost {mean:.3}", solved.len());
    }
    if missing > 0 {
        bail!(Failure::Timeout(format!("{missing} instance(s) ended without a feasible solution")));
    }
    Ok(())
}
