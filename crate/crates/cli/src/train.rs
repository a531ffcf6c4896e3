use std::fs::OpenOptions;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use splitgnn_core::dataset::read_dataset;
use splitgnn_nn::checkpoint::Checkpoint;
use splitgnn_nn::model::{ClassPairing, ModelConfig};
use splitgnn_nn::train::{Example, Trainer};
use splitgnn_nn::{SplitGnn, TrainConfig};

use crate::args::{GlobalArgs, PairingArg, TrainArgs};
use crate::inputs::labels_by_id;
use crate::Failure;

pub fn run(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        epochs: a.epochs,
        dropout_rate: a.dropout,
        seed: g.seed,
        target_var_acc: a.target_var_acc,
    };
    if let Err(e) = cfg.validate() {
        bail!(Failure::usage(e.to_string()));
    }

    let instances = read_dataset(&a.dataset)?;
    let labels = labels_by_id(&a.dataset)?
        .ok_or_else(|| anyhow!("{} has no labels.jsonl; generate it with --label", a.dataset.display()))?;
    let data = instances
        .iter()
        .map(|inst| {
            let label = labels.get(&inst.id).ok_or_else(|| anyhow!("no label for instance {}", inst.id))?;
            Ok(Example::new(&inst.formula, label.assignment())?)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trainer = match &a.resume {
        Some(path) => {
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            ck.expect_shape(a.dim, a.rounds)?;
            ck.trainer(cfg.learning_rate, cfg.weight_decay)?
        }
        None => {
            let pairing = match a.pairing {
                PairingArg::Swapped => ClassPairing::Swapped,
                PairingArg::Aligned => ClassPairing::Aligned,
            };
            let config = ModelConfig { dim: a.dim.unwrap_or(16), rounds: a.rounds.unwrap_or(8), pairing };
            let model = SplitGnn::new(config, g.seed).map_err(|e| Failure::usage(e.to_string()))?;
            Trainer::new(model, &cfg)
        }
    };

    let curve_path = a.curve.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    let append = a.resume.is_some() && curve_path.exists();
    let mut curve = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&curve_path)
        .with_context(|| format!("opening {}", curve_path.display()))?;
    if !append {
        writeln!(curve, "epoch,loss,var_acc")?;
    }
    let mut write_err = None;
    let report = trainer.run(&data, &cfg, |s| {
        if write_err.is_none() {
            if let Err(e) = writeln!(curve, "{},{},{}", s.epoch, s.loss, s.var_acc) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", curve_path.display()));
    }
    Checkpoint::from_trainer(&trainer).save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;

    if let Some(last) = report.epochs.last() {
        eprintln!(
            "epoch {}: loss {:.5}, VarAcc {:.2}%{}",
            last.epoch,
            last.loss,
            last.var_acc,
            if report.reached_target { " (target reached)" } else { "" }
        );
    }
    if report.epochs.iter().any(|e| !e.loss.is_finite()) {
        bail!("training loss became non-finite");
    }
    Ok(())
}
