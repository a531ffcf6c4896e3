//! Supervised training, gradient checking, and single-step fine-tuning.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splitgnn_core::{Assignment, WcnfFormula};

use crate::model::{round_probs, targets, ForwardOptions, GraphInputs, SplitGnn};
use crate::optim::AdamW;
use crate::tensor::Matrix;
use crate::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Stop as soon as training VarAcc (percent) reaches this value.
    pub target_var_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-3,
            weight_decay: 1e-10,
            batch_size: 32,
            epochs: 200,
            dropout_rate: 0.0,
            seed: 0,
            target_var_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: &str| Err(NnError::InvalidConfig(msg.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One labeled instance, preprocessed for the network.
#[derive(Clone, Debug)]
pub struct Example {
    pub inputs: GraphInputs,
    pub label: Assignment,
    target: Arc<Vec<f64>>,
}

impl Example {
    pub fn new(formula: &WcnfFormula, label: Assignment) -> Result<Self, NnError> {
        if label.len() != formula.num_vars() {
            return Err(NnError::LabelLength { expected: formula.num_vars(), found: label.len() });
        }
        Ok(Example { inputs: GraphInputs::from_formula(formula), target: Arc::new(targets(&label)), label })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based, counted across resumed runs.
    pub epoch: usize,
    pub loss: f64,
    pub var_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub reached_target: bool,
}

/// Model plus optimizer state, resumable across calls.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: SplitGnn,
    pub optimizer: AdamW,
    pub epochs_done: usize,
}

struct Pass {
    loss: f64,
    correct: usize,
    grads: Vec<Matrix>,
}

impl Trainer {
    pub fn new(model: SplitGnn, cfg: &TrainConfig) -> Self {
        let optimizer = AdamW::new(model.params(), cfg.learning_rate, cfg.weight_decay);
        Trainer { model, optimizer, epochs_done: 0 }
    }

    /// Runs `cfg.epochs` further epochs, calling `on_epoch` after each.
    pub fn run(
        &mut self,
        data: &[Example],
        cfg: &TrainConfig,
        mut on_epoch: impl FnMut(&EpochStats),
    ) -> Result<TrainReport, NnError> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        self.optimizer.learning_rate = cfg.learning_rate;
        self.optimizer.weight_decay = cfg.weight_decay;
        let total_vars: usize = data.iter().map(|e| e.label.len()).sum();
        let full_batch = cfg.batch_size >= data.len();
        let mut report = TrainReport::default();

        for _ in 0..cfg.epochs {
            let epoch = self.epochs_done + 1;
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, u64::MAX)));

            let (mut loss_sum, mut correct) = (0.0, 0usize);
            let mut stop = false;
            for batch in order.chunks(cfg.batch_size) {
                let passes: Vec<Pass> = batch
                    .par_iter()
                    .map(|&i| self.pass(&data[i], cfg, mix(cfg.seed, epoch as u64, i as u64)))
                    .collect::<Result<_, _>>()?;
                let mut grads: Option<Vec<Matrix>> = None;
                for pass in passes {
                    loss_sum += pass.loss;
                    correct += pass.correct;
                    match &mut grads {
                        None => grads = Some(pass.grads),
                        Some(acc) => acc.iter_mut().zip(&pass.grads).for_each(|(a, g)| a.add_assign(g)),
                    }
                }
                if full_batch && cfg.target_var_acc.is_some_and(|t| percent(correct, total_vars) >= t) {
                    stop = true;
                    break;
                }
                let mut grads = grads.expect("non-empty batch");
                let scale = 1.0 / batch.len() as f64;
                grads.iter_mut().for_each(|g| g.scale(scale));
                self.optimizer.step(self.model.params_mut(), &grads);
            }

            let stats = EpochStats { epoch, loss: loss_sum / data.len() as f64, var_acc: percent(correct, total_vars) };
            self.epochs_done = epoch;
            on_epoch(&stats);
            report.epochs.push(stats);
            if let Some(target) = cfg.target_var_acc {
                if stop || (!full_batch && evaluate(&self.model, data).var_acc >= target) {
                    report.reached_target = true;
                    break;
                }
            }
        }
        Ok(report)
    }

    fn pass(&self, example: &Example, cfg: &TrainConfig, seed: u64) -> Result<Pass, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = ForwardOptions {
            drop_non_tree: false,
            dropout: (cfg.dropout_rate > 0.0).then_some((cfg.dropout_rate, &mut rng)),
        };
        let (loss, probs, grads) = self.model.loss_and_grads(&example.inputs, &example.target, opts)?;
        Ok(Pass { loss, correct: agreements(&probs, &example.label), grads })
    }
}

/// Trains a fresh optimizer over `data` and returns the fitted model.
pub fn train(model: SplitGnn, data: &[Example], cfg: &TrainConfig) -> Result<(SplitGnn, TrainReport), NnError> {
    let mut trainer = Trainer::new(model, cfg);
    let report = trainer.run(data, cfg, |_| {})?;
    Ok((trainer.model, report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub var_acc: f64,
}

/// Mean loss and pooled VarAcc without dropout.
pub fn evaluate(model: &SplitGnn, data: &[Example]) -> Evaluation {
    let results: Vec<(f64, usize)> = data
        .par_iter()
        .map(|e| {
            let probs = model.forward(&e.inputs);
            let loss = crate::tape::bce_value(&probs, &e.target, crate::model::PROB_CLAMP);
            (loss, agreements(&probs, &e.label))
        })
        .collect();
    let total: usize = data.iter().map(|e| e.label.len()).sum();
    let loss = results.iter().map(|r| r.0).sum::<f64>() / data.len().max(1) as f64;
    let correct = results.iter().map(|r| r.1).sum();
    Evaluation { loss, var_acc: percent(correct, total) }
}

fn agreements(probs: &[f64], label: &Assignment) -> usize {
    round_probs(probs).signs().iter().zip(label.signs()).filter(|(a, b)| a == b).count()
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// `max |analytic - numeric| / max |analytic|` over checked entries.
    pub max_rel_error: f64,
    /// Largest per-entry `|analytic - numeric| / max(|analytic|, |numeric|)`
    /// among entries whose larger magnitude exceeds the floor.
    pub max_entry_rel_error: f64,
    pub max_abs_error: f64,
    pub entries_checked: usize,
    /// Entries skipped because `θ ± h` straddles a ReLU or clamp kink.
    pub entries_at_kinks: usize,
    /// Parameter name and flat index of the largest absolute gap.
    pub worst_entry: Option<(String, usize)>,
    /// Parameters whose analytic gradient is identically zero.
    pub zero_grad_params: Vec<String>,
}

/// Compares reverse-mode gradients of the loss with central differences of
/// step `h` for every parameter entry.
pub fn grad_check(model: &SplitGnn, example: &Example, h: f64, floor: f64) -> Result<GradCheck, NnError> {
    let (_, _, grads) = model.loss_and_grads(&example.inputs, &example.target, ForwardOptions::default())?;
    let mut probe = model.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_entry_rel_error: 0.0,
        max_abs_error: 0.0,
        entries_checked: 0,
        entries_at_kinks: 0,
        worst_entry: None,
        zero_grad_params: Vec::new(),
    };
    let mut grad_scale = 0.0f64;
    for (pi, g) in grads.iter().enumerate() {
        if g.data().iter().all(|&v| v == 0.0) {
            report.zero_grad_params.push(model.param_names()[pi].clone());
        }
        grad_scale = grad_scale.max(g.max_abs());
        for k in 0..g.len() {
            let original = probe.params()[pi].data()[k];
            probe.params_mut()[pi].data_mut()[k] = original + h;
            let (up, up_kinks) = probe.loss_with_pattern(&example.inputs, &example.target);
            probe.params_mut()[pi].data_mut()[k] = original - h;
            let (down, down_kinks) = probe.loss_with_pattern(&example.inputs, &example.target);
            probe.params_mut()[pi].data_mut()[k] = original;
            if up_kinks != down_kinks {
                report.entries_at_kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.data()[k];
            let gap = (analytic - numeric).abs();
            if gap > report.max_abs_error {
                report.max_abs_error = gap;
                report.worst_entry = Some((model.param_names()[pi].clone(), k));
            }
            let scale = analytic.abs().max(numeric.abs());
            if scale > floor {
                report.max_entry_rel_error = report.max_entry_rel_error.max(gap / scale);
            }
            report.entries_checked += 1;
        }
    }
    report.max_rel_error = if grad_scale > 0.0 { report.max_abs_error / grad_scale } else { report.max_abs_error };
    Ok(report)
}

/// One optimizer step on the loss against `label` (typically the best
/// assignment a search found). Returns the loss before the step.
pub fn pseudo_label_update(
    model: &mut SplitGnn,
    optimizer: &mut AdamW,
    formula: &WcnfFormula,
    label: &Assignment,
) -> Result<f64, NnError> {
    let example = Example::new(formula, label.clone())?;
    let (loss, _, grads) = model.loss_and_grads(&example.inputs, &example.target, ForwardOptions::default())?;
    optimizer.step(model.params_mut(), &grads);
    Ok(loss)
}
