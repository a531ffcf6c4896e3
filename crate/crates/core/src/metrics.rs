//! Evaluation metrics: variable accuracy and maximum regret.

use thiserror::Error;

use crate::wcnf::Assignment;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Percentage of variables on which `pred` agrees with `opt`.
pub fn var_acc(pred: &Assignment, opt: &Assignment) -> Result<f64, MetricsError> {
    if pred.len() != opt.len() {
        return Err(MetricsError::LengthMismatch { left: pred.len(), right: opt.len() });
    }
    if pred.is_empty() {
        return Ok(100.0);
    }
    let agree = pred.signs().iter().zip(opt.signs()).filter(|(a, b)| a == b).count();
    Ok(100.0 * agree as f64 / pred.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Regret {
    /// `max_i (solver_i - best_known_i)`.
    pub max_regret: i64,
    /// Instances where the solver beat the supplied best-known value.
    pub better_than_best_known: Vec<usize>,
}

pub fn max_regret(results: &[u64], best_known: &[u64]) -> Result<Regret, MetricsError> {
    if results.len() != best_known.len() {
        return Err(MetricsError::LengthMismatch { left: results.len(), right: best_known.len() });
    }
    let mut max = 0i64;
    let mut better = Vec::new();
    for (i, (&r, &b)) in results.iter().zip(best_known).enumerate() {
        let diff = r as i64 - b as i64;
        if diff < 0 {
            better.push(i);
        }
        if i == 0 || diff > max {
            max = diff;
        }
    }
    Ok(Regret { max_regret: max, better_than_best_known: better })
}
