//! Unsupervised solution boosting: an anytime loop over a relaxed real vector.
//!
//! Each step reads the Boolean assignment off the signs of `x`, scores every
//! variable and either flips a batch of improving variables or, at a local
//! minimum, takes one gradient step on the relaxation loss
//!
//! ```text
//! f_j  = Σ_i τ · tanh(x_i) / (score_i² + ε) · Wunit_ij
//! loss = mean_{j unsat} (f_j · CW_j / S_j)²
//! ```
//!
//! `score` is treated as a constant of the current assignment when
//! differentiating.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{compute_scores, cost_from_report, ScoreReport};
use crate::sparse::InstanceMatrices;
use crate::wcnf::{Assignment, WcnfFormula};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsbParams {
    pub time_limit_secs: f64,
    /// Gradient step size γ.
    pub learning_rate: f64,
    /// Steps granted after every improvement before a restart.
    pub len: usize,
    /// Maximum number of variables flipped per greedy step.
    pub k: usize,
    /// Temperature τ.
    pub tau: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Optional cap on the total number of inner steps across restarts.
    pub max_steps: Option<u64>,
}

impl Default for UsbParams {
    fn default() -> Self {
        Self {
            time_limit_secs: 10.0,
            learning_rate: 1.0,
            len: 100,
            k: 10,
            tau: 0.5,
            epsilon: 0.01,
            seed: 0,
            max_steps: None,
        }
    }
}

impl UsbParams {
    pub fn validate(&self) -> Result<(), UsbError> {
        let bad = |what: &str| Err(UsbError::InvalidParams(what.to_owned()));
        let positive = |x: f64| x > 0.0;
        if !positive(self.time_limit_secs) {
            return bad("time limit must be positive");
        }
        if !positive(self.learning_rate) {
            return bad("learning rate must be positive");
        }
        if self.len == 0 || self.k == 0 {
            return bad("len and k must be positive");
        }
        if !positive(self.tau) || !positive(self.epsilon) {
            return bad("tau and epsilon must be positive");
        }
        if self.max_steps == Some(0) {
            return bad("max steps must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum UsbError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("formula has no clauses")]
    EmptyFormula,
    #[error("initial state has {found} entries, formula has {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
    #[error("relaxation loss is undefined without falsified clauses")]
    NoUnsatisfiedClauses,
}

/// Relaxed real vector; `x_i > 0` reads as true, anything else as false.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedState {
    pub x: Vec<f64>,
}

impl RelaxedState {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::from_reals(&self.x)
    }
}

/// Half-normal magnitudes with signs from `probs` (threshold 0.5) or fair coins.
pub fn init_relaxed<R: Rng + ?Sized>(n: usize, probs: Option<&[f64]>, rng: &mut R) -> RelaxedState {
    if let Some(p) = probs {
        assert_eq!(p.len(), n, "probability vector length");
    }
    let x = (0..n)
        .map(|i| {
            let magnitude = rng.sample::<f64, _>(StandardNormal).abs();
            let positive = match probs {
                Some(p) => p[i] > 0.5,
                None => rng.random_bool(0.5),
            };
            if positive {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    RelaxedState { x }
}

fn variable_coefficients(x: &[f64], report: &ScoreReport, params: &UsbParams) -> Vec<f64> {
    x.iter()
        .zip(&report.score)
        .map(|(&xi, &s)| {
            let s = s as f64;
            params.tau * xi.tanh() / (s * s + params.epsilon)
        })
        .collect()
}

/// `f = τ · tanh(x) / (score² + ε) × W_unit`, one entry per clause.
pub fn relaxation_forward(x: &[f64], report: &ScoreReport, mats: &InstanceMatrices, params: &UsbParams) -> Vec<f64> {
    let coef = variable_coefficients(x, report, params);
    mats.row_times_unit_real(&coef)
}

/// Mean over falsified clauses of `(f_j · CW_j / S_j)²`.
pub fn relaxation_loss(f: &[f64], report: &ScoreReport, mats: &InstanceMatrices) -> Result<f64, UsbError> {
    let unsat: Vec<usize> = report.unsat_clauses().collect();
    if unsat.is_empty() {
        return Err(UsbError::NoUnsatisfiedClauses);
    }
    let sum: f64 = unsat
        .iter()
        .map(|&j| {
            let r = f[j] * mats.weights()[j] as f64 / mats.s()[j] as f64;
            r * r
        })
        .sum();
    Ok(sum / unsat.len() as f64)
}

/// Gradient of [`relaxation_loss`] with respect to `x`.
///
/// Returns zeros when no clause is falsified.
pub fn relaxation_grad(x: &[f64], report: &ScoreReport, mats: &InstanceMatrices, params: &UsbParams) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let num_unsat = report.num_unsat();
    if num_unsat == 0 {
        return grad;
    }
    let f = relaxation_forward(x, report, mats, params);
    let scale = 2.0 / num_unsat as f64;
    for j in report.unsat_clauses() {
        let ratio = mats.weights()[j] as f64 / mats.s()[j] as f64;
        let upstream = scale * f[j] * ratio * ratio;
        for e in mats.column(j) {
            grad[e.var] += upstream * f64::from(e.sign);
        }
    }
    for (g, (&xi, &s)) in grad.iter_mut().zip(x.iter().zip(&report.score)) {
        if *g != 0.0 {
            let t = xi.tanh();
            let s = s as f64;
            *g *= params.tau * (1.0 - t * t) / (s * s + params.epsilon);
        }
    }
    grad
}

/// Up to `k` improving variables, best score first (lowest index on ties),
/// skipping any that shares a clause with one already chosen.
pub fn select_flip_batch(report: &ScoreReport, mats: &InstanceMatrices, k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..report.score.len()).filter(|&v| report.score[v] > 0).collect();
    candidates.sort_by(|&a, &b| report.score[b].cmp(&report.score[a]).then(a.cmp(&b)));
    let mut touched = vec![false; mats.num_clauses()];
    let mut batch = Vec::with_capacity(k.min(candidates.len()));
    for v in candidates {
        if batch.len() == k {
            break;
        }
        if mats.row(v).any(|e| touched[e.clause]) {
            continue;
        }
        for e in mats.row(v) {
            touched[e.clause] = true;
        }
        batch.push(v);
    }
    batch
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepAction {
    Flip(Vec<usize>),
    Gradient,
    /// Cost reached zero; the loop ends on this step.
    Finished,
}

/// Reported once per inner step, before the step's update is applied.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub step: u64,
    pub restart: u64,
    pub assignment: &'a Assignment,
    pub cost: u64,
    pub action: &'a StepAction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Improvement {
    pub step: u64,
    pub elapsed: Duration,
    pub cost: u64,
}

/// Hooks into the solver loop. Both methods default to no-ops.
pub trait UsbObserver {
    fn on_step(&mut self, _event: &StepEvent<'_>) {}
    fn on_improvement(&mut self, _improvement: &Improvement) {}
}

impl UsbObserver for () {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Assignment,
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsbOutcome {
    /// `None` when no feasible assignment was met.
    pub best: Option<Solution>,
    pub steps: u64,
    pub restarts: u64,
    pub improvements: Vec<Improvement>,
}

/// Runs the boosting loop from `init`, restarting around the best assignment
/// (or fresh signs from `probs`) whenever the step budget runs out.
pub fn usb_solve(
    formula: &WcnfFormula,
    mats: &InstanceMatrices,
    init: RelaxedState,
    probs: Option<&[f64]>,
    params: &UsbParams,
) -> Result<UsbOutcome, UsbError> {
    usb_solve_observed(formula, mats, init, probs, params, &mut ())
}

pub fn usb_solve_observed<O: UsbObserver + ?Sized>(
    formula: &WcnfFormula,
    mats: &InstanceMatrices,
    init: RelaxedState,
    probs: Option<&[f64]>,
    params: &UsbParams,
    observer: &mut O,
) -> Result<UsbOutcome, UsbError> {
    params.validate()?;
    let n = formula.num_vars();
    if formula.num_clauses() == 0 {
        return Err(UsbError::EmptyFormula);
    }
    if init.x.len() != n {
        return Err(UsbError::LengthMismatch { expected: n, found: init.x.len() });
    }
    let start = Instant::now();
    let limit = Duration::from_secs_f64(params.time_limit_secs);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = init.x;
    let mut best: Option<Solution> = None;
    let mut improvements = Vec::new();
    let mut steps = 0u64;
    let mut restarts = 0u64;

    'outer: loop {
        let mut budget = params.len;
        let mut step = 0usize;
        while step <= budget {
            if start.elapsed() >= limit || params.max_steps.is_some_and(|cap| steps >= cap) {
                break 'outer;
            }
            let alpha = Assignment::from_reals(&x);
            let report = compute_scores(&alpha, mats).expect("state length checked");
            let cost = cost_from_report(&report, mats);
            if best.as_ref().is_none_or(|b| cost < b.cost) && formula.is_feasible(&alpha) {
                let imp = Improvement { step: steps, elapsed: start.elapsed(), cost };
                observer.on_improvement(&imp);
                improvements.push(imp);
                best = Some(Solution { assignment: alpha.clone(), cost });
                budget = step + params.len;
                if cost == 0 {
                    let action = StepAction::Finished;
                    observer.on_step(&StepEvent { step: steps, restart: restarts, assignment: &alpha, cost, action: &action });
                    steps += 1;
                    break 'outer;
                }
            }
            let batch = select_flip_batch(&report, mats, params.k);
            let action = if batch.is_empty() { StepAction::Gradient } else { StepAction::Flip(batch) };
            observer.on_step(&StepEvent { step: steps, restart: restarts, assignment: &alpha, cost, action: &action });
            match &action {
                StepAction::Flip(vars) => {
                    for &v in vars {
                        // zero reads as false, so its flip must land on the positive side
                        x[v] = if x[v] == 0.0 { params.epsilon } else { -x[v] };
                    }
                }
                StepAction::Finished => unreachable!(),
                StepAction::Gradient => {
                    let grad = relaxation_grad(&x, &report, mats, params);
                    for (xi, g) in x.iter_mut().zip(grad) {
                        *xi -= params.learning_rate * g;
                    }
                }
            }
            step += 1;
            steps += 1;
        }
        restarts += 1;
        x = restart_state(n, best.as_ref(), probs, &mut rng);
    }
    Ok(UsbOutcome { best, steps, restarts, improvements })
}

/// Fresh half-normal magnitudes; each sign comes from the best assignment
/// with probability 0.5, otherwise from `probs` or a fair coin.
fn restart_state<R: Rng + ?Sized>(n: usize, best: Option<&Solution>, probs: Option<&[f64]>, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let magnitude = rng.sample::<f64, _>(StandardNormal).abs();
            let from_best = rng.random_bool(0.5);
            let positive = match (best, from_best, probs) {
                (Some(b), true, _) => b.assignment.value(i),
                (_, _, Some(p)) => p[i] > 0.5,
                _ => rng.random_bool(0.5),
            };
            if positive {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var() -> (WcnfFormula, InstanceMatrices) {
        let f = WcnfFormula::from_weighted(2, &[(3, &[-1]), (4, &[-2]), (5, &[1, 2])]).unwrap();
        let mats = InstanceMatrices::build(&f);
        (f, mats)
    }

    fn two_var_state() -> (WcnfFormula, InstanceMatrices, Vec<f64>, ScoreReport) {
        let (f, mats) = two_var();
        let x = vec![-0.79, 1.34];
        let report = compute_scores(&Assignment::from_reals(&x), &mats).unwrap();
        (f, mats, x, report)
    }

    #[test]
    fn init_signs_follow_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = init_relaxed(2, Some(&[0.9, 0.1]), &mut rng);
        assert!(s.x[0] > 0.0 && s.x[1] < 0.0);
    }

    #[test]
    fn init_is_reproducible() {
        let a = init_relaxed(10, None, &mut ChaCha8Rng::seed_from_u64(11));
        let b = init_relaxed(10, None, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = init_relaxed(100_000, None, &mut rng);
        let mean = s.x.iter().map(|v| v.abs()).sum::<f64>() / 1e5;
        assert!((mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01, "{mean}");
    }

    #[test]
    fn forward_at_zero_is_zero() {
        let (_, mats, _, report) = two_var_state();
        let f = relaxation_forward(&[0.0, 0.0], &report, &mats, &UsbParams::default());
        assert_eq!(f, vec![0.0; 3]);
    }

    #[test]
    fn two_var_forward_and_loss() {
        let (_, mats, x, report) = two_var_state();
        let params = UsbParams::default();
        let f = relaxation_forward(&x, &report, &mats, &params);
        let expected = [0.5 * 0.79f64.tanh() / 9.01, -0.5 * 1.34f64.tanh() / 1.01];
        assert!((f[0] - expected[0]).abs() < 1e-12);
        assert!((f[1] - expected[1]).abs() < 1e-12);
        assert!((f[2] - (-expected[0] - expected[1])).abs() < 1e-12);
        assert!((f[0] - 0.037).abs() < 1e-3 && (f[1] + 0.431).abs() < 1e-3 && (f[2] - 0.395).abs() < 1e-3);
        let loss = relaxation_loss(&f, &report, &mats).unwrap();
        assert!((loss - (f[1] * 4.0).powi(2)).abs() < 1e-12);
        assert!((loss - 2.975).abs() < 5e-3, "{loss}");

        let doubled = UsbParams { tau: 1.0, ..params };
        let f2 = relaxation_forward(&x, &report, &mats, &doubled);
        for (a, b) in f.iter().zip(&f2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn loss_requires_unsat_clause() {
        let (_, mats) = two_var();
        let mut report = compute_scores(&Assignment::from_signs(vec![1, -1]), &mats).unwrap();
        report.unsat = vec![false; 3];
        assert_eq!(relaxation_loss(&[0.0; 3], &report, &mats), Err(UsbError::NoUnsatisfiedClauses));
        assert_eq!(relaxation_grad(&[1.0, -1.0], &report, &mats, &UsbParams::default()), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_zero_outside_unsat_clauses_and_in_saturation() {
        let (_, mats, x, report) = two_var_state();
        let params = UsbParams::default();
        let g = relaxation_grad(&x, &report, &mats, &params);
        // x1 does not occur in the only falsified clause
        assert_eq!(g[0], 0.0);
        assert!(g[1] > 0.0);
        let saturated = relaxation_grad(&[-20.0, 20.0], &report, &mats, &params);
        assert!(saturated[1].abs() < 1e-15);
    }

    #[test]
    fn batch_selection_skips_clause_conflicts() {
        let (_, mats) = two_var();
        let report = compute_scores(&Assignment::from_signs(vec![-1, -1]), &mats).unwrap();
        assert_eq!(report.score, vec![2, 1]);
        assert_eq!(select_flip_batch(&report, &mats, 10), vec![0]);
    }

    #[test]
    fn params_validation() {
        assert!(UsbParams::default().validate().is_ok());
        for p in [
            UsbParams { learning_rate: 0.0, ..Default::default() },
            UsbParams { k: 0, ..Default::default() },
            UsbParams { epsilon: -1.0, ..Default::default() },
            UsbParams { time_limit_secs: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(p.validate(), Err(UsbError::InvalidParams(_))));
        }
    }

    struct Trace(Vec<(Vec<bool>, u64, StepAction)>);

    impl UsbObserver for Trace {
        fn on_step(&mut self, e: &StepEvent<'_>) {
            self.0.push((e.assignment.to_bools(), e.cost, e.action.clone()));
        }
    }

    #[test]
    fn two_var_trajectory() {
        let (f, mats) = two_var();
        let params = UsbParams { max_steps: Some(50), ..Default::default() };
        let mut trace = Trace(Vec::new());
        let out =
            usb_solve_observed(&f, &mats, RelaxedState::new(vec![-0.79, 1.34]), None, &params, &mut trace).unwrap();
        let head: Vec<_> = trace.0.iter().take(3).cloned().collect();
        assert_eq!(
            head,
            vec![
                (vec![false, true], 4, StepAction::Gradient),
                (vec![false, false], 5, StepAction::Flip(vec![0])),
                (vec![true, false], 3, StepAction::Gradient),
            ]
        );
        let best = out.best.unwrap();
        assert_eq!(best.cost, 3);
        assert_eq!(best.assignment.to_bools(), vec![true, false]);
        assert_eq!(out.steps, 50);
    }

    #[test]
    fn satisfiable_unit_formula_stops_at_zero() {
        let f = WcnfFormula::from_weighted(1, &[(1, &[1])]).unwrap();
        let mats = InstanceMatrices::build(&f);
        for x0 in [-0.5, 0.5, 0.0] {
            let out = usb_solve(&f, &mats, RelaxedState::new(vec![x0]), None, &UsbParams::default()).unwrap();
            assert_eq!(out.best.as_ref().unwrap().cost, 0);
            assert!(out.steps <= 2, "{x0} {out:?}");
        }
    }

    #[test]
    fn infeasible_hard_instance_reports_no_solution() {
        let f = WcnfFormula::parse_dimacs(b"p wcnf 1 2 10\n10 1 0\n10 -1 0\n").unwrap();
        let mats = InstanceMatrices::build(&f);
        let params = UsbParams { max_steps: Some(200), ..Default::default() };
        let out = usb_solve(&f, &mats, RelaxedState::new(vec![1.0]), None, &params).unwrap();
        assert!(out.best.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (f, mats) = two_var();
        let err = usb_solve(&f, &mats, RelaxedState::new(vec![1.0]), None, &UsbParams::default()).unwrap_err();
        assert_eq!(err, UsbError::LengthMismatch { expected: 2, found: 1 });
        let empty = WcnfFormula::new(1, vec![], None).unwrap();
        let m2 = InstanceMatrices::build(&empty);
        let err = usb_solve(&empty, &m2, RelaxedState::new(vec![1.0]), None, &UsbParams::default()).unwrap_err();
        assert_eq!(err, UsbError::EmptyFormula);
    }
}
