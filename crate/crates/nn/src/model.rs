//! The edge-splitting message-passing network.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use splitgnn_core::graph::{EdgeClass, EdgeSplitGraph};
use splitgnn_core::{Assignment, WcnfFormula};

use crate::tape::{Tape, Var};
use crate::tensor::{Matrix, SparseMean};
use crate::NnError;

pub const PROB_CLAMP: f64 = 1e-7;

/// Which clause-side aggregator feeds each transposed class matrix on the
/// way back to literals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassPairing {
    /// `childᵀ←parent`, `parentᵀ←child`, `ntupᵀ←ntdown`, `ntdownᵀ←ntup`.
    #[default]
    Swapped,
    /// Every transposed class matrix pairs with its own aggregator.
    Aligned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub rounds: usize,
    pub pairing: ClassPairing,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 16, rounds: 8, pairing: ClassPairing::Swapped }
    }
}

#[derive(Clone, Copy, Debug)]
struct Mlp {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Copy, Debug)]
struct Lstm {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Head {
    q: usize,
    k: usize,
    v: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    init_literal: usize,
    init_clause: usize,
    literal_aggs: [Mlp; 4],
    literal_merge: Mlp,
    clause_aggs: [Mlp; 4],
    clause_merge: Mlp,
    clause_update: Lstm,
    heads: [Head; 2],
    attn_w: usize,
    attn_b: usize,
    literal_update: Lstm,
    predict: Mlp,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Init {
    Glorot,
    Zero,
    /// LSTM bias: zeros except the forget gate block, which starts at one.
    ForgetBias,
}

struct Spec {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
    inits: Vec<Init>,
}

impl Spec {
    fn add(&mut self, name: String, shape: (usize, usize), init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.inits.push(init);
        self.names.len() - 1
    }

    fn mlp(&mut self, prefix: &str, input: usize, hidden: usize, output: usize) -> Mlp {
        Mlp {
            w1: self.add(format!("{prefix}.w1"), (input, hidden), Init::Glorot),
            b1: self.add(format!("{prefix}.b1"), (1, hidden), Init::Zero),
            w2: self.add(format!("{prefix}.w2"), (hidden, output), Init::Glorot),
            b2: self.add(format!("{prefix}.b2"), (1, output), Init::Zero),
        }
    }

    fn lstm(&mut self, prefix: &str, input: usize, hidden: usize) -> Lstm {
        Lstm {
            w: self.add(format!("{prefix}.w"), (input + hidden, 4 * hidden), Init::Glorot),
            b: self.add(format!("{prefix}.b"), (1, 4 * hidden), Init::ForgetBias),
        }
    }
}

const CLASS_NAMES: [&str; 4] = ["parent", "child", "ntup", "ntdown"];

fn layout(d: usize) -> (Layout, Spec) {
    let mut s = Spec { names: Vec::new(), shapes: Vec::new(), inits: Vec::new() };
    let init_literal = s.add("init.literal".into(), (1, d), Init::Glorot);
    let init_clause = s.add("init.clause".into(), (1, d), Init::Glorot);
    let literal_aggs = CLASS_NAMES.map(|c| s.mlp(&format!("to_clause.{c}"), d, d, d));
    let literal_merge = s.mlp("to_clause.merge", 4 * d, d, d);
    let clause_aggs = CLASS_NAMES.map(|c| s.mlp(&format!("to_literal.{c}"), d, d, d));
    let clause_merge = s.mlp("to_literal.merge", 4 * d, d, d);
    let clause_update = s.lstm("clause_update", d, d);
    let heads = [0, 1].map(|h| Head {
        q: s.add(format!("attention.head{h}.q"), (d, d), Init::Glorot),
        k: s.add(format!("attention.head{h}.k"), (d, d), Init::Glorot),
        v: s.add(format!("attention.head{h}.v"), (d, d), Init::Glorot),
    });
    let attn_w = s.add("attention.out.w".into(), (2 * d, d), Init::Glorot);
    let attn_b = s.add("attention.out.b".into(), (1, d), Init::Zero);
    let literal_update = s.lstm("literal_update", 2 * d, d);
    let predict = s.mlp("predict", 2 * d, d, 1);
    let layout = Layout {
        init_literal,
        init_clause,
        literal_aggs,
        literal_merge,
        clause_aggs,
        clause_merge,
        clause_update,
        heads,
        attn_w,
        attn_b,
        literal_update,
        predict,
    };
    (layout, s)
}

/// Total number of learnable scalars for embedding width `d`.
pub fn parameter_count(d: usize) -> usize {
    layout(d).1.shapes.iter().map(|(r, c)| r * c).sum()
}

/// Per-instance constant inputs: class aggregation patterns, clause weight
/// scaling, and literal index maps.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    num_vars: usize,
    num_clauses: usize,
    to_clause: [Arc<SparseMean>; 4],
    to_literal: [Arc<SparseMean>; 4],
    weight_scale: Arc<Vec<f64>>,
    negation: Arc<Vec<usize>>,
    positive: Arc<Vec<usize>>,
    negative: Arc<Vec<usize>>,
}

impl GraphInputs {
    pub fn from_formula(formula: &WcnfFormula) -> Self {
        let split = EdgeSplitGraph::from_formula(formula);
        let weights: Vec<u64> = formula.clauses().iter().map(|c| c.weight()).collect();
        Self::new(&split, &weights).expect("weights come from the same formula")
    }

    pub fn new(split: &EdgeSplitGraph, weights: &[u64]) -> Result<Self, NnError> {
        let (n, m) = (split.num_vars(), split.num_clauses());
        if weights.len() != m {
            return Err(NnError::WeightLength { expected: m, found: weights.len() });
        }
        let lits = split.num_literal_nodes();
        let to_clause = EdgeClass::ALL.map(|c| Arc::new(SparseMean::new(m, lits, split.matrix(c).to_vec())));
        let to_literal = EdgeClass::ALL.map(|c| {
            let pairs = split.matrix(c).iter().map(|&(cl, l)| (l, cl)).collect();
            Arc::new(SparseMean::new(lits, m, pairs))
        });
        let max_w = weights.iter().copied().max().unwrap_or(1).max(1) as f64;
        Ok(GraphInputs {
            num_vars: n,
            num_clauses: m,
            to_clause,
            to_literal,
            weight_scale: Arc::new(weights.iter().map(|&w| w as f64 / max_w).collect()),
            negation: Arc::new((0..lits).map(|l| l ^ 1).collect()),
            positive: Arc::new((0..n).map(|i| 2 * i).collect()),
            negative: Arc::new((0..n).map(|i| 2 * i + 1).collect()),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }
}

/// Switches that alter a single forward pass.
#[derive(Debug, Default)]
pub struct ForwardOptions<'a> {
    /// Replace the non-tree class messages with zeros.
    pub drop_non_tree: bool,
    /// Dropout rate and randomness source for aggregation hidden layers.
    pub dropout: Option<(f64, &'a mut ChaCha8Rng)>,
}

#[derive(Clone, Debug)]
pub struct SplitGnn {
    config: ModelConfig,
    layout: Layout,
    names: Vec<String>,
    params: Vec<Matrix>,
}

impl SplitGnn {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        if config.dim == 0 {
            return Err(NnError::InvalidConfig("embedding width must be positive".into()));
        }
        let (layout, spec) = layout(config.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .shapes
            .iter()
            .zip(&spec.inits)
            .map(|(&(r, c), &init)| match init {
                Init::Zero => Matrix::zeros(r, c),
                Init::ForgetBias => {
                    let h = c / 4;
                    Matrix::from_vec(r, c, (0..c).map(|i| if (h..2 * h).contains(&i) { 1.0 } else { 0.0 }).collect())
                }
                Init::Glorot => {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-a..a)).collect())
                }
            })
            .collect();
        Ok(SplitGnn { config, layout, names: spec.names, params })
    }

    /// Rebuilds a model from parameter arrays in canonical order.
    pub fn from_parts(config: ModelConfig, params: Vec<Matrix>) -> Result<Self, NnError> {
        let (layout, spec) = layout(config.dim);
        if params.len() != spec.shapes.len() {
            return Err(NnError::ParamMismatch(format!(
                "expected {} parameter arrays, found {}",
                spec.shapes.len(),
                params.len()
            )));
        }
        for ((p, &shape), name) in params.iter().zip(&spec.shapes).zip(&spec.names) {
            if p.shape() != shape {
                return Err(NnError::ParamMismatch(format!("{name}: expected {shape:?}, found {:?}", p.shape())));
            }
        }
        Ok(SplitGnn { config, layout, names: spec.names, params })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn set_pairing(&mut self, pairing: ClassPairing) {
        self.config.pairing = pairing;
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    /// Records the full forward pass on `tape` and returns the probability column.
    pub fn record(&self, tape: &mut Tape, g: &GraphInputs, mut opts: ForwardOptions<'_>) -> Var {
        let d = self.config.dim;
        let lits = 2 * g.num_vars;
        let m = g.num_clauses;
        let p: Vec<Var> = self.params.iter().enumerate().map(|(i, v)| tape.param(i, v.clone())).collect();
        let ly = &self.layout;

        let mut lit = tape.broadcast(p[ly.init_literal], lits);
        let mut clause = tape.broadcast(p[ly.init_clause], m);
        let mut lit_cell = tape.constant(Matrix::zeros(lits, d));
        let mut clause_cell = tape.constant(Matrix::zeros(m, d));
        let zeros_clause = tape.constant(Matrix::zeros(m, d));
        let zeros_lit = tape.constant(Matrix::zeros(lits, d));
        let skip: [bool; 4] = std::array::from_fn(|c| opts_skip(c, &opts));

        for _ in 0..self.config.rounds {
            // literals -> clauses
            let mut parts = Vec::with_capacity(4);
            for (c, &skipped) in skip.iter().enumerate() {
                if skipped {
                    parts.push(zeros_clause);
                    continue;
                }
                let h = self.mlp(tape, &p, ly.literal_aggs[c], lit, &mut opts);
                parts.push(tape.sparse_mean(h, g.to_clause[c].clone()));
            }
            let joined = tape.concat(&parts);
            let to_clause = self.mlp(tape, &p, ly.literal_merge, joined, &mut opts);
            let to_clause = tape.scale_rows(to_clause, g.weight_scale.clone());
            let (next_clause, next_cell) = lstm(tape, &p, ly.clause_update, to_clause, clause, clause_cell, d);

            // clauses (previous round) -> literals
            let mut parts = Vec::with_capacity(4);
            for (c, &skipped) in skip.iter().enumerate() {
                let agg = match self.config.pairing {
                    ClassPairing::Swapped => EdgeClass::ALL[c].reverse() as usize,
                    ClassPairing::Aligned => c,
                };
                if skipped {
                    parts.push(zeros_lit);
                    continue;
                }
                let h = self.mlp(tape, &p, ly.clause_aggs[agg], clause, &mut opts);
                parts.push(tape.sparse_mean(h, g.to_literal[c].clone()));
            }
            let joined = tape.concat(&parts);
            let to_literal = self.mlp(tape, &p, ly.clause_merge, joined, &mut opts);

            let attended = self.attention(tape, &p, lit, g, d);
            let input = tape.concat(&[attended, to_literal]);
            let (next_lit, next_lit_cell) = lstm(tape, &p, ly.literal_update, input, lit, lit_cell, d);

            lit = next_lit;
            lit_cell = next_lit_cell;
            clause = next_clause;
            clause_cell = next_cell;
        }

        let pos = tape.gather(lit, g.positive.clone());
        let neg = tape.gather(lit, g.negative.clone());
        let pair = tape.concat(&[pos, neg]);
        let h = tape.affine(pair, p[ly.predict.w1], Some(p[ly.predict.b1]));
        let h = tape.relu(h);
        let logit = tape.affine(h, p[ly.predict.w2], Some(p[ly.predict.b2]));
        tape.sigmoid(logit)
    }

    fn mlp(&self, tape: &mut Tape, p: &[Var], mlp: Mlp, x: Var, opts: &mut ForwardOptions<'_>) -> Var {
        let h = tape.affine(x, p[mlp.w1], Some(p[mlp.b1]));
        let mut h = tape.relu(h);
        if let Some((rate, rng)) = opts.dropout.as_mut() {
            if *rate > 0.0 {
                let keep = 1.0 - *rate;
                let len = tape.value(h).len();
                let mask: Vec<f64> = (0..len).map(|_| if rng.random_bool(keep) { 1.0 / keep } else { 0.0 }).collect();
                h = tape.mask(h, Arc::new(mask));
            }
        }
        tape.affine(h, p[mlp.w2], Some(p[mlp.b2]))
    }

    /// Two-head attention of each literal over itself and its negation.
    fn attention(&self, tape: &mut Tape, p: &[Var], lit: Var, g: &GraphInputs, d: usize) -> Var {
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut outs = Vec::with_capacity(2);
        for head in &self.layout.heads {
            let q = tape.affine(lit, p[head.q], None);
            let k = tape.affine(lit, p[head.k], None);
            let v = tape.affine(lit, p[head.v], None);
            let k_neg = tape.gather(k, g.negation.clone());
            let v_neg = tape.gather(v, g.negation.clone());
            let s_self = tape.row_dot(q, k);
            let s_neg = tape.row_dot(q, k_neg);
            let diff = tape.sub(s_self, s_neg);
            let diff = tape.scale(diff, inv_sqrt_d);
            let a = tape.sigmoid(diff);
            let b = tape.one_minus(a);
            let own = tape.mul_col(a, v);
            let other = tape.mul_col(b, v_neg);
            outs.push(tape.add(own, other));
        }
        let joined = tape.concat(&outs);
        tape.affine(joined, p[self.layout.attn_w], Some(p[self.layout.attn_b]))
    }

    /// Probability of each variable being true.
    pub fn forward(&self, g: &GraphInputs) -> Vec<f64> {
        self.forward_with(g, ForwardOptions::default())
    }

    pub fn forward_with(&self, g: &GraphInputs, opts: ForwardOptions<'_>) -> Vec<f64> {
        let mut tape = Tape::new();
        let out = self.record(&mut tape, g, opts);
        tape.value(out).data().to_vec()
    }

    /// Mean BCE against `target` (0/1 per variable) and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        g: &GraphInputs,
        target: &Arc<Vec<f64>>,
        opts: ForwardOptions<'_>,
    ) -> Result<(f64, Vec<f64>, Vec<Matrix>), NnError> {
        if target.len() != g.num_vars {
            return Err(NnError::LabelLength { expected: g.num_vars, found: target.len() });
        }
        let mut tape = Tape::new();
        let probs = self.record(&mut tape, g, opts);
        let loss = tape.bce(probs, target.clone(), PROB_CLAMP);
        let grads = tape
            .backward(loss, self.params.len())
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
            .collect();
        Ok((tape.value(loss).get(0, 0), tape.value(probs).data().to_vec(), grads))
    }

    /// Mean BCE together with the tape's kink pattern.
    pub fn loss_with_pattern(&self, g: &GraphInputs, target: &Arc<Vec<f64>>) -> (f64, Vec<bool>) {
        let mut tape = Tape::new();
        let probs = self.record(&mut tape, g, ForwardOptions::default());
        let loss = tape.bce(probs, target.clone(), PROB_CLAMP);
        (tape.value(loss).get(0, 0), tape.kink_pattern())
    }

    /// Mean BCE without gradients.
    pub fn loss(&self, g: &GraphInputs, target: &[f64]) -> f64 {
        crate::tape::bce_value(&self.forward(g), target, PROB_CLAMP)
    }
}

fn opts_skip(class: usize, opts: &ForwardOptions<'_>) -> bool {
    opts.drop_non_tree && matches!(EdgeClass::ALL[class], EdgeClass::NtUp | EdgeClass::NtDown)
}

fn lstm(tape: &mut Tape, p: &[Var], cell: Lstm, x: Var, h: Var, c: Var, d: usize) -> (Var, Var) {
    let xh = tape.concat(&[x, h]);
    let gates = tape.affine(xh, p[cell.w], Some(p[cell.b]));
    let i = tape.slice(gates, 0, d);
    let f = tape.slice(gates, d, d);
    let gg = tape.slice(gates, 2 * d, d);
    let o = tape.slice(gates, 3 * d, d);
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let gg = tape.tanh(gg);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c);
    let write = tape.mul(i, gg);
    let c_next = tape.add(keep, write);
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed);
    (h_next, c_next)
}

/// Rounds probabilities at 0.5 (strictly above means true).
pub fn round_probs(probs: &[f64]) -> Assignment {
    Assignment::from_bools(&probs.iter().map(|&p| p > 0.5).collect::<Vec<_>>())
}

/// 0/1 training targets from an assignment.
pub fn targets(assignment: &Assignment) -> Vec<f64> {
    assignment.signs().iter().map(|&s| if s > 0 { 1.0 } else { 0.0 }).collect()
}
