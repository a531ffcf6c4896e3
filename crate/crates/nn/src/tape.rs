//! Reverse-mode differentiation tape over [`Matrix`] values.
//!
//! Every operation appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse and returns gradients for parameter leaves.

use std::sync::Arc;

use crate::tensor::{dot, matmul, matmul_at, matmul_bt, sigmoid, Matrix, SparseMean};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf { param: Option<usize> },
    Affine { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Gather(Var, Arc<Vec<usize>>),
    SpMean { x: Var, agg: Arc<SparseMean>, adjoint: bool },
    ScaleRows(Var, Arc<Vec<f64>>),
    Mask(Var, Arc<Vec<f64>>),
    Broadcast(Var),
    RowDot(Var, Var),
    MulCol { w: Var, x: Var },
    Bce { p: Var, target: Arc<Vec<f64>>, delta: f64 },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// A leaf whose gradient is reported under `id` by [`backward`](Self::backward).
    pub fn param(&mut self, id: usize, value: Matrix) -> Var {
        self.push(value, Op::Leaf { param: Some(id) })
    }

    /// `x · w + b`, with `b` a single row broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let mut out = matmul(self.value(x), self.value(w));
        if let Some(b) = b {
            let bias = self.value(b);
            assert_eq!(bias.shape(), (1, out.cols()), "bias shape");
            let bias = bias.data().to_vec();
            for r in 0..out.rows() {
                for (o, bv) in out.row_mut(r).iter_mut().zip(&bias) {
                    *o += bv;
                }
            }
        }
        self.push(out, Op::Affine { x, w, b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(out, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// Column-wise concatenation; all parts share the row count.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p);
                assert_eq!(src.rows(), rows, "concat row mismatch");
                let c = src.cols();
                out.row_mut(r)[offset..offset + c].copy_from_slice(src.row(r));
                offset += c;
            }
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let src = self.value(x);
        assert!(start + len <= src.cols(), "slice out of range");
        let mut out = Matrix::zeros(src.rows(), len);
        for r in 0..src.rows() {
            out.row_mut(r).copy_from_slice(&src.row(r)[start..start + len]);
        }
        self.push(out, Op::Slice { x, start })
    }

    /// Output row `r` is input row `index[r]`.
    pub fn gather(&mut self, x: Var, index: Arc<Vec<usize>>) -> Var {
        let src = self.value(x);
        let mut out = Matrix::zeros(index.len(), src.cols());
        for (r, &i) in index.iter().enumerate() {
            out.row_mut(r).copy_from_slice(src.row(i));
        }
        self.push(out, Op::Gather(x, index))
    }

    pub fn sparse_mean(&mut self, x: Var, agg: Arc<SparseMean>) -> Var {
        let out = agg.apply(self.value(x));
        self.push(out, Op::SpMean { x, agg, adjoint: false })
    }

    /// Mean pooling along the transposed pattern.
    pub fn sparse_mean_adjoint(&mut self, x: Var, agg: Arc<SparseMean>) -> Var {
        let out = agg.apply_adjoint(self.value(x));
        self.push(out, Op::SpMean { x, agg, adjoint: true })
    }

    pub fn scale_rows(&mut self, x: Var, factors: Arc<Vec<f64>>) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(out.rows(), factors.len(), "row scale length");
        for (r, &f) in factors.iter().enumerate() {
            for v in out.row_mut(r) {
                *v *= f;
            }
        }
        self.push(out, Op::ScaleRows(x, factors))
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mask(&mut self, x: Var, mask: Arc<Vec<f64>>) -> Var {
        let src = self.value(x);
        assert_eq!(src.len(), mask.len(), "mask length");
        let data = src.data().iter().zip(mask.iter()).map(|(a, b)| a * b).collect();
        let out = Matrix::from_vec(src.rows(), src.cols(), data);
        self.push(out, Op::Mask(x, mask))
    }

    /// Repeats a single row `rows` times.
    pub fn broadcast(&mut self, x: Var, rows: usize) -> Var {
        let src = self.value(x);
        assert_eq!(src.rows(), 1, "broadcast expects a row vector");
        let mut data = Vec::with_capacity(rows * src.cols());
        for _ in 0..rows {
            data.extend_from_slice(src.data());
        }
        let out = Matrix::from_vec(rows, src.cols(), data);
        self.push(out, Op::Broadcast(x))
    }

    /// Per-row inner products, as a column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "row_dot shape");
        let out = Matrix::column((0..x.rows()).map(|r| dot(x.row(r), y.row(r))).collect());
        self.push(out, Op::RowDot(a, b))
    }

    /// Scales row `r` of `x` by `w[r]`, where `w` is a column variable.
    pub fn mul_col(&mut self, w: Var, x: Var) -> Var {
        let (wv, xv) = (self.value(w), self.value(x));
        assert_eq!(wv.shape(), (xv.rows(), 1), "mul_col shape");
        let mut out = xv.clone();
        for r in 0..out.rows() {
            let s = wv.get(r, 0);
            for v in out.row_mut(r) {
                *v *= s;
            }
        }
        self.push(out, Op::MulCol { w, x })
    }

    /// Mean binary cross-entropy of a probability column against 0/1 targets,
    /// with probabilities clamped to `[delta, 1 - delta]`.
    pub fn bce(&mut self, p: Var, target: Arc<Vec<f64>>, delta: f64) -> Var {
        let probs = self.value(p);
        assert_eq!(probs.shape(), (target.len(), 1), "bce shape");
        let loss = bce_value(probs.data(), &target, delta);
        self.push(Matrix::from_vec(1, 1, vec![loss]), Op::Bce { p, target, delta })
    }

    /// On/off state of every piecewise-linear point on the tape: each ReLU
    /// input's sign and each clamped probability.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut bits = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(a) => bits.extend(self.value(*a).data().iter().map(|&x| x > 0.0)),
                Op::Bce { p, delta, .. } => {
                    bits.extend(self.value(*p).data().iter().map(|&x| x < *delta || x > 1.0 - delta))
                }
                _ => {}
            }
        }
        bits
    }

    /// Gradients of the scalar `loss` for every parameter id below `num_params`.
    pub fn backward(&self, loss: Var, num_params: usize) -> Vec<Option<Matrix>> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Matrix>> = (0..num_params).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { param: Some(id) } => accumulate(&mut params, *id, g),
                Op::Leaf { param: None } => {}
                Op::Affine { x, w, b } => {
                    let gx = matmul_bt(&g, self.value(*w));
                    let gw = matmul_at(self.value(*x), &g);
                    if let Some(b) = b {
                        let mut gb = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads, b.0, gb);
                    }
                    accumulate(&mut grads, x.0, gx);
                    accumulate(&mut grads, w.0, gw);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, a.0, g.clone());
                    accumulate(&mut grads, b.0, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, b.0, g.map(|v| -v));
                    accumulate(&mut grads, a.0, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, a.0, ga);
                    accumulate(&mut grads, b.0, gb);
                }
                Op::OneMinus(a) => accumulate(&mut grads, a.0, g.map(|v| -v)),
                Op::Scale(a, s) => accumulate(&mut grads, a.0, g.map(|v| v * s)),
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, a.0, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |gv, s| gv * s * (1.0 - s));
                    accumulate(&mut grads, a.0, ga);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |gv, t| gv * (1.0 - t * t));
                    accumulate(&mut grads, a.0, ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let c = self.value(*p).cols();
                        let mut gp = Matrix::zeros(g.rows(), c);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + c]);
                        }
                        offset += c;
                        accumulate(&mut grads, p.0, gp);
                    }
                }
                Op::Slice { x, start } => {
                    let src = self.value(*x);
                    let mut gx = Matrix::zeros(src.rows(), src.cols());
                    let len = g.cols();
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..start + len].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, x.0, gx);
                }
                Op::Gather(x, index) => {
                    let src = self.value(*x);
                    let mut gx = Matrix::zeros(src.rows(), src.cols());
                    for (r, &i) in index.iter().enumerate() {
                        for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, x.0, gx);
                }
                Op::SpMean { x, agg, adjoint } => {
                    let gx = if *adjoint { agg.apply(&g) } else { agg.apply_adjoint(&g) };
                    accumulate(&mut grads, x.0, gx);
                }
                Op::ScaleRows(x, factors) => {
                    let mut gx = g;
                    for (r, &f) in factors.iter().enumerate() {
                        for v in gx.row_mut(r) {
                            *v *= f;
                        }
                    }
                    accumulate(&mut grads, x.0, gx);
                }
                Op::Mask(x, mask) => {
                    let mut gx = g;
                    for (v, m) in gx.data_mut().iter_mut().zip(mask.iter()) {
                        *v *= m;
                    }
                    accumulate(&mut grads, x.0, gx);
                }
                Op::Broadcast(x) => {
                    let mut gx = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gx.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, x.0, gx);
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = bv.clone();
                    let mut gb = av.clone();
                    for r in 0..g.rows() {
                        let s = g.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|v| *v *= s);
                        gb.row_mut(r).iter_mut().for_each(|v| *v *= s);
                    }
                    accumulate(&mut grads, a.0, ga);
                    accumulate(&mut grads, b.0, gb);
                }
                Op::MulCol { w, x } => {
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let gw = Matrix::column((0..g.rows()).map(|r| dot(g.row(r), xv.row(r))).collect());
                    let mut gx = g;
                    for r in 0..gx.rows() {
                        let s = wv.get(r, 0);
                        gx.row_mut(r).iter_mut().for_each(|v| *v *= s);
                    }
                    accumulate(&mut grads, w.0, gw);
                    accumulate(&mut grads, x.0, gx);
                }
                Op::Bce { p, target, delta } => {
                    let scale = g.get(0, 0) / target.len() as f64;
                    let probs = self.value(*p);
                    let gp = probs
                        .data()
                        .iter()
                        .zip(target.iter())
                        .map(|(&pv, &y)| {
                            if pv < *delta || pv > 1.0 - delta {
                                0.0
                            } else {
                                scale * (pv - y) / (pv * (1.0 - pv))
                            }
                        })
                        .collect();
                    accumulate(&mut grads, p.0, Matrix::column(gp));
                }
            }
        }
        params
    }
}

fn accumulate(slots: &mut [Option<Matrix>], idx: usize, g: Matrix) {
    match &mut slots[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Mean clamped binary cross-entropy.
pub fn bce_value(p: &[f64], target: &[f64], delta: f64) -> f64 {
    assert_eq!(p.len(), target.len(), "bce length");
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .zip(target)
        .map(|(&pv, &y)| {
            let q = pv.clamp(delta, 1.0 - delta);
            -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
        })
        .sum();
    total / p.len() as f64
}
