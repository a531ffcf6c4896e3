//! Row-major dense `f64` matrices and the handful of kernels the tape needs.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn column(values: Vec<f64>) -> Self {
        let rows = values.len();
        Matrix::from_vec(rows, 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "elementwise shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "accumulate shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul inner dimension");
    let mut out = Matrix::zeros(a.rows, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let out_row = &mut out.data[i * n..(i + 1) * n];
        for (k, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ`.
pub fn matmul_bt(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.cols, "matmul_bt inner dimension");
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(ar, b.row(j));
        }
    }
    out
}

/// `aᵀ · b`.
pub fn matmul_at(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows, b.rows, "matmul_at inner dimension");
    let mut out = Matrix::zeros(a.cols, b.cols);
    let n = b.cols;
    for k in 0..a.rows {
        let b_row = b.row(k);
        for (i, &av) in a.row(k).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean pooling over a sparse incidence pattern: output row `r` is the mean
/// of the input rows listed for it (zero when none are).
#[derive(Clone, Debug)]
pub struct SparseMean {
    out_rows: usize,
    in_rows: usize,
    /// `(out, in)` pairs sorted by `out`.
    pairs: Vec<(usize, usize)>,
    inv_degree: Vec<f64>,
}

impl SparseMean {
    pub fn new(out_rows: usize, in_rows: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let mut degree = vec![0usize; out_rows];
        for &(o, i) in &pairs {
            assert!(o < out_rows && i < in_rows, "sparse mean index out of range");
            degree[o] += 1;
        }
        let inv_degree = degree.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
        SparseMean { out_rows, in_rows, pairs, inv_degree }
    }

    pub fn out_rows(&self) -> usize {
        self.out_rows
    }

    pub fn in_rows(&self) -> usize {
        self.in_rows
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows, self.in_rows, "sparse mean input rows");
        let mut out = Matrix::zeros(self.out_rows, x.cols);
        for &(o, i) in &self.pairs {
            let s = self.inv_degree[o];
            let src = x.row(i);
            for (d, &v) in out.row_mut(o).iter_mut().zip(src) {
                *d += s * v;
            }
        }
        out
    }

    /// Adjoint of [`apply`](Self::apply).
    pub fn apply_adjoint(&self, grad: &Matrix) -> Matrix {
        assert_eq!(grad.rows, self.out_rows, "sparse mean gradient rows");
        let mut out = Matrix::zeros(self.in_rows, grad.cols);
        for &(o, i) in &self.pairs {
            let s = self.inv_degree[o];
            let src = grad.row(o);
            for (d, &v) in out.row_mut(i).iter_mut().zip(src) {
                *d += s * v;
            }
        }
        out
    }
}
