//! Sparse variable-by-clause incidence matrices and segment reductions.
//!
//! `W[i][j]` is `+CW_j` when `x_i` occurs in clause `j`, `-CW_j` when `¬x_i`
//! does, and absent otherwise. `W_unit` and `W_pos` share its support and are
//! never stored separately: each entry carries its sign and weight.

use crate::wcnf::{Assignment, WcnfFormula};

/// One stored entry of `W`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub var: usize,
    pub clause: usize,
    pub sign: i8,
    pub weight: u64,
}

impl Entry {
    /// Value of `W` at this position.
    pub fn value(&self) -> i64 {
        i64::from(self.sign) * self.weight as i64
    }
}

/// Which of the three incidence matrices to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Matrix {
    /// Signed weights, `W`.
    Weighted,
    /// Signs only, `W_unit`.
    Unit,
    /// Absolute weights, `W_pos`.
    Positive,
}

/// Dual-indexed incidence structure of a formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceMatrices {
    num_vars: usize,
    /// Entries grouped by clause, in clause-literal order.
    entries: Vec<Entry>,
    col_start: Vec<usize>,
    /// Indices into `entries`, grouped by variable and ascending by clause.
    row_index: Vec<usize>,
    row_start: Vec<usize>,
    /// `S_j = -|C_j|`.
    s: Vec<i64>,
    /// Clause weights.
    cw: Vec<u64>,
}

impl InstanceMatrices {
    pub fn build(formula: &WcnfFormula) -> Self {
        let n = formula.num_vars();
        let m = formula.num_clauses();
        let mut entries = Vec::with_capacity(formula.num_literals());
        let mut col_start = Vec::with_capacity(m + 1);
        let mut s = Vec::with_capacity(m);
        let mut cw = Vec::with_capacity(m);
        for (j, clause) in formula.clauses().iter().enumerate() {
            col_start.push(entries.len());
            for lit in clause.literals() {
                entries.push(Entry { var: lit.var_index(), clause: j, sign: lit.sign(), weight: clause.weight() });
            }
            s.push(-(clause.len() as i64));
            cw.push(clause.weight());
        }
        col_start.push(entries.len());

        let mut row_start = vec![0usize; n + 1];
        for e in &entries {
            row_start[e.var + 1] += 1;
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        let mut fill = row_start.clone();
        let mut row_index = vec![0usize; entries.len()];
        for (k, e) in entries.iter().enumerate() {
            row_index[fill[e.var]] = k;
            fill[e.var] += 1;
        }
        Self { num_vars: n, entries, col_start, row_index, row_start, s, cw }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.cw.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Stored entries of clause column `j`.
    pub fn column(&self, j: usize) -> &[Entry] {
        &self.entries[self.col_start[j]..self.col_start[j + 1]]
    }

    /// Stored entries of variable row `i`, ascending by clause.
    pub fn row(&self, i: usize) -> impl Iterator<Item = &Entry> + '_ {
        self.row_index[self.row_start[i]..self.row_start[i + 1]].iter().map(move |&k| &self.entries[k])
    }

    pub fn s(&self) -> &[i64] {
        &self.s
    }

    pub fn weights(&self) -> &[u64] {
        &self.cw
    }

    pub fn get(&self, which: Matrix, var: usize, clause: usize) -> i64 {
        self.column(clause)
            .iter()
            .find(|e| e.var == var)
            .map_or(0, |e| entry_value(e, which))
    }

    /// Dense row-major `n x m` copy, for tests and debugging.
    pub fn to_dense(&self, which: Matrix) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0; self.num_clauses()]; self.num_vars];
        for e in &self.entries {
            out[e.var][e.clause] = entry_value(e, which);
        }
        out
    }

    /// `v_j = Σ_i α_i M_ij`.
    pub fn row_times(&self, alpha: &Assignment, which: Matrix) -> Result<Vec<i64>, DimensionError> {
        if alpha.len() != self.num_vars {
            return Err(DimensionError { expected: self.num_vars, found: alpha.len() });
        }
        let signs = alpha.signs();
        Ok((0..self.num_clauses())
            .map(|j| self.column(j).iter().map(|e| i64::from(signs[e.var]) * entry_value(e, which)).sum())
            .collect())
    }

    /// Real-valued variant of [`row_times`](Self::row_times) over `W_unit`.
    pub fn row_times_unit_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.num_vars);
        (0..self.num_clauses())
            .map(|j| self.column(j).iter().map(|e| f64::from(e.sign) * x[e.var]).sum())
            .collect()
    }
}

fn entry_value(e: &Entry, which: Matrix) -> i64 {
    match which {
        Matrix::Weighted => e.value(),
        Matrix::Unit => i64::from(e.sign),
        Matrix::Positive => e.weight as i64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("vector has length {found}, expected {expected}")]
pub struct DimensionError {
    pub expected: usize,
    pub found: usize,
}

/// Per-segment maxima of a scattered value list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentMax {
    /// Row attaining the maximum; `None` for empty segments.
    pub max_pos: Vec<Option<usize>>,
    /// Maximum value; `0` for empty segments.
    pub max_val: Vec<i64>,
}

/// Maximum of `values` grouped by `segment_ids`, ties to the lowest row.
///
/// `rows[k]` is the position reported for `values[k]`.
pub fn segment_max(values: &[i64], rows: &[usize], segment_ids: &[usize], num_segments: usize) -> SegmentMax {
    assert_eq!(values.len(), segment_ids.len());
    assert_eq!(values.len(), rows.len());
    let mut max_pos: Vec<Option<usize>> = vec![None; num_segments];
    let mut max_val = vec![0i64; num_segments];
    for ((&v, &r), &s) in values.iter().zip(rows).zip(segment_ids) {
        let replace = match max_pos[s] {
            None => true,
            Some(p) => v > max_val[s] || (v == max_val[s] && r < p),
        };
        if replace {
            max_pos[s] = Some(r);
            max_val[s] = v;
        }
    }
    SegmentMax { max_pos, max_val }
}

/// `out[positions[k]] += values[k]` into a zeroed vector of length `len`.
pub fn segment_add(positions: &[usize], values: &[i64], len: usize) -> Vec<i64> {
    assert_eq!(positions.len(), values.len());
    let mut out = vec![0i64; len];
    for (&p, &v) in positions.iter().zip(values) {
        out[p] += v;
    }
    out
}
