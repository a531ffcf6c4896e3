//! Exact flip scores for every variable, recomputed from scratch.
//!
//! `score_v = Add_v - Del_v` where `Add_v` is the weight of falsified clauses
//! mentioning `v` and `Del_v` the weight of clauses `v` alone satisfies. It
//! equals the cost decrease obtained by flipping `v`.

use crate::sparse::{segment_add, segment_max, DimensionError, InstanceMatrices, Matrix};
use crate::wcnf::Assignment;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreReport {
    /// Clause has no true literal.
    pub unsat: Vec<bool>,
    /// Clause has exactly one true literal.
    pub one_true: Vec<bool>,
    pub add: Vec<i64>,
    pub del: Vec<i64>,
    pub score: Vec<i64>,
    /// True-literal count per clause.
    pub true_count: Vec<u32>,
}

impl ScoreReport {
    pub fn unsat_clauses(&self) -> impl Iterator<Item = usize> + '_ {
        self.unsat.iter().enumerate().filter(|(_, &u)| u).map(|(j, _)| j)
    }

    pub fn num_unsat(&self) -> usize {
        self.unsat.iter().filter(|&&u| u).count()
    }
}

/// How `Del` is accumulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DelPath {
    /// Credit the unique true literal of each singly-satisfied clause.
    #[default]
    Direct,
    /// Segment-max over `W ∘ α` of singly-satisfied columns, then scatter-add.
    SegmentMax,
}

pub fn compute_scores(alpha: &Assignment, mats: &InstanceMatrices) -> Result<ScoreReport, DimensionError> {
    compute_scores_with(alpha, mats, DelPath::Direct)
}

pub fn compute_scores_with(
    alpha: &Assignment,
    mats: &InstanceMatrices,
    path: DelPath,
) -> Result<ScoreReport, DimensionError> {
    let n = mats.num_vars();
    let m = mats.num_clauses();
    let signs = alpha.signs();
    // 2 t_j - |C_j|
    let balance = mats.row_times(alpha, Matrix::Unit)?;
    let s = mats.s();
    let unsat: Vec<bool> = (0..m).map(|j| balance[j] == s[j]).collect();
    let one_true: Vec<bool> = (0..m).map(|j| balance[j] == s[j] + 2).collect();
    let true_count: Vec<u32> = (0..m).map(|j| ((balance[j] - s[j]) / 2) as u32).collect();

    let mut add = vec![0i64; n];
    for j in (0..m).filter(|&j| unsat[j]) {
        for e in mats.column(j) {
            add[e.var] += e.weight as i64;
        }
    }

    let del = match path {
        DelPath::Direct => {
            let mut del = vec![0i64; n];
            for j in (0..m).filter(|&j| one_true[j]) {
                let sole = mats
                    .column(j)
                    .iter()
                    .find(|e| e.sign == signs[e.var])
                    .expect("clause with one true literal");
                del[sole.var] += sole.weight as i64;
            }
            del
        }
        DelPath::SegmentMax => {
            let mut values = Vec::new();
            let mut rows = Vec::new();
            let mut ids = Vec::new();
            for j in (0..m).filter(|&j| one_true[j]) {
                for e in mats.column(j) {
                    values.push(e.value() * i64::from(signs[e.var]));
                    rows.push(e.var);
                    ids.push(j);
                }
            }
            let maxima = segment_max(&values, &rows, &ids, m);
            let (pos, val): (Vec<usize>, Vec<i64>) = maxima
                .max_pos
                .iter()
                .zip(&maxima.max_val)
                .filter_map(|(p, &v)| p.map(|p| (p, v)))
                .unzip();
            segment_add(&pos, &val, n)
        }
    };

    let score = add.iter().zip(&del).map(|(a, d)| a - d).collect();
    Ok(ScoreReport { unsat, one_true, add, del, score, true_count })
}

/// `Σ_j U_j · CW_j`.
pub fn cost_from_report(report: &ScoreReport, mats: &InstanceMatrices) -> u64 {
    report.unsat_clauses().map(|j| mats.weights()[j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wcnf::WcnfFormula;

    fn two_var() -> (WcnfFormula, InstanceMatrices) {
        let f = WcnfFormula::from_weighted(2, &[(3, &[-1]), (4, &[-2]), (5, &[1, 2])]).unwrap();
        let mats = InstanceMatrices::build(&f);
        (f, mats)
    }

    #[test]
    fn two_var_report() {
        let (_, mats) = two_var();
        let alpha = Assignment::from_signs(vec![-1, 1]);
        for path in [DelPath::Direct, DelPath::SegmentMax] {
            let r = compute_scores_with(&alpha, &mats, path).unwrap();
            assert_eq!(r.unsat, vec![false, true, false]);
            assert_eq!(r.one_true, vec![true, false, true]);
            assert_eq!(r.add, vec![0, 4]);
            assert_eq!(r.del, vec![3, 5]);
            assert_eq!(r.score, vec![-3, -1]);
            assert_eq!(r.true_count, vec![1, 0, 1]);
            assert_eq!(cost_from_report(&r, &mats), 4);
        }
    }

    #[test]
    fn doubly_satisfied_clause_scores_zero() {
        let f = WcnfFormula::from_weighted(2, &[(5, &[1, 2])]).unwrap();
        let mats = InstanceMatrices::build(&f);
        let r = compute_scores(&Assignment::from_signs(vec![1, 1]), &mats).unwrap();
        assert_eq!(r.add, vec![0, 0]);
        assert_eq!(r.del, vec![0, 0]);
        assert_eq!(r.score, vec![0, 0]);
        assert_eq!(cost_from_report(&r, &mats), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let (_, mats) = two_var();
        assert!(compute_scores(&Assignment::all_false(3), &mats).is_err());
    }
}
