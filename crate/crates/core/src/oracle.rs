//! Exact weighted MaxSAT by depth-first branch and bound, plus a plain
//! enumeration oracle for cross-checking on tiny instances.

use serde::{Deserialize, Serialize};

use crate::wcnf::{Assignment, WcnfFormula};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimal_cost: u64,
    pub optimal_assignment: Assignment,
    /// False when the node budget cut the search short.
    pub proven: bool,
    pub nodes_explored: u64,
}

struct Search<'a> {
    formula: &'a WcnfFormula,
    order: Vec<usize>,
    /// Per variable: `(clause, literal sign)` occurrences.
    occurrences: Vec<Vec<(usize, i8)>>,
    true_count: Vec<u32>,
    unassigned: Vec<u32>,
    falsified: u64,
    values: Vec<i8>,
    best_cost: u64,
    best: Vec<i8>,
    nodes: u64,
    budget: Option<u64>,
    aborted: bool,
}

impl Search<'_> {
    fn assign(&mut self, var: usize, value: i8) {
        self.values[var] = value;
        for &(j, sign) in &self.occurrences[var] {
            self.unassigned[j] -= 1;
            if sign == value {
                self.true_count[j] += 1;
            } else if self.true_count[j] == 0 && self.unassigned[j] == 0 {
                self.falsified += self.formula.clauses()[j].weight();
            }
        }
    }

    fn unassign(&mut self, var: usize) {
        let value = self.values[var];
        for &(j, sign) in &self.occurrences[var] {
            if sign == value {
                self.true_count[j] -= 1;
            } else if self.true_count[j] == 0 && self.unassigned[j] == 0 {
                self.falsified -= self.formula.clauses()[j].weight();
            }
            self.unassigned[j] += 1;
        }
        self.values[var] = 0;
    }

    /// Weight of still-open clauses a value would satisfy.
    fn preferred_value(&self, var: usize) -> i8 {
        let (mut pos, mut neg) = (0u64, 0u64);
        for &(j, sign) in &self.occurrences[var] {
            if self.true_count[j] == 0 {
                let w = self.formula.clauses()[j].weight();
                if sign > 0 {
                    pos += w;
                } else {
                    neg += w;
                }
            }
        }
        if pos >= neg {
            1
        } else {
            -1
        }
    }

    fn descend(&mut self, depth: usize) {
        self.nodes += 1;
        if self.budget.is_some_and(|b| self.nodes > b) {
            self.aborted = true;
            return;
        }
        if self.falsified >= self.best_cost {
            return;
        }
        if depth == self.order.len() {
            self.best_cost = self.falsified;
            self.best.clone_from(&self.values);
            return;
        }
        let var = self.order[depth];
        let first = self.preferred_value(var);
        for value in [first, -first] {
            self.assign(var, value);
            self.descend(depth + 1);
            self.unassign(var);
            if self.aborted {
                return;
            }
        }
    }
}

pub fn exact_solve(formula: &WcnfFormula) -> OracleResult {
    exact_solve_with_budget(formula, None)
}

/// Branch and bound over partial assignments, pruning on the weight of
/// clauses already falsified. Variables are branched in descending order of
/// total occurrence weight.
pub fn exact_solve_with_budget(formula: &WcnfFormula, node_budget: Option<u64>) -> OracleResult {
    let n = formula.num_vars();
    let mut occurrences = vec![Vec::new(); n];
    let mut activity = vec![0u64; n];
    let mut unassigned = Vec::with_capacity(formula.num_clauses());
    for (j, clause) in formula.clauses().iter().enumerate() {
        unassigned.push(clause.len() as u32);
        for lit in clause.literals() {
            occurrences[lit.var_index()].push((j, lit.sign()));
            activity[lit.var_index()] += clause.weight();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| activity[b].cmp(&activity[a]).then(a.cmp(&b)));

    let mut search = Search {
        formula,
        order,
        occurrences,
        true_count: vec![0; formula.num_clauses()],
        unassigned,
        falsified: 0,
        values: vec![0; n],
        best_cost: u64::MAX,
        best: vec![-1; n],
        nodes: 0,
        budget: node_budget,
        aborted: false,
    };
    // greedy incumbent so the first descent already prunes
    let greedy = greedy_assignment(&mut search);
    search.best_cost = formula.cost(&greedy).expect("length matches");
    search.best = greedy.signs().to_vec();
    search.descend(0);

    let assignment = Assignment::from_signs(search.best.clone());
    OracleResult {
        optimal_cost: search.best_cost,
        optimal_assignment: assignment,
        proven: !search.aborted,
        nodes_explored: search.nodes,
    }
}

fn greedy_assignment(search: &mut Search<'_>) -> Assignment {
    let order = search.order.clone();
    for &var in &order {
        let value = search.preferred_value(var);
        search.assign(var, value);
    }
    let values = search.values.clone();
    for &var in order.iter().rev() {
        search.unassign(var);
    }
    Assignment::from_signs(values)
}

/// Minimum cost over all `2^n` assignments; lowest bit pattern wins ties.
///
/// Panics for `n > 30`.
pub fn brute_force(formula: &WcnfFormula) -> (u64, Assignment) {
    let n = formula.num_vars();
    assert!(n <= 30, "enumeration limited to 30 variables");
    let mut best = (u64::MAX, 0u64);
    for bits in 0..(1u64 << n) {
        let cost = formula.cost(&Assignment::from_bits(bits, n)).expect("length matches");
        if cost < best.0 {
            best = (cost, bits);
        }
    }
    (best.0, Assignment::from_bits(best.1, n))
}
