//! Weighted CNF instances, DIMACS interchange and cost evaluation.
//!
//! Both plain CNF (`p cnf n m`, every clause weight 1) and classic WCNF
//! (`p wcnf n m [top]`) are accepted. Clauses whose weight reaches `top` are
//! hard. Assignments use the `{-1, +1}` encoding throughout the crate.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A literal over a 1-based variable index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: u32,
    negated: bool,
}

impl Literal {
    /// Creates a literal. `var` is 1-based and must be non-zero.
    pub fn new(var: u32, negated: bool) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Self { var, negated }
    }

    pub fn positive(var: u32) -> Self {
        Self::new(var, false)
    }

    pub fn negative(var: u32) -> Self {
        Self::new(var, true)
    }

    /// Parses a signed DIMACS integer such as `-3`.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        let var = u32::try_from(value.unsigned_abs()).ok()?;
        Some(Self::new(var, value < 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -i64::from(self.var)
        } else {
            i64::from(self.var)
        }
    }

    /// 1-based variable index.
    pub fn var(self) -> u32 {
        self.var
    }

    /// 0-based variable index.
    pub fn var_index(self) -> usize {
        self.var as usize - 1
    }

    pub fn is_negated(self) -> bool {
        self.negated
    }

    /// `+1` for a positive literal, `-1` for a negated one.
    pub fn sign(self) -> i8 {
        if self.negated {
            -1
        } else {
            1
        }
    }

    pub fn negate(self) -> Self {
        Self { var: self.var, negated: !self.negated }
    }

    /// Whether the literal evaluates to true under `assignment`.
    pub fn is_true(self, assignment: &Assignment) -> bool {
        assignment.values[self.var_index()] == self.sign()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A weighted disjunction of literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
    weight: u64,
}

impl Clause {
    pub fn new(literals: Vec<Literal>, weight: u64) -> Result<Self, FormulaError> {
        if literals.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        if weight == 0 {
            return Err(FormulaError::ZeroWeight);
        }
        for (i, lit) in literals.iter().enumerate() {
            if literals[..i].iter().any(|other| other.var == lit.var) {
                return Err(FormulaError::DuplicateVariable(lit.var));
            }
        }
        Ok(Self { literals, weight })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        self.literals.iter().any(|lit| lit.is_true(assignment))
    }

    /// Number of literals made true by `assignment`.
    pub fn true_literals(&self, assignment: &Assignment) -> usize {
        self.literals.iter().filter(|lit| lit.is_true(assignment)).count()
    }
}

/// Violations of the formula invariants.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("clause has no literals")]
    EmptyClause,
    #[error("clause weight must be positive")]
    ZeroWeight,
    #[error("variable {0} appears more than once in a clause")]
    DuplicateVariable(u32),
    #[error("literal over variable {var} exceeds the declared {num_vars} variables")]
    VariableOutOfRange { var: u32, num_vars: usize },
    #[error("assignment has {found} values, formula has {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
}

/// DIMACS parse failure, tagged with the 1-based line it occurred on.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("clause data before the `p` line")]
    MissingHeader,
    #[error("invalid integer `{0}`")]
    Token(String),
    #[error("literal {literal} exceeds the declared {num_vars} variables")]
    LiteralOutOfRange { literal: i64, num_vars: usize },
    #[error("clause weight must be positive, got {0}")]
    Weight(i64),
    #[error("variable {0} appears more than once in a clause")]
    DuplicateVariable(u32),
    #[error("empty clause")]
    EmptyClause,
    #[error("last clause is not terminated by 0")]
    Unterminated,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCount { declared: usize, found: usize },
    #[error("input is not valid UTF-8")]
    Encoding,
}

/// A weighted MaxSAT instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WcnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
    hard_threshold: Option<u64>,
}

impl WcnfFormula {
    pub fn new(
        num_vars: usize,
        clauses: Vec<Clause>,
        hard_threshold: Option<u64>,
    ) -> Result<Self, FormulaError> {
        for clause in &clauses {
            if let Some(lit) = clause.literals.iter().find(|l| l.var as usize > num_vars) {
                return Err(FormulaError::VariableOutOfRange { var: lit.var, num_vars });
            }
        }
        Ok(Self { num_vars, clauses, hard_threshold })
    }

    /// Builds a formula from `(weight, dimacs literals)` pairs.
    pub fn from_weighted(
        num_vars: usize,
        clauses: &[(u64, &[i64])],
    ) -> Result<Self, FormulaError> {
        let clauses = clauses
            .iter()
            .map(|(weight, lits)| {
                let lits = lits
                    .iter()
                    .map(|&v| Literal::from_dimacs(v).ok_or(FormulaError::EmptyClause))
                    .collect::<Result<Vec<_>, _>>()?;
                Clause::new(lits, *weight)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(num_vars, clauses, None)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn hard_threshold(&self) -> Option<u64> {
        self.hard_threshold
    }

    pub fn with_hard_threshold(mut self, top: Option<u64>) -> Self {
        self.hard_threshold = top;
        self
    }

    pub fn is_hard(&self, clause: &Clause) -> bool {
        self.hard_threshold.is_some_and(|top| clause.weight >= top)
    }

    pub fn total_weight(&self) -> u64 {
        self.clauses.iter().map(|c| c.weight).sum()
    }

    /// Total number of literal occurrences.
    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    fn check_len(&self, assignment: &Assignment) -> Result<(), FormulaError> {
        if assignment.len() != self.num_vars {
            return Err(FormulaError::LengthMismatch {
                expected: self.num_vars,
                found: assignment.len(),
            });
        }
        Ok(())
    }

    /// Sum of the weights of clauses falsified by `assignment`.
    pub fn cost(&self, assignment: &Assignment) -> Result<u64, FormulaError> {
        self.check_len(assignment)?;
        Ok(self
            .clauses
            .iter()
            .filter(|c| !c.is_satisfied(assignment))
            .map(|c| c.weight)
            .sum())
    }

    /// True iff every hard clause is satisfied. Vacuous without a threshold.
    ///
    /// Panics if the assignment length differs from `num_vars`.
    pub fn is_feasible(&self, assignment: &Assignment) -> bool {
        assert_eq!(assignment.len(), self.num_vars, "assignment length mismatch");
        let Some(top) = self.hard_threshold else {
            return true;
        };
        self.clauses
            .iter()
            .filter(|c| c.weight >= top)
            .all(|c| c.is_satisfied(assignment))
    }

    /// Parses DIMACS CNF or classic WCNF text.
    pub fn parse_dimacs(input: &[u8]) -> Result<Self, ParseError> {
        let text = std::str::from_utf8(input)
            .map_err(|_| ParseError { line: 0, kind: ParseErrorKind::Encoding })?;
        parse_text(text)
    }

    /// Canonical WCNF rendering: one clause per line, weight first.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "p wcnf {} {}", self.num_vars, self.clauses.len());
        if let Some(top) = self.hard_threshold {
            let _ = write!(out, " {top}");
        }
        out.push('\n');
        for clause in &self.clauses {
            let _ = write!(out, "{}", clause.weight);
            for lit in &clause.literals {
                let _ = write!(out, " {lit}");
            }
            out.push_str(" 0\n");
        }
        out
    }

    pub fn write_dimacs<W: std::io::Write>(&self, mut writer: W) -> std::io::Result<()> {
        writer.write_all(self.to_dimacs().as_bytes())
    }
}

struct Header {
    weighted: bool,
    num_vars: usize,
    num_clauses: usize,
    top: Option<u64>,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header, ParseError> {
    let err = |msg: &str| ParseError { line: lineno, kind: ParseErrorKind::Header(msg.to_owned()) };
    let fields: Vec<&str> = line.split_whitespace().collect();
    let weighted = match fields.get(1) {
        Some(&"cnf") => false,
        Some(&"wcnf") => true,
        _ => return Err(err("expected `p cnf` or `p wcnf`")),
    };
    let expected = if weighted { 4..=5 } else { 4..=4 };
    if !expected.contains(&fields.len()) {
        return Err(err("wrong number of fields"));
    }
    let num_vars = fields[2].parse().map_err(|_| err("bad variable count"))?;
    let num_clauses = fields[3].parse().map_err(|_| err("bad clause count"))?;
    let top = match fields.get(4) {
        Some(t) => Some(t.parse::<u64>().map_err(|_| err("bad top weight"))?),
        None => None,
    };
    if top == Some(0) {
        return Err(err("top weight must be positive"));
    }
    Ok(Header { weighted, num_vars, num_clauses, top })
}

fn parse_text(text: &str) -> Result<WcnfFormula, ParseError> {
    let mut header: Option<Header> = None;
    let mut clauses = Vec::new();
    let mut weight: Option<u64> = None;
    let mut pending: Vec<Literal> = Vec::new();
    let mut last_line = 0;

    'lines: for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            // SATLIB end marker
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError {
                    line: lineno,
                    kind: ParseErrorKind::Header("duplicate problem line".into()),
                });
            }
            header = Some(parse_header(line, lineno)?);
            continue;
        }
        let Some(h) = header.as_ref() else {
            return Err(ParseError { line: lineno, kind: ParseErrorKind::MissingHeader });
        };
        for token in line.split_whitespace() {
            if token.starts_with('%') {
                break 'lines;
            }
            let value: i64 = token.parse().map_err(|_| ParseError {
                line: lineno,
                kind: ParseErrorKind::Token(token.to_owned()),
            })?;
            let fail = |kind| ParseError { line: lineno, kind };
            if h.weighted && weight.is_none() {
                if value <= 0 {
                    return Err(fail(ParseErrorKind::Weight(value)));
                }
                weight = Some(value as u64);
                continue;
            }
            if value == 0 {
                if pending.is_empty() {
                    return Err(fail(ParseErrorKind::EmptyClause));
                }
                let lits = std::mem::take(&mut pending);
                let w = weight.take().unwrap_or(1);
                clauses.push(Clause { literals: lits, weight: w });
                continue;
            }
            if value.unsigned_abs() as usize > h.num_vars {
                return Err(fail(ParseErrorKind::LiteralOutOfRange {
                    literal: value,
                    num_vars: h.num_vars,
                }));
            }
            let lit = Literal::from_dimacs(value).expect("non-zero literal");
            if pending.iter().any(|l| l.var == lit.var) {
                return Err(fail(ParseErrorKind::DuplicateVariable(lit.var)));
            }
            pending.push(lit);
        }
    }

    let Some(h) = header else {
        return Err(ParseError { line: last_line, kind: ParseErrorKind::MissingHeader });
    };
    if !pending.is_empty() || weight.is_some() {
        return Err(ParseError { line: last_line, kind: ParseErrorKind::Unterminated });
    }
    if clauses.len() != h.num_clauses {
        return Err(ParseError {
            line: last_line,
            kind: ParseErrorKind::ClauseCount { declared: h.num_clauses, found: clauses.len() },
        });
    }
    Ok(WcnfFormula { num_vars: h.num_vars, clauses, hard_threshold: h.top })
}

/// A complete assignment in `{-1, +1}` encoding (`-1` false, `+1` true).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<i8>,
}

impl Assignment {
    /// Panics if any entry is outside `{-1, +1}`.
    pub fn from_signs(values: Vec<i8>) -> Self {
        assert!(values.iter().all(|&v| v == 1 || v == -1), "entries must be -1 or +1");
        Self { values }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Self { values: values.iter().map(|&b| if b { 1 } else { -1 }).collect() }
    }

    pub fn all_false(n: usize) -> Self {
        Self { values: vec![-1; n] }
    }

    /// Sign of each real value; zero maps to false.
    pub fn from_reals(x: &[f64]) -> Self {
        Self { values: x.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect() }
    }

    /// Decodes the low `n` bits of `bits`, bit `i` giving variable `i + 1`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        Self { values: (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect() }
    }

    pub fn signs(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Truth value of the variable at 0-based `index`.
    pub fn value(&self, index: usize) -> bool {
        self.values[index] > 0
    }

    pub fn flip(&mut self, index: usize) {
        self.values[index] = -self.values[index];
    }

    pub fn flipped(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.flip(index);
        out
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0).collect()
    }
}
