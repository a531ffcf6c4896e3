//! Seeded instance generators: uniform random k-SAT, power-law k-SAT and
//! pigeonhole formulas.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wcnf::{Clause, Literal, WcnfFormula};

pub const MAX_RANDOM_WEIGHT: u64 = 100;
pub const DEFAULT_BETA: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Uniform variable selection.
    Uf,
    /// Power-law variable selection.
    Pl,
    /// Pigeonhole principle.
    Php,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub weighted: bool,
    pub seed: u64,
    pub pigeons: usize,
    pub holes: usize,
    /// PHP only: make the at-most-one clauses hard.
    pub hard: bool,
}

impl GenSpec {
    pub fn uniform(k: usize, n: usize, m: usize, weighted: bool, seed: u64) -> Self {
        Self { family: Family::Uf, k, n, m, beta: DEFAULT_BETA, weighted, seed, pigeons: 0, holes: 0, hard: false }
    }

    pub fn power_law(k: usize, n: usize, m: usize, beta: f64, weighted: bool, seed: u64) -> Self {
        Self { family: Family::Pl, beta, ..Self::uniform(k, n, m, weighted, seed) }
    }

    pub fn pigeonhole(pigeons: usize, holes: usize) -> Self {
        Self { family: Family::Php, pigeons, holes, ..Self::uniform(0, 0, 0, false, 0) }
    }

    /// Benchmark-style name such as `WUF(3,20,80)` or `PHP(4,3)`.
    pub fn name(&self) -> String {
        let w = if self.weighted { "W" } else { "" };
        match self.family {
            Family::Uf => format!("{w}UF({},{},{})", self.k, self.n, self.m),
            Family::Pl => format!("{w}PL({},{},{})", self.k, self.n, self.m),
            Family::Php => format!("PHP({},{})", self.pigeons, self.holes),
        }
    }

    pub fn generate(&self) -> Result<WcnfFormula, GenError> {
        match self.family {
            Family::Uf => gen_uniform(self),
            Family::Pl => gen_powerlaw(self),
            Family::Php => gen_php(self.pigeons, self.holes, self.hard),
        }
    }

    /// Same spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GenError {
    #[error("clause length {k} exceeds variable count {n}")]
    ClauseTooLong { k: usize, n: usize },
    #[error("clause length must be positive")]
    ZeroClauseLength,
    #[error("power-law exponent must be non-negative and finite, got {0}")]
    Beta(f64),
    #[error("pigeonhole needs at least one pigeon and one hole")]
    EmptyPigeonhole,
    #[error("generator called with the wrong family")]
    WrongFamily,
}

fn check_random(spec: &GenSpec) -> Result<(), GenError> {
    if spec.k == 0 {
        return Err(GenError::ZeroClauseLength);
    }
    if spec.k > spec.n {
        return Err(GenError::ClauseTooLong { k: spec.k, n: spec.n });
    }
    Ok(())
}

fn weight<R: Rng>(rng: &mut R, weighted: bool) -> u64 {
    if weighted {
        rng.random_range(1..=MAX_RANDOM_WEIGHT)
    } else {
        1
    }
}

fn finish(n: usize, clauses: Vec<Clause>) -> WcnfFormula {
    WcnfFormula::new(n, clauses, None).expect("generated clauses are in range")
}

pub fn gen_uniform(spec: &GenSpec) -> Result<WcnfFormula, GenError> {
    if spec.family != Family::Uf {
        return Err(GenError::WrongFamily);
    }
    check_random(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clauses = (0..spec.m)
        .map(|_| {
            let vars = index::sample(&mut rng, spec.n, spec.k);
            let lits = vars.iter().map(|v| Literal::new(v as u32 + 1, rng.random_bool(0.5))).collect();
            let w = weight(&mut rng, spec.weighted);
            Clause::new(lits, w).expect("distinct variables")
        })
        .collect();
    Ok(finish(spec.n, clauses))
}

/// Draws 0-based variable indices with `P(i) ∝ (i + 1)^(-beta)`.
#[derive(Clone, Debug)]
pub struct PowerLawSampler {
    dist: WeightedIndex<f64>,
    weights: Vec<f64>,
}

impl PowerLawSampler {
    pub fn new(n: usize, beta: f64) -> Result<Self, GenError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(GenError::Beta(beta));
        }
        let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-beta)).collect();
        let dist = WeightedIndex::new(&weights).map_err(|_| GenError::ClauseTooLong { k: 1, n })?;
        Ok(Self { dist, weights })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }

    /// `k` distinct indices, each drawn from the distribution conditioned on
    /// not repeating an earlier pick.
    pub fn sample_distinct<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<usize> {
        let mut picked = Vec::with_capacity(k);
        while picked.len() < k {
            let mut attempts = 0;
            let v = loop {
                let v = self.sample(rng);
                if !picked.contains(&v) {
                    break Some(v);
                }
                attempts += 1;
                if attempts == 64 {
                    break None;
                }
            };
            let v = v.unwrap_or_else(|| self.sample_excluding(rng, &picked));
            picked.push(v);
        }
        picked
    }

    fn sample_excluding<R: Rng + ?Sized>(&self, rng: &mut R, excluded: &[usize]) -> usize {
        let total: f64 = self.weights.iter().enumerate().filter(|(i, _)| !excluded.contains(i)).map(|(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut last = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if excluded.contains(&i) {
                continue;
            }
            last = i;
            if target < *w {
                return i;
            }
            target -= w;
        }
        last
    }
}

pub fn gen_powerlaw(spec: &GenSpec) -> Result<WcnfFormula, GenError> {
    if spec.family != Family::Pl {
        return Err(GenError::WrongFamily);
    }
    check_random(spec)?;
    let sampler = PowerLawSampler::new(spec.n, spec.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clauses = (0..spec.m)
        .map(|_| {
            let vars = sampler.sample_distinct(&mut rng, spec.k);
            let lits = vars.into_iter().map(|v| Literal::new(v as u32 + 1, rng.random_bool(0.5))).collect();
            let w = weight(&mut rng, spec.weighted);
            Clause::new(lits, w).expect("distinct variables")
        })
        .collect();
    Ok(finish(spec.n, clauses))
}

/// 1-based variable of "pigeon `i` sits in hole `j`" (both 0-based).
pub fn php_var(holes: usize, pigeon: usize, hole: usize) -> u32 {
    (pigeon * holes + hole + 1) as u32
}

/// Pigeonhole formula: every pigeon in some hole, no two pigeons share one.
///
/// All clauses have weight 1 unless `hard`, in which case the at-most-one
/// clauses become hard with a threshold above the soft total.
pub fn gen_php(pigeons: usize, holes: usize, hard: bool) -> Result<WcnfFormula, GenError> {
    if pigeons == 0 || holes == 0 {
        return Err(GenError::EmptyPigeonhole);
    }
    let top = pigeons as u64 + 1;
    let mut clauses = Vec::with_capacity(pigeons + holes * pigeons * (pigeons - 1) / 2);
    for i in 0..pigeons {
        let lits = (0..holes).map(|j| Literal::positive(php_var(holes, i, j))).collect();
        clauses.push(Clause::new(lits, 1).expect("distinct holes"));
    }
    for j in 0..holes {
        for i in 0..pigeons {
            for i2 in i + 1..pigeons {
                let lits = vec![Literal::negative(php_var(holes, i, j)), Literal::negative(php_var(holes, i2, j))];
                clauses.push(Clause::new(lits, if hard { top } else { 1 }).expect("distinct pigeons"));
            }
        }
    }
    let formula = finish(pigeons * holes, clauses);
    Ok(if hard { formula.with_hard_threshold(Some(top)) } else { formula })
}
