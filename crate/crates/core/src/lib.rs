//! Weighted MaxSAT toolkit built around edge-splitting factor graphs.
//!
//! - [`wcnf`]: instances, DIMACS I/O and cost evaluation
//! - [`graph`]: factor graphs, BFS spanning forests and the four edge classes
//! - [`sparse`]: incidence matrices and segment reductions
//! - [`score`]: exact flip scores
//! - [`usb`]: the solution-boosting local search over a relaxed vector
//! - [`generate`], [`oracle`], [`metrics`], [`dataset`]: instances, exact
//!   optima, evaluation and on-disk datasets

pub mod dataset;
pub mod generate;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod score;
pub mod sparse;
pub mod usb;
pub mod wcnf;

pub use wcnf::{Assignment, Clause, Literal, WcnfFormula};
