//! Weighted classes of marked sets and the cover submeasure
//! `phi_C(B) = inf { w(F) : B ⊆ ∪F }` over an explicit finite class.

mod axioms;
mod class;
mod solver;
mod weight;

pub use axioms::{
    dominance_prune, phi_capped, submeasure_axiom_check, AxiomKind, AxiomReport, AxiomViolation, CappedOracle,
    CoverOracle, FnOracle, OracleError, Submeasure,
};
pub use class::{ClassError, MarkedWeightedSet, Origin, WeightedClass};
pub use solver::{phi_eval, phi_eval_with, solve_sets, CoverError, CoverResult, SolveOptions, DEFAULT_BUDGET};
pub use weight::{DyadicWeight, SubValue, WeightError, FRAC_BITS};
