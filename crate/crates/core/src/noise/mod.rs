//! Pauli decomposition of germ errors and the quasi-independence analysis.

mod expansion;
mod gadget;
mod pauli;
mod register;

use thiserror::Error;

use crate::circuit::CircuitError;
use crate::linalg::LinalgError;
use crate::sim::SimError;

pub use expansion::{
    bound_eps, bound_gadget, check_quasi_independence, check_thm3, delta_profile, delta_profile_with, germ_vector,
    locally_first, locally_first_in, multipauli_expand, multipauli_expand_with, DeltaProfile, EdgeDelta,
    ExpandOptions, ExpansionTerm, PauliExpansion, PauliPattern, QuasiReport, Thm3Report, Violation,
    DEFAULT_EDGE_CAP, DEFAULT_TERM_CAP,
};
pub use gadget::{gadget_pauli_pushthrough, gadget_sweep, insert_paulis, Pushthrough, SweepSummary, PAULI_MATCH_TOL};
pub use pauli::{error_seminorm, pauli_decompose, EdgeDecomposition, PauliBasis, PAULI_LABELS};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}")]
    BadShape(String),
    #[error("a germ cluster spans {edges} qubit edges, above the enumeration cap of {cap}")]
    CapExceeded { edges: usize, cap: usize },
    #[error("the expansion has more than {cap} nonzero terms")]
    TermsExceeded { cap: usize },
    #[error("{germs} germs of dimension {dim} exceed the budget of {budget} amplitudes")]
    BudgetExceeded { germs: usize, dim: usize, budget: usize },
    #[error("{0}")]
    Domain(String),
    #[error("pattern {pattern} is not equivalent to a single Pauli (residual {residual:.3e})")]
    NotPauli { pattern: String, residual: f64 },
}
