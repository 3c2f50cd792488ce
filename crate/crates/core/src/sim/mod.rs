//! Exact simulation of pure and germ-infected mixed circuits.

mod engine;
mod germs;
mod tomography;

use thiserror::Error;

use crate::circuit::CircuitError;
use crate::linalg::{LinalgError, SpaceShape, StateVec, C64};

pub use engine::{bit_string, run_pure, Branch, Mode, RunResult, SimInput, SimOptions, DEFAULT_BUDGET};
pub use germs::{
    germ_superposition, infect, parse_germ_model, pauli_rotation, Axis, BuiltinGermFamily, GermModel,
    InfectedCircuit, Site,
};
pub use tomography::{tomography, tomography_infected, ProcessMatrix, TomographyOptions};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("classical outcome {0:?} has zero probability")]
    ZeroProbability(String),
    #[error("live state needs {needed} amplitudes, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("tomography of {qubits} qubits exceeds the limit of {max}")]
    SizeGuard { qubits: usize, max: usize },
    #[error("germ model: {0}")]
    Model(String),
}

pub fn run_infected(ic: &InfectedCircuit, input: &SimInput, opts: &SimOptions) -> Result<RunResult, SimError> {
    engine::run(ic.base(), Some(ic.model()), input, opts)
}

/// The six single-qubit fiducial states by name: `0`, `1`, `+`, `-`, `+i`,
/// `-i`.
pub fn fiducial(name: &str) -> Option<StateVec> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match name {
        "0" => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        "1" => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        "+" => [C64::new(r, 0.0), C64::new(r, 0.0)],
        "-" => [C64::new(r, 0.0), C64::new(-r, 0.0)],
        "+i" => [C64::new(r, 0.0), C64::new(0.0, r)],
        "-i" => [C64::new(r, 0.0), C64::new(0.0, -r)],
        _ => return None,
    };
    Some(StateVec::new(SpaceShape::qubits(1), amps.to_vec()).expect("finite"))
}

pub const FIDUCIALS: [&str; 6] = ["0", "1", "+", "-", "+i", "-i"];

/// Parses an input description: a bit string (`"0110"`), or fiducial names
/// separated by commas (`"+,-i,0"`), one per input qubit.
pub fn parse_input_state(spec: &str) -> Option<StateVec> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Some(StateVec::scalar(C64::new(1.0, 0.0)));
    }
    if !spec.contains(',') && spec.chars().all(|c| c == '0' || c == '1') {
        let bits: Vec<bool> = spec.chars().map(|c| c == '1').collect();
        return Some(StateVec::from_bits(&bits));
    }
    let mut out = StateVec::scalar(C64::new(1.0, 0.0));
    for part in spec.split(',') {
        out = out.tensor(&fiducial(part.trim())?);
    }
    Some(out)
}
