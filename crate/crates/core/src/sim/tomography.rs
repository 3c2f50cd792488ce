//! Process tomography through a maximally entangled reference.
//!
//! Feeding `|Φ⟩ = Σᵢ|i⟩|i⟩/√n` (circuit inputs ⊗ reference) through the
//! circuit and averaging over classical outcomes yields `J/n`, where
//! `J = Σᵢⱼ E(|i⟩⟨j|) ⊗ |i⟩⟨j|` is the Choi matrix. By linearity this is the
//! same as propagating every element of an operator basis.

use nalgebra::DMatrix;

use super::engine::{run, SimInput, SimOptions, DEFAULT_BUDGET};
use super::germs::{GermModel, InfectedCircuit};
use super::SimError;
use crate::circuit::{EdgeKind, MixedCircuit, Topology};
use crate::linalg::{hermitian_eigenvalues, max_abs_diff, DensityOp, SpaceShape, StateVec, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TomographyOptions {
    /// Largest number of logical input or output qubits accepted.
    pub max_qubits: usize,
    pub budget: usize,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        Self {
            max_qubits: 3,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// A channel from `in_qubits` to `out_qubits` qubits.
#[derive(Debug, Clone)]
pub struct ProcessMatrix {
    in_qubits: usize,
    out_qubits: usize,
    /// Rows and columns indexed `a·n + i`: output index `a`, input index `i`.
    choi: DMatrix<C64>,
    /// Column-stacked: `vec(E(ρ)) = S·vec(ρ)` with `vec(ρ)[c·d + r] = ρ[r, c]`.
    superop: DMatrix<C64>,
}

impl ProcessMatrix {
    pub fn from_choi(in_qubits: usize, out_qubits: usize, choi: DMatrix<C64>) -> Self {
        let n = 1usize << in_qubits;
        let m = 1usize << out_qubits;
        assert_eq!(choi.nrows(), n * m);
        let superop = DMatrix::from_fn(m * m, n * n, |row, col| {
            let (b, a) = (row / m, row % m);
            let (j, i) = (col / n, col % n);
            choi[(a * n + i, b * n + j)]
        });
        Self {
            in_qubits,
            out_qubits,
            choi,
            superop,
        }
    }

    pub fn identity(qubits: usize) -> Self {
        let n = 1usize << qubits;
        let choi = DMatrix::from_fn(n * n, n * n, |r, c| {
            let (a, i) = (r / n, r % n);
            let (b, j) = (c / n, c % n);
            if a == i && b == j {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        Self::from_choi(qubits, qubits, choi)
    }

    pub fn in_qubits(&self) -> usize {
        self.in_qubits
    }

    pub fn out_qubits(&self) -> usize {
        self.out_qubits
    }

    pub fn choi(&self) -> &DMatrix<C64> {
        &self.choi
    }

    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superop
    }

    /// `max |Tr_out J − I|`.
    pub fn trace_defect(&self) -> f64 {
        let n = 1usize << self.in_qubits;
        let m = 1usize << self.out_qubits;
        let reduced = DMatrix::from_fn(n, n, |i, j| (0..m).map(|a| self.choi[(a * n + i, a * n + j)]).sum());
        max_abs_diff(&reduced, &DMatrix::identity(n, n))
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.choi).first().copied().unwrap_or(0.0)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_defect() <= tol
    }

    pub fn is_completely_positive(&self, floor: f64) -> bool {
        self.min_choi_eigenvalue() >= -floor
    }

    pub fn apply(&self, rho: &DensityOp) -> Result<DensityOp, SimError> {
        let n = 1usize << self.in_qubits;
        let m = 1usize << self.out_qubits;
        if rho.dim() != n {
            return Err(SimError::DimensionMismatch {
                what: "channel input",
                expected: n,
                got: rho.dim(),
            });
        }
        let v = DMatrix::from_fn(n * n, 1, |k, _| rho.matrix()[(k % n, k / n)]);
        let out = &self.superop * v;
        let mat = DMatrix::from_fn(m, m, |r, c| out[(c * m + r, 0)]);
        Ok(DensityOp::new(SpaceShape::qubits(self.out_qubits), mat)?)
    }

    /// Largest entrywise difference of the superoperators.
    pub fn distance(&self, other: &ProcessMatrix) -> f64 {
        if self.superop.shape() != other.superop.shape() {
            return f64::INFINITY;
        }
        max_abs_diff(&self.superop, &other.superop)
    }
}

fn logical_qubits(c: &MixedCircuit) -> Result<(usize, usize, usize), SimError> {
    let topo = Topology::new(c)?;
    let count = |edges: Vec<crate::circuit::EdgeId>, kind| edges.into_iter().filter(|&e| c.edge(e).kind == kind).count();
    Ok((
        count(topo.boundary_inputs(c), EdgeKind::Qubit),
        count(topo.boundary_outputs(c), EdgeKind::Qubit),
        count(topo.boundary_inputs(c), EdgeKind::Bit),
    ))
}

fn tomography_with(c: &MixedCircuit, model: Option<&GermModel>, opts: &TomographyOptions) -> Result<ProcessMatrix, SimError> {
    let (nin, nout, nbits) = logical_qubits(c)?;
    let widest = nin.max(nout);
    if widest > opts.max_qubits {
        return Err(SimError::SizeGuard {
            qubits: widest,
            max: opts.max_qubits,
        });
    }
    let n = 1usize << nin;
    let shape = SpaceShape::qubits(2 * nin);
    let mut amps = vec![ZERO; n * n];
    for i in 0..n {
        amps[i * n + i] = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    }
    let phi = StateVec::new(shape, amps)?;
    let input = SimInput::with_reference(phi, nin).with_bits(vec![false; nbits]);
    let sim = SimOptions {
        budget: opts.budget,
        ..SimOptions::default()
    };
    let result = run(c, model, &input, &sim)?;
    let choi = result.averaged_state().matrix() * C64::new(n as f64, 0.0);
    Ok(ProcessMatrix::from_choi(nin, nout, choi))
}

/// The channel computed by `c` on its qubit boundary, with classical
/// outputs discarded and classical inputs set to 0.
pub fn tomography(c: &MixedCircuit, opts: &TomographyOptions) -> Result<ProcessMatrix, SimError> {
    tomography_with(c, None, opts)
}

/// The logical channel of an infected circuit (germs traced out).
pub fn tomography_infected(ic: &InfectedCircuit, opts: &TomographyOptions) -> Result<ProcessMatrix, SimError> {
    tomography_with(ic.base(), Some(ic.model()), opts)
}
