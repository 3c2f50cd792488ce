use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::linalg::{DenseOperator, SpaceShape, C64, I, ONE, ZERO};

/// Named gates understood by the circuit file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    I,
    X,
    Y,
    Z,
    H,
    S,
    T,
    /// Control on port 0, target on port 1.
    Cnot,
    Cz,
    /// Controls on ports 0 and 1, target on port 2.
    Toffoli,
    /// The Bell-basis rotation used by the teleportation gadget.
    UTele,
    UTeleInv,
}

impl Builtin {
    pub const ALL: [Builtin; 12] = [
        Builtin::I,
        Builtin::X,
        Builtin::Y,
        Builtin::Z,
        Builtin::H,
        Builtin::S,
        Builtin::T,
        Builtin::Cnot,
        Builtin::Cz,
        Builtin::Toffoli,
        Builtin::UTele,
        Builtin::UTeleInv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::I => "I",
            Builtin::X => "X",
            Builtin::Y => "Y",
            Builtin::Z => "Z",
            Builtin::H => "H",
            Builtin::S => "S",
            Builtin::T => "T",
            Builtin::Cnot => "CNOT",
            Builtin::Cz => "CZ",
            Builtin::Toffoli => "TOFFOLI",
            Builtin::UTele => "U_TELE",
            Builtin::UTeleInv => "U_TELE_INV",
        }
    }

    pub fn qubits(self) -> usize {
        match self {
            Builtin::I | Builtin::X | Builtin::Y | Builtin::Z | Builtin::H | Builtin::S | Builtin::T => 1,
            Builtin::Cnot | Builtin::Cz | Builtin::UTele | Builtin::UTeleInv => 2,
            Builtin::Toffoli => 3,
        }
    }

    pub fn operator(self) -> DenseOperator {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let q1 = SpaceShape::qubits(1);
        match self {
            Builtin::I => DenseOperator::identity(q1),
            Builtin::X => pauli_x(),
            Builtin::Y => pauli_y(),
            Builtin::Z => pauli_z(),
            Builtin::H => DenseOperator::real(q1, r, &[1.0, 1.0, 1.0, -1.0]),
            Builtin::S => diag(q1, &[ONE, I]),
            Builtin::T => diag(q1, &[ONE, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            Builtin::Cnot => permutation(2, |x| if x & 0b10 != 0 { x ^ 0b01 } else { x }),
            Builtin::Cz => diag(SpaceShape::qubits(2), &[ONE, ONE, ONE, -ONE]),
            Builtin::Toffoli => permutation(3, |x| if x & 0b110 == 0b110 { x ^ 0b001 } else { x }),
            Builtin::UTele => u_tele(),
            Builtin::UTeleInv => u_tele().adjoint(),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown gate name {s:?}"))
    }
}

pub fn pauli_x() -> DenseOperator {
    DenseOperator::real(SpaceShape::qubits(1), 1.0, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> DenseOperator {
    DenseOperator::from_rows(SpaceShape::qubits(1), &[vec![ZERO, -I], vec![I, ZERO]]).expect("2x2")
}

pub fn pauli_z() -> DenseOperator {
    DenseOperator::real(SpaceShape::qubits(1), 1.0, &[1.0, 0.0, 0.0, -1.0])
}

fn diag(shape: SpaceShape, d: &[C64]) -> DenseOperator {
    let rows: Vec<Vec<C64>> = (0..d.len())
        .map(|r| (0..d.len()).map(|c| if r == c { d[r] } else { ZERO }).collect())
        .collect();
    DenseOperator::from_rows(shape, &rows).expect("square")
}

fn permutation(qubits: usize, f: impl Fn(usize) -> usize) -> DenseOperator {
    let n = 1 << qubits;
    let mut entries = vec![0.0; n * n];
    for x in 0..n {
        entries[f(x) * n + x] = 1.0;
    }
    DenseOperator::real(SpaceShape::qubits(qubits), 1.0, &entries)
}

/// The two-qubit gate `U` of the teleportation gadget:
/// `|00⟩ ↦ (|00⟩+|01⟩)/√2`, `|01⟩ ↦ (|10⟩−|11⟩)/√2`,
/// `|10⟩ ↦ (|10⟩+|11⟩)/√2`, `|11⟩ ↦ (|00⟩−|01⟩)/√2`.
///
/// Equivalently `|x,y⟩ ↦ |x⊕y, y⟩` followed by a Hadamard on the second qubit.
pub fn u_tele() -> DenseOperator {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // Columns are the images of |00⟩, |01⟩, |10⟩, |11⟩.
    #[rustfmt::skip]
    let entries = [
        1.0,  0.0, 0.0,  1.0,
        1.0,  0.0, 0.0, -1.0,
        0.0,  1.0, 1.0,  0.0,
        0.0, -1.0, 1.0,  0.0,
    ];
    DenseOperator::real(SpaceShape::qubits(2), r, &entries)
}

/// A unitary gate matrix, optionally tagged with its builtin name.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    builtin: Option<Builtin>,
    op: Arc<DenseOperator>,
}

impl UnitaryGate {
    pub fn builtin(b: Builtin) -> Self {
        Self {
            builtin: Some(b),
            op: Arc::new(b.operator()),
        }
    }

    /// A custom matrix; its dimension must be a power of two (checked by
    /// circuit validation, along with unitarity).
    pub fn custom(op: DenseOperator) -> Self {
        Self {
            builtin: None,
            op: Arc::new(op),
        }
    }

    pub fn name(&self) -> Option<Builtin> {
        self.builtin
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.op
    }

    pub fn shared(&self) -> Arc<DenseOperator> {
        Arc::clone(&self.op)
    }

    /// Number of qubits, or `None` when the dimension is not a power of two.
    pub fn qubits(&self) -> Option<usize> {
        let d = self.op.dim();
        (d.is_power_of_two()).then(|| d.trailing_zeros() as usize)
    }
}

impl From<Builtin> for UnitaryGate {
    fn from(b: Builtin) -> Self {
        UnitaryGate::builtin(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::StateVec;

    #[test]
    fn builtins_are_unitary_with_declared_arity() {
        for b in Builtin::ALL {
            let op = b.operator();
            assert!(op.is_unitary(1e-12), "{b}");
            assert_eq!(op.dim(), 1 << b.qubits(), "{b}");
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
        }
    }

    #[test]
    fn u_tele_action_on_basis() {
        let u = u_tele();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [
            [r, r, 0.0, 0.0],
            [0.0, 0.0, r, -r],
            [0.0, 0.0, r, r],
            [r, -r, 0.0, 0.0],
        ];
        for (input, amps) in expect.iter().enumerate() {
            let out = u.apply_vec(&StateVec::basis(SpaceShape::qubits(2), input)).unwrap();
            for (k, &a) in amps.iter().enumerate() {
                assert!((out.amps()[k] - C64::new(a, 0.0)).norm() < 1e-15, "U|{input:02b}>");
            }
        }
    }

    #[test]
    fn u_tele_is_reversed_cnot_then_hadamard() {
        // |x,y⟩ ↦ |x⊕y, y⟩
        let cnot_rev = permutation(2, |v| if v & 1 != 0 { v ^ 0b10 } else { v });
        let h2 = Builtin::I.operator().tensor(&Builtin::H.operator());
        let composed = h2.mul(&cnot_rev).unwrap();
        assert_eq!(composed.max_abs_diff(&u_tele()), 0.0);
        assert!(u_tele().is_unitary(1e-12));
    }

    #[test]
    fn cnot_flips_target_port_one() {
        let out = Builtin::Cnot.operator().apply_vec(&StateVec::from_bits(&[true, false])).unwrap();
        assert_eq!(out, StateVec::from_bits(&[true, true]));
    }
}
