//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use tq_core::circuit::{pauli_x, pauli_y, pauli_z, Builtin, EdgeId, GateKind, MixedCircuit, Topology, UnitaryGate};
use tq_core::linalg::{DMatrix, DenseOperator, DensityOp, SpaceShape, StateVec, C64, ZERO};
use tq_core::noise::{germ_vector, PauliPattern};
use tq_core::sim::{infect, run_pure, GermModel, SimInput, SimOptions};

/// Two wires through one CNOT: four qubit edges.
pub fn cnot_pair() -> MixedCircuit {
    let mut c = MixedCircuit::new("cnot-pair");
    let i = c.add(GateKind::Input);
    let g = c.add(GateKind::unitary(Builtin::Cnot));
    let o = c.add(GateKind::Output);
    c.qubit((i, 0), (g, 0));
    c.qubit((i, 1), (g, 1));
    c.qubit((g, 0), (o, 0));
    c.qubit((g, 1), (o, 1));
    c
}

fn pauli(j: u8) -> DenseOperator {
    match j {
        0 => DenseOperator::identity(SpaceShape::qubits(1)),
        1 => pauli_x(),
        2 => pauli_y(),
        _ => pauli_z(),
    }
}

/// `|0⟩⟨0| ⊗ P_a + |1⟩⟨1| ⊗ P_b`, selector first.
fn selected(a: u8, b: u8) -> DenseOperator {
    let (pa, pb) = (pauli(a), pauli(b));
    let mut m = DMatrix::from_element(4, 4, ZERO);
    m.view_mut((0, 0), (2, 2)).copy_from(pa.matrix());
    m.view_mut((2, 2), (2, 2)).copy_from(pb.matrix());
    DenseOperator::new(SpaceShape::qubits(2), m).expect("4x4")
}

/// `c` with `P_J` on the ket side and `P_J'` on the bra side: a selector
/// qubit (an extra input/output wire, last in both boundary orders) is
/// threaded through a selected-Pauli gate on every edge where they differ.
fn two_sided(c: &MixedCircuit, ket: &[u8], bra: &[u8]) -> MixedCircuit {
    let edges = c.qubit_edges();
    let label: BTreeMap<EdgeId, (u8, u8)> = edges.iter().zip(ket.iter().zip(bra)).map(|(&e, (&a, &b))| (e, (a, b))).collect();
    let topo = Topology::new(c).expect("valid circuit");
    let pos: BTreeMap<_, _> = topo.order().iter().enumerate().map(|(i, &n)| (n, i)).collect();

    let mut out = MixedCircuit::new(c.name().to_string());
    for (id, kind) in c.nodes() {
        out.insert(id, kind.clone());
    }
    let s_in = out.add(GateKind::Input);
    let s_out = out.add(GateKind::Output);
    let mut sel = (s_in, 0);
    let mut order: Vec<(EdgeId, _)> = c.edges().collect();
    order.sort_by_key(|(id, e)| (pos[&e.from.node], id.0));
    for (id, e) in order {
        let from = (e.from.node, e.from.port);
        let to = (e.to.node, e.to.port);
        match label.get(&id) {
            None | Some((0, 0)) => {
                out.connect(from, to, e.kind);
            }
            Some(&(a, b)) if a == b => {
                let n = out.add(GateKind::unitary(UnitaryGate::custom(pauli(a))));
                out.qubit(from, (n, 0));
                out.qubit((n, 0), to);
            }
            Some(&(a, b)) => {
                let n = out.add(GateKind::unitary(UnitaryGate::custom(selected(a, b))));
                out.qubit(sel, (n, 0));
                out.qubit(from, (n, 1));
                out.qubit((n, 1), to);
                sel = (n, 0);
            }
        }
    }
    out.qubit(sel, (s_out, 0));
    out
}

/// `ρ = Σ_{J,J'} ⟨f_J'|f_J⟩ Σ_h A_{J,h} ψψ† A_{J',h}†`: the infected output
/// rebuilt from germ branches and pure runs with Paulis inserted, `h`
/// ranging over measurement histories.
pub fn pattern_sum(c: &MixedCircuit, model: &GermModel, psi: &StateVec, bits: &[bool]) -> DensityOp {
    let ic = infect(c, model).unwrap();
    let n = c.qubit_edges().len();
    let mut live: Vec<(Vec<u8>, StateVec)> = Vec::new();
    for code in 0..4usize.pow(n as u32) {
        let labels: Vec<u8> = (0..n).map(|i| (code >> (2 * (n - 1 - i)) & 3) as u8).collect();
        let f = germ_vector(&ic, &PauliPattern(labels.clone())).unwrap();
        if f.norm() > 1e-14 {
            live.push((labels, f));
        }
    }
    let plus = tq_core::sim::fiducial("+").unwrap();
    let input = SimInput::state(psi.tensor(&plus)).with_bits(bits.to_vec());
    let mut acc: Option<DMatrix<C64>> = None;
    let mut shape = None;
    for (a, (ja, fa)) in live.iter().enumerate() {
        for (jb, fb) in &live[a..] {
            let r = run_pure(&two_sided(c, ja, jb), &input, &SimOptions::default()).unwrap();
            let m = r.averaged_state().matrix().clone();
            let d = m.nrows() / 2;
            // Selector is the least significant factor.
            let block = DMatrix::from_fn(d, d, |i, j| m[(2 * i, 2 * j + 1)] * C64::new(2.0, 0.0));
            let w = fb.inner(fa).unwrap();
            let term = if ja == jb {
                block * w
            } else {
                let t = block * w;
                &t + t.adjoint()
            };
            acc = Some(match acc {
                None => term,
                Some(x) => x + term,
            });
            shape.get_or_insert_with(|| SpaceShape::qubits(r.output_qubits - 1));
        }
    }
    DensityOp::new(shape.unwrap(), acc.unwrap()).unwrap()
}
