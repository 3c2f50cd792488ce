//! Small named circuits and random circuit generators.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::{Builtin, GateKind, MixedCircuit, NodeId};

/// `Input → g₁ → … → g_{n−1} → Output` with `n` qubit edges, using identity
/// gates as the interior nodes.
pub fn wire(edges: usize) -> MixedCircuit {
    assert!(edges >= 1);
    let mut c = MixedCircuit::new(format!("wire{edges}"));
    let mut prev = c.add(GateKind::Input);
    for _ in 1..edges {
        let n = c.add(GateKind::unitary(Builtin::I));
        c.qubit((prev, 0), (n, 0));
        prev = n;
    }
    let o = c.add(GateKind::Output);
    c.qubit((prev, 0), (o, 0));
    c
}

/// Prepares `(|00⟩ + |11⟩)/√2` from nothing.
pub fn bell_pair() -> MixedCircuit {
    let mut c = MixedCircuit::new("bell");
    let a = c.add(GateKind::InitZero);
    let b = c.add(GateKind::InitZero);
    let h = c.add(GateKind::unitary(Builtin::H));
    let cx = c.add(GateKind::unitary(Builtin::Cnot));
    let o = c.add(GateKind::Output);
    c.qubit((a, 0), (h, 0));
    c.qubit((h, 0), (cx, 0));
    c.qubit((b, 0), (cx, 1));
    c.qubit((cx, 0), (o, 0));
    c.qubit((cx, 1), (o, 1));
    c
}

/// Measures the input, then re-prepares it from the outcome: the completely
/// dephasing channel.
pub fn measure_reprepare() -> MixedCircuit {
    let mut c = MixedCircuit::new("dephase");
    let i = c.add(GateKind::Input);
    let m = c.add(GateKind::Measure);
    let z = c.add(GateKind::InitZero);
    let x = c.add(GateKind::controlled(Builtin::X, 1));
    let o = c.add(GateKind::Output);
    c.qubit((i, 0), (m, 0));
    c.qubit((z, 0), (x, 0));
    c.bit((m, 0), (x, 1));
    c.qubit((x, 0), (o, 0));
    c
}

/// Measures a qubit and fans the bit out through a classical COPY gate.
pub fn measure_copy() -> MixedCircuit {
    let mut c = MixedCircuit::new("measure-copy");
    let i = c.add(GateKind::Input);
    let m = c.add(GateKind::Measure);
    let cp = c.add(GateKind::copy());
    let o = c.add(GateKind::Output);
    c.qubit((i, 0), (m, 0));
    c.bit((m, 0), (cp, 0));
    c.bit((cp, 0), (o, 0));
    c.bit((cp, 1), (o, 1));
    c
}

/// A purely classical circuit: two input bits, XOR-like table, NOT.
pub fn classical_gadget() -> MixedCircuit {
    let mut c = MixedCircuit::new("classical");
    let i = c.add(GateKind::Input);
    let xor = c.add(GateKind::Classical {
        inputs: 2,
        outputs: 1,
        table: vec![0, 1, 1, 0],
    });
    let not = c.add(GateKind::not());
    let o = c.add(GateKind::Output);
    c.bit((i, 0), (xor, 0));
    c.bit((i, 1), (xor, 1));
    c.bit((xor, 0), (not, 0));
    c.bit((not, 0), (o, 0));
    c
}

/// A random circuit over `qubits` wires with `layers` rounds of gates drawn
/// from `{H, T, CNOT}`; each CNOT pairs two distinct wires.
pub fn random_unitary_circuit<R: Rng + ?Sized>(rng: &mut R, qubits: usize, layers: usize) -> MixedCircuit {
    random_mixed_circuit(
        rng,
        &RandomCircuitParams {
            qubits,
            layers,
            measure_prob: 0.0,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomCircuitParams {
    pub qubits: usize,
    pub layers: usize,
    /// Per wire and layer, the probability of measuring the wire and
    /// re-preparing it through classically controlled gates.
    pub measure_prob: f64,
}

/// Like [`random_unitary_circuit`], but wires may be measured mid-circuit:
/// the bit is copied, one copy leaves as a classical output and the other
/// controls an `X` on a freshly initialized qubit that continues the wire.
pub fn random_mixed_circuit<R: Rng + ?Sized>(rng: &mut R, p: &RandomCircuitParams) -> MixedCircuit {
    let mut c = MixedCircuit::new(format!("random{}q{}l", p.qubits, p.layers));
    let input = c.add(GateKind::Input);
    let mut heads: Vec<(NodeId, usize)> = (0..p.qubits).map(|q| (input, q)).collect();
    let mut bit_outputs = Vec::new();
    for _ in 0..p.layers {
        let mut wires: Vec<usize> = (0..p.qubits).collect();
        wires.shuffle(rng);
        let mut i = 0;
        while i < wires.len() {
            let w = wires[i];
            if p.measure_prob > 0.0 && rng.gen_bool(p.measure_prob) {
                let m = c.add(GateKind::Measure);
                c.qubit(heads[w], (m, 0));
                let cp = c.add(GateKind::copy());
                c.bit((m, 0), (cp, 0));
                bit_outputs.push((cp, 1));
                let z = c.add(GateKind::InitZero);
                let x = c.add(GateKind::controlled(Builtin::X, 1));
                c.qubit((z, 0), (x, 0));
                c.bit((cp, 0), (x, 1));
                heads[w] = (x, 0);
                i += 1;
                continue;
            }
            let choice = rng.gen_range(0..3);
            if choice == 2 && i + 1 < wires.len() {
                let t = wires[i + 1];
                let g = c.add(GateKind::unitary(Builtin::Cnot));
                c.qubit(heads[w], (g, 0));
                c.qubit(heads[t], (g, 1));
                heads[w] = (g, 0);
                heads[t] = (g, 1);
                i += 2;
            } else {
                let b = if choice == 0 { Builtin::H } else { Builtin::T };
                let g = c.add(GateKind::unitary(b));
                c.qubit(heads[w], (g, 0));
                heads[w] = (g, 0);
                i += 1;
            }
        }
    }
    let out = c.add(GateKind::Output);
    for (q, &h) in heads.iter().enumerate() {
        c.qubit(h, (out, q));
    }
    for (k, &b) in bit_outputs.iter().enumerate() {
        c.bit(b, (out, p.qubits + k));
    }
    c
}
