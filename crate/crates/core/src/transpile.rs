//! Teleportation gadget and the depth-bounding rewrite.
//!
//! Every rewritten qubit edge `u → v` becomes
//!
//! ```text
//!   u ──▶ U ──▶ m_ψ ═══════════════════╗
//!         ▲ └─▶ m_a ═════════╗         ║
//!   a ────┘                  ▼         ▼
//!   init_a ─▶ U⁻¹ ─▶ b ─────▶ cZ ─────▶ cX ──▶ v
//!   init_b ─▶ ┘
//! ```
//!
//! (`─` qubit, `═` bit). No qubit path leads from `u` to `v`, and the
//! longest qubit path inside the gadget starting at an initialization is
//! four edges long, so the rewritten circuit has quantum depth at most 6.

use std::collections::{BTreeMap, BTreeSet};

use crate::circuit::{Builtin, CircuitError, EdgeId, EdgeKind, GateKind, MixedCircuit, NodeId};
use crate::linalg::DenseOperator;

pub use crate::circuit::u_tele;

/// Node ids of one gadget copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetNodes {
    pub init_a: NodeId,
    pub init_b: NodeId,
    pub u_inv: NodeId,
    pub u: NodeId,
    pub measure_psi: NodeId,
    pub measure_a: NodeId,
    pub cz: NodeId,
    pub cx: NodeId,
}

/// Qubit edges of one gadget copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetEdges {
    /// Upstream gate (or the template's input) into `U`.
    pub input: EdgeId,
    /// The seven qubit edges that start and end inside the gadget.
    pub internal: [EdgeId; 7],
    /// `cX` into the downstream gate; this is the retained half of the
    /// replaced edge.
    pub output: EdgeId,
    /// `m_a → cZ` and `m_ψ → cX`.
    pub bits: [EdgeId; 2],
}

impl GadgetEdges {
    /// The eight qubit edges a replaced edge contributes upstream of its
    /// destination: the input edge followed by the internal edges.
    pub fn pattern(&self) -> [EdgeId; 8] {
        let mut out = [self.input; 8];
        out[1..].copy_from_slice(&self.internal);
        out
    }

    pub fn qubit_edges(&self) -> [EdgeId; 9] {
        let mut out = [self.input; 9];
        out[1..8].copy_from_slice(&self.internal);
        out[8] = self.output;
        out
    }
}

#[derive(Debug, Clone)]
pub struct GadgetTemplate {
    pub circuit: MixedCircuit,
    pub input: NodeId,
    pub output: NodeId,
    pub nodes: GadgetNodes,
    pub edges: GadgetEdges,
}

/// Adds a gadget to `c`, fed from `from` and feeding `to`.
fn add_gadget(c: &mut MixedCircuit, from: (NodeId, usize), to: (NodeId, usize)) -> (GadgetNodes, GadgetEdges) {
    let n = GadgetNodes {
        init_a: c.add(GateKind::InitZero),
        init_b: c.add(GateKind::InitZero),
        u_inv: c.add(GateKind::unitary(Builtin::UTeleInv)),
        u: c.add(GateKind::unitary(Builtin::UTele)),
        measure_psi: c.add(GateKind::Measure),
        measure_a: c.add(GateKind::Measure),
        cz: c.add(GateKind::controlled(Builtin::Z, 1)),
        cx: c.add(GateKind::controlled(Builtin::X, 1)),
    };
    // U⁻¹|00⟩ is the Bell pair (|00⟩+|11⟩)/√2 on (b, a).
    let input = c.qubit(from, (n.u, 0));
    let internal = [
        c.qubit((n.init_b, 0), (n.u_inv, 0)),
        c.qubit((n.init_a, 0), (n.u_inv, 1)),
        c.qubit((n.u_inv, 0), (n.cz, 0)),
        c.qubit((n.u_inv, 1), (n.u, 1)),
        c.qubit((n.u, 0), (n.measure_psi, 0)),
        c.qubit((n.u, 1), (n.measure_a, 0)),
        c.qubit((n.cz, 0), (n.cx, 0)),
    ];
    let bits = [c.bit((n.measure_a, 0), (n.cz, 1)), c.bit((n.measure_psi, 0), (n.cx, 1))];
    let output = c.qubit((n.cx, 0), to);
    (
        n,
        GadgetEdges {
            input,
            internal,
            output,
            bits,
        },
    )
}

pub fn teleport_gadget() -> GadgetTemplate {
    let mut c = MixedCircuit::new("teleport");
    let input = c.add(GateKind::Input);
    let output = c.add(GateKind::Output);
    let (nodes, edges) = add_gadget(&mut c, (input, 0), (output, 0));
    GadgetTemplate {
        circuit: c,
        input,
        output,
        nodes,
        edges,
    }
}

/// The inverse gate used in the gadget, as a conjugate transpose.
pub fn u_tele_inv() -> DenseOperator {
    u_tele().adjoint()
}

/// One inserted gadget, keyed by the edge it replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetInstance {
    pub original: EdgeId,
    pub nodes: GadgetNodes,
    pub edges: GadgetEdges,
}

#[derive(Debug, Clone)]
pub struct Rewrite {
    pub circuit: MixedCircuit,
    pub gadgets: Vec<GadgetInstance>,
    /// New id of every original edge that was kept as is.
    pub kept: BTreeMap<EdgeId, EdgeId>,
}

/// Replaces every qubit edge of `c` by a teleportation gadget.
pub fn insert_teleport_everywhere(c: &MixedCircuit) -> Result<MixedCircuit, CircuitError> {
    insert_teleport(c, None).map(|r| r.circuit)
}

/// Replaces the qubit edges in `subset` (all of them when `None`) by
/// teleportation gadgets. Node ids of `c` are preserved; gadget nodes are
/// numbered after them.
pub fn insert_teleport(c: &MixedCircuit, subset: Option<&BTreeSet<EdgeId>>) -> Result<Rewrite, CircuitError> {
    c.check()?;
    let mut out = MixedCircuit::new(c.name().to_string());
    for (id, kind) in c.nodes() {
        out.insert(id, kind.clone());
    }
    let mut gadgets = Vec::new();
    let mut kept = BTreeMap::new();
    for (id, e) in c.edges() {
        let chosen = e.kind == EdgeKind::Qubit && subset.is_none_or(|s| s.contains(&id));
        let from = (e.from.node, e.from.port);
        let to = (e.to.node, e.to.port);
        if chosen {
            let (nodes, edges) = add_gadget(&mut out, from, to);
            gadgets.push(GadgetInstance {
                original: id,
                nodes,
                edges,
            });
        } else {
            kept.insert(id, out.connect(from, to, e.kind));
        }
    }
    if let Some(bad) = subset.and_then(|s| {
        s.iter()
            .find(|e| e.0 >= c.edge_count() || c.edge(**e).kind != EdgeKind::Qubit)
            .copied()
    }) {
        return Err(CircuitError::NotQubitEdge(bad));
    }
    Ok(Rewrite {
        circuit: out,
        gadgets,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{depth, quantum_connectivity, Connectivity, Port, Topology};

    fn chain(gates: &[Builtin]) -> MixedCircuit {
        let mut c = MixedCircuit::new("chain");
        let mut prev = c.add(GateKind::Input);
        for &g in gates {
            let n = c.add(GateKind::unitary(g));
            c.qubit((prev, 0), (n, 0));
            prev = n;
        }
        let o = c.add(GateKind::Output);
        c.qubit((prev, 0), (o, 0));
        c
    }

    #[test]
    fn gadget_structure() {
        let g = teleport_gadget();
        assert!(g.circuit.validate().is_empty());
        assert_eq!(g.circuit.node_count(), 10);
        assert_eq!(g.circuit.count_edges(EdgeKind::Qubit), 9);
        assert_eq!(g.circuit.count_edges(EdgeKind::Bit), 2);
        let conn = quantum_connectivity(&g.circuit, Port::new(g.input, 0), Port::new(g.output, 0)).unwrap();
        assert_eq!(conn, Connectivity::Weak);
        assert_eq!(depth(&g.circuit).unwrap().quantum_depth, 4);
    }

    #[test]
    fn longest_init_rooted_path_is_four() {
        let g = teleport_gadget();
        let topo = Topology::new(&g.circuit).unwrap();
        // Longest qubit path (in edges) starting at either initialization.
        let mut longest: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut best = 0;
        for &n in topo.order().iter().rev() {
            let l = topo
                .outputs(n)
                .iter()
                .map(|&e| g.circuit.edge(e))
                .filter(|e| e.kind == EdgeKind::Qubit)
                .map(|e| 1 + longest.get(&e.to.node).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            longest.insert(n, l);
            if matches!(g.circuit.node(n), Some(GateKind::InitZero)) {
                best = best.max(l);
            }
        }
        assert_eq!(best, 4);
    }

    #[test]
    fn u_inverse_is_the_adjoint() {
        assert!(u_tele().mul(&u_tele_inv()).unwrap().is_identity(1e-12));
        assert_eq!(u_tele_inv().max_abs_diff(&Builtin::UTeleInv.operator()), 0.0);
    }

    #[test]
    fn rewrite_accounting_and_depth() {
        let c = chain(&[Builtin::H, Builtin::T, Builtin::H, Builtin::S, Builtin::H]);
        let before = depth(&c).unwrap();
        assert_eq!(before.quantum_depth, 6);
        let r = insert_teleport(&c, None).unwrap();
        assert!(r.circuit.validate().is_empty());
        assert_eq!(r.gadgets.len(), 6);
        assert_eq!(r.circuit.count_edges(EdgeKind::Qubit), 9 * 6);
        assert_eq!(r.circuit.count_edges(EdgeKind::Bit), 2 * 6);
        assert_eq!(depth(&r.circuit).unwrap().quantum_depth, 6);
        let again = insert_teleport_everywhere(&r.circuit).unwrap();
        assert!(depth(&again).unwrap().quantum_depth <= 6);
    }

    #[test]
    fn subset_rewrite_keeps_other_edges() {
        let c = chain(&[Builtin::H, Builtin::H]);
        let subset: BTreeSet<EdgeId> = [EdgeId(1)].into();
        let r = insert_teleport(&c, Some(&subset)).unwrap();
        assert_eq!(r.gadgets.len(), 1);
        assert_eq!(r.kept.len(), 2);
        assert_eq!(r.circuit.count_edges(EdgeKind::Qubit), 2 + 9);
        assert!(r.circuit.validate().is_empty());
        let bad: BTreeSet<EdgeId> = [EdgeId(99)].into();
        assert!(insert_teleport(&c, Some(&bad)).is_err());
    }

    #[test]
    fn invalid_input_is_rejected() {
        let mut c = chain(&[Builtin::H]);
        c.remove_edge(EdgeId(0));
        assert!(matches!(insert_teleport_everywhere(&c), Err(CircuitError::Invalid(_))));
    }
}
