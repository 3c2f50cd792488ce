//! Mixed quantum-classical circuits.
//!
//! A circuit is a DAG of gates joined by typed edges. Each edge leaves a
//! numbered output port and enters a numbered input port; inputs and outputs
//! are numbered separately. `Input` and `Output` pseudo-nodes model the
//! boundary so that dangling wires are ordinary edges and count in depth.

mod analysis;
pub mod format;
mod gates;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::linalg::STRUCT_TOL;

pub use analysis::{
    classify_layers, depth, edge_quantum_depths, quantum_connectivity, Connectivity, DepthReport, LayerClass,
    QubitOrder, Topology,
};
pub use gates::{pauli_x, pauli_y, pauli_z, u_tele, Builtin, UnitaryGate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "edge {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Qubit,
    Bit,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Qubit => "qubit",
            EdgeKind::Bit => "bit",
        })
    }
}

/// One end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub node: NodeId,
    pub port: usize,
}

impl Port {
    pub fn new(node: NodeId, port: usize) -> Self {
        Self { node, port }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: Port,
    pub to: Port,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    /// Deterministic classical gate. `table[v]` is the output word for input
    /// word `v`; port 0 is the most significant bit of both words.
    Classical { inputs: usize, outputs: usize, table: Vec<u64> },
    /// Computational basis measurement: one qubit in, one bit out.
    Measure,
    /// Unitary on `qubits` qubit ports (inputs `0..k`, outputs `0..k`),
    /// applied iff all `controls` bit inputs (ports `k..k+c`) are 1.
    Unitary { gate: UnitaryGate, controls: usize },
    /// Creates a fresh qubit in `|0⟩`.
    InitZero,
    /// Boundary source; its ports are typed by the edges attached to them.
    Input,
    /// Boundary sink; its ports are typed by the edges attached to them.
    Output,
}

impl GateKind {
    pub fn unitary(gate: impl Into<UnitaryGate>) -> Self {
        GateKind::Unitary {
            gate: gate.into(),
            controls: 0,
        }
    }

    pub fn controlled(gate: impl Into<UnitaryGate>, controls: usize) -> Self {
        GateKind::Unitary {
            gate: gate.into(),
            controls,
        }
    }

    /// Bit copy: one input, two outputs.
    pub fn copy() -> Self {
        GateKind::Classical {
            inputs: 1,
            outputs: 2,
            table: vec![0b00, 0b11],
        }
    }

    pub fn not() -> Self {
        GateKind::Classical {
            inputs: 1,
            outputs: 1,
            table: vec![1, 0],
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, GateKind::Input | GateKind::Output)
    }

    /// Number of qubit inputs (and outputs) of a unitary gate.
    pub fn unitary_qubits(&self) -> Option<usize> {
        match self {
            GateKind::Unitary { gate, .. } => gate.qubits(),
            _ => None,
        }
    }

    /// Declared input port kinds; `None` for boundary nodes.
    pub fn input_ports(&self) -> Option<Vec<EdgeKind>> {
        match self {
            GateKind::Classical { inputs, .. } => Some(vec![EdgeKind::Bit; *inputs]),
            GateKind::Measure => Some(vec![EdgeKind::Qubit]),
            GateKind::Unitary { gate, controls } => {
                let k = gate.qubits().unwrap_or(0);
                let mut v = vec![EdgeKind::Qubit; k];
                v.extend(std::iter::repeat_n(EdgeKind::Bit, *controls));
                Some(v)
            }
            GateKind::InitZero | GateKind::Input => Some(Vec::new()),
            GateKind::Output => None,
        }
    }

    /// Declared output port kinds; `None` for boundary nodes.
    pub fn output_ports(&self) -> Option<Vec<EdgeKind>> {
        match self {
            GateKind::Classical { outputs, .. } => Some(vec![EdgeKind::Bit; *outputs]),
            GateKind::Measure => Some(vec![EdgeKind::Bit]),
            GateKind::Unitary { gate, .. } => Some(vec![EdgeKind::Qubit; gate.qubits().unwrap_or(0)]),
            GateKind::InitZero => Some(vec![EdgeKind::Qubit]),
            GateKind::Input => None,
            GateKind::Output => Some(Vec::new()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GateKind::Classical { inputs, outputs, .. } => format!("classical {inputs}->{outputs}"),
            GateKind::Measure => "measure".into(),
            GateKind::Unitary { gate, controls } => {
                let name = gate.name().map_or_else(|| "matrix".to_string(), |b| b.to_string());
                if *controls > 0 {
                    format!("{name} ({controls} controls)")
                } else {
                    name
                }
            }
            GateKind::InitZero => "init0".into(),
            GateKind::Input => "input".into(),
            GateKind::Output => "output".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::In => "input",
            Direction::Out => "output",
        })
    }
}

/// One structural problem found by [`MixedCircuit::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Cycle { nodes: Vec<NodeId> },
    UnknownNode { edge: EdgeId, node: NodeId },
    PortOutOfRange { edge: EdgeId, node: NodeId, port: usize, dir: Direction },
    PortReused { node: NodeId, port: usize, dir: Direction, edges: Vec<EdgeId> },
    QubitFanOut { node: NodeId, port: usize, edges: Vec<EdgeId> },
    PortUnused { node: NodeId, port: usize, dir: Direction },
    EdgeKindMismatch { edge: EdgeId, node: NodeId, port: usize, expected: EdgeKind, got: EdgeKind },
    ArityMismatch { node: NodeId, detail: String },
    NotUnitary { node: NodeId, defect: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => {
                let ids: Vec<String> = nodes.iter().map(|n| n.0.to_string()).collect();
                write!(f, "cycle through nodes [{}]", ids.join(", "))
            }
            Violation::UnknownNode { edge, node } => write!(f, "{edge} references unknown {node}"),
            Violation::PortOutOfRange { edge, node, port, dir } => {
                write!(f, "{edge} uses {dir} port {port} of {node}, which does not exist")
            }
            Violation::PortReused { node, port, dir, edges } => {
                write!(f, "port reuse: {dir} port {port} of {node} used by {} edges", edges.len())
            }
            Violation::QubitFanOut { node, port, edges } => {
                write!(f, "qubit fan-out: output port {port} of {node} feeds {} qubit edges", edges.len())
            }
            Violation::PortUnused { node, port, dir } => write!(f, "{dir} port {port} of {node} is not connected"),
            Violation::EdgeKindMismatch { edge, node, port, expected, got } => {
                write!(f, "edge-kind mismatch: {edge} is a {got} edge but port {port} of {node} expects {expected}")
            }
            Violation::ArityMismatch { node, detail } => write!(f, "arity mismatch at {node}: {detail}"),
            Violation::NotUnitary { node, defect } => write!(f, "{node}: matrix not unitary (defect {defect:.3e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{0} is not a qubit boundary port")]
    NotQubitBoundary(String),
    #[error("unknown {0}")]
    UnknownNode(NodeId),
    #[error("{0} is not a qubit edge")]
    NotQubitEdge(EdgeId),
}

/// A mixed quantum-classical circuit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedCircuit {
    name: String,
    nodes: BTreeMap<NodeId, GateKind>,
    edges: Vec<Edge>,
}

impl MixedCircuit {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            nodes: BTreeMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Adds a node with the next free id.
    pub fn add(&mut self, kind: GateKind) -> NodeId {
        let id = NodeId(self.nodes.keys().next_back().map_or(0, |n| n.0 + 1));
        self.nodes.insert(id, kind);
        id
    }

    /// Inserts a node under an explicit id, replacing any previous node.
    pub fn insert(&mut self, id: NodeId, kind: GateKind) {
        self.nodes.insert(id, kind);
    }

    pub fn connect(&mut self, from: (NodeId, usize), to: (NodeId, usize), kind: EdgeKind) -> EdgeId {
        self.edges.push(Edge {
            from: Port::new(from.0, from.1),
            to: Port::new(to.0, to.1),
            kind,
        });
        EdgeId(self.edges.len() - 1)
    }

    pub fn qubit(&mut self, from: (NodeId, usize), to: (NodeId, usize)) -> EdgeId {
        self.connect(from, to, EdgeKind::Qubit)
    }

    pub fn bit(&mut self, from: (NodeId, usize), to: (NodeId, usize)) -> EdgeId {
        self.connect(from, to, EdgeKind::Bit)
    }

    pub fn node(&self, id: NodeId) -> Option<&GateKind> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &GateKind)> {
        self.nodes.iter().map(|(&id, k)| (id, k))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i), e))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn qubit_edges(&self) -> Vec<EdgeId> {
        self.edges()
            .filter(|(_, e)| e.kind == EdgeKind::Qubit)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Largest number of qubits acted on by a unitary gate (0 if none).
    pub fn max_gate_arity(&self) -> usize {
        self.nodes.values().filter_map(GateKind::unitary_qubits).max().unwrap_or(0)
    }

    /// Every invariant violation; empty when the circuit is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        for (&id, kind) in &self.nodes {
            match kind {
                GateKind::Classical { inputs, outputs, table } => {
                    if *inputs >= 32 || table.len() != 1usize << inputs {
                        out.push(Violation::ArityMismatch {
                            node: id,
                            detail: format!("table has {} rows for {inputs} inputs", table.len()),
                        });
                    }
                    if *outputs < 64 && table.iter().any(|&w| w >> outputs != 0) {
                        out.push(Violation::ArityMismatch {
                            node: id,
                            detail: format!("table word wider than {outputs} outputs"),
                        });
                    }
                }
                GateKind::Unitary { gate, .. } => match gate.qubits() {
                    None | Some(0) => out.push(Violation::ArityMismatch {
                        node: id,
                        detail: format!("matrix dimension {} is not a power of two ≥ 2", gate.operator().dim()),
                    }),
                    Some(_) => {
                        let defect = gate.operator().unitarity_defect();
                        if defect > STRUCT_TOL {
                            out.push(Violation::NotUnitary { node: id, defect });
                        }
                    }
                },
                _ => {}
            }
        }

        // Port usage.
        let mut used: BTreeMap<(NodeId, Direction, usize), Vec<EdgeId>> = BTreeMap::new();
        for (eid, e) in self.edges() {
            for (end, dir) in [(e.from, Direction::Out), (e.to, Direction::In)] {
                let Some(kind) = self.nodes.get(&end.node) else {
                    out.push(Violation::UnknownNode { edge: eid, node: end.node });
                    continue;
                };
                let ports = match dir {
                    Direction::In => kind.input_ports(),
                    Direction::Out => kind.output_ports(),
                };
                match ports {
                    // Boundary pseudo-node: any port, typed by its edge; Input
                    // has no inputs and Output no outputs.
                    None => {}
                    Some(ports) => match ports.get(end.port) {
                        None => out.push(Violation::PortOutOfRange {
                            edge: eid,
                            node: end.node,
                            port: end.port,
                            dir,
                        }),
                        Some(&expected) if expected != e.kind => out.push(Violation::EdgeKindMismatch {
                            edge: eid,
                            node: end.node,
                            port: end.port,
                            expected,
                            got: e.kind,
                        }),
                        Some(_) => {}
                    },
                }
                used.entry((end.node, dir, end.port)).or_default().push(eid);
            }
        }
        for (&(node, dir, port), edges) in &used {
            if edges.len() > 1 {
                let all_qubit_out = dir == Direction::Out && edges.iter().all(|e| self.edges[e.0].kind == EdgeKind::Qubit);
                if all_qubit_out {
                    out.push(Violation::QubitFanOut { node, port, edges: edges.clone() });
                } else {
                    out.push(Violation::PortReused { node, port, dir, edges: edges.clone() });
                }
            }
        }
        for (&id, kind) in &self.nodes {
            for dir in [Direction::In, Direction::Out] {
                let declared = match dir {
                    Direction::In => kind.input_ports().map(|p| p.len()),
                    Direction::Out => kind.output_ports().map(|p| p.len()),
                };
                // Boundary ports must be numbered contiguously from 0.
                let count = declared.unwrap_or_else(|| {
                    used.range((id, dir, 0)..=(id, dir, usize::MAX))
                        .map(|(&(_, _, p), _)| p + 1)
                        .max()
                        .unwrap_or(0)
                });
                for port in 0..count {
                    if !used.contains_key(&(id, dir, port)) {
                        out.push(Violation::PortUnused { node: id, port, dir });
                    }
                }
            }
        }

        if let Some(nodes) = self.find_cycle() {
            out.push(Violation::Cycle { nodes });
        }
        out
    }

    /// Nodes on some directed cycle, if there is one.
    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        let mut indeg: BTreeMap<NodeId, usize> = self.nodes.keys().map(|&n| (n, 0)).collect();
        let mut succ: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in &self.edges {
            if self.nodes.contains_key(&e.from.node) && self.nodes.contains_key(&e.to.node) {
                *indeg.get_mut(&e.to.node).unwrap() += 1;
                succ.entry(e.from.node).or_default().push(e.to.node);
            }
        }
        let mut stack: Vec<NodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        while let Some(n) = stack.pop() {
            indeg.remove(&n);
            for s in succ.get(&n).into_iter().flatten() {
                if let Some(d) = indeg.get_mut(s) {
                    *d -= 1;
                    if *d == 0 {
                        stack.push(*s);
                    }
                }
            }
        }
        (!indeg.is_empty()).then(|| indeg.into_keys().collect())
    }

    pub fn check(&self) -> Result<(), CircuitError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CircuitError::Invalid(v))
        }
    }

    /// Removes an edge, renumbering later edges. Used by tests.
    pub fn remove_edge(&mut self, id: EdgeId) -> Edge {
        self.edges.remove(id.0)
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn wire() -> MixedCircuit {
        let mut c = MixedCircuit::new("wire");
        let i = c.add(GateKind::Input);
        let o = c.add(GateKind::Output);
        c.qubit((i, 0), (o, 0));
        c
    }

    #[test]
    fn well_formed_wire_validates() {
        assert!(wire().validate().is_empty());
    }

    #[test]
    fn cycle_is_reported() {
        let mut c = MixedCircuit::new("loop");
        let a = c.add(GateKind::not());
        let b = c.add(GateKind::not());
        c.bit((a, 0), (b, 0));
        c.bit((b, 0), (a, 0));
        let v = c.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle { .. })), "{v:?}");
        assert!(v.iter().any(|x| x.to_string().contains("cycle")));
    }

    #[test]
    fn qubit_into_classical_port_is_kind_mismatch() {
        let mut c = MixedCircuit::new("bad");
        let i = c.add(GateKind::Input);
        let n = c.add(GateKind::not());
        let o = c.add(GateKind::Output);
        c.qubit((i, 0), (n, 0));
        c.bit((n, 0), (o, 0));
        let v = c.validate();
        assert!(v.iter().any(|x| x.to_string().starts_with("edge-kind mismatch")), "{v:?}");
    }

    #[test]
    fn qubit_fan_out_and_unused_ports() {
        let mut c = MixedCircuit::new("clone");
        let z = c.add(GateKind::InitZero);
        let o = c.add(GateKind::Output);
        let h = c.add(GateKind::unitary(Builtin::H));
        c.qubit((z, 0), (o, 0));
        c.qubit((z, 0), (o, 1));
        let v = c.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::QubitFanOut { .. })), "{v:?}");
        assert!(v.iter().any(|x| matches!(x, Violation::PortUnused { node, .. } if *node == h)));
    }

    #[test]
    fn boundary_port_gap_is_unused_port() {
        let mut c = MixedCircuit::new("gap");
        let i = c.add(GateKind::Input);
        let o = c.add(GateKind::Output);
        c.qubit((i, 1), (o, 0));
        let v = c.validate();
        assert_eq!(v, vec![Violation::PortUnused { node: i, port: 0, dir: Direction::Out }]);
    }

    #[test]
    fn non_unitary_matrix_rejected() {
        use crate::linalg::{DenseOperator, SpaceShape};
        let mut c = MixedCircuit::new("nu");
        let i = c.add(GateKind::Input);
        let g = c.add(GateKind::unitary(UnitaryGate::custom(DenseOperator::real(
            SpaceShape::qubits(1),
            1.0,
            &[1.0, 1.0, 0.0, 1.0],
        ))));
        let o = c.add(GateKind::Output);
        c.qubit((i, 0), (g, 0));
        c.qubit((g, 0), (o, 0));
        assert!(matches!(c.validate().as_slice(), [Violation::NotUnitary { .. }]));
    }

    #[test]
    fn bad_table_arity() {
        let mut c = MixedCircuit::new("t");
        c.add(GateKind::Classical { inputs: 2, outputs: 1, table: vec![0, 1] });
        assert!(c.validate().iter().any(|x| matches!(x, Violation::ArityMismatch { .. })));
    }
}
