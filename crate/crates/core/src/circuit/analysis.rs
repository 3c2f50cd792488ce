use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt;

use super::{CircuitError, EdgeId, EdgeKind, GateKind, MixedCircuit, NodeId, Port};

/// Validated adjacency of a circuit with a deterministic topological order
/// (ties broken by ascending node id).
#[derive(Debug, Clone)]
pub struct Topology {
    order: Vec<NodeId>,
    inputs: BTreeMap<NodeId, Vec<EdgeId>>,
    outputs: BTreeMap<NodeId, Vec<EdgeId>>,
}

impl Topology {
    pub fn new(c: &MixedCircuit) -> Result<Self, CircuitError> {
        c.check()?;
        let mut inputs: BTreeMap<NodeId, Vec<(usize, EdgeId)>> = BTreeMap::new();
        let mut outputs: BTreeMap<NodeId, Vec<(usize, EdgeId)>> = BTreeMap::new();
        for (id, e) in c.edges() {
            outputs.entry(e.from.node).or_default().push((e.from.port, id));
            inputs.entry(e.to.node).or_default().push((e.to.port, id));
        }
        let sorted = |m: BTreeMap<NodeId, Vec<(usize, EdgeId)>>| -> BTreeMap<NodeId, Vec<EdgeId>> {
            m.into_iter()
                .map(|(n, mut v)| {
                    v.sort();
                    (n, v.into_iter().map(|(_, e)| e).collect())
                })
                .collect()
        };
        let inputs = sorted(inputs);
        let outputs = sorted(outputs);

        let mut indeg: BTreeMap<NodeId, usize> = c.nodes().map(|(n, _)| (n, 0)).collect();
        for (n, es) in &inputs {
            indeg.insert(*n, es.len());
        }
        let mut heap: BinaryHeap<Reverse<NodeId>> =
            indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| Reverse(n)).collect();
        let mut order = Vec::with_capacity(indeg.len());
        while let Some(Reverse(n)) = heap.pop() {
            order.push(n);
            for e in outputs.get(&n).into_iter().flatten() {
                let dst = c.edge(*e).to.node;
                let d = indeg.get_mut(&dst).expect("validated");
                *d -= 1;
                if *d == 0 {
                    heap.push(Reverse(dst));
                }
            }
        }
        Ok(Self { order, inputs, outputs })
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    /// Incoming edges of a node, by input port.
    pub fn inputs(&self, n: NodeId) -> &[EdgeId] {
        self.inputs.get(&n).map_or(&[], Vec::as_slice)
    }

    /// Outgoing edges of a node, by output port.
    pub fn outputs(&self, n: NodeId) -> &[EdgeId] {
        self.outputs.get(&n).map_or(&[], Vec::as_slice)
    }

    /// Edges leaving `Input` nodes, ordered by (node, port).
    pub fn boundary_inputs(&self, c: &MixedCircuit) -> Vec<EdgeId> {
        c.nodes()
            .filter(|(_, k)| matches!(k, GateKind::Input))
            .flat_map(|(n, _)| self.outputs(n).iter().copied())
            .collect()
    }

    /// Edges entering `Output` nodes, ordered by (node, port).
    pub fn boundary_outputs(&self, c: &MixedCircuit) -> Vec<EdgeId> {
        c.nodes()
            .filter(|(_, k)| matches!(k, GateKind::Output))
            .flat_map(|(n, _)| self.inputs(n).iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthReport {
    /// Edges on the longest directed path.
    pub total_depth: usize,
    /// Edges on the longest directed path made only of qubit edges.
    pub quantum_depth: usize,
}

/// Per edge: number of edges on the longest path ending with that edge,
/// (all edges, qubit edges only). Bit edges have quantum depth 0.
fn edge_depths(c: &MixedCircuit, topo: &Topology) -> (Vec<usize>, Vec<usize>) {
    let mut total = vec![0usize; c.edge_count()];
    let mut quantum = vec![0usize; c.edge_count()];
    for &n in topo.order() {
        let ins = topo.inputs(n);
        let t_in = ins.iter().map(|e| total[e.0]).max().unwrap_or(0);
        let q_in = ins
            .iter()
            .filter(|e| c.edge(**e).kind == EdgeKind::Qubit)
            .map(|e| quantum[e.0])
            .max()
            .unwrap_or(0);
        for &e in topo.outputs(n) {
            total[e.0] = t_in + 1;
            if c.edge(e).kind == EdgeKind::Qubit {
                quantum[e.0] = q_in + 1;
            }
        }
    }
    (total, quantum)
}

/// Quantum depth of the part of the circuit leading to each edge, counting
/// the edge itself; indexed by edge id, 0 for bit edges.
pub fn edge_quantum_depths(c: &MixedCircuit, topo: &Topology) -> Vec<usize> {
    edge_depths(c, topo).1
}

pub fn depth(c: &MixedCircuit) -> Result<DepthReport, CircuitError> {
    let topo = Topology::new(c)?;
    let (t, q) = edge_depths(c, &topo);
    Ok(DepthReport {
        total_depth: t.into_iter().max().unwrap_or(0),
        quantum_depth: q.into_iter().max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Connectivity {
    None,
    Weak,
    Strong,
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::None => "none",
            Connectivity::Weak => "weak",
            Connectivity::Strong => "strong",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Vertex {
    Gate(NodeId),
    Boundary(Port),
}

fn vertex(c: &MixedCircuit, p: Port) -> Vertex {
    if c.node(p.node).is_some_and(GateKind::is_boundary) {
        Vertex::Boundary(p)
    } else {
        Vertex::Gate(p.node)
    }
}

/// Connectivity of an input boundary port to an output boundary port inside
/// the quantum subgraph. Each boundary port is its own vertex, so two wires
/// touching the same `Input` node are not joined through it.
pub fn quantum_connectivity(c: &MixedCircuit, input: Port, output: Port) -> Result<Connectivity, CircuitError> {
    c.check()?;
    let is_qubit_port = |p: Port, kind: fn(&GateKind) -> bool, from_side: bool| {
        c.node(p.node).is_some_and(kind)
            && c.edges().any(|(_, e)| e.kind == EdgeKind::Qubit && if from_side { e.from == p } else { e.to == p })
    };
    if !is_qubit_port(input, |k| matches!(k, GateKind::Input), true) {
        return Err(CircuitError::NotQubitBoundary(format!("input port {} of {}", input.port, input.node)));
    }
    if !is_qubit_port(output, |k| matches!(k, GateKind::Output), false) {
        return Err(CircuitError::NotQubitBoundary(format!("output port {} of {}", output.port, output.node)));
    }

    let mut fwd: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    let mut und: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for (_, e) in c.edges().filter(|(_, e)| e.kind == EdgeKind::Qubit) {
        let (a, b) = (vertex(c, e.from), vertex(c, e.to));
        fwd.entry(a).or_default().push(b);
        und.entry(a).or_default().push(b);
        und.entry(b).or_default().push(a);
    }
    let (src, dst) = (Vertex::Boundary(input), Vertex::Boundary(output));
    if reachable(&fwd, src, dst) {
        Ok(Connectivity::Strong)
    } else if reachable(&und, src, dst) {
        Ok(Connectivity::Weak)
    } else {
        Ok(Connectivity::None)
    }
}

fn reachable(adj: &BTreeMap<Vertex, Vec<Vertex>>, src: Vertex, dst: Vertex) -> bool {
    let mut seen = std::collections::BTreeSet::from([src]);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        if v == dst {
            return true;
        }
        for &w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}

/// Shape class of a circuit for a queried quantum-layer bound `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerClass {
    /// Quantum content confined to disjoint global windows of width ≤ b.
    Sqcl(usize),
    /// Every directed qubit path has at most b edges.
    Aqcl(usize),
    Unbounded,
}

impl LayerClass {
    pub fn is_aqcl(self) -> bool {
        !matches!(self, LayerClass::Unbounded)
    }
}

impl fmt::Display for LayerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerClass::Sqcl(b) => write!(f, "SQCL({b})"),
            LayerClass::Aqcl(b) => write!(f, "AQCL({b})"),
            LayerClass::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Global time of each node: longest-path (earliest) layering, except that
/// sourceless `InitZero` and constant classical gates are placed one step
/// before their earliest consumer.
fn layer_times(c: &MixedCircuit, topo: &Topology) -> BTreeMap<NodeId, usize> {
    let mut t: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &n in topo.order() {
        let v = topo
            .inputs(n)
            .iter()
            .map(|e| t[&c.edge(*e).from.node] + 1)
            .max()
            .unwrap_or(0);
        t.insert(n, v);
    }
    for (n, kind) in c.nodes() {
        let movable = topo.inputs(n).is_empty() && !matches!(kind, GateKind::Input);
        if movable {
            if let Some(first) = topo.outputs(n).iter().map(|e| t[&c.edge(*e).to.node]).min() {
                t.insert(n, first.saturating_sub(1));
            }
        }
    }
    t
}

pub fn classify_layers(c: &MixedCircuit, b: usize) -> Result<LayerClass, CircuitError> {
    let topo = Topology::new(c)?;
    let (_, qd) = edge_depths(c, &topo);
    let quantum_depth = qd.iter().copied().max().unwrap_or(0);
    if quantum_depth > b {
        return Ok(LayerClass::Unbounded);
    }

    let times = layer_times(c, &topo);
    let horizon = times.values().copied().max().unwrap_or(0);
    // slot s covers the open time interval (s, s+1)
    let mut quantum_slot = vec![false; horizon + 1];
    let mut passes = vec![false; horizon + 2];
    for (_, e) in c.edges().filter(|(_, e)| e.kind == EdgeKind::Qubit) {
        let (a, z) = (times[&e.from.node], times[&e.to.node]);
        quantum_slot[a..z].fill(true);
        if a + 1 < z {
            passes[a + 1..z].fill(true);
        }
    }
    // A node with qubit edges on both sides joins the slots around it.
    let mut joint = vec![false; horizon + 2];
    for (n, _) in c.nodes() {
        let q_in = topo.inputs(n).iter().any(|e| c.edge(*e).kind == EdgeKind::Qubit);
        let q_out = topo.outputs(n).iter().any(|e| c.edge(*e).kind == EdgeKind::Qubit);
        if q_in && q_out {
            joint[times[&n]] = true;
        }
    }
    let mut widest = 0usize;
    let mut run = 0usize;
    for s in 0..=horizon {
        if !quantum_slot[s] {
            run = 0;
            continue;
        }
        let continues = s > 0 && quantum_slot[s - 1] && (passes[s] || joint[s]);
        run = if continues { run + 1 } else { 1 };
        widest = widest.max(run);
    }
    Ok(if widest <= b {
        LayerClass::Sqcl(b)
    } else {
        LayerClass::Aqcl(b)
    })
}

/// The strict partial order on qubit edges: `a ≺ b` iff a directed path of
/// qubit edges leads from `a` to `b`.
#[derive(Debug, Clone)]
pub struct QubitOrder {
    edges: Vec<EdgeId>,
    index: BTreeMap<EdgeId, usize>,
    // reach[i] = bitset of qubit edges strictly after edge i
    reach: Vec<Vec<u64>>,
}

impl QubitOrder {
    pub fn new(c: &MixedCircuit, topo: &Topology) -> Self {
        let edges = c.qubit_edges();
        let index: BTreeMap<EdgeId, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let words = edges.len().div_ceil(64);
        let mut reach = vec![vec![0u64; words]; edges.len()];
        for &n in topo.order().iter().rev() {
            for &e in topo.inputs(n) {
                let Some(&i) = index.get(&e) else { continue };
                let mut acc = vec![0u64; words];
                for &f in topo.outputs(n) {
                    if let Some(&j) = index.get(&f) {
                        acc[j / 64] |= 1 << (j % 64);
                        for (a, r) in acc.iter_mut().zip(&reach[j]) {
                            *a |= r;
                        }
                    }
                }
                reach[i] = acc;
            }
        }
        Self { edges, index, reach }
    }

    /// Qubit edges in ascending edge-id order; pattern positions refer to
    /// this ordering.
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn position(&self, e: EdgeId) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// `a ≺ b` by position.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.reach[a][b / 64] >> (b % 64) & 1 == 1
    }

    /// Positions of every qubit edge strictly before position `b`.
    pub fn upstream(&self, b: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&a| self.precedes(a, b)).collect()
    }

    /// Number of qubit edges strictly after position `a`.
    pub fn downstream_count(&self, a: usize) -> usize {
        self.reach[a].iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Builtin;

    fn wire(len: usize) -> MixedCircuit {
        let mut c = MixedCircuit::new("wire");
        let mut prev = (c.add(GateKind::Input), 0);
        for _ in 1..len {
            let g = c.add(GateKind::unitary(Builtin::I));
            c.qubit(prev, (g, 0));
            prev = (g, 0);
        }
        let o = c.add(GateKind::Output);
        c.qubit(prev, (o, 0));
        c
    }

    #[test]
    fn wire_depths() {
        let d = depth(&wire(10)).unwrap();
        assert_eq!(d, DepthReport { total_depth: 10, quantum_depth: 10 });
    }

    #[test]
    fn classical_circuit_has_zero_quantum_depth() {
        let mut c = MixedCircuit::new("classical");
        let i = c.add(GateKind::Input);
        let n = c.add(GateKind::not());
        let cp = c.add(GateKind::copy());
        let o = c.add(GateKind::Output);
        c.bit((i, 0), (n, 0));
        c.bit((n, 0), (cp, 0));
        c.bit((cp, 0), (o, 0));
        c.bit((cp, 1), (o, 1));
        let d = depth(&c).unwrap();
        assert_eq!(d.quantum_depth, 0);
        assert_eq!(d.total_depth, 3);
        assert_eq!(classify_layers(&c, 0).unwrap(), LayerClass::Sqcl(0));
    }

    #[test]
    fn connectivity_of_wires() {
        let c = wire(3);
        let (i, o) = (NodeId(0), NodeId(3));
        assert_eq!(quantum_connectivity(&c, Port::new(i, 0), Port::new(o, 0)).unwrap(), Connectivity::Strong);

        let mut two = MixedCircuit::new("two");
        let i = two.add(GateKind::Input);
        let o = two.add(GateKind::Output);
        two.qubit((i, 0), (o, 0));
        two.qubit((i, 1), (o, 1));
        assert_eq!(quantum_connectivity(&two, Port::new(i, 0), Port::new(o, 1)).unwrap(), Connectivity::None);
        assert_eq!(quantum_connectivity(&two, Port::new(i, 1), Port::new(o, 1)).unwrap(), Connectivity::Strong);
        assert!(quantum_connectivity(&two, Port::new(i, 5), Port::new(o, 0)).is_err());
    }

    #[test]
    fn single_quantum_block_between_classical_stages_is_sqcl() {
        // bit -> NOT -> NOT -> controls X on a fresh qubit -> H -> measure -> NOT -> out
        let mut c = MixedCircuit::new("block");
        let i = c.add(GateKind::Input);
        let n1 = c.add(GateKind::not());
        let n2 = c.add(GateKind::not());
        let z = c.add(GateKind::InitZero);
        let x = c.add(GateKind::controlled(Builtin::X, 1));
        let h = c.add(GateKind::unitary(Builtin::H));
        let m = c.add(GateKind::Measure);
        let n3 = c.add(GateKind::not());
        let o = c.add(GateKind::Output);
        c.bit((i, 0), (n1, 0));
        c.bit((n1, 0), (n2, 0));
        c.qubit((z, 0), (x, 0));
        c.bit((n2, 0), (x, 1));
        c.qubit((x, 0), (h, 0));
        c.qubit((h, 0), (m, 0));
        c.bit((m, 0), (n3, 0));
        c.bit((n3, 0), (o, 0));
        assert_eq!(depth(&c).unwrap().quantum_depth, 3);
        assert_eq!(classify_layers(&c, 3).unwrap(), LayerClass::Sqcl(3));
        assert_eq!(classify_layers(&c, 2).unwrap(), LayerClass::Unbounded);
    }

    #[test]
    fn qubit_order_on_wire() {
        let c = wire(4);
        let topo = Topology::new(&c).unwrap();
        let ord = QubitOrder::new(&c, &topo);
        assert_eq!(ord.len(), 4);
        assert!(ord.precedes(0, 3));
        assert!(!ord.precedes(3, 0));
        assert!(!ord.precedes(1, 1));
        assert_eq!(ord.upstream(2), vec![0, 1]);
        assert_eq!(ord.downstream_count(0), 3);
    }
}
