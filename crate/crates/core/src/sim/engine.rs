//! Ensemble simulation of mixed circuits.
//!
//! The state is a map from the values of the live bit edges to an
//! unnormalized density operator `ρ = V·V†`, kept as a low-rank factor `V`
//! over a shared list of live factors (qubits, germs and reference
//! systems). Measurements split branches, consumed bits merge them by
//! concatenating factors, and tracing out a factor concatenates its slices.
//! Nodes are visited in a topological order chosen greedily to keep the
//! live dimension small.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::germs::GermModel;
use super::SimError;
use crate::circuit::{EdgeId, EdgeKind, GateKind, MixedCircuit, NodeId, Topology};
use crate::linalg::{offsets, permute_factors, strides, DensityOp, FactorKernel, SpaceShape, StateVec, C64, ZERO};

/// Default limit on the live state dimension (amplitudes per column).
pub const DEFAULT_BUDGET: usize = 1 << 14;

/// Eigenvalues of `V†V` below this fraction of the largest are dropped.
const RANK_TOL: f64 = 1e-13;
/// Branches with smaller total weight are discarded as impossible.
const ZERO_WEIGHT: f64 = 1e-28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Enumerate every measurement outcome with its exact probability.
    Branch,
    /// Follow one trajectory; one uniform draw per measurement, in
    /// execution order.
    Sample { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub mode: Mode,
    pub budget: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Branch,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SimOptions {
    pub fn sample(seed: u64) -> Self {
        Self {
            mode: Mode::Sample { seed },
            ..Self::default()
        }
    }
}

/// Boundary data for a run: a joint pure state whose leading factors are the
/// circuit's input qubits (in boundary order) and whose trailing factors are
/// reference systems carried through untouched, plus the input bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SimInput {
    state: StateVec,
    refs: usize,
    bits: Vec<bool>,
}

impl SimInput {
    pub fn basis(qubits: &[bool]) -> Self {
        Self::state(StateVec::from_bits(qubits))
    }

    pub fn state(v: StateVec) -> Self {
        Self {
            state: v,
            refs: 0,
            bits: Vec::new(),
        }
    }

    /// `v`'s last `refs` factors are reference systems.
    pub fn with_reference(v: StateVec, refs: usize) -> Self {
        Self {
            state: v,
            refs,
            bits: Vec::new(),
        }
    }

    pub fn with_bits(mut self, bits: Vec<bool>) -> Self {
        self.bits = bits;
        self
    }

    pub fn state_vec(&self) -> &StateVec {
        &self.state
    }

    pub fn refs(&self) -> usize {
        self.refs
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// One classical output value and the conditional output state.
#[derive(Debug, Clone)]
pub struct Branch {
    pub bits: Vec<bool>,
    pub probability: f64,
    /// Normalized state of the output qubits followed by any reference
    /// systems.
    pub state: DensityOp,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub branches: Vec<Branch>,
    pub output_qubits: usize,
    pub reference_dims: Vec<usize>,
    /// Measurement outcomes drawn in sample mode, in execution order.
    pub trajectory: Vec<(NodeId, bool)>,
    /// Largest live dimension reached.
    pub peak_dim: usize,
    /// The unnormalized output vector, phase included, when the run ends in
    /// a single pure branch (always the case without measurements or germs).
    pub pure_output: Option<StateVec>,
}

pub fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl RunResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Probability of each classical output string (port order, first
    /// output bit leftmost).
    pub fn classical_dist(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for b in &self.branches {
            *out.entry(bit_string(&b.bits)).or_insert(0.0) += b.probability;
        }
        out
    }

    pub fn output_shape(&self) -> SpaceShape {
        let mut dims = vec![2; self.output_qubits];
        dims.extend(&self.reference_dims);
        SpaceShape::new(dims).expect("dims ≥ 1")
    }

    /// `Σ p·ρ` over all branches (unnormalized if the run lost weight).
    pub fn averaged_state(&self) -> DensityOp {
        let shape = self.output_shape();
        let n = shape.total();
        let mut acc = DMatrix::from_element(n, n, ZERO);
        for b in &self.branches {
            acc += b.state.matrix() * C64::new(b.probability, 0.0);
        }
        DensityOp::new(shape, acc).expect("square")
    }

    pub fn branch(&self, bits: &[bool]) -> Result<&Branch, SimError> {
        self.branches
            .iter()
            .find(|b| b.bits == bits)
            .ok_or_else(|| SimError::ZeroProbability(bit_string(bits)))
    }
}

pub fn run_pure(c: &MixedCircuit, input: &SimInput, opts: &SimOptions) -> Result<RunResult, SimError> {
    run(c, None, input, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Qubit(EdgeId),
    Germ(EdgeId),
    Ref(usize),
}

struct Ensemble {
    labels: Vec<Label>,
    dims: Vec<usize>,
    bits: Vec<EdgeId>,
    branches: BTreeMap<Vec<bool>, DMatrix<C64>>,
    budget: usize,
    peak: usize,
}

fn compress(v: DMatrix<C64>) -> DMatrix<C64> {
    if v.ncols() <= 1 {
        return v;
    }
    let gram = v.adjoint() * &v;
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL * max && eig.eigenvalues[i] > 0.0)
        .collect();
    if keep.len() == v.ncols() && v.ncols() <= v.nrows() {
        return v;
    }
    let w = DMatrix::from_fn(v.ncols(), keep.len(), |r, k| eig.eigenvectors[(r, keep[k])]);
    v * w
}

fn weight(v: &DMatrix<C64>) -> f64 {
    v.norm_squared()
}

impl Ensemble {
    fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn find(&self, l: Label) -> usize {
        self.labels
            .iter()
            .position(|&x| x == l)
            .unwrap_or_else(|| panic!("live factor {l:?} missing"))
    }

    fn apply(&mut self, op: &DMatrix<C64>, targets: &[usize], filter: impl Fn(&[bool]) -> bool) {
        let kernel = FactorKernel::new(&self.dims, targets).expect("targets are live factors");
        for (key, v) in self.branches.iter_mut() {
            if !filter(key) {
                continue;
            }
            let rows = v.nrows();
            for col in v.as_mut_slice().chunks_mut(rows) {
                kernel.apply(op, col);
            }
        }
    }

    fn append(&mut self, label: Label, amps: &[C64]) -> Result<(), SimError> {
        let d = amps.len();
        let needed = self.total_dim() * d;
        if needed > self.budget {
            return Err(SimError::BudgetExceeded {
                needed,
                budget: self.budget,
            });
        }
        self.peak = self.peak.max(needed);
        for v in self.branches.values_mut() {
            *v = DMatrix::from_fn(v.nrows() * d, v.ncols(), |r, c| v[(r / d, c)] * amps[r % d]);
        }
        self.labels.push(label);
        self.dims.push(d);
        Ok(())
    }

    /// Rows of `v` where factor `idx` has value `digit`, as a factor over the
    /// remaining factors.
    fn slice(&self, v: &DMatrix<C64>, idx: usize, digit: usize) -> DMatrix<C64> {
        let st = strides(&self.dims);
        let rest: Vec<usize> = (0..self.dims.len()).filter(|&i| i != idx).collect();
        let rows = offsets(&self.dims, &st, &rest);
        let base = digit * st[idx];
        DMatrix::from_fn(rows.len(), v.ncols(), |r, c| v[(rows[r] + base, c)])
    }

    fn remove(&mut self, idx: usize) {
        self.labels.remove(idx);
        self.dims.remove(idx);
    }

    fn trace_out(&mut self, idx: usize) {
        let d = self.dims[idx];
        let branches = std::mem::take(&mut self.branches);
        for (key, v) in branches {
            let parts: Vec<DMatrix<C64>> = (0..d).map(|f| self.slice(&v, idx, f)).collect();
            let cols: usize = parts.iter().map(|p| p.ncols()).sum();
            let mut out = DMatrix::from_element(parts[0].nrows(), cols, ZERO);
            let mut at = 0;
            for p in parts {
                out.columns_mut(at, p.ncols()).copy_from(&p);
                at += p.ncols();
            }
            self.branches.insert(key, compress(out));
        }
        self.remove(idx);
    }

    /// Measures qubit factor `idx`; the outcome becomes live bit `edge`.
    fn measure(&mut self, idx: usize, edge: EdgeId, rng: Option<&mut ChaCha8Rng>) -> Option<bool> {
        let branches = std::mem::take(&mut self.branches);
        let mut drawn = None;
        match rng {
            None => {
                for (key, v) in branches {
                    for b in [false, true] {
                        let part = self.slice(&v, idx, b as usize);
                        if weight(&part) > ZERO_WEIGHT {
                            let mut k = key.clone();
                            k.push(b);
                            self.branches.insert(k, part);
                        }
                    }
                }
            }
            Some(rng) => {
                for (mut key, v) in branches {
                    let v0 = self.slice(&v, idx, 0);
                    let v1 = self.slice(&v, idx, 1);
                    let (w0, w1) = (weight(&v0), weight(&v1));
                    let u: f64 = rng.gen();
                    let b = u * (w0 + w1) >= w0;
                    let (part, w) = if b { (v1, w1) } else { (v0, w0) };
                    key.push(b);
                    if w > ZERO_WEIGHT {
                        let scale = ((w0 + w1) / w).sqrt();
                        self.branches.insert(key, part * C64::new(scale, 0.0));
                    }
                    drawn = Some(b);
                }
            }
        }
        self.remove(idx);
        self.bits.push(edge);
        drawn
    }

    /// Removes the live bits at `consumed` (conditioning on them through
    /// `f`, which maps their values to appended bits) and merges branches
    /// that now share a key.
    fn rekey(&mut self, consumed: &[EdgeId], produced: &[EdgeId], f: impl Fn(&[bool]) -> Vec<bool>) {
        let pos: Vec<usize> = consumed
            .iter()
            .map(|e| self.bits.iter().position(|b| b == e).expect("live bit"))
            .collect();
        let branches = std::mem::take(&mut self.branches);
        let mut merged: BTreeMap<Vec<bool>, Vec<DMatrix<C64>>> = BTreeMap::new();
        for (key, v) in branches {
            let vals: Vec<bool> = pos.iter().map(|&p| key[p]).collect();
            let mut k: Vec<bool> = key.iter().enumerate().filter(|(i, _)| !pos.contains(i)).map(|(_, &b)| b).collect();
            k.extend(f(&vals));
            merged.entry(k).or_default().push(v);
        }
        for (k, parts) in merged {
            let v = if parts.len() == 1 {
                parts.into_iter().next().expect("one part")
            } else {
                let cols: usize = parts.iter().map(|p| p.ncols()).sum();
                let mut out = DMatrix::from_element(parts[0].nrows(), cols, ZERO);
                let mut at = 0;
                for p in parts {
                    out.columns_mut(at, p.ncols()).copy_from(&p);
                    at += p.ncols();
                }
                compress(out)
            };
            self.branches.insert(k, v);
        }
        let mut keep: Vec<EdgeId> = self.bits.iter().copied().filter(|e| !consumed.contains(e)).collect();
        keep.extend_from_slice(produced);
        self.bits = keep;
    }

    fn relabel(&mut self, from: Label, to: Label) {
        let i = self.find(from);
        self.labels[i] = to;
    }
}

/// Picks the next node among those whose inputs are all available: classical
/// logic first, then measurements, then unitaries, and initializations last
/// (those feeding an otherwise ready gate first, then by the consumer's
/// topological position).
fn pick(ready: &[NodeId], c: &MixedCircuit, missing: &BTreeMap<NodeId, usize>, topo_pos: &BTreeMap<NodeId, usize>, consumer: &BTreeMap<NodeId, NodeId>) -> usize {
    let rank = |n: NodeId| -> (u8, usize, usize) {
        match c.node(n).expect("node") {
            GateKind::Classical { .. } => (0, 0, n.0),
            GateKind::Measure => (1, 0, n.0),
            GateKind::Unitary { .. } => (2, topo_pos[&n], n.0),
            _ => {
                let to = consumer[&n];
                let soon = missing.get(&to).is_none_or(|&m| m <= 1);
                (if soon { 3 } else { 4 }, topo_pos.get(&to).copied().unwrap_or(usize::MAX), n.0)
            }
        }
    };
    (0..ready.len()).min_by_key(|&i| rank(ready[i])).expect("nonempty")
}

pub(crate) fn run(
    c: &MixedCircuit,
    model: Option<&GermModel>,
    input: &SimInput,
    opts: &SimOptions,
) -> Result<RunResult, SimError> {
    let topo = Topology::new(c)?;
    let ins = topo.boundary_inputs(c);
    let in_q: Vec<EdgeId> = ins.iter().copied().filter(|&e| c.edge(e).kind == EdgeKind::Qubit).collect();
    let in_b: Vec<EdgeId> = ins.iter().copied().filter(|&e| c.edge(e).kind == EdgeKind::Bit).collect();
    let dims = input.state.shape().dims();
    let refs = input.refs;
    if dims.len() < refs || dims.len() - refs != in_q.len() {
        return Err(SimError::DimensionMismatch {
            what: "input qubit factors",
            expected: in_q.len(),
            got: dims.len().saturating_sub(refs),
        });
    }
    if let Some(&d) = dims[..in_q.len()].iter().find(|&&d| d != 2) {
        return Err(SimError::DimensionMismatch {
            what: "input qubit dimension",
            expected: 2,
            got: d,
        });
    }
    if input.bits.len() != in_b.len() {
        return Err(SimError::DimensionMismatch {
            what: "input bits",
            expected: in_b.len(),
            got: input.bits.len(),
        });
    }
    let start = input.state.shape().total();
    if start > opts.budget {
        return Err(SimError::BudgetExceeded {
            needed: start,
            budget: opts.budget,
        });
    }

    let germ_dim = model.map_or(1, GermModel::dim);
    let germs = germ_dim > 1;
    // Per-edge error matrices, skipping exact identities.
    let edge_ops: Vec<Option<DMatrix<C64>>> = match model {
        None => vec![None; c.edge_count()],
        Some(m) => (0..c.edge_count())
            .map(|i| {
                let e = EdgeId(i);
                let op = m.edge_op(e);
                (c.edge(e).kind == EdgeKind::Qubit && !op.is_identity(0.0)).then(|| op.matrix().clone())
            })
            .collect(),
    };

    let mut labels: Vec<Label> = in_q.iter().map(|&e| Label::Qubit(e)).collect();
    labels.extend((0..refs).map(Label::Ref));
    let mut ens = Ensemble {
        labels,
        dims: dims.to_vec(),
        bits: in_b.clone(),
        branches: BTreeMap::from([(
            input.bits.clone(),
            DMatrix::from_column_slice(start, 1, input.state.amps()),
        )]),
        budget: opts.budget,
        peak: start,
    };
    if germs {
        let g0 = model.expect("germs imply a model").g0().amps().to_vec();
        for &e in &in_q {
            ens.append(Label::Germ(e), &g0)?;
        }
    }
    let mut rng = match opts.mode {
        Mode::Branch => None,
        Mode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut trajectory = Vec::new();

    let apply_edge_error = |ens: &mut Ensemble, e: EdgeId| {
        if let Some(op) = &edge_ops[e.0] {
            let q = ens.find(Label::Qubit(e));
            if germs {
                let g = ens.find(Label::Germ(e));
                ens.apply(op, &[g, q], |_| true);
            } else {
                ens.apply(op, &[q], |_| true);
            }
        }
    };

    let topo_pos: BTreeMap<NodeId, usize> = topo.order().iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut missing: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut consumer: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut ready = Vec::new();
    for (n, kind) in c.nodes() {
        match kind {
            GateKind::Input | GateKind::Output => continue,
            GateKind::InitZero => {
                consumer.insert(n, c.edge(topo.outputs(n)[0]).to.node);
            }
            _ => {}
        }
        let k = topo.inputs(n).iter().filter(|&&e| !ins.contains(&e)).count();
        if k == 0 {
            ready.push(n);
        } else {
            missing.insert(n, k);
        }
    }

    while !ready.is_empty() {
        let n = ready.swap_remove(pick(&ready, c, &missing, &topo_pos, &consumer));
        let inputs = topo.inputs(n);
        let outputs = topo.outputs(n);
        match c.node(n).expect("node") {
            GateKind::InitZero => {
                let e = outputs[0];
                ens.append(Label::Qubit(e), &[C64::new(1.0, 0.0), ZERO])?;
                if germs {
                    let g0 = model.expect("model").g0().amps().to_vec();
                    ens.append(Label::Germ(e), &g0)?;
                }
            }
            GateKind::Measure => {
                let e = inputs[0];
                apply_edge_error(&mut ens, e);
                if germs {
                    let g = ens.find(Label::Germ(e));
                    ens.trace_out(g);
                }
                let q = ens.find(Label::Qubit(e));
                if let Some(b) = ens.measure(q, outputs[0], rng.as_mut()) {
                    trajectory.push((n, b));
                }
            }
            GateKind::Classical { inputs: ni, outputs: no, table } => {
                let (ni, no) = (*ni, *no);
                ens.rekey(inputs, outputs, |vals| {
                    let x = vals.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
                    debug_assert_eq!(vals.len(), ni);
                    let w = table[x];
                    (0..no).map(|i| w >> (no - 1 - i) & 1 == 1).collect()
                });
            }
            GateKind::Unitary { gate, controls } => {
                let k = inputs.len() - controls;
                let (qin, cin) = inputs.split_at(k);
                for &e in qin {
                    apply_edge_error(&mut ens, e);
                }
                if germs {
                    let m = model.expect("model");
                    let mix = m.mixer_op(n, k);
                    if !mix.is_identity(0.0) {
                        let gs: Vec<usize> = qin.iter().map(|&e| ens.find(Label::Germ(e))).collect();
                        ens.apply(mix.matrix(), &gs, |_| true);
                    }
                }
                let qs: Vec<usize> = qin.iter().map(|&e| ens.find(Label::Qubit(e))).collect();
                if cin.is_empty() {
                    ens.apply(gate.operator().matrix(), &qs, |_| true);
                } else {
                    let pos: Vec<usize> = cin
                        .iter()
                        .map(|e| ens.bits.iter().position(|b| b == e).expect("live control bit"))
                        .collect();
                    ens.apply(gate.operator().matrix(), &qs, |key| pos.iter().all(|&p| key[p]));
                }
                for (&a, &b) in qin.iter().zip(outputs) {
                    ens.relabel(Label::Qubit(a), Label::Qubit(b));
                    if germs {
                        ens.relabel(Label::Germ(a), Label::Germ(b));
                    }
                }
                if !cin.is_empty() {
                    ens.rekey(cin, &[], |_| Vec::new());
                }
            }
            GateKind::Input | GateKind::Output => unreachable!("boundary nodes are not scheduled"),
        }
        for &e in outputs {
            let to = c.edge(e).to.node;
            if let Some(m) = missing.get_mut(&to) {
                *m -= 1;
                if *m == 0 {
                    missing.remove(&to);
                    ready.push(to);
                }
            }
        }
    }

    // Edges into the outputs still carry their errors; then drop the germs.
    let outs: Vec<EdgeId> = topo.boundary_outputs(c);
    for &e in &outs {
        if c.edge(e).kind == EdgeKind::Qubit {
            apply_edge_error(&mut ens, e);
        }
    }
    while let Some(g) = ens.labels.iter().position(|l| matches!(l, Label::Germ(_))) {
        ens.trace_out(g);
    }
    let out_q: Vec<EdgeId> = outs.iter().copied().filter(|&e| c.edge(e).kind == EdgeKind::Qubit).collect();
    let out_b: Vec<EdgeId> = outs.iter().copied().filter(|&e| c.edge(e).kind == EdgeKind::Bit).collect();
    let mut order: Vec<usize> = out_q.iter().map(|&e| ens.find(Label::Qubit(e))).collect();
    order.extend((0..refs).map(|i| ens.find(Label::Ref(i))));
    let bit_pos: Vec<usize> = out_b
        .iter()
        .map(|e| ens.bits.iter().position(|b| b == e).expect("output bit is live"))
        .collect();
    let mut out_dims: Vec<usize> = vec![2; out_q.len()];
    out_dims.extend(&dims[in_q.len()..]);
    let shape = SpaceShape::new(out_dims)?;

    let mut branches = Vec::new();
    let mut pure_output = None;
    for (key, v) in &ens.branches {
        let p = weight(v);
        if p <= ZERO_WEIGHT {
            continue;
        }
        let rows = v.nrows();
        let mut permuted = DMatrix::from_element(rows, v.ncols(), ZERO);
        for (c, col) in v.as_slice().chunks(rows).enumerate() {
            let data = permute_factors(&ens.dims, &order, col)?;
            permuted.column_mut(c).copy_from_slice(&data);
        }
        if ens.branches.len() == 1 && permuted.ncols() == 1 {
            pure_output = Some(StateVec::new(shape.clone(), permuted.as_slice().to_vec())?);
        }
        let rho = (&permuted * permuted.adjoint()) / C64::new(p, 0.0);
        branches.push(Branch {
            bits: bit_pos.iter().map(|&i| key[i]).collect(),
            probability: p,
            state: DensityOp::new(shape.clone(), rho)?,
        });
    }
    branches.sort_by(|a, b| a.bits.cmp(&b.bits));
    Ok(RunResult {
        branches,
        output_qubits: out_q.len(),
        reference_dims: dims[in_q.len()..].to_vec(),
        trajectory,
        peak_dim: ens.peak,
        pure_output,
    })
}
