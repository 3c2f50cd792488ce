//! Germ-only bookkeeping: which germ rides each qubit edge, and the ordered
//! list of operations the germs undergo.

use nalgebra::DMatrix;

use super::pauli::{pauli_decompose, EdgeDecomposition};
use super::NoiseError;
use crate::circuit::{EdgeId, EdgeKind, GateKind, NodeId, Topology};
use crate::linalg::{FactorKernel, C64, ZERO};
use crate::sim::InfectedCircuit;

#[derive(Debug, Clone)]
pub(crate) enum Event {
    /// The error of qubit edge `edge`, acting on `germ`.
    Edge { edge: EdgeId, germ: usize },
    /// A non-identity mixer on the listed germs (gate port order).
    Mix { node: NodeId, germs: Vec<usize>, op: DMatrix<C64> },
}

#[derive(Debug, Clone)]
pub(crate) struct GermTracks {
    pub dim: usize,
    pub germs: usize,
    pub germ_of_edge: Vec<Option<usize>>,
    pub events: Vec<Event>,
    /// Decomposition of each qubit edge's error, by edge id.
    pub decomps: Vec<Option<EdgeDecomposition>>,
    pub g0: Vec<C64>,
}

impl GermTracks {
    pub fn new(ic: &InfectedCircuit) -> Result<Self, NoiseError> {
        let c = ic.base();
        let m = ic.model();
        let topo = Topology::new(c)?;
        let mut germ_of_edge = vec![None; c.edge_count()];
        let mut germs = 0;
        let mut events = Vec::new();
        for &n in topo.order() {
            let ins = topo.inputs(n);
            let outs = topo.outputs(n);
            for &e in ins {
                if c.edge(e).kind == EdgeKind::Qubit {
                    let germ = germ_of_edge[e.0].expect("germ assigned upstream");
                    events.push(Event::Edge { edge: e, germ });
                }
            }
            match c.node(n).expect("node") {
                GateKind::InitZero | GateKind::Input => {
                    for &e in outs {
                        if c.edge(e).kind == EdgeKind::Qubit {
                            germ_of_edge[e.0] = Some(germs);
                            germs += 1;
                        }
                    }
                }
                GateKind::Unitary { controls, .. } => {
                    let k = ins.len() - controls;
                    let gs: Vec<usize> = ins[..k].iter().map(|e| germ_of_edge[e.0].expect("germ")).collect();
                    let mix = m.mixer_op(n, k);
                    if !mix.is_identity(0.0) {
                        events.push(Event::Mix {
                            node: n,
                            germs: gs.clone(),
                            op: mix.matrix().clone(),
                        });
                    }
                    for (&e, g) in outs.iter().zip(gs) {
                        germ_of_edge[e.0] = Some(g);
                    }
                }
                _ => {}
            }
        }
        let decomps = (0..c.edge_count())
            .map(|i| {
                let e = EdgeId(i);
                if c.edge(e).kind == EdgeKind::Qubit {
                    pauli_decompose(m.edge_op(e)).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            dim: m.dim(),
            germs,
            germ_of_edge,
            events,
            decomps,
            g0: m.g0().amps().to_vec(),
        })
    }

    pub fn decomp(&self, e: EdgeId) -> &EdgeDecomposition {
        self.decomps[e.0].as_ref().expect("qubit edge")
    }
}

/// A state vector over a subset of germs, in the order given by `members`.
#[derive(Debug, Clone)]
pub(crate) struct Register {
    pub members: Vec<usize>,
    pub dim: usize,
    pub amps: Vec<C64>,
}

impl Register {
    pub fn fresh(members: Vec<usize>, dim: usize, g0: &[C64], budget: usize) -> Result<Self, NoiseError> {
        let total = dim
            .checked_pow(members.len() as u32)
            .filter(|&t| t <= budget)
            .ok_or(NoiseError::BudgetExceeded {
                germs: members.len(),
                dim,
                budget,
            })?;
        let mut amps = vec![C64::new(1.0, 0.0)];
        for _ in &members {
            let mut next = Vec::with_capacity(amps.len() * dim);
            for a in &amps {
                next.extend(g0.iter().map(|g| a * g));
            }
            amps = next;
        }
        debug_assert_eq!(amps.len(), total);
        Ok(Self { members, dim, amps })
    }

    fn local(&self, germ: usize) -> usize {
        self.members.iter().position(|&g| g == germ).expect("germ in register")
    }

    pub fn contains(&self, germ: usize) -> bool {
        self.members.contains(&germ)
    }

    pub fn apply(&mut self, op: &DMatrix<C64>, germs: &[usize]) {
        if self.dim == 1 {
            // Scalar germs: the operator is a number.
            let s = op[(0, 0)];
            self.amps.iter_mut().for_each(|a| *a *= s);
            return;
        }
        let targets: Vec<usize> = germs.iter().map(|&g| self.local(g)).collect();
        let dims = vec![self.dim; self.members.len()];
        FactorKernel::new(&dims, &targets).expect("targets").apply(op, &mut self.amps);
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Reduced density matrix of one germ.
    pub fn reduced(&self, germ: usize) -> DMatrix<C64> {
        let k = self.local(germ);
        let n = self.members.len();
        let d = self.dim;
        let stride = d.pow((n - 1 - k) as u32);
        let mut rho = DMatrix::from_element(d, d, ZERO);
        for (i, a) in self.amps.iter().enumerate() {
            let ai = (i / stride) % d;
            let base = i - ai * stride;
            for bi in 0..d {
                let b = self.amps[base + bi * stride];
                rho[(ai, bi)] += a * b.conj();
            }
        }
        rho
    }
}

/// Disjoint-set forest over germ indices.
pub(crate) struct Clusters {
    parent: Vec<usize>,
}

impl Clusters {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Members of every cluster, each sorted, clusters ordered by their
    /// smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for g in 0..n {
            let r = self.find(g);
            by_root.entry(r).or_default().push(g);
        }
        by_root.into_values().collect()
    }
}
