//! Germ models and infected circuits.
//!
//! A germ is a `d`-dimensional register that rides along with a qubit. Each
//! qubit edge applies an error operator `E` to `germ ⊗ qubit` (germ factor
//! most significant), each unitary gate applies a mixing operator `M` to the
//! germs of its input qubits in port order, and every qubit creation — an
//! initialization or a circuit input — creates a fresh germ in `|g₀⟩`. Bits
//! carry no germs: the germ of a measured qubit is traced out.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;

use super::SimError;
use crate::circuit::{EdgeId, EdgeKind, GateKind, MixedCircuit, NodeId};
use crate::linalg::{DenseOperator, SpaceShape, StateVec, C64, ONE, STRUCT_TOL, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> DenseOperator {
        match self {
            Axis::X => crate::circuit::pauli_x(),
            Axis::Y => crate::circuit::pauli_y(),
            Axis::Z => crate::circuit::pauli_z(),
        }
    }
}

/// Concrete germ behaviours. These are modelling choices, not the only
/// possible germs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinGermFamily {
    Identity,
    /// `E = cos θ·I⊗I + i sin θ·I⊗P`; trivial germ (`d = 1` unless widened).
    CoherentRotation { theta: f64, axis: Axis },
    /// A clock germ `|t⟩ ↦ |t+1 mod d⟩` that starts rotating its qubit by
    /// `exp(iθX)` once `t ≥ threshold`.
    DelayedRotation { clock_dim: usize, threshold: usize, theta: f64 },
    /// `d = 2`, basis {dormant, active}; an active germ rotates its qubit by
    /// `exp(iθX)` on every edge and is copied onto the other germs of every
    /// gate it passes through.
    SpreadingFlag { theta: f64 },
}

impl BuiltinGermFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinGermFamily::Identity => "identity",
            BuiltinGermFamily::CoherentRotation { .. } => "coherent_rotation",
            BuiltinGermFamily::DelayedRotation { .. } => "delayed_rotation",
            BuiltinGermFamily::SpreadingFlag { .. } => "spreading_flag",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BuiltinGermFamily::Identity | BuiltinGermFamily::CoherentRotation { .. } => 1,
            BuiltinGermFamily::DelayedRotation { clock_dim, .. } => *clock_dim,
            BuiltinGermFamily::SpreadingFlag { .. } => 2,
        }
    }
}

impl fmt::Display for BuiltinGermFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinGermFamily::Identity => write!(f, "identity"),
            BuiltinGermFamily::CoherentRotation { theta, axis } => write!(f, "coherent_rotation(θ={theta}, {axis:?})"),
            BuiltinGermFamily::DelayedRotation {
                clock_dim,
                threshold,
                theta,
            } => write!(f, "delayed_rotation(d={clock_dim}, n0={threshold}, θ={theta})"),
            BuiltinGermFamily::SpreadingFlag { theta } => write!(f, "spreading_flag(θ={theta})"),
        }
    }
}

/// `exp(iθP) = cos θ·I + i sin θ·P` for a Pauli `P`.
pub fn pauli_rotation(axis: Axis, theta: f64) -> DenseOperator {
    let id = DenseOperator::identity(SpaceShape::qubits(1));
    id.scaled(C64::new(theta.cos(), 0.0))
        .add(&axis.pauli().scaled(C64::new(0.0, theta.sin())))
        .expect("same shape")
}

fn germ_qubit_shape(d: usize) -> SpaceShape {
    SpaceShape::new(vec![d, 2]).expect("d ≥ 1")
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mixer {
    Identity,
    /// CNOT from germ `i` onto every germ `j > i`, for `i` ascending.
    FlagCascade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GermModel {
    dim: usize,
    g0: StateVec,
    edge_error: DenseOperator,
    mixer: Mixer,
    family: BuiltinGermFamily,
    edge_overrides: BTreeMap<EdgeId, DenseOperator>,
    gate_overrides: BTreeMap<NodeId, DenseOperator>,
}

impl GermModel {
    pub fn identity() -> Self {
        Self::from_family(BuiltinGermFamily::Identity).expect("identity model is valid")
    }

    pub fn from_family(family: BuiltinGermFamily) -> Result<Self, SimError> {
        let d = family.dim();
        if d == 0 {
            return Err(SimError::Model("germ dimension must be at least 1".into()));
        }
        let (edge_error, mixer) = match family {
            BuiltinGermFamily::Identity => (DenseOperator::identity(germ_qubit_shape(1)), Mixer::Identity),
            BuiltinGermFamily::CoherentRotation { theta, axis } => (
                pauli_rotation(axis, theta).reshaped(germ_qubit_shape(1)).expect("2x2"),
                Mixer::Identity,
            ),
            BuiltinGermFamily::DelayedRotation {
                clock_dim,
                threshold,
                theta,
            } => {
                let rot = pauli_rotation(Axis::X, theta);
                let id = DenseOperator::identity(SpaceShape::qubits(1));
                let mut m = nalgebra::DMatrix::from_element(2 * clock_dim, 2 * clock_dim, ZERO);
                for t in 0..clock_dim {
                    let r = if t >= threshold { &rot } else { &id };
                    let next = (t + 1) % clock_dim;
                    for a in 0..2 {
                        for b in 0..2 {
                            m[(next * 2 + a, t * 2 + b)] = r.entry(a, b);
                        }
                    }
                }
                (DenseOperator::new(germ_qubit_shape(clock_dim), m)?, Mixer::Identity)
            }
            BuiltinGermFamily::SpreadingFlag { theta } => {
                let dormant = DenseOperator::real(SpaceShape::qubits(1), 1.0, &[1.0, 0.0, 0.0, 0.0]);
                let active = DenseOperator::real(SpaceShape::qubits(1), 1.0, &[0.0, 0.0, 0.0, 1.0]);
                let e = dormant
                    .tensor(&DenseOperator::identity(SpaceShape::qubits(1)))
                    .add(&active.tensor(&pauli_rotation(Axis::X, theta)))?;
                (e, Mixer::FlagCascade)
            }
        };
        edge_error.ensure_unitary()?;
        Ok(Self {
            dim: d,
            g0: StateVec::basis(SpaceShape::new(vec![d])?, 0),
            edge_error,
            mixer,
            family,
            edge_overrides: BTreeMap::new(),
            gate_overrides: BTreeMap::new(),
        })
    }

    /// Replaces the initial germ state; it must be a normalized vector of
    /// dimension `dim`.
    pub fn with_g0(mut self, g0: StateVec) -> Result<Self, SimError> {
        if g0.shape().total() != self.dim {
            return Err(SimError::DimensionMismatch {
                what: "initial germ state",
                expected: self.dim,
                got: g0.shape().total(),
            });
        }
        if (g0.norm() - 1.0).abs() > STRUCT_TOL {
            return Err(SimError::Model(format!("initial germ state has norm {}", g0.norm())));
        }
        self.g0 = StateVec::new(SpaceShape::new(vec![self.dim])?, g0.into_amps())?;
        Ok(self)
    }

    /// Uses `op` (on `germ ⊗ qubit`) as the error operator of edge `e`.
    pub fn override_edge(mut self, e: EdgeId, op: DenseOperator) -> Result<Self, SimError> {
        if op.dim() != 2 * self.dim {
            return Err(SimError::DimensionMismatch {
                what: "edge error override",
                expected: 2 * self.dim,
                got: op.dim(),
            });
        }
        op.ensure_unitary()?;
        self.edge_overrides.insert(e, op.reshaped(germ_qubit_shape(self.dim))?);
        Ok(self)
    }

    /// Uses `op` (on the germs of the gate's input qubits) as the mixing
    /// operator of gate `n`. Its arity is checked by [`infect`].
    pub fn override_gate(mut self, n: NodeId, op: DenseOperator) -> Result<Self, SimError> {
        op.ensure_unitary()?;
        self.gate_overrides.insert(n, op);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn g0(&self) -> &StateVec {
        &self.g0
    }

    pub fn family(&self) -> BuiltinGermFamily {
        self.family
    }

    pub fn edge_overrides(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edge_overrides.keys().copied()
    }

    pub fn gate_overrides(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.gate_overrides.keys().copied()
    }

    /// The error operator on `germ ⊗ qubit` for edge `e`.
    pub fn edge_op(&self, e: EdgeId) -> &DenseOperator {
        self.edge_overrides.get(&e).unwrap_or(&self.edge_error)
    }

    /// The mixing operator for a `k`-qubit gate at node `n`, on `d^k`.
    pub fn mixer_op(&self, n: NodeId, k: usize) -> DenseOperator {
        if let Some(op) = self.gate_overrides.get(&n) {
            return op.clone();
        }
        let shape = SpaceShape::new(vec![self.dim; k]).expect("d ≥ 1");
        match self.mixer {
            Mixer::Identity => DenseOperator::identity(shape),
            Mixer::FlagCascade => {
                let n = 1usize << k;
                let mut perm: Vec<usize> = (0..n).collect();
                for (x, slot) in perm.iter_mut().enumerate() {
                    let mut v = x;
                    for i in 0..k {
                        if v >> (k - 1 - i) & 1 == 1 {
                            for j in i + 1..k {
                                v ^= 1 << (k - 1 - j);
                            }
                        }
                    }
                    *slot = v;
                }
                let mut entries = vec![0.0; n * n];
                for (x, &y) in perm.iter().enumerate() {
                    entries[y * n + x] = 1.0;
                }
                DenseOperator::real(shape, 1.0, &entries)
            }
        }
    }

    /// True when every mixer is the identity (no germ–germ interaction
    /// unless a gate override says otherwise).
    pub fn mixers_trivial(&self) -> bool {
        self.mixer == Mixer::Identity && self.gate_overrides.is_empty()
    }

    pub fn is_identity_model(&self) -> bool {
        self.dim == 1
            && self.mixers_trivial()
            && self.edge_error.is_identity(0.0)
            && self.edge_overrides.values().all(|op| op.is_identity(0.0))
    }
}

/// A circuit paired with a germ model whose sites have been checked against
/// it.
#[derive(Debug, Clone)]
pub struct InfectedCircuit {
    base: MixedCircuit,
    model: GermModel,
}

/// One place where a germ operator acts, with the dimension of the space it
/// acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Create { node: NodeId, germ_dim: usize },
    Edge { edge: EdgeId, op_dim: usize },
    Mix { node: NodeId, germs: usize, op_dim: usize },
}

pub fn infect(c: &MixedCircuit, m: &GermModel) -> Result<InfectedCircuit, SimError> {
    c.check()?;
    for e in m.edge_overrides() {
        if e.0 >= c.edge_count() || c.edge(e).kind != EdgeKind::Qubit {
            return Err(SimError::Model(format!("edge override on {e}, which is not a qubit edge")));
        }
    }
    for n in m.gate_overrides() {
        let Some(k) = c.node(n).and_then(GateKind::unitary_qubits) else {
            return Err(SimError::Model(format!("gate override on {n}, which is not a unitary gate")));
        };
        let expected = m.dim().pow(k as u32);
        let got = m.gate_overrides[&n].dim();
        if got != expected {
            return Err(SimError::DimensionMismatch {
                what: "gate mixer override",
                expected,
                got,
            });
        }
    }
    Ok(InfectedCircuit {
        base: c.clone(),
        model: m.clone(),
    })
}

impl InfectedCircuit {
    pub fn base(&self) -> &MixedCircuit {
        &self.base
    }

    pub fn model(&self) -> &GermModel {
        &self.model
    }

    /// Every site the model acts on.
    pub fn sites(&self) -> Vec<Site> {
        let d = self.model.dim();
        let mut out = Vec::new();
        for (id, kind) in self.base.nodes() {
            match kind {
                GateKind::InitZero => out.push(Site::Create { node: id, germ_dim: d }),
                GateKind::Input => {
                    let qubits = self
                        .base
                        .edges()
                        .filter(|(_, e)| e.from.node == id && e.kind == EdgeKind::Qubit)
                        .count();
                    out.extend((0..qubits).map(|_| Site::Create { node: id, germ_dim: d }));
                }
                GateKind::Unitary { .. } => {
                    let k = kind.unitary_qubits().expect("unitary");
                    out.push(Site::Mix {
                        node: id,
                        germs: k,
                        op_dim: self.model.mixer_op(id, k).dim(),
                    });
                }
                _ => {}
            }
        }
        for e in self.base.qubit_edges() {
            out.push(Site::Edge {
                edge: e,
                op_dim: self.model.edge_op(e).dim(),
            });
        }
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    dim: usize,
    #[serde(default)]
    g0: Option<Vec<[f64; 2]>>,
    family: String,
    #[serde(default)]
    theta: Option<f64>,
    #[serde(default)]
    axis: Option<Axis>,
    #[serde(default)]
    clock_dim: Option<usize>,
    #[serde(default)]
    threshold: Option<usize>,
    #[serde(default)]
    site_overrides: Vec<OverrideDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideDoc {
    #[serde(default)]
    edge: Option<usize>,
    #[serde(default)]
    gate: Option<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

fn complex_rows(rows: &[Vec<[f64; 2]>]) -> Vec<Vec<C64>> {
    rows.iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect()
}

/// Parses a germ-model document:
/// `{"dim", "g0": [[re, im], …], "family", family parameters,
///   "site_overrides": [{"edge" | "gate": id, "matrix": rows}]}`.
pub fn parse_germ_model(text: &str) -> Result<GermModel, SimError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| SimError::Model(e.to_string()))?;
    let need = |v: Option<f64>, field: &str| v.ok_or_else(|| SimError::Model(format!("family needs {field:?}")));
    let family = match doc.family.as_str() {
        "identity" => BuiltinGermFamily::Identity,
        "coherent_rotation" => BuiltinGermFamily::CoherentRotation {
            theta: need(doc.theta, "theta")?,
            axis: doc.axis.unwrap_or(Axis::X),
        },
        "delayed_rotation" => BuiltinGermFamily::DelayedRotation {
            clock_dim: doc.clock_dim.unwrap_or(doc.dim),
            threshold: doc
                .threshold
                .ok_or_else(|| SimError::Model("family needs \"threshold\"".into()))?,
            theta: need(doc.theta, "theta")?,
        },
        "spreading_flag" => BuiltinGermFamily::SpreadingFlag {
            theta: need(doc.theta, "theta")?,
        },
        other => return Err(SimError::Model(format!("unknown germ family {other:?}"))),
    };
    if family.dim() != doc.dim {
        return Err(SimError::DimensionMismatch {
            what: "germ dimension of family",
            expected: family.dim(),
            got: doc.dim,
        });
    }
    let mut model = GermModel::from_family(family)?;
    if let Some(g0) = doc.g0 {
        let amps: Vec<C64> = g0.iter().map(|&[re, im]| C64::new(re, im)).collect();
        let shape = SpaceShape::new(vec![amps.len()])?;
        model = model.with_g0(StateVec::new(shape, amps)?)?;
    }
    for o in doc.site_overrides {
        let rows = complex_rows(&o.matrix);
        let n = rows.len();
        let op = DenseOperator::from_rows(SpaceShape::new(vec![n.max(1)])?, &rows)?;
        model = match (o.edge, o.gate) {
            (Some(e), None) => model.override_edge(EdgeId(e), op)?,
            (None, Some(g)) => model.override_gate(NodeId(g), op)?,
            _ => return Err(SimError::Model("site override needs exactly one of \"edge\" or \"gate\"".into())),
        };
    }
    Ok(model)
}

/// `(|0⟩ + |1⟩)/√2`-style superposition over the first two basis states of a
/// `d`-dimensional germ, with amplitude `√p` on `|1⟩`.
pub fn germ_superposition(d: usize, p: f64) -> StateVec {
    let mut amps = vec![ZERO; d];
    amps[0] = ONE * (1.0 - p).sqrt();
    amps[1] = ONE * p.sqrt();
    StateVec::new(SpaceShape::new(vec![d]).expect("d ≥ 1"), amps).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_operators_are_unitary() {
        let fams = [
            BuiltinGermFamily::Identity,
            BuiltinGermFamily::CoherentRotation {
                theta: 0.3,
                axis: Axis::Y,
            },
            BuiltinGermFamily::DelayedRotation {
                clock_dim: 5,
                threshold: 2,
                theta: 0.4,
            },
            BuiltinGermFamily::SpreadingFlag { theta: 0.2 },
        ];
        for f in fams {
            let m = GermModel::from_family(f).unwrap();
            assert!(m.edge_op(EdgeId(0)).is_unitary(1e-12), "{f}");
            assert_eq!(m.edge_op(EdgeId(0)).dim(), 2 * m.dim());
            for k in 1..=3 {
                assert!(m.mixer_op(NodeId(0), k).is_unitary(1e-12), "{f} k={k}");
            }
        }
    }

    #[test]
    fn delayed_rotation_advances_clock() {
        let m = GermModel::from_family(BuiltinGermFamily::DelayedRotation {
            clock_dim: 4,
            threshold: 2,
            theta: 0.5,
        })
        .unwrap();
        let e = m.edge_op(EdgeId(0));
        // |t=1⟩|0⟩ ↦ |t=2⟩|0⟩ (no rotation yet)
        assert!((e.entry(2 * 2, 2) - ONE).norm() < 1e-15);
        // |t=2⟩|0⟩ ↦ |t=3⟩(cos θ|0⟩ + i sin θ|1⟩)
        assert!((e.entry(3 * 2, 2 * 2) - C64::new(0.5f64.cos(), 0.0)).norm() < 1e-15);
        assert!((e.entry(3 * 2 + 1, 2 * 2) - C64::new(0.0, 0.5f64.sin())).norm() < 1e-15);
        // |t=3⟩ wraps to |t=0⟩
        assert!(e.entry(0, 3 * 2).norm() > 0.0);
    }

    #[test]
    fn flag_cascade_spreads_from_lower_ports() {
        let m = GermModel::from_family(BuiltinGermFamily::SpreadingFlag { theta: 0.1 }).unwrap();
        let mix = m.mixer_op(NodeId(0), 3);
        // flips apply in sequence: |100⟩ → |111⟩ → |110⟩, |110⟩ → |101⟩
        let img = |x: usize| (0..8).find(|&y| mix.entry(y, x).norm() > 0.5).unwrap();
        assert_eq!(img(0b100), 0b110);
        assert_eq!(img(0b010), 0b011);
        assert_eq!(img(0b110), 0b101);
        assert_eq!(img(0b000), 0b000);
    }

    #[test]
    fn parses_model_documents() {
        let m = parse_germ_model(r#"{"dim": 1, "family": "coherent_rotation", "theta": 0.1, "axis": "Z"}"#).unwrap();
        assert_eq!(m.family(), BuiltinGermFamily::CoherentRotation { theta: 0.1, axis: Axis::Z });
        let m = parse_germ_model(
            r#"{"dim": 2, "family": "spreading_flag", "theta": 0.2, "g0": [[0.6, 0], [0.8, 0]],
                "site_overrides": [{"edge": 3, "matrix": [[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],
                                                          [[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]}]}"#,
        )
        .unwrap();
        assert!(m.edge_op(EdgeId(3)).is_identity(0.0));
        assert!((m.g0().amps()[1].re - 0.8).abs() < 1e-15);
        assert!(parse_germ_model(r#"{"dim": 3, "family": "spreading_flag", "theta": 0.2}"#).is_err());
        assert!(parse_germ_model(r#"{"dim": 1, "family": "coherent_rotation"}"#).is_err());
        assert!(parse_germ_model(r#"{"dim": 1, "family": "identity", "bogus": 1}"#).is_err());
        let bad_g0 = r#"{"dim": 2, "family": "spreading_flag", "theta": 0.2, "g0": [[1,0],[1,0]]}"#;
        assert!(parse_germ_model(bad_g0).is_err());
    }

    #[test]
    fn infect_checks_override_arity() {
        let mut c = MixedCircuit::new("w");
        let i = c.add(GateKind::Input);
        let h = c.add(GateKind::unitary(crate::circuit::Builtin::H));
        let o = c.add(GateKind::Output);
        c.qubit((i, 0), (h, 0));
        c.qubit((h, 0), (o, 0));
        let m = GermModel::from_family(BuiltinGermFamily::SpreadingFlag { theta: 0.1 }).unwrap();
        let ok = m.clone().override_gate(h, DenseOperator::identity(SpaceShape::qubits(1))).unwrap();
        assert!(infect(&c, &ok).is_ok());
        let wrong = m.clone().override_gate(h, DenseOperator::identity(SpaceShape::qubits(2))).unwrap();
        assert!(matches!(infect(&c, &wrong), Err(SimError::DimensionMismatch { .. })));
        let not_gate = m.override_gate(o, DenseOperator::identity(SpaceShape::qubits(1))).unwrap();
        assert!(matches!(infect(&c, &not_gate), Err(SimError::Model(_))));
    }

    #[test]
    fn germ_sites_touch_only_germ_and_qubit_spaces() {
        let mut c = MixedCircuit::new("g");
        let z = c.add(GateKind::InitZero);
        let h = c.add(GateKind::unitary(crate::circuit::Builtin::H));
        let m = c.add(GateKind::Measure);
        let o = c.add(GateKind::Output);
        c.qubit((z, 0), (h, 0));
        c.qubit((h, 0), (m, 0));
        c.bit((m, 0), (o, 0));
        let model = GermModel::from_family(BuiltinGermFamily::SpreadingFlag { theta: 0.1 }).unwrap();
        let ic = infect(&c, &model).unwrap();
        let sites = ic.sites();
        assert_eq!(sites.len(), 1 + 1 + 2);
        for s in sites {
            match s {
                Site::Create { germ_dim, .. } => assert_eq!(germ_dim, 2),
                Site::Edge { op_dim, .. } => assert_eq!(op_dim, 4),
                Site::Mix { germs, op_dim, .. } => assert_eq!(op_dim, 2usize.pow(germs as u32)),
            }
        }
    }
}
