//! JSON circuit documents.
//!
//! ```json
//! {"name": "wire",
//!  "nodes": [{"id": 0, "kind": "input"}, {"id": 1, "kind": "unitary", "gate": "H"},
//!            {"id": 2, "kind": "output"}],
//!  "edges": [{"from": [0, 0], "to": [1, 0], "type": "q"},
//!            {"from": [1, 0], "to": [2, 0], "type": "q"}]}
//! ```
//!
//! Classical nodes carry `"table"`, a list of output bit strings indexed by
//! the input value (port 0 is the most significant bit). Unitary nodes carry
//! either a builtin `"gate"` name or a `"matrix"` of rows of `[re, im]`
//! pairs, plus an optional `"controls"` count. Unknown fields are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Builtin, EdgeKind, GateKind, MixedCircuit, NodeId, UnitaryGate};
use crate::linalg::{DenseOperator, LinalgError, SpaceShape, C64};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("node {id}: {msg}")]
    Node { id: usize, msg: String },
    #[error("edge {index}: {msg}")]
    Edge { index: usize, msg: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(usize),
    #[error("matrix: {0}")]
    Matrix(#[from] LinalgError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    name: String,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    controls: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: [usize; 2],
    to: [usize; 2],
    #[serde(rename = "type")]
    kind: String,
}

pub fn parse_circuit(text: &str) -> Result<MixedCircuit, FormatError> {
    let doc: CircuitDoc = serde_json::from_str(text)?;
    let mut c = MixedCircuit::new(doc.name);
    for n in doc.nodes {
        let id = n.id;
        if c.node(NodeId(id)).is_some() {
            return Err(FormatError::DuplicateNode(id));
        }
        let kind = node_kind(n)?;
        c.insert(NodeId(id), kind);
    }
    for (index, e) in doc.edges.into_iter().enumerate() {
        let kind = match e.kind.as_str() {
            "q" => EdgeKind::Qubit,
            "c" => EdgeKind::Bit,
            other => {
                return Err(FormatError::Edge {
                    index,
                    msg: format!("unknown edge type {other:?}, expected \"q\" or \"c\""),
                })
            }
        };
        c.connect((NodeId(e.from[0]), e.from[1]), (NodeId(e.to[0]), e.to[1]), kind);
    }
    Ok(c)
}

fn node_kind(n: NodeDoc) -> Result<GateKind, FormatError> {
    let id = n.id;
    let err = |msg: String| FormatError::Node { id, msg };
    let only = |allowed: &[&str]| -> Result<(), FormatError> {
        let present = [
            ("table", n.table.is_some()),
            ("gate", n.gate.is_some()),
            ("matrix", n.matrix.is_some()),
            ("controls", n.controls.is_some()),
        ];
        for (field, set) in present {
            if set && !allowed.contains(&field) {
                return Err(FormatError::Node {
                    id,
                    msg: format!("field {field:?} not allowed on kind {:?}", n.kind),
                });
            }
        }
        Ok(())
    };
    match n.kind.as_str() {
        "init0" => only(&[]).map(|_| GateKind::InitZero),
        "measure" => only(&[]).map(|_| GateKind::Measure),
        "input" => only(&[]).map(|_| GateKind::Input),
        "output" => only(&[]).map(|_| GateKind::Output),
        "classical" => {
            only(&["table"])?;
            let table = n.table.as_ref().ok_or_else(|| err("classical node needs a table".into()))?;
            parse_table(table).map_err(err)
        }
        "unitary" => {
            only(&["gate", "matrix", "controls"])?;
            let gate = match (&n.gate, &n.matrix) {
                (Some(name), None) => UnitaryGate::builtin(name.parse::<Builtin>().map_err(err)?),
                (None, Some(rows)) => {
                    let dim = rows.len();
                    if !dim.is_power_of_two() || dim < 2 {
                        return Err(err(format!("matrix dimension {dim} is not a power of two ≥ 2")));
                    }
                    let rows: Vec<Vec<C64>> =
                        rows.iter().map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect()).collect();
                    let shape = SpaceShape::qubits(dim.trailing_zeros() as usize);
                    UnitaryGate::custom(DenseOperator::from_rows(shape, &rows)?)
                }
                _ => return Err(err("unitary node needs exactly one of \"gate\" or \"matrix\"".into())),
            };
            Ok(GateKind::Unitary {
                gate,
                controls: n.controls.unwrap_or(0),
            })
        }
        other => Err(err(format!("unknown node kind {other:?}"))),
    }
}

fn parse_table(rows: &[String]) -> Result<GateKind, String> {
    if rows.is_empty() || !rows.len().is_power_of_two() {
        return Err(format!("table length {} is not a power of two", rows.len()));
    }
    let inputs = rows.len().trailing_zeros() as usize;
    let outputs = rows[0].len();
    if outputs > 63 {
        return Err("too many outputs".into());
    }
    let mut table = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != outputs {
            return Err(format!("table row {i} has {} bits, expected {outputs}", r.len()));
        }
        let mut word = 0u64;
        for ch in r.chars() {
            word = (word << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(format!("table row {i}: {r:?} is not a bit string")),
                };
        }
        table.push(word);
    }
    Ok(GateKind::Classical { inputs, outputs, table })
}

pub fn emit_circuit(c: &MixedCircuit) -> String {
    let nodes = c
        .nodes()
        .map(|(id, kind)| {
            let mut doc = NodeDoc {
                id: id.0,
                kind: String::new(),
                table: None,
                gate: None,
                matrix: None,
                controls: None,
            };
            doc.kind = match kind {
                GateKind::InitZero => "init0",
                GateKind::Measure => "measure",
                GateKind::Input => "input",
                GateKind::Output => "output",
                GateKind::Classical { outputs, table, .. } => {
                    doc.table = Some(
                        table
                            .iter()
                            .map(|w| (0..*outputs).rev().map(|b| if w >> b & 1 == 1 { '1' } else { '0' }).collect())
                            .collect(),
                    );
                    "classical"
                }
                GateKind::Unitary { gate, controls } => {
                    match gate.name() {
                        Some(b) => doc.gate = Some(b.name().to_string()),
                        None => {
                            let op = gate.operator();
                            doc.matrix = Some(
                                (0..op.dim())
                                    .map(|r| {
                                        (0..op.dim())
                                            .map(|col| {
                                                let z = op.entry(r, col);
                                                [z.re, z.im]
                                            })
                                            .collect()
                                    })
                                    .collect(),
                            )
                        }
                    }
                    if *controls > 0 {
                        doc.controls = Some(*controls);
                    }
                    "unitary"
                }
            }
            .to_string();
            doc
        })
        .collect();
    let edges = c
        .edges()
        .map(|(_, e)| EdgeDoc {
            from: [e.from.node.0, e.from.port],
            to: [e.to.node.0, e.to.port],
            kind: match e.kind {
                EdgeKind::Qubit => "q",
                EdgeKind::Bit => "c",
            }
            .to_string(),
        })
        .collect();
    let doc = CircuitDoc {
        name: c.name().to_string(),
        nodes,
        edges,
    };
    serde_json::to_string_pretty(&doc).expect("circuit documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_document() {
        let text = r#"{"name": "x",
            "nodes": [{"id": 0, "kind": "input"}, {"id": 1, "kind": "unitary", "gate": "H"},
                      {"id": 2, "kind": "measure"}, {"id": 3, "kind": "classical", "table": ["00", "11"]},
                      {"id": 4, "kind": "output"}],
            "edges": [{"from": [0, 0], "to": [1, 0], "type": "q"},
                      {"from": [1, 0], "to": [2, 0], "type": "q"},
                      {"from": [2, 0], "to": [3, 0], "type": "c"},
                      {"from": [3, 0], "to": [4, 0], "type": "c"},
                      {"from": [3, 1], "to": [4, 1], "type": "c"}]}"#;
        let c = parse_circuit(text).unwrap();
        assert!(c.validate().is_empty());
        assert_eq!(c.node(NodeId(3)), Some(&GateKind::copy()));
        let again = parse_circuit(&emit_circuit(&c)).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_fields_and_misplaced_fields() {
        let extra = r#"{"name": "x", "nodes": [], "edges": [], "color": 1}"#;
        assert!(matches!(parse_circuit(extra), Err(FormatError::Json(_))));
        let misplaced = r#"{"name": "x", "nodes": [{"id": 0, "kind": "measure", "gate": "H"}], "edges": []}"#;
        assert!(matches!(parse_circuit(misplaced), Err(FormatError::Node { id: 0, .. })));
        let bad_type = r#"{"name": "x", "nodes": [], "edges": [{"from": [0,0], "to": [1,0], "type": "z"}]}"#;
        assert!(matches!(parse_circuit(bad_type), Err(FormatError::Edge { index: 0, .. })));
    }

    #[test]
    fn custom_matrix_round_trips() {
        let text = r#"{"name": "m", "nodes": [{"id": 0, "kind": "unitary", "matrix": [[[0,0],[0,-1]],[[0,1],[0,0]]], "controls": 1}], "edges": []}"#;
        let c = parse_circuit(text).unwrap();
        let GateKind::Unitary { gate, controls } = c.node(NodeId(0)).unwrap() else { panic!() };
        assert_eq!(*controls, 1);
        assert!(gate.operator().max_abs_diff(&Builtin::Y.operator()) < 1e-15);
        assert_eq!(parse_circuit(&emit_circuit(&c)).unwrap(), c);
    }
}
