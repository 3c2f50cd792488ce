//! Fixed Pauli errors inside the teleportation gadget reduce to single
//! Pauli errors on the logical qubit.

use rayon::prelude::*;
use serde::Serialize;

use super::pauli::{PauliBasis, PAULI_LABELS};
use super::NoiseError;
use crate::circuit::{Builtin, EdgeId, GateKind, MixedCircuit};
use crate::linalg::{max_abs_diff, C64};
use crate::sim::{tomography, TomographyOptions};
use crate::transpile::teleport_gadget;

/// Tolerance on the superoperator distance for accepting a Pauli match.
pub const PAULI_MATCH_TOL: f64 = 1e-9;

/// Copies `c` with a Pauli gate spliced into each listed qubit edge
/// (labels 1, 2, 3 for X, Y, Z; 0 leaves the edge alone).
pub fn insert_paulis(c: &MixedCircuit, labels: &[(EdgeId, u8)]) -> MixedCircuit {
    let mut out = MixedCircuit::new(c.name().to_string());
    for (id, kind) in c.nodes() {
        out.insert(id, kind.clone());
    }
    for (id, e) in c.edges() {
        let j = labels.iter().find(|(x, _)| *x == id).map_or(0, |&(_, j)| j);
        let from = (e.from.node, e.from.port);
        let to = (e.to.node, e.to.port);
        if j == 0 {
            out.connect(from, to, e.kind);
        } else {
            let g = [Builtin::I, Builtin::X, Builtin::Y, Builtin::Z][j as usize];
            let n = out.add(GateKind::unitary(g));
            out.qubit(from, (n, 0));
            out.qubit((n, 0), to);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pushthrough {
    /// Pauli labels on the eight gadget edges (input edge first).
    pub pattern: String,
    /// The equivalent logical Pauli, `I` meaning no error.
    pub logical: char,
    pub scale: f64,
    /// Distance between the gadget's channel and `scale`·(conjugation by
    /// the logical Pauli).
    pub residual: f64,
}

/// Simulates the gadget with the given Paulis on its eight pattern edges
/// and identifies the resulting logical channel.
pub fn gadget_pauli_pushthrough(pattern: [u8; 8]) -> Result<Pushthrough, NoiseError> {
    if let Some(&j) = pattern.iter().find(|&&j| j > 3) {
        return Err(NoiseError::BadShape(format!("Pauli label {j} out of range")));
    }
    let g = teleport_gadget();
    let labels: Vec<(EdgeId, u8)> = g.edges.pattern().into_iter().zip(pattern).collect();
    let c = insert_paulis(&g.circuit, &labels);
    let s = tomography(&c, &TomographyOptions::default())?;
    let s = s.superoperator();
    let label: String = pattern.iter().map(|&j| PAULI_LABELS[j as usize]).collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, p) in PauliBasis::all().iter().enumerate() {
        let sp = p.matrix().map(|z| z.conj()).kronecker(p.matrix());
        let scale = sp.dotc(s).re / sp.norm_squared();
        let residual = max_abs_diff(s, &(&sp * C64::new(scale, 0.0)));
        if best.is_none_or(|(_, _, r)| residual < r) {
            best = Some((j, scale, residual));
        }
    }
    let (j, scale, residual) = best.expect("four candidates");
    if residual > PAULI_MATCH_TOL {
        return Err(NoiseError::NotPauli { pattern: label, residual });
    }
    Ok(Pushthrough {
        pattern: label,
        logical: PAULI_LABELS[j],
        scale,
        residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub patterns: usize,
    /// Counts of patterns reducing to I, X, Y, Z.
    pub counts: [usize; 4],
    pub max_residual: f64,
    pub results: Vec<Pushthrough>,
}

/// Runs [`gadget_pauli_pushthrough`] on all 4⁸ patterns in parallel.
pub fn gadget_sweep() -> Result<SweepSummary, NoiseError> {
    let results: Vec<Pushthrough> = (0..1usize << 16)
        .into_par_iter()
        .map(|code| {
            let mut p = [0u8; 8];
            for (i, slot) in p.iter_mut().enumerate() {
                *slot = (code >> (2 * (7 - i)) & 3) as u8;
            }
            gadget_pauli_pushthrough(p)
        })
        .collect::<Result<_, _>>()?;
    let mut counts = [0; 4];
    let mut max_residual = 0.0f64;
    for r in &results {
        counts[PAULI_LABELS.iter().position(|&c| c == r.logical).expect("label")] += 1;
        max_residual = max_residual.max(r.residual);
    }
    Ok(SweepSummary {
        patterns: results.len(),
        counts,
        max_residual,
        results,
    })
}
