use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::pauli::{error_seminorm, PAULI_LABELS};
use super::register::{Clusters, Event, GermTracks, Register};
use super::NoiseError;
use crate::circuit::{edge_quantum_depths, EdgeId, MixedCircuit, QubitOrder, Topology};
use crate::linalg::{matrix_norm, SpaceShape, StateVec, C64};
use crate::sim::{InfectedCircuit, DEFAULT_BUDGET};

/// Branches of the expansion whose vector norm falls to this level are
/// treated as exactly zero; every later factor has norm at most 1, so no
/// descendant can grow back.
const PRUNE: f64 = 1e-14;

/// Default number of qubit edges for exhaustive pattern enumeration.
pub const DEFAULT_EDGE_CAP: usize = 8;
/// Default limit on the number of nonzero terms in a combined expansion.
pub const DEFAULT_TERM_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandOptions {
    /// Most qubit edges in one germ cluster; each cluster is enumerated
    /// exhaustively.
    pub edge_cap: usize,
    pub term_cap: usize,
    /// Largest germ-register dimension evolved at once.
    pub budget: usize,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            edge_cap: DEFAULT_EDGE_CAP,
            term_cap: DEFAULT_TERM_CAP,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// A Pauli label (0..4) for every qubit edge, by position in the circuit's
/// ascending qubit-edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PauliPattern(pub Vec<u8>);

impl PauliPattern {
    pub fn identity(len: usize) -> Self {
        Self(vec![0; len])
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&j| j != 0).count()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|&j| PAULI_LABELS[j as usize]).collect()
    }

    pub fn from_label(s: &str) -> Option<Self> {
        s.chars()
            .map(|ch| PAULI_LABELS.iter().position(|&p| p == ch).map(|j| j as u8))
            .collect::<Option<Vec<u8>>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionTerm {
    pub pattern: PauliPattern,
    pub amplitude: f64,
    pub weight: usize,
    pub locally_first: Vec<EdgeId>,
    pub m: usize,
}

/// The nonzero terms of `F = Σ_J |f_J⟩ ⊗ P_J`; patterns not listed have
/// amplitude zero (the all-identity pattern is always listed).
#[derive(Debug, Clone, Serialize)]
pub struct PauliExpansion {
    pub edges: Vec<EdgeId>,
    pub terms: Vec<ExpansionTerm>,
}

impl PauliExpansion {
    pub fn amplitude(&self, p: &PauliPattern) -> f64 {
        self.terms.iter().find(|t| &t.pattern == p).map_or(0.0, |t| t.amplitude)
    }

    pub fn pattern_count(&self) -> f64 {
        4f64.powi(self.edges.len() as i32)
    }

    /// Terms sorted by decreasing amplitude.
    pub fn top(&self, k: usize) -> Vec<&ExpansionTerm> {
        let mut v: Vec<&ExpansionTerm> = self.terms.iter().collect();
        v.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then_with(|| a.pattern.cmp(&b.pattern)));
        v.truncate(k);
        v
    }
}

/// Edges `e` with `J(e) ≠ 0` such that no `e' ≺ e` has `J(e') ≠ 0`.
pub fn locally_first(pattern: &PauliPattern, order: &QubitOrder) -> Vec<EdgeId> {
    let active: Vec<usize> = (0..pattern.0.len()).filter(|&i| pattern.0[i] != 0).collect();
    active
        .iter()
        .copied()
        .filter(|&b| !active.iter().any(|&a| order.precedes(a, b)))
        .map(|i| order.edges()[i])
        .collect()
}

/// Convenience wrapper computing the qubit order of `c`.
pub fn locally_first_in(pattern: &PauliPattern, c: &MixedCircuit) -> Result<(Vec<EdgeId>, usize), NoiseError> {
    let topo = Topology::new(c)?;
    let order = QubitOrder::new(c, &topo);
    let lf = locally_first(pattern, &order);
    let m = lf.len();
    Ok((lf, m))
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeDelta {
    pub edge: EdgeId,
    /// Quantum depth of the circuit part leading to and including the edge.
    pub depth: usize,
    /// `Σ_{j≥1} ‖Eⱼ Π‖` with `Π` the support of the germ's state entering
    /// the edge when no earlier edge has erred.
    pub delta: f64,
    /// `Σ_{j≥1} ‖Eⱼ g₀‖`, the seminorm on a fresh germ (diagnostic only).
    pub fresh: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaProfile {
    pub edges: Vec<EdgeDelta>,
    /// `values[n] = δ(n)`: the largest `delta` over edges of depth ≤ n.
    pub values: Vec<f64>,
}

impl DeltaProfile {
    /// `δ(n)`, saturating beyond the computed range.
    pub fn delta(&self, n: usize) -> f64 {
        self.values.get(n).or(self.values.last()).copied().unwrap_or(0.0)
    }

    pub fn fresh_max(&self) -> f64 {
        self.edges.iter().map(|e| e.fresh).fold(0.0, f64::max)
    }
}

/// Projector onto the support of a positive matrix.
fn support_projector(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let d = rho.nrows();
    let eig = SymmetricEigen::new((rho + rho.adjoint()) * C64::new(0.5, 0.0));
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut p = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    if max <= 0.0 {
        return p;
    }
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * max {
            let v = eig.eigenvectors.column(i);
            p += v * v.adjoint();
        }
    }
    p
}

pub fn delta_profile(ic: &InfectedCircuit, n_max: usize) -> Result<DeltaProfile, NoiseError> {
    delta_profile_with(ic, n_max, DEFAULT_BUDGET)
}

pub fn delta_profile_with(ic: &InfectedCircuit, n_max: usize, budget: usize) -> Result<DeltaProfile, NoiseError> {
    let c = ic.base();
    let topo = Topology::new(c)?;
    let order = QubitOrder::new(c, &topo);
    let depths = edge_quantum_depths(c, &topo);
    let tracks = GermTracks::new(ic)?;
    let g0 = StateVec::new(SpaceShape::new(vec![tracks.dim])?, tracks.g0.clone())?;

    let per_edge: Vec<EdgeDelta> = order
        .edges()
        .par_iter()
        .enumerate()
        .map(|(qpos, &q)| -> Result<EdgeDelta, NoiseError> {
            let germ = tracks.germ_of_edge[q.0].expect("qubit edge has a germ");
            let before = |e: EdgeId| order.position(e).is_some_and(|p| order.precedes(p, qpos));
            // Mixers count when one of their outputs is q or precedes it.
            let mix_included = |node| {
                topo.outputs(node)
                    .iter()
                    .any(|&f| f == q || before(f))
            };
            let mut clusters = Clusters::new(tracks.germs);
            for ev in &tracks.events {
                if let Event::Mix { node, germs, .. } = ev {
                    if mix_included(*node) {
                        for w in germs.windows(2) {
                            clusters.union(w[0], w[1]);
                        }
                    }
                }
            }
            let root = clusters.find(germ);
            let members: Vec<usize> = (0..tracks.germs).filter(|&g| clusters.find(g) == root).collect();
            let mut reg = Register::fresh(members, tracks.dim, &tracks.g0, budget)?;
            for ev in &tracks.events {
                match ev {
                    Event::Edge { edge, germ } if before(*edge) && reg.contains(*germ) => {
                        reg.apply(tracks.decomp(*edge).component(0), &[*germ]);
                    }
                    Event::Mix { node, germs, op } if mix_included(*node) && reg.contains(germs[0]) => {
                        reg.apply(op, germs);
                    }
                    _ => {}
                }
            }
            let dec = tracks.decomp(q);
            let delta = if reg.norm() <= PRUNE {
                0.0
            } else {
                let proj = support_projector(&reg.reduced(germ));
                (1..4).map(|j| matrix_norm(&(dec.component(j) * &proj))).sum()
            };
            Ok(EdgeDelta {
                edge: q,
                depth: depths[q.0],
                delta,
                fresh: error_seminorm(dec, &g0)?,
            })
        })
        .collect::<Result<_, _>>()?;

    let values = (0..=n_max)
        .map(|n| {
            per_edge
                .iter()
                .filter(|e| e.depth <= n)
                .map(|e| e.delta)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DeltaProfile { edges: per_edge, values })
}

/// `|f_J⟩` on the register of all germs, in creation order.
pub fn germ_vector(ic: &InfectedCircuit, pattern: &PauliPattern) -> Result<StateVec, NoiseError> {
    let tracks = GermTracks::new(ic)?;
    let edges = ic.base().qubit_edges();
    if pattern.0.len() != edges.len() {
        return Err(NoiseError::BadShape(format!(
            "pattern of length {} for {} qubit edges",
            pattern.0.len(),
            edges.len()
        )));
    }
    let mut reg = Register::fresh((0..tracks.germs).collect(), tracks.dim, &tracks.g0, DEFAULT_BUDGET)?;
    for ev in &tracks.events {
        match ev {
            Event::Edge { edge, germ } => {
                let pos = edges.binary_search(edge).expect("qubit edge");
                reg.apply(tracks.decomp(*edge).component(pattern.0[pos] as usize), &[*germ]);
            }
            Event::Mix { germs, op, .. } => reg.apply(op, germs),
        }
    }
    let shape = SpaceShape::new(vec![tracks.dim; tracks.germs])?;
    Ok(StateVec::new(shape, reg.amps)?)
}

/// Depth-first enumeration of one germ cluster's sub-patterns.
fn expand_cluster(
    tracks: &GermTracks,
    events: &[&Event],
    positions: &[usize],
    reg: Register,
    at: usize,
    labels: &mut Vec<(usize, u8)>,
    out: &mut Vec<SubPattern>,
) {
    let mut reg = reg;
    let mut at = at;
    while at < events.len() {
        match events[at] {
            Event::Mix { germs, op, .. } => {
                reg.apply(op, germs);
                at += 1;
            }
            Event::Edge { edge, germ } => {
                let dec = tracks.decomp(*edge);
                for j in 0..4u8 {
                    if dec.is_zero(j as usize) {
                        continue;
                    }
                    let mut next = reg.clone();
                    next.apply(dec.component(j as usize), &[*germ]);
                    if next.norm() <= PRUNE {
                        continue;
                    }
                    labels.push((positions[at], j));
                    expand_cluster(tracks, events, positions, next, at + 1, labels, out);
                    labels.pop();
                }
                return;
            }
        }
    }
    out.push((labels.clone(), reg.norm()));
}

pub fn multipauli_expand(ic: &InfectedCircuit) -> Result<PauliExpansion, NoiseError> {
    multipauli_expand_with(ic, &ExpandOptions::default())
}

/// Non-identity labels at qubit-order positions, with their amplitude.
type SubPattern = (Vec<(usize, u8)>, f64);

pub fn multipauli_expand_with(ic: &InfectedCircuit, opts: &ExpandOptions) -> Result<PauliExpansion, NoiseError> {
    let c = ic.base();
    let topo = Topology::new(c)?;
    let order = QubitOrder::new(c, &topo);
    let edges = order.edges().to_vec();
    let tracks = GermTracks::new(ic)?;
    let mut clusters = Clusters::new(tracks.germs);
    for ev in &tracks.events {
        if let Event::Mix { germs, .. } = ev {
            for w in germs.windows(2) {
                clusters.union(w[0], w[1]);
            }
        }
    }
    // Sub-pattern lists per cluster; the full expansion is their product.
    let mut per_cluster: Vec<Vec<SubPattern>> = Vec::new();
    for members in clusters.groups() {
        let mut evs = Vec::new();
        let mut positions = Vec::new();
        for ev in &tracks.events {
            let (inside, pos) = match ev {
                Event::Edge { edge, germ } => (members.contains(germ), order.position(*edge).expect("qubit edge")),
                Event::Mix { germs, .. } => (members.contains(&germs[0]), usize::MAX),
            };
            if inside {
                evs.push(ev);
                positions.push(pos);
            }
        }
        let span = positions.iter().filter(|&&p| p != usize::MAX).count();
        if span > opts.edge_cap {
            return Err(NoiseError::CapExceeded {
                edges: span,
                cap: opts.edge_cap,
            });
        }
        let reg = Register::fresh(members, tracks.dim, &tracks.g0, opts.budget)?;
        let mut out = Vec::new();
        expand_cluster(&tracks, &evs, &positions, reg, 0, &mut Vec::new(), &mut out);
        per_cluster.push(out);
    }
    let mut combined: Vec<(Vec<u8>, f64)> = vec![(vec![0; edges.len()], 1.0)];
    for list in &per_cluster {
        let mut next = Vec::with_capacity(combined.len() * list.len());
        for (pat, amp) in &combined {
            for (labels, a) in list {
                let amp = amp * a;
                if amp <= PRUNE {
                    continue;
                }
                let mut p = pat.clone();
                for &(pos, j) in labels {
                    p[pos] = j;
                }
                next.push((p, amp));
            }
            if next.len() > opts.term_cap {
                return Err(NoiseError::TermsExceeded { cap: opts.term_cap });
            }
        }
        combined = next;
    }
    let mut terms: Vec<ExpansionTerm> = combined
        .into_iter()
        .map(|(p, amplitude)| {
            let pattern = PauliPattern(p);
            let lf = locally_first(&pattern, &order);
            ExpansionTerm {
                weight: pattern.weight(),
                m: lf.len(),
                locally_first: lf,
                pattern,
                amplitude,
            }
        })
        .collect();
    let identity = PauliPattern::identity(edges.len());
    if !terms.iter().any(|t| t.pattern == identity) {
        terms.push(ExpansionTerm {
            pattern: identity,
            amplitude: 0.0,
            weight: 0,
            locally_first: Vec::new(),
            m: 0,
        });
    }
    terms.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(PauliExpansion { edges, terms })
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub pattern: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm3Report {
    pub n: usize,
    /// Arity used in the structural count; at least 2.
    pub k: usize,
    pub delta: f64,
    pub patterns_checked: usize,
    pub supports_checked: usize,
    /// Largest `‖f_J‖ − δ^{m(J)}` over listed patterns.
    pub worst_amplitude_slack: f64,
    pub amplitude_violations: Vec<Violation>,
    pub structural_violations: Vec<Violation>,
    pub passed: bool,
}

const BOUND_TOL: f64 = 1e-9;

/// Checks `‖f_J‖ ≤ δ(n)^{m(J)}` on every listed pattern and
/// `w(J) < kⁿ·m(J)` on every error support with `m(J) ≥ 1`. `k` is clamped
/// to at least 2, below which the structural count does not hold.
pub fn check_thm3(
    expansion: &PauliExpansion,
    profile: &DeltaProfile,
    c: &MixedCircuit,
    n: usize,
    k: usize,
) -> Result<Thm3Report, NoiseError> {
    let k = k.max(2);
    let delta = profile.delta(n);
    let mut worst = f64::NEG_INFINITY;
    let mut amplitude_violations = Vec::new();
    for t in &expansion.terms {
        let bound = delta.powi(t.m as i32);
        worst = worst.max(t.amplitude - bound);
        if t.amplitude > bound + BOUND_TOL {
            amplitude_violations.push(Violation {
                pattern: t.pattern.label(),
                value: t.amplitude,
                bound,
            });
        }
    }
    let topo = Topology::new(c)?;
    let order = QubitOrder::new(c, &topo);
    let len = order.len();
    let kn = (k as f64).powi(n as i32);
    let mut structural_violations = Vec::new();
    let mut supports = 0;
    if len <= 24 {
        for mask in 1u64..(1u64 << len) {
            let p = PauliPattern((0..len).map(|i| (mask >> i & 1) as u8).collect());
            let m = locally_first(&p, &order).len();
            supports += 1;
            let w = p.weight();
            if (w as f64) >= kn * m as f64 {
                structural_violations.push(Violation {
                    pattern: p.label(),
                    value: w as f64,
                    bound: kn * m as f64,
                });
            }
        }
    } else {
        for t in expansion.terms.iter().filter(|t| t.m > 0) {
            supports += 1;
            if (t.weight as f64) >= kn * t.m as f64 {
                structural_violations.push(Violation {
                    pattern: t.pattern.label(),
                    value: t.weight as f64,
                    bound: kn * t.m as f64,
                });
            }
        }
    }
    let passed = amplitude_violations.is_empty() && structural_violations.is_empty();
    Ok(Thm3Report {
        n,
        k,
        delta,
        patterns_checked: expansion.terms.len(),
        supports_checked: supports,
        worst_amplitude_slack: worst,
        amplitude_violations,
        structural_violations,
        passed,
    })
}

/// `δ^(k^(−n))`.
pub fn bound_eps(delta: f64, k: usize, n: usize) -> Result<f64, NoiseError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(NoiseError::Domain(format!("δ = {delta} is outside [0, 1]")));
    }
    if k == 0 {
        return Err(NoiseError::Domain("k must be at least 1".into()));
    }
    Ok(delta.powf((k as f64).powi(-(n as i32))))
}

/// `(1 + 3ε)⁸ − 1`, optionally divided by 3.
pub fn bound_gadget(eps: f64, divide_by_three: bool) -> Result<f64, NoiseError> {
    if eps.is_nan() || eps < 0.0 {
        return Err(NoiseError::Domain(format!("ε = {eps} is negative")));
    }
    let b = (1.0 + 3.0 * eps).powi(8) - 1.0;
    Ok(if divide_by_three { b / 3.0 } else { b })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiReport {
    pub eps: f64,
    pub constant: f64,
    /// `max ‖f_J‖ / ε^{w(J)}` over patterns with `w(J) ≥ 1`.
    pub worst_ratio: f64,
    pub worst_pattern: Option<String>,
    pub passed: bool,
}

/// Amplitudes at or below this count as zero when `ε = 0`.
const DEGENERATE_ZERO: f64 = 1e-12;

/// Checks `‖f_J‖ ≤ C·ε^{w(J)}`. `ε = 0` is accepted as the limiting case:
/// it passes exactly when every nonzero-weight amplitude vanishes.
pub fn check_quasi_independence(
    expansion: &PauliExpansion,
    eps: f64,
    constant: f64,
) -> Result<QuasiReport, NoiseError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(NoiseError::Domain(format!("ε = {eps} is outside [0, 1)")));
    }
    let mut worst = 0.0f64;
    let mut worst_pattern = None;
    for t in expansion.terms.iter().filter(|t| t.weight >= 1) {
        let ratio = if eps == 0.0 {
            if t.amplitude <= DEGENERATE_ZERO {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            t.amplitude / eps.powi(t.weight as i32)
        };
        if ratio > worst {
            worst = ratio;
            worst_pattern = Some(t.pattern.label());
        }
    }
    Ok(QuasiReport {
        eps,
        constant,
        worst_ratio: worst,
        worst_pattern,
        passed: worst <= constant,
    })
}
