use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use tq_core::circuit::format::{emit_circuit, parse_circuit};
use tq_core::circuit::{classify_layers, depth, quantum_connectivity, EdgeId, EdgeKind, MixedCircuit, Topology};
use tq_core::fixtures;
use tq_core::noise::{
    bound_eps, bound_gadget, check_quasi_independence, check_thm3, delta_profile, gadget_sweep, multipauli_expand_with,
    ExpandOptions, PauliExpansion,
};
use tq_core::sim::{
    bit_string, infect, parse_germ_model, parse_input_state, run_infected, run_pure, GermModel, RunResult, SimInput,
    SimOptions,
};
use tq_core::transpile::{insert_teleport, insert_teleport_everywhere};

use crate::report::{complex, matrix, read, Failure, Outcome};

/// Parses and validates; any violation is a domain failure.
fn load(path: &Path) -> Result<MixedCircuit, Failure> {
    let c = parse_circuit(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    let v = c.validate();
    if !v.is_empty() {
        let lines: Vec<String> = v.iter().map(|x| format!("  {x}")).collect();
        return Err(Failure::Domain(format!("{} is invalid:\n{}", path.display(), lines.join("\n"))));
    }
    Ok(c)
}

fn load_model(path: &Path) -> Result<GermModel, Failure> {
    parse_germ_model(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

struct Boundary {
    qubit_inputs: Vec<EdgeId>,
    bit_inputs: usize,
    qubit_outputs: Vec<EdgeId>,
}

fn boundary(c: &MixedCircuit) -> Result<Boundary, Failure> {
    let topo = Topology::new(c).map_err(Failure::domain)?;
    let qubit = |e: &EdgeId| c.edge(*e).kind == EdgeKind::Qubit;
    let ins = topo.boundary_inputs(c);
    Ok(Boundary {
        qubit_inputs: ins.iter().copied().filter(qubit).collect(),
        bit_inputs: ins.iter().filter(|e| !qubit(e)).count(),
        qubit_outputs: topo.boundary_outputs(c).into_iter().filter(qubit).collect(),
    })
}

fn sim_input(c: &MixedCircuit, input: Option<&str>, bits: Option<&str>) -> Result<SimInput, Failure> {
    let b = boundary(c)?;
    let zeros = "0".repeat(b.qubit_inputs.len());
    let spec = input.unwrap_or(&zeros);
    let state = parse_input_state(spec).ok_or_else(|| Failure::Domain(format!("cannot parse input state {spec:?}")))?;
    let bits: Vec<bool> = match bits {
        Some(s) => s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Failure::Domain(format!("--bits must be a bit string, got {s:?}"))),
            })
            .collect::<Result<_, _>>()?,
        None => vec![false; b.bit_inputs],
    };
    Ok(SimInput::state(state).with_bits(bits))
}

pub fn validate(path: &Path) -> Result<Outcome, Failure> {
    let c = load(path)?;
    let summary = format!(
        "{}: valid ({} nodes, {} edges)",
        c.name(),
        c.nodes().count(),
        c.edges().count()
    );
    Ok(Outcome {
        report: String::new(),
        summary,
        ok: true,
    })
}

pub fn stats(path: &Path, bound: Option<usize>) -> Result<Outcome, Failure> {
    let c = load(path)?;
    let d = depth(&c).map_err(Failure::domain)?;
    let b = boundary(&c)?;
    let qubits = c.qubit_edges().len();
    let bits = c.edges().count() - qubits;
    let port = |p: tq_core::circuit::Port| format!("{}:{}", p.node.0, p.port);
    let ins: Vec<_> = b.qubit_inputs.iter().map(|&e| c.edge(e).from).collect();
    let outs: Vec<_> = b.qubit_outputs.iter().map(|&e| c.edge(e).to).collect();
    let mut rows = Vec::new();
    for &i in &ins {
        let mut row = Vec::new();
        for &o in &outs {
            row.push(quantum_connectivity(&c, i, o).map_err(Failure::domain)?.to_string());
        }
        rows.push(row);
    }
    let layer = bound
        .map(|b| classify_layers(&c, b).map(|l| l.to_string()))
        .transpose()
        .map_err(Failure::domain)?;
    let report = json!({
        "name": c.name(),
        "nodes": c.nodes().count(),
        "edges": {"qubit": qubits, "bit": bits},
        "total_depth": d.total_depth,
        "quantum_depth": d.quantum_depth,
        "max_gate_arity": c.max_gate_arity(),
        "connectivity": {
            "inputs": ins.iter().map(|&p| port(p)).collect::<Vec<_>>(),
            "outputs": outs.iter().map(|&p| port(p)).collect::<Vec<_>>(),
            "matrix": rows,
        },
        "bound": bound,
        "layer_class": layer,
    });
    let mut summary = format!(
        "{}: total depth {}, quantum depth {}, {} qubit / {} bit edges",
        c.name(),
        d.total_depth,
        d.quantum_depth,
        qubits,
        bits
    );
    if let (Some(b), Some(l)) = (bound, &layer) {
        summary += &format!(", layer class for b={b}: {l}");
    }
    Ok(Outcome::json(&report, summary, true))
}

pub fn transpile(path: &Path, edges: Option<Vec<usize>>) -> Result<Outcome, Failure> {
    let c = load(path)?;
    let out = match edges {
        None => insert_teleport_everywhere(&c).map_err(Failure::domain)?,
        Some(list) => {
            let set: BTreeSet<EdgeId> = list.into_iter().map(EdgeId).collect();
            insert_teleport(&c, Some(&set)).map_err(Failure::domain)?.circuit
        }
    };
    let before = depth(&c).map_err(Failure::domain)?;
    let after = depth(&out).map_err(Failure::domain)?;
    let summary = format!(
        "{}: {} → {} qubit edges, quantum depth {} → {}",
        c.name(),
        c.qubit_edges().len(),
        out.qubit_edges().len(),
        before.quantum_depth,
        after.quantum_depth
    );
    Ok(Outcome {
        report: emit_circuit(&out),
        summary,
        ok: true,
    })
}

pub struct SimulateArgs<'a> {
    pub circuit: &'a Path,
    pub germ_model: Option<&'a Path>,
    pub input: Option<&'a str>,
    pub bits: Option<&'a str>,
    pub sample: bool,
    pub seed: u64,
}

fn run(c: &MixedCircuit, model: Option<&GermModel>, input: &SimInput, opts: &SimOptions) -> Result<RunResult, Failure> {
    match model {
        Some(m) => run_infected(&infect(c, m).map_err(Failure::domain)?, input, opts),
        None => run_pure(c, input, opts),
    }
    .map_err(Failure::domain)
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome, Failure> {
    let c = load(a.circuit)?;
    let model = a.germ_model.map(load_model).transpose()?;
    let input = sim_input(&c, a.input, a.bits)?;
    let opts = if a.sample {
        SimOptions::sample(a.seed)
    } else {
        SimOptions::default()
    };
    let r = run(&c, model.as_ref(), &input, &opts)?;
    let branches: Vec<Value> = r
        .branches
        .iter()
        .map(|b| {
            json!({
                "bits": bit_string(&b.bits),
                "probability": b.probability,
                "state": matrix(b.state.matrix()),
            })
        })
        .collect();
    let report = json!({
        "circuit": c.name(),
        "germ_model": model.as_ref().map(|m| m.family().to_string()),
        "mode": if a.sample { "sample" } else { "branch" },
        "seed": a.sample.then_some(a.seed),
        "output_qubits": r.output_qubits,
        "total_probability": r.total_probability(),
        "classical": r.classical_dist(),
        "branches": branches,
        "output_state": matrix(r.averaged_state().matrix()),
        "pure_output": r.pure_output.as_ref().map(|v| v.amps().iter().map(|&z| complex(z)).collect::<Vec<_>>()),
        "trajectory": r.trajectory.iter().map(|&(n, b)| json!([n.0, b])).collect::<Vec<_>>(),
        "peak_dim": r.peak_dim,
    });
    let dist: Vec<String> = r.classical_dist().iter().map(|(k, p)| format!("{k}:{p:.6}")).collect();
    let summary = format!(
        "{}: {} branch(es), total probability {:.12}, outcomes [{}]",
        c.name(),
        r.branches.len(),
        r.total_probability(),
        dist.join(" ")
    );
    Ok(Outcome::json(&report, summary, true))
}

pub struct AnalysisConfig {
    pub expand: ExpandOptions,
    pub constant: f64,
    pub divide_by_three: bool,
}

/// Analysis of one infected circuit at depth `n`.
struct Analysis {
    report: Value,
    eps: Option<f64>,
    thm3: Option<bool>,
    quasi: Option<bool>,
    expansion_error: Option<String>,
}

fn term_json(t: &tq_core::noise::ExpansionTerm) -> Value {
    json!({
        "pattern": t.pattern.label(),
        "amplitude": t.amplitude,
        "weight": t.weight,
        "m": t.m,
        "locally_first": t.locally_first,
    })
}

fn analysis(c: &MixedCircuit, model: &GermModel, n: usize, top: usize, cfg: &AnalysisConfig) -> Result<Analysis, Failure> {
    let ic = infect(c, model).map_err(Failure::domain)?;
    let arity = c.max_gate_arity();
    let k = arity.max(2);
    let profile = delta_profile(&ic, n).map_err(Failure::domain)?;
    let delta = profile.delta(n);
    let eps = (delta <= 1.0).then(|| bound_eps(delta, k, n).expect("δ in range"));
    let gadget_delta = eps.map(|e| bound_gadget(e, cfg.divide_by_three).expect("ε ≥ 0"));
    let expansion: Result<PauliExpansion, _> = multipauli_expand_with(&ic, &cfg.expand);
    let mut a = Analysis {
        report: Value::Null,
        eps,
        thm3: None,
        quasi: None,
        expansion_error: None,
    };
    let (exp_json, thm3_json, quasi_json) = match &expansion {
        Err(e) => {
            let msg = format!("{e}; raise --edge-cap / --term-cap or analyze a smaller circuit");
            a.expansion_error = Some(msg.clone());
            let skipped = json!({"skipped": msg});
            (skipped.clone(), skipped.clone(), skipped)
        }
        Ok(exp) => {
            let thm3 = check_thm3(exp, &profile, c, n, k).map_err(Failure::domain)?;
            a.thm3 = Some(thm3.passed);
            let quasi = match eps {
                Some(e) if e < 1.0 => {
                    let q = check_quasi_independence(exp, e, cfg.constant).map_err(Failure::domain)?;
                    a.quasi = Some(q.passed);
                    serde_json::to_value(&q).expect("serializes")
                }
                _ => json!({"skipped": "ε ≥ 1: the condition is vacuous"}),
            };
            let exp_json = json!({
                "edges": exp.edges,
                "nonzero_terms": exp.terms.len(),
                "pattern_count": exp.pattern_count(),
                "top": exp.top(top).into_iter().map(term_json).collect::<Vec<_>>(),
            });
            (exp_json, serde_json::to_value(&thm3).expect("serializes"), quasi)
        }
    };
    a.report = json!({
        "qubit_edges": c.qubit_edges().len(),
        "quantum_depth": depth(c).map_err(Failure::domain)?.quantum_depth,
        "n": n,
        "k": k,
        "max_gate_arity": arity,
        "delta_profile": profile,
        "expansion": exp_json,
        "thm3_check": thm3_json,
        "quasi_independence": quasi_json,
        "bounds": {"delta": delta, "eps": eps, "gadget_delta": gadget_delta, "divide_by_three": cfg.divide_by_three},
    });
    Ok(a)
}

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

pub fn analyze(
    path: &Path,
    model_path: &Path,
    n: Option<usize>,
    top: usize,
    cfg: &AnalysisConfig,
) -> Result<Outcome, Failure> {
    let c = load(path)?;
    let model = load_model(model_path)?;
    let n = match n {
        Some(n) => n,
        None => depth(&c).map_err(Failure::domain)?.quantum_depth,
    };
    let a = analysis(&c, &model, n, top, cfg)?;
    if let Some(msg) = a.expansion_error {
        return Err(Failure::Domain(msg));
    }
    let mut report = a.report;
    report["circuit"] = json!(c.name());
    report["germ_model"] = json!(model.family().to_string());
    let ok = a.thm3 != Some(false) && a.quasi != Some(false);
    let summary = format!(
        "{} under {}: δ({n}) = {:.6e}, ε = {}, amplitude bounds {}, quasi-independence {}",
        c.name(),
        model.family(),
        report["bounds"]["delta"].as_f64().unwrap_or(f64::NAN),
        a.eps.map_or("n/a".into(), |e| format!("{e:.6e}")),
        verdict(a.thm3),
        verdict(a.quasi)
    );
    Ok(Outcome::json(&report, summary, ok))
}

pub fn gadget_check(summary_only: bool) -> Result<Outcome, Failure> {
    let s = gadget_sweep().map_err(Failure::domain)?;
    let mut report = json!({
        "patterns": s.patterns,
        "counts": {"I": s.counts[0], "X": s.counts[1], "Y": s.counts[2], "Z": s.counts[3]},
        "unclassified": 0,
        "max_residual": s.max_residual,
    });
    if !summary_only {
        report["table"] = s
            .results
            .iter()
            .map(|r| json!({"pattern": r.pattern, "logical": r.logical.to_string(), "scale": r.scale}))
            .collect();
    }
    let summary = format!(
        "gadget: {} patterns classified (I {}, X {}, Y {}, Z {}), max residual {:.3e}",
        s.patterns, s.counts[0], s.counts[1], s.counts[2], s.counts[3], s.max_residual
    );
    Ok(Outcome::json(&report, summary, true))
}

pub fn bounds(
    delta: Option<f64>,
    k: Option<usize>,
    n: Option<usize>,
    eps: Option<f64>,
    divide_by_three: bool,
) -> Result<Outcome, Failure> {
    if delta.is_none() && eps.is_none() {
        return Err(Failure::Usage("give --delta with --k and --n, or --eps".into()));
    }
    let from_delta = match (delta, k, n) {
        (Some(d), Some(k), Some(n)) => Some(bound_eps(d, k, n).map_err(Failure::domain)?),
        _ => None,
    };
    // The gadget bound takes --eps if given, otherwise the ε just derived.
    let e = eps.or(from_delta);
    let gadget = e.map(|e| bound_gadget(e, divide_by_three)).transpose().map_err(Failure::domain)?;
    let report = json!({
        "delta": delta, "k": k, "n": n,
        "eps": from_delta.or(eps),
        "gadget_input_eps": e,
        "gadget_delta": gadget,
        "divide_by_three": divide_by_three,
    });
    let mut parts = Vec::new();
    if let Some(x) = from_delta {
        parts.push(format!("eps = {x:.6}"));
    }
    if let Some(g) = gadget {
        parts.push(format!("gadget delta = {g:.7}"));
    }
    Ok(Outcome::json(&report, parts.join(", "), true))
}

fn fidelity(c: &MixedCircuit, ideal: &RunResult, model: &GermModel, input: &SimInput) -> Result<f64, Failure> {
    let noisy = run(c, Some(model), input, &SimOptions::default())?;
    noisy.averaged_state().fidelity(&ideal.averaged_state()).map_err(Failure::domain)
}

pub fn pipeline(
    path: &Path,
    model_path: &Path,
    input: Option<&str>,
    n: usize,
    cfg: &AnalysisConfig,
) -> Result<Outcome, Failure> {
    let c = load(path)?;
    let model = load_model(model_path)?;
    let input = sim_input(&c, input, None)?;
    let t = insert_teleport_everywhere(&c).map_err(Failure::domain)?;
    let ideal = run_pure(&c, &input, &SimOptions::default()).map_err(Failure::domain)?;

    let n0 = depth(&c).map_err(Failure::domain)?.quantum_depth;
    let f0 = fidelity(&c, &ideal, &model, &input)?;
    let a0 = analysis(&c, &model, n0, 8, cfg)?;
    let f1 = fidelity(&t, &ideal, &model, &input)?;
    let a1 = analysis(&t, &model, n, 8, cfg)?;

    let variant = |f: f64, a: &Analysis| {
        let mut v = a.report.clone();
        v["fidelity"] = json!(f);
        v
    };
    let ok = a1.quasi == Some(true);
    let report = json!({
        "circuit": c.name(),
        "germ_model": model.family().to_string(),
        "untransformed": variant(f0, &a0),
        "transpiled": variant(f1, &a1),
        "quasi_independent_after_transpile": ok,
    });
    let summary = format!(
        "{} under {}: fidelity {:.9} → {:.9}; quantum depth {} → {}; quasi-independence {} → {}",
        c.name(),
        model.family(),
        f0,
        f1,
        n0,
        a1.report["quantum_depth"],
        verdict(a0.quasi),
        verdict(a1.quasi)
    );
    Ok(Outcome::json(&report, summary, ok))
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FixtureName {
    Teleport,
    Bell,
    Wire10,
    Random2q,
    Classical,
    MeasureCopy,
    MeasureReprepare,
}

pub fn fixture(name: FixtureName) -> Outcome {
    let c = match name {
        FixtureName::Teleport => tq_core::transpile::teleport_gadget().circuit,
        FixtureName::Bell => fixtures::bell_pair(),
        FixtureName::Wire10 => fixtures::wire(10),
        FixtureName::Random2q => {
            let mut c = fixtures::random_unitary_circuit(&mut ChaCha8Rng::seed_from_u64(2024), 2, 9);
            c.set_name("random2q");
            c
        }
        FixtureName::Classical => fixtures::classical_gadget(),
        FixtureName::MeasureCopy => fixtures::measure_copy(),
        FixtureName::MeasureReprepare => fixtures::measure_reprepare(),
    };
    Outcome {
        summary: format!("{}: {} nodes, {} edges", c.name(), c.nodes().count(), c.edges().count()),
        report: emit_circuit(&c),
        ok: true,
    }
}
