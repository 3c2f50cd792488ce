//! `tq`: validate, inspect, rewrite, simulate and analyze mixed circuits.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::{Failure, Outcome};

#[derive(Parser)]
#[command(name = "tq", version, about = "Mixed quantum-classical circuits, teleportation rewriting and germ noise")]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "TQ_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write the report here and print a summary on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CircuitArg {
    /// Circuit file.
    #[arg(long)]
    circuit: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Branch,
    Sample,
}

#[derive(Args)]
struct ExpandArgs {
    /// Most qubit edges in one germ cluster for exhaustive enumeration.
    #[arg(long, default_value_t = tq_core::noise::DEFAULT_EDGE_CAP)]
    edge_cap: usize,
    /// Most nonzero terms in the combined expansion.
    #[arg(long, default_value_t = tq_core::noise::DEFAULT_TERM_CAP)]
    term_cap: usize,
    /// Constant C in ‖f_J‖ ≤ C·ε^w(J).
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
    /// Divide the gadget bound by 3.
    #[arg(long)]
    divide_by_three: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a circuit file.
    Validate {
        #[command(flatten)]
        circuit: CircuitArg,
    },
    /// Depths, edge counts, connectivity and layer class.
    Stats {
        #[command(flatten)]
        circuit: CircuitArg,
        /// Layer bound b to classify against.
        #[arg(long)]
        bound: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Insert a teleportation gadget on every (or selected) qubit edge.
    Transpile {
        #[command(flatten)]
        circuit: CircuitArg,
        /// Comma-separated qubit edge ids to rewrite instead of all.
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<usize>>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a circuit, optionally infected by a germ model.
    Simulate {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        germ_model: Option<PathBuf>,
        /// Bit string or comma-separated fiducials (0, 1, +, -, +i, -i); default all zeros.
        #[arg(long)]
        input: Option<String>,
        /// Classical input bits; default all zeros.
        #[arg(long)]
        bits: Option<String>,
        #[arg(long, value_enum, default_value = "branch")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// δ-profile, Pauli expansion, inequality checks and bounds.
    Analyze {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        germ_model: PathBuf,
        /// Depth n for δ(n); default the circuit's quantum depth.
        #[arg(long)]
        n: Option<usize>,
        /// Number of largest expansion terms to report.
        #[arg(long, default_value_t = 16)]
        top: usize,
        #[command(flatten)]
        expand: ExpandArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Classify all 4⁸ Pauli patterns on the teleportation gadget.
    GadgetCheck {
        /// Omit the per-pattern table from the report.
        #[arg(long)]
        summary_only: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Evaluate ε = δ^(k^-n) and the gadget bound (1+3ε)⁸ − 1.
    Bounds {
        #[arg(long, requires_all = ["k", "n"])]
        delta: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        divide_by_three: bool,
    },
    /// Transpile, infect, simulate and analyze; compare against the original.
    Pipeline {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        germ_model: PathBuf,
        #[arg(long)]
        input: Option<String>,
        /// Depth n at which the transpiled circuit is analyzed.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[command(flatten)]
        expand: ExpandArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Print a built-in fixture circuit.
    Fixture {
        #[arg(value_enum)]
        name: commands::FixtureName,
        #[command(flatten)]
        output: Output,
    },
}

fn dispatch(cmd: Command) -> Result<(Outcome, Option<PathBuf>), Failure> {
    Ok(match cmd {
        Command::Validate { circuit } => (commands::validate(&circuit.circuit)?, None),
        Command::Stats { circuit, bound, output } => (commands::stats(&circuit.circuit, bound)?, output.out),
        Command::Transpile { circuit, edges, output } => (commands::transpile(&circuit.circuit, edges)?, output.out),
        Command::Simulate {
            circuit,
            germ_model,
            input,
            bits,
            mode,
            seed,
            output,
        } => {
            let sample = matches!(mode, ModeArg::Sample);
            let args = commands::SimulateArgs {
                circuit: &circuit.circuit,
                germ_model: germ_model.as_deref(),
                input: input.as_deref(),
                bits: bits.as_deref(),
                sample,
                seed,
            };
            (commands::simulate(&args)?, output.out)
        }
        Command::Analyze {
            circuit,
            germ_model,
            n,
            top,
            expand,
            output,
        } => (
            commands::analyze(&circuit.circuit, &germ_model, n, top, &expand.into())?,
            output.out,
        ),
        Command::GadgetCheck { summary_only, output } => (commands::gadget_check(summary_only)?, output.out),
        Command::Bounds {
            delta,
            k,
            n,
            eps,
            divide_by_three,
        } => (commands::bounds(delta, k, n, eps, divide_by_three)?, None),
        Command::Pipeline {
            circuit,
            germ_model,
            input,
            n,
            expand,
            output,
        } => (
            commands::pipeline(&circuit.circuit, &germ_model, input.as_deref(), n, &expand.into())?,
            output.out,
        ),
        Command::Fixture { name, output } => (commands::fixture(name), output.out),
    })
}

impl From<ExpandArgs> for commands::AnalysisConfig {
    fn from(a: ExpandArgs) -> Self {
        Self {
            expand: tq_core::noise::ExpandOptions {
                edge_cap: a.edge_cap,
                term_cap: a.term_cap,
                ..Default::default()
            },
            constant: a.constant,
            divide_by_three: a.divide_by_three,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match dispatch(cli.command) {
        Ok((outcome, out)) => match outcome.emit(out.as_deref()) {
            Ok(code) => code,
            Err(f) => f.exit(),
        },
        Err(f) => f.exit(),
    }
}
