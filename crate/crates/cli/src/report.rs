use std::fmt::Display;
use std::path::Path;
use std::process::ExitCode;

use serde_json::{json, Value};
use tq_core::linalg::C64;

pub enum Failure {
    /// Invalid input content or a failed check: exit 1.
    Domain(String),
    /// Unreadable files or contradictory flags: exit 2.
    Usage(String),
}

impl Failure {
    pub fn domain(e: impl Display) -> Self {
        Failure::Domain(e.to_string())
    }

    pub fn exit(self) -> ExitCode {
        match self {
            Failure::Domain(m) => {
                eprintln!("error: {m}");
                ExitCode::from(1)
            }
            Failure::Usage(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
        }
    }
}

pub struct Outcome {
    /// The machine-readable document.
    pub report: String,
    pub summary: String,
    /// False when a check the command performs did not pass.
    pub ok: bool,
}

impl Outcome {
    pub fn json(report: &Value, summary: String, ok: bool) -> Self {
        Self {
            report: serde_json::to_string_pretty(report).expect("report serializes") + "\n",
            summary,
            ok,
        }
    }

    /// Report to `out` (summary on stdout) or to stdout (summary on stderr).
    pub fn emit(self, out: Option<&Path>) -> Result<ExitCode, Failure> {
        match out {
            Some(p) => {
                std::fs::write(p, &self.report)
                    .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
                println!("{}", self.summary);
            }
            None if self.report.is_empty() => println!("{}", self.summary),
            None => {
                print!("{}", self.report);
                eprintln!("{}", self.summary);
            }
        }
        Ok(if self.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
    }
}

pub fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Rows of `[re, im]` pairs, the circuit format's matrix notation.
pub fn matrix(m: &tq_core::linalg::DMatrix<C64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| complex(m[(r, c)])).collect()))
            .collect(),
    )
}
