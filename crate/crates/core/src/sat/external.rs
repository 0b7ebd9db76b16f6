use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{SolveOutcome, SolveStats, Verdict};
use crate::cnf::{parse_dimacs_result, write_dimacs, CnfError, CnfFormula, DimacsResult};

/// Environment variable holding the external solver command line. The
/// DIMACS file path is appended as the last argument.
pub const EXTERNAL_SOLVER_ENV: &str = "REPACK_EXTERNAL_SOLVER";

#[derive(Debug, Error)]
pub enum ExternalSolverError {
    #[error("external solver command is empty")]
    EmptyCommand,
    #[error("failed to run `{program}`: {source}")]
    Spawn {
        program: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("could not parse solver output: {0}")]
    Output(#[from] CnfError),
}

/// A user-configured DIMACS solver run as a subprocess.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

static FILE_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ExternalSolver {
    /// Split a command line on whitespace.
    pub fn from_command_line(cmd: &str) -> Result<Self, ExternalSolverError> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or(ExternalSolverError::EmptyCommand)?;
        Ok(ExternalSolver {
            program,
            args: parts.collect(),
        })
    }

    pub fn from_env() -> Option<Result<Self, ExternalSolverError>> {
        std::env::var(EXTERNAL_SOLVER_ENV)
            .ok()
            .map(|c| Self::from_command_line(&c))
    }

    /// Export `formula`, run the solver on it and parse its stdout. The
    /// process is killed when `budget` elapses.
    pub fn solve(
        &self,
        formula: &CnfFormula,
        budget: Option<Duration>,
    ) -> Result<SolveOutcome, ExternalSolverError> {
        let start = Instant::now();
        let path = std::env::temp_dir().join(format!(
            "repack-{}-{}.cnf",
            std::process::id(),
            FILE_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let _guard = RemoveOnDrop(path.clone());
        write_dimacs(
            formula,
            std::io::BufWriter::new(std::fs::File::create(&path)?),
        )?;

        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(&path)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| ExternalSolverError::Spawn {
                program: self.program.clone(),
                source,
            })?;

        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut text = String::new();
            stdout.read_to_string(&mut text).map(|_| text)
        });

        let deadline = budget.map(|b| start + b);
        let timed_out = loop {
            if child.try_wait()?.is_some() {
                break false;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                let _ = child.kill();
                let _ = child.wait();
                break true;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let text = reader.join().expect("reader thread")?;

        let stats = SolveStats {
            wall_time_ms: start.elapsed().as_millis() as u64,
            ..Default::default()
        };
        if timed_out {
            return Ok(SolveOutcome {
                verdict: Verdict::Timeout,
                stats,
            });
        }
        let verdict = match parse_dimacs_result(&text, formula.var_count())? {
            DimacsResult::Sat(model) => {
                if !formula.is_satisfied_by(&model) {
                    return Err(CnfError::Dimacs {
                        line: 0,
                        message: "reported model violates a clause".into(),
                    }
                    .into());
                }
                Verdict::Sat(model)
            }
            DimacsResult::Unsat => Verdict::Unsat,
            DimacsResult::Unknown => Verdict::Timeout,
        };
        Ok(SolveOutcome { verdict, stats })
    }
}

struct RemoveOnDrop(PathBuf);

impl Drop for RemoveOnDrop {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::cnf::Var;

    #[test]
    fn runs_a_scripted_solver() {
        let f = CnfFormula::from_clauses(2, vec![vec![Var(1).pos()], vec![Var(2).neg()]]);
        let sat = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 's SATISFIABLE'; echo 'v 1 -2 0'".into()],
        };
        assert_eq!(
            sat.solve(&f, None).unwrap().verdict,
            Verdict::Sat(vec![true, false])
        );

        let unsat = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 's UNSATISFIABLE'".into()],
        };
        assert_eq!(unsat.solve(&f, None).unwrap().verdict, Verdict::Unsat);

        let lying = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 'SAT'; echo '-1 2 0'".into()],
        };
        assert!(lying.solve(&f, None).is_err());
    }

    #[test]
    fn kills_on_timeout() {
        let f = CnfFormula::from_clauses(1, vec![vec![Var(1).pos()]]);
        let slow = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "sleep 5".into()],
        };
        let out = slow.solve(&f, Some(Duration::from_millis(50))).unwrap();
        assert_eq!(out.verdict, Verdict::Timeout);
    }

    #[test]
    fn command_line_parsing() {
        let s = ExternalSolver::from_command_line("kissat -q").unwrap();
        assert_eq!(s.program, "kissat");
        assert_eq!(s.args, vec!["-q"]);
        assert!(ExternalSolver::from_command_line("  ").is_err());
    }
}
