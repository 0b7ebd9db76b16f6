//! DIMACS CNF export and solver-output parsing.

use std::io::{self, Write};

use super::{Clause, CnfError, CnfFormula, Lit};

/// Write `p cnf V C` followed by one zero-terminated clause per line.
pub fn write_dimacs<W: Write>(formula: &CnfFormula, mut sink: W) -> io::Result<()> {
    writeln!(
        sink,
        "p cnf {} {}",
        formula.var_count(),
        formula.clauses().len()
    )?;
    let mut line = String::new();
    for clause in formula.clauses() {
        line.clear();
        for lit in clause {
            line.push_str(&lit.to_dimacs().to_string());
            line.push(' ');
        }
        line.push('0');
        writeln!(sink, "{line}")?;
    }
    sink.flush()
}

/// Parse a DIMACS CNF file into an anonymous formula.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let err = |line: usize, message: &str| CnfError::Dimacs {
        line,
        message: message.to_string(),
    };
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(err(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = parts[2]
                .parse()
                .map_err(|_| err(line_no, "bad variable count"))?;
            let count = parts[3]
                .parse()
                .map_err(|_| err(line_no, "bad clause count"))?;
            header = Some((vars, count));
            continue;
        }
        let (vars, _) = header.ok_or_else(|| err(line_no, "clause before header"))?;
        for tok in line.split_whitespace() {
            let x: i32 = tok.parse().map_err(|_| err(line_no, "bad literal"))?;
            match Lit::from_dimacs(x) {
                None => {
                    if current.is_empty() {
                        return Err(err(line_no, "empty clause"));
                    }
                    clauses.push(std::mem::take(&mut current));
                }
                Some(l) if l.var().0 > vars => {
                    return Err(err(line_no, "literal exceeds variable count"))
                }
                Some(l) => current.push(l),
            }
        }
    }
    let (vars, count) = header.ok_or_else(|| err(0, "missing header"))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != count {
        return Err(err(
            0,
            &format!("header declares {count} clauses, found {}", clauses.len()),
        ));
    }
    Ok(CnfFormula::from_clauses(vars, clauses))
}

/// What an external solver reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimacsResult {
    /// Model over variables `1..=var_count`; unlisted variables are false.
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

/// Parse SAT-competition style output (`s ...` status and `v ...` lines).
/// Bare `SAT` / `UNSAT` status lines as written by minisat are accepted too.
pub fn parse_dimacs_result(text: &str, var_count: u32) -> Result<DimacsResult, CnfError> {
    let err = |line: usize, message: &str| CnfError::Dimacs {
        line,
        message: message.to_string(),
    };
    let mut status: Option<bool> = None;
    let mut unknown = false;
    let mut model = vec![false; var_count as usize];
    let mut saw_values = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        let first = tokens.next();
        let literals = match first {
            Some("s") => {
                match line[1..].trim() {
                    "SATISFIABLE" => status = Some(true),
                    "UNSATISFIABLE" => status = Some(false),
                    "UNKNOWN" | "INDETERMINATE" => unknown = true,
                    other => return Err(err(n + 1, &format!("unknown status `{other}`"))),
                }
                continue;
            }
            Some("SAT") => {
                status = Some(true);
                continue;
            }
            Some("UNSAT") => {
                status = Some(false);
                continue;
            }
            Some("INDET") => {
                unknown = true;
                continue;
            }
            Some("v") => tokens,
            // minisat result files put the model on a bare line
            Some(t) if status == Some(true) && t.parse::<i32>().is_ok() => line.split_whitespace(),
            _ => continue,
        };
        for tok in literals {
            let x: i32 = tok
                .parse()
                .map_err(|_| err(n + 1, "bad literal in model"))?;
            if x == 0 {
                continue;
            }
            let v = x.unsigned_abs();
            if v > var_count {
                return Err(err(n + 1, "model literal exceeds variable count"));
            }
            model[v as usize - 1] = x > 0;
            saw_values = true;
        }
    }
    match status {
        Some(true) if saw_values || var_count == 0 => Ok(DimacsResult::Sat(model)),
        Some(true) => Err(err(0, "SAT without model")),
        Some(false) => Ok(DimacsResult::Unsat),
        None if unknown => Ok(DimacsResult::Unknown),
        None => Err(err(0, "no status line")),
    }
}
