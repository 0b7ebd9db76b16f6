//! Satisfiability checking: an embedded CDCL solver and an adapter for
//! external DIMACS solvers.

mod external;
mod solver;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cnf::CnfFormula;

pub use external::{ExternalSolver, ExternalSolverError, EXTERNAL_SOLVER_ENV};

/// Default per-solve budget; longer runs are treated as infeasible upstream.
pub const DEFAULT_TIME_BUDGET: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub seed: u64,
    /// `None` runs to completion.
    pub time_budget: Option<Duration>,
    /// Probability that a decision picks a random variable instead of the
    /// most active one.
    pub random_var_freq: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            seed: 0,
            time_budget: Some(DEFAULT_TIME_BUDGET),
            random_var_freq: 0.02,
        }
    }
}

impl SolverOptions {
    pub fn seeded(seed: u64) -> Self {
        SolverOptions {
            seed,
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, budget: Option<Duration>) -> Self {
        self.time_budget = budget;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnt_clauses: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Model indexed by `Var::index()`.
    Sat(Vec<bool>),
    Unsat,
    Timeout,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn model(&self) -> Option<&[bool]> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub verdict: Verdict,
    pub stats: SolveStats,
}

/// Decide `formula` with the embedded solver.
///
/// Deterministic for a fixed seed as long as the budget is not hit. A `Sat`
/// model is checked against every clause before it is returned.
pub fn solve(formula: &CnfFormula, opts: &SolverOptions) -> SolveOutcome {
    let start = Instant::now();
    let deadline = opts.time_budget.map(|b| start + b);
    let mut s = solver::Solver::new(formula.var_count() as usize, opts);
    let mut buf = Vec::new();
    for clause in formula.clauses() {
        buf.clear();
        buf.extend(clause.iter().map(|l| l.to_dimacs()));
        s.add_clause(&buf);
    }
    let verdict = match s.search(deadline) {
        solver::SearchResult::Sat(model) => {
            assert!(
                formula.is_satisfied_by(&model),
                "solver produced a model that violates a clause"
            );
            Verdict::Sat(model)
        }
        solver::SearchResult::Unsat => Verdict::Unsat,
        solver::SearchResult::Timeout => Verdict::Timeout,
    };
    let mut stats = s.stats.clone();
    stats.wall_time_ms = start.elapsed().as_millis() as u64;
    SolveOutcome { verdict, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{Lit, Var};
    use rand::Rng;

    fn lits(c: &[i32]) -> Vec<Lit> {
        c.iter().map(|&x| Lit::from_dimacs(x).unwrap()).collect()
    }

    fn brute_force(n: u32, clauses: &[Vec<Lit>]) -> bool {
        (0..1u64 << n).any(|bits| {
            clauses.iter().all(|c| {
                c.iter()
                    .any(|l| ((bits >> l.var().index()) & 1 == 1) == l.is_positive())
            })
        })
    }

    #[test]
    fn empty_formula_is_sat() {
        let f = CnfFormula::from_clauses(0, vec![]);
        assert_eq!(
            solve(&f, &SolverOptions::default()).verdict,
            Verdict::Sat(vec![])
        );
        let f = CnfFormula::from_clauses(3, vec![]);
        assert!(solve(&f, &SolverOptions::default()).verdict.is_sat());
    }

    #[test]
    fn contradiction_is_unsat() {
        let f = CnfFormula::from_clauses(1, vec![lits(&[1]), lits(&[-1])]);
        assert_eq!(solve(&f, &SolverOptions::default()).verdict, Verdict::Unsat);
    }

    #[test]
    fn pigeonhole_five_into_four_is_unsat() {
        let (p, h) = (5u32, 4u32);
        let var = |i: u32, j: u32| Var(i * h + j + 1);
        let mut clauses = Vec::new();
        for i in 0..p {
            clauses.push((0..h).map(|j| var(i, j).pos()).collect());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    clauses.push(vec![var(a, j).neg(), var(b, j).neg()]);
                }
            }
        }
        let f = CnfFormula::from_clauses(p * h, clauses);
        let out = solve(&f, &SolverOptions::seeded(3));
        assert_eq!(out.verdict, Verdict::Unsat);
        assert!(out.stats.conflicts > 0);
    }

    #[test]
    fn random_3cnf_matches_brute_force() {
        let mut rng = crate::seed::rng(2024);
        for round in 0..200 {
            let n = rng.gen_range(3..=16u32);
            let m = (n as f64 * rng.gen_range(3.0..5.5)) as usize;
            let clauses: Vec<Vec<Lit>> = (0..m)
                .map(|_| {
                    (0..3)
                        .map(|_| Lit::new(Var(rng.gen_range(1..=n)), rng.gen_bool(0.5)))
                        .collect()
                })
                .collect();
            let f = CnfFormula::from_clauses(n, clauses.clone());
            let expected = brute_force(n, &clauses);
            let out = solve(&f, &SolverOptions::seeded(round));
            assert_eq!(out.verdict.is_sat(), expected, "round {round}");
            assert_ne!(out.verdict, Verdict::Timeout);
        }
    }

    #[test]
    fn same_seed_same_model_and_seeds_vary_models() {
        // 12 free variables with one weak clause: many models.
        let f = CnfFormula::from_clauses(12, vec![lits(&[1, 2, 3])]);
        let a = solve(&f, &SolverOptions::seeded(5));
        let b = solve(&f, &SolverOptions::seeded(5));
        assert_eq!(a.verdict, b.verdict);
        let distinct: std::collections::HashSet<Vec<bool>> = (0..20)
            .map(|s| {
                solve(&f, &SolverOptions::seeded(s))
                    .verdict
                    .model()
                    .unwrap()
                    .to_vec()
            })
            .collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn zero_budget_times_out_on_hard_formula() {
        let (p, h) = (10u32, 9u32);
        let var = |i: u32, j: u32| Var(i * h + j + 1);
        let mut clauses = Vec::new();
        for i in 0..p {
            clauses.push((0..h).map(|j| var(i, j).pos()).collect());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    clauses.push(vec![var(a, j).neg(), var(b, j).neg()]);
                }
            }
        }
        let f = CnfFormula::from_clauses(p * h, clauses);
        let out = solve(
            &f,
            &SolverOptions::seeded(0).with_budget(Some(Duration::ZERO)),
        );
        assert_eq!(out.verdict, Verdict::Timeout);
    }
}
