//! Sequential-counter encoding of `at most k of these literals are true`
//! (Sinz, CP 2005, LT_SEQ).
//!
//! Register `s[i][j]` means "at least `j + 1` of the first `i + 1` inputs are
//! true". Uses `(n - 1) * k` fresh variables and `2nk + n - 3k - 1` clauses.

use super::{Clause, Lit, Var};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cardinality {
    pub clauses: Vec<Clause>,
    /// Fresh register variables, numbered consecutively from `first_fresh`.
    pub aux: Vec<Var>,
}

/// Encode `sum(vars) <= k`. Registers are numbered from `first_fresh`.
pub fn at_most_true(vars: &[Lit], k: usize, first_fresh: u32) -> Cardinality {
    let n = vars.len();
    if k >= n {
        return Cardinality::default();
    }
    if k == 0 {
        return Cardinality {
            clauses: vars.iter().map(|&x| vec![!x]).collect(),
            aux: Vec::new(),
        };
    }

    let aux: Vec<Var> = (0..(n - 1) * k)
        .map(|t| Var(first_fresh + t as u32))
        .collect();
    let s = |i: usize, j: usize| aux[i * k + j].pos();
    let mut clauses = Vec::with_capacity(2 * n * k + n);

    clauses.push(vec![!vars[0], s(0, 0)]);
    for j in 1..k {
        clauses.push(vec![!s(0, j)]);
    }
    for (i, &x) in vars.iter().enumerate().take(n - 1).skip(1) {
        clauses.push(vec![!x, s(i, 0)]);
        clauses.push(vec![!s(i - 1, 0), s(i, 0)]);
        for j in 1..k {
            clauses.push(vec![!x, !s(i - 1, j - 1), s(i, j)]);
            clauses.push(vec![!s(i - 1, j), s(i, j)]);
        }
        clauses.push(vec![!x, !s(i - 1, k - 1)]);
    }
    clauses.push(vec![!vars[n - 1], !s(n - 2, k - 1)]);

    Cardinality { clauses, aux }
}
