//! CNF formulas for repacking problems.
//!
//! Variables are 1-based as in DIMACS. Every variable carries a
//! [`SemanticVar`] so models can be decoded back into channel assignments
//! and exported formulas can ship a var-map sidecar.

mod cardinality;
mod dimacs;
mod encode;

use std::collections::HashMap;
use std::fmt;
use std::num::NonZeroI32;
use std::ops::Not;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cardinality::{at_most_true, Cardinality};
pub use dimacs::{parse_dimacs, parse_dimacs_result, write_dimacs, DimacsResult};
pub use encode::{decode, encode};

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("station `{station}` has {count} true slot variables in the model")]
    NotExactlyOne { station: String, count: usize },
    #[error("model has {got} values, formula has {expected} variables")]
    ModelSize { expected: usize, got: usize },
    #[error("malformed DIMACS at line {line}: {message}")]
    Dimacs { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }
}

/// A DIMACS literal: `+v` or `-v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(NonZeroI32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        let v = var.0 as i32;
        Lit(NonZeroI32::new(if positive { v } else { -v }).expect("variables are 1-based"))
    }

    pub fn from_dimacs(x: i32) -> Option<Lit> {
        NonZeroI32::new(x).map(Lit)
    }

    pub fn to_dimacs(self) -> i32 {
        self.0.get()
    }

    pub fn var(self) -> Var {
        Var(self.0.get().unsigned_abs())
    }

    pub fn is_positive(self) -> bool {
        self.0.get() > 0
    }

    /// Truth value under `model` (indexed by `var.index()`).
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var().index()] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Clause = Vec<Lit>;

/// What a CNF variable means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SemanticVar {
    /// Station (by index) sits on the given channel number.
    OnChannel { station: usize, channel: u32 },
    /// Station (by index) is cleared.
    Cleared { station: usize },
    /// Some station of this DMA is cleared.
    DmaHasClearing { dma: u32 },
    /// Sequential-counter register.
    Aux { id: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarMap {
    forward: Vec<SemanticVar>,
    reverse: HashMap<SemanticVar, Var>,
}

impl VarMap {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn meaning(&self, var: Var) -> SemanticVar {
        self.forward[var.index()]
    }

    pub fn var(&self, meaning: &SemanticVar) -> Option<Var> {
        self.reverse.get(meaning).copied()
    }

    fn push(&mut self, meaning: SemanticVar) -> Var {
        self.forward.push(meaning);
        let var = Var(self.forward.len() as u32);
        let prev = self.reverse.insert(meaning, var);
        debug_assert!(prev.is_none(), "semantic variable registered twice");
        var
    }

    /// `(var, meaning)` pairs for the JSON sidecar.
    pub fn entries(&self) -> impl Iterator<Item = (Var, SemanticVar)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .map(|(i, m)| (Var(i as u32 + 1), *m))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarMapEntry {
    pub var: u32,
    #[serde(flatten)]
    pub meaning: SemanticVar,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub station_id: Option<String>,
}

/// A formula in conjunctive normal form together with its variable map.
#[derive(Debug, Clone, Default)]
pub struct CnfFormula {
    clauses: Vec<Clause>,
    var_map: VarMap,
}

impl CnfFormula {
    /// A formula with anonymous variables (all registered as `Aux`).
    pub fn from_clauses(var_count: u32, clauses: Vec<Clause>) -> CnfFormula {
        let mut f = CnfFormula::default();
        for _ in 0..var_count {
            f.fresh(SemanticVar::Aux {
                id: f.var_map.len() as u32,
            });
        }
        for c in clauses {
            f.add_clause(c);
        }
        f
    }

    pub fn var_count(&self) -> u32 {
        self.var_map.len() as u32
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn var_map(&self) -> &VarMap {
        &self.var_map
    }

    pub(crate) fn fresh(&mut self, meaning: SemanticVar) -> Var {
        self.var_map.push(meaning)
    }

    pub(crate) fn fresh_aux(&mut self) -> Var {
        let id = self.var_map.len() as u32;
        self.fresh(SemanticVar::Aux { id })
    }

    pub(crate) fn add_clause(&mut self, clause: Clause) {
        assert!(!clause.is_empty(), "empty clause added to formula");
        debug_assert!(clause.iter().all(|l| l.var().0 <= self.var_count()));
        self.clauses.push(clause);
    }

    /// Append an `at_most_true` block, allocating its registers here.
    pub(crate) fn add_at_most(&mut self, vars: &[Lit], k: usize) {
        let card = at_most_true(vars, k, self.var_count() + 1);
        for _ in &card.aux {
            self.fresh_aux();
        }
        for c in card.clauses {
            self.add_clause(c);
        }
    }

    /// Whether every clause is satisfied by `model`.
    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        model.len() == self.var_map.len()
            && self.clauses.iter().all(|c| c.iter().any(|l| l.eval(model)))
    }

    pub fn sidecar(&self, station_ids: &dyn Fn(usize) -> String) -> Vec<VarMapEntry> {
        self.var_map
            .entries()
            .map(|(v, m)| VarMapEntry {
                var: v.0,
                meaning: m,
                station_id: match m {
                    SemanticVar::OnChannel { station, .. } | SemanticVar::Cleared { station } => {
                        Some(station_ids(station))
                    }
                    _ => None,
                },
            })
            .collect()
    }
}
