//! Conflict-driven clause learning core.
//!
//! - two-watched-literal propagation with blocker literals
//! - first-UIP learning with local minimization, LBD tracking
//! - VSIDS branching on an indexed binary heap
//! - Luby restarts, phase saving, activity/LBD based clause deletion
//! - seeded randomness: initial phases, activity jitter, rare random decisions

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{SolveStats, SolverOptions};

type LitCode = u32;
const NO_REASON: u32 = u32::MAX;
const TRUE: i8 = 1;
const FALSE: i8 = -1;
const UNDEF: i8 = 0;
const RESTART_UNIT: u64 = 100;

#[inline]
fn var_of(l: LitCode) -> usize {
    (l >> 1) as usize
}

#[inline]
fn value(assigns: &[i8], l: LitCode) -> i8 {
    let a = assigns[var_of(l)];
    if l & 1 == 1 {
        -a
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: LitCode,
}

#[derive(Debug, Clone)]
struct ClauseData {
    lits: Vec<LitCode>,
    learnt: bool,
    activity: f64,
    lbd: u32,
}

/// Max-heap of variables ordered by activity.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<usize>,
}

impl VarHeap {
    const ABSENT: usize = usize::MAX;

    fn with_vars(n: usize) -> Self {
        VarHeap {
            heap: Vec::with_capacity(n),
            pos: vec![Self::ABSENT; n],
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] != Self::ABSENT
    }

    fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = self.heap.len();
        self.heap.push(v as u32);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.pos[v], act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let pv = self.heap[parent];
            if act[pv as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = pv;
            self.pos[pv as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let child = if r < n && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            let cv = self.heap[child];
            if act[cv as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = cv;
            self.pos[cv as usize] = i;
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }
}

/// Luby sequence value `luby(2, x)`: 1 1 2 1 1 2 4 1 1 2 ...
fn luby(mut x: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

pub(crate) enum SearchResult {
    Sat(Vec<bool>),
    Unsat,
    Timeout,
}

pub(crate) struct Solver {
    clauses: Vec<ClauseData>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<LitCode>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    var_decay: f64,
    cla_inc: f64,
    cla_decay: f64,
    heap: VarHeap,
    polarity: Vec<bool>,
    seen: Vec<bool>,
    rng: ChaCha8Rng,
    random_var_freq: f64,
    num_learnts: usize,
    max_learnts: f64,
    ok: bool,
    pub(crate) stats: SolveStats,
}

impl Solver {
    pub(crate) fn new(num_vars: usize, opts: &SolverOptions) -> Self {
        let mut rng = crate::seed::rng(opts.seed);
        let polarity = (0..num_vars).map(|_| rng.gen_bool(0.5)).collect();
        let activity: Vec<f64> = (0..num_vars).map(|_| rng.gen::<f64>() * 1e-5).collect();
        let mut heap = VarHeap::with_vars(num_vars);
        for v in 0..num_vars {
            heap.insert(v, &activity);
        }
        Solver {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assigns: vec![UNDEF; num_vars],
            level: vec![0; num_vars],
            reason: vec![NO_REASON; num_vars],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            var_decay: 0.95,
            cla_inc: 1.0,
            cla_decay: 0.999,
            heap,
            polarity,
            seen: vec![false; num_vars],
            rng,
            random_var_freq: opts.random_var_freq,
            num_learnts: 0,
            max_learnts: 0.0,
            ok: true,
            stats: SolveStats::default(),
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Add an original clause of DIMACS literals. Must be called before `search`.
    pub(crate) fn add_clause(&mut self, dimacs: &[i32]) {
        if !self.ok {
            return;
        }
        let mut lits: Vec<LitCode> = dimacs
            .iter()
            .map(|&x| ((x.unsigned_abs() - 1) << 1) | u32::from(x < 0))
            .collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return; // tautology
        }
        if lits.iter().any(|&l| value(&self.assigns, l) == TRUE) {
            return;
        }
        lits.retain(|&l| value(&self.assigns, l) != FALSE);
        match lits.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(lits[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(ClauseData {
                    lits,
                    learnt: false,
                    activity: 0.0,
                    lbd: 0,
                });
            }
        }
    }

    fn attach(&mut self, c: ClauseData) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(c.lits[0] ^ 1) as usize].push(Watcher {
            cref,
            blocker: c.lits[1],
        });
        self.watches[(c.lits[1] ^ 1) as usize].push(Watcher {
            cref,
            blocker: c.lits[0],
        });
        if c.learnt {
            self.num_learnts += 1;
        }
        self.clauses.push(c);
        cref
    }

    fn enqueue(&mut self, l: LitCode, reason: u32) {
        let v = var_of(l);
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = if l & 1 == 1 { FALSE } else { TRUE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if value(&self.assigns, w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let lits = &mut self.clauses[w.cref as usize].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if first != w.blocker && value(&self.assigns, first) == TRUE {
                    ws[j] = Watcher {
                        cref: w.cref,
                        blocker: first,
                    };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if value(&self.assigns, lits[k]) != FALSE {
                        lits.swap(1, k);
                        let new_watch = (lits[1] ^ 1) as usize;
                        self.watches[new_watch].push(Watcher {
                            cref: w.cref,
                            blocker: first,
                        });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                j += 1;
                if value(&self.assigns, first) == FALSE {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal first,
    /// highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<LitCode>, u32) {
        let mut learnt: Vec<LitCode> = vec![0];
        let mut path = 0usize;
        let mut p: Option<LitCode> = None;
        let mut index = self.trail.len();
        let current = self.decision_level();

        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            for k in start..self.clauses[confl as usize].lits.len() {
                let q = self.clauses[confl as usize].lits[k];
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[var_of(self.trail[index])] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            confl = self.reason[var_of(lit)];
            self.seen[var_of(lit)] = false;
            path -= 1;
            if path == 0 {
                break;
            }
        }
        learnt[0] = p.expect("conflict at non-zero level has a UIP") ^ 1;

        // Drop literals implied by other literals of the clause.
        let all = learnt.clone();
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let r = self.reason[var_of(l)];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..]
                    .iter()
                    .all(|&q| self.seen[var_of(q)] || self.level[var_of(q)] == 0);
            if !redundant {
                keep.push(l);
            }
        }
        for &l in &all {
            self.seen[var_of(l)] = false;
        }
        learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let (mut best, mut lvl) = (1, self.level[var_of(learnt[1])]);
            for (k, &l) in learnt.iter().enumerate().skip(2) {
                if self.level[var_of(l)] > lvl {
                    best = k;
                    lvl = self.level[var_of(l)];
                }
            }
            learnt.swap(1, best);
            lvl
        };
        (learnt, bt)
    }

    fn lbd(&self, lits: &[LitCode]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|&l| self.level[var_of(l)]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let keep = self.trail_lim[lvl as usize];
        for k in (keep..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = var_of(l);
            self.polarity[v] = l & 1 == 0;
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = keep;
    }

    fn pick_branch(&mut self) -> Option<LitCode> {
        let mut next: Option<usize> = None;
        if self.random_var_freq > 0.0
            && !self.heap.is_empty()
            && self.rng.gen_bool(self.random_var_freq)
        {
            let v = self.heap.heap[self.rng.gen_range(0..self.heap.heap.len())] as usize;
            if self.assigns[v] == UNDEF {
                next = Some(v);
            }
        }
        while next.is_none() {
            let v = self.heap.pop(&self.activity)?;
            if self.assigns[v] == UNDEF {
                next = Some(v);
            }
        }
        let v = next?;
        Some(((v as u32) << 1) | u32::from(!self.polarity[v]))
    }

    fn locked(&self, cref: u32) -> bool {
        let c0 = self.clauses[cref as usize].lits[0];
        self.reason[var_of(c0)] == cref && value(&self.assigns, c0) == TRUE
    }

    /// Delete the weaker half of the learnt clauses and compact storage.
    fn reduce_db(&mut self) {
        let mut cands: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&c| {
                let cl = &self.clauses[c as usize];
                cl.learnt && cl.lbd > 2 && cl.lits.len() > 2 && !self.locked(c)
            })
            .collect();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.total_cmp(&cb.activity))
        });
        let mut delete = vec![false; self.clauses.len()];
        for &c in &cands[..cands.len() / 2] {
            delete[c as usize] = true;
        }

        let mut remap = vec![NO_REASON; self.clauses.len()];
        let old = std::mem::take(&mut self.clauses);
        self.num_learnts = 0;
        for (i, c) in old.into_iter().enumerate() {
            if !delete[i] {
                remap[i] = self.clauses.len() as u32;
                if c.learnt {
                    self.num_learnts += 1;
                }
                self.clauses.push(c);
            }
        }
        for r in &mut self.reason {
            if *r != NO_REASON {
                *r = remap[*r as usize];
                debug_assert_ne!(*r, NO_REASON, "deleted a reason clause");
            }
        }
        for w in &mut self.watches {
            w.clear();
        }
        for (i, c) in self.clauses.iter().enumerate() {
            self.watches[(c.lits[0] ^ 1) as usize].push(Watcher {
                cref: i as u32,
                blocker: c.lits[1],
            });
            self.watches[(c.lits[1] ^ 1) as usize].push(Watcher {
                cref: i as u32,
                blocker: c.lits[0],
            });
        }
    }

    pub(crate) fn search(&mut self, deadline: Option<Instant>) -> SearchResult {
        if !self.ok {
            return SearchResult::Unsat;
        }
        if self.propagate().is_some() {
            return SearchResult::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        let mut restart_idx = 0u64;
        let mut restart_limit = luby(restart_idx) * RESTART_UNIT;
        let mut since_restart = 0u64;
        let mut ticks = 0u64;

        loop {
            ticks += 1;
            if ticks.is_multiple_of(256) && deadline.is_some_and(|d| Instant::now() >= d) {
                return SearchResult::Timeout;
            }
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    return SearchResult::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let lbd = self.lbd(&learnt);
                    let first = learnt[0];
                    let cref = self.attach(ClauseData {
                        lits: learnt,
                        learnt: true,
                        activity: 0.0,
                        lbd,
                    });
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                    self.stats.learnt_clauses += 1;
                }
                self.var_inc /= self.var_decay;
                self.cla_inc /= self.cla_decay;
            } else {
                if since_restart >= restart_limit {
                    self.stats.restarts += 1;
                    restart_idx += 1;
                    restart_limit = luby(restart_idx) * RESTART_UNIT;
                    since_restart = 0;
                    self.cancel_until(0);
                    continue;
                }
                if self.num_learnts as f64 >= self.max_learnts {
                    self.reduce_db();
                    self.max_learnts *= 1.1;
                }
                match self.pick_branch() {
                    None => {
                        let model = self.assigns.iter().map(|&a| a == TRUE).collect();
                        return SearchResult::Sat(model);
                    }
                    Some(l) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, NO_REASON);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn heap_orders_by_activity() {
        let act = vec![0.5, 3.0, 1.0, 2.0];
        let mut h = VarHeap::with_vars(4);
        for v in 0..4 {
            h.insert(v, &act);
        }
        let order: Vec<usize> = std::iter::from_fn(|| h.pop(&act)).collect();
        assert_eq!(order, vec![1, 3, 2, 0]);
    }
}
