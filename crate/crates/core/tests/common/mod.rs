//! Test oracles that share no code with the encoder or solver.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use repack_core::cnf::{Cardinality, Lit, Var};
use repack_core::instance::{
    Affiliation, ChannelUniverse, DomainConstraint, Instance, Interference, InterferenceKind,
    RepackProblem, Slot, Station,
};

/// Channels left after removing `target / 6` non-forbidden channels from the
/// top of the universe. Forbidden channels passed on the way down go too.
pub fn remaining_channels(universe: &ChannelUniverse, target_mhz: u32) -> Vec<u32> {
    let mut chans = universe.channels.clone();
    chans.sort_unstable();
    let mut to_remove = (target_mhz / 6) as usize;
    while to_remove > 0 {
        let top = chans.pop().expect("target leaves channels");
        if !universe.forbidden.contains(&top) {
            to_remove -= 1;
        }
    }
    chans
}

/// Everything the oracle needs, copied out of a [`RepackProblem`].
#[derive(Debug, Clone)]
pub struct Question {
    pub channels: Vec<u32>,
    pub forbidden: BTreeSet<u32>,
    pub use_domain: bool,
    pub must: BTreeSet<usize>,
    pub b: Option<usize>,
    pub dma_caps: BTreeMap<u32, usize>,
    pub d: Option<usize>,
}

impl Question {
    pub fn of(p: &RepackProblem<'_>) -> Self {
        Question {
            channels: remaining_channels(p.instance.universe(), p.target_mhz()),
            forbidden: p.instance.universe().forbidden.clone(),
            use_domain: p.use_domain_constraints,
            must: p.must_repack.clone(),
            b: p.max_cleared_nationwide,
            dma_caps: p.dma_caps.clone(),
            d: p.max_dmas_with_clearing,
        }
    }
}

fn pair_ok(kind: InterferenceKind, ca: u32, cb: u32) -> bool {
    match kind {
        InterferenceKind::Co => ca != cb,
        InterferenceKind::AdjUp => ca != cb + 1,
        InterferenceKind::AdjDown => ca + 1 != cb,
    }
}

/// Independent check of a full assignment.
pub fn satisfies(inst: &Instance, q: &Question, slots: &[Slot]) -> bool {
    if slots.len() != inst.len() {
        return false;
    }
    let excluded: BTreeSet<(usize, u32)> = inst
        .domain()
        .iter()
        .map(|d| (d.station, d.channel))
        .collect();
    for (i, s) in slots.iter().enumerate() {
        match *s {
            Slot::Cleared if q.must.contains(&i) => return false,
            Slot::Cleared => {}
            Slot::Channel(ch) => {
                if !q.channels.contains(&ch) || q.forbidden.contains(&ch) {
                    return false;
                }
                if q.use_domain && excluded.contains(&(i, ch)) {
                    return false;
                }
            }
        }
    }
    for c in inst.interference() {
        if let (Slot::Channel(ca), Slot::Channel(cb)) = (slots[c.a], slots[c.b]) {
            if !pair_ok(c.kind, ca, cb) {
                return false;
            }
        }
    }
    let cleared: Vec<usize> = (0..slots.len())
        .filter(|&i| slots[i] == Slot::Cleared)
        .collect();
    if q.b.is_some_and(|b| cleared.len() > b) {
        return false;
    }
    let mut per_dma: BTreeMap<u32, usize> = BTreeMap::new();
    for &i in &cleared {
        *per_dma.entry(inst.station(i).dma).or_default() += 1;
    }
    if q.dma_caps
        .iter()
        .any(|(dma, &cap)| per_dma.get(dma).copied().unwrap_or(0) > cap)
    {
        return false;
    }
    !q.d.is_some_and(|d| per_dma.len() > d)
}

/// Depth-first search over every station's slots with partial checks.
pub fn brute_force(inst: &Instance, q: &Question) -> Option<Vec<Slot>> {
    let n = inst.len();
    let excluded: BTreeSet<(usize, u32)> = inst
        .domain()
        .iter()
        .map(|d| (d.station, d.channel))
        .collect();
    let options: Vec<Vec<Slot>> = (0..n)
        .map(|i| {
            let mut o: Vec<Slot> = q
                .channels
                .iter()
                .filter(|&&ch| {
                    !q.forbidden.contains(&ch) && !(q.use_domain && excluded.contains(&(i, ch)))
                })
                .map(|&ch| Slot::Channel(ch))
                .collect();
            if !q.must.contains(&i) {
                o.push(Slot::Cleared);
            }
            o
        })
        .collect();
    // constraints grouped by their later endpoint
    let mut back: Vec<Vec<(InterferenceKind, usize, bool)>> = vec![Vec::new(); n];
    for c in inst.interference() {
        let (later, earlier, later_is_a) = if c.a > c.b {
            (c.a, c.b, true)
        } else {
            (c.b, c.a, false)
        };
        back[later].push((c.kind, earlier, later_is_a));
    }
    let mut slots = vec![Slot::Cleared; n];
    let mut per_dma: BTreeMap<u32, usize> = BTreeMap::new();
    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        inst: &Instance,
        q: &Question,
        options: &[Vec<Slot>],
        back: &[Vec<(InterferenceKind, usize, bool)>],
        slots: &mut Vec<Slot>,
        cleared: usize,
        per_dma: &mut BTreeMap<u32, usize>,
    ) -> bool {
        if i == slots.len() {
            return true;
        }
        for &opt in &options[i] {
            match opt {
                Slot::Cleared => {
                    if q.b.is_some_and(|b| cleared + 1 > b) {
                        continue;
                    }
                    let dma = inst.station(i).dma;
                    let now = per_dma.get(&dma).copied().unwrap_or(0) + 1;
                    if q.dma_caps.get(&dma).is_some_and(|&cap| now > cap) {
                        continue;
                    }
                    if now == 1 && q.d.is_some_and(|d| per_dma.len() + 1 > d) {
                        continue;
                    }
                    per_dma.insert(dma, now);
                    slots[i] = opt;
                    if go(i + 1, inst, q, options, back, slots, cleared + 1, per_dma) {
                        return true;
                    }
                    if now == 1 {
                        per_dma.remove(&dma);
                    } else {
                        per_dma.insert(dma, now - 1);
                    }
                }
                Slot::Channel(ch) => {
                    let ok = back[i].iter().all(|&(kind, j, i_is_a)| match slots[j] {
                        Slot::Channel(cj) => {
                            if i_is_a {
                                pair_ok(kind, ch, cj)
                            } else {
                                pair_ok(kind, cj, ch)
                            }
                        }
                        Slot::Cleared => true,
                    });
                    if !ok {
                        continue;
                    }
                    slots[i] = opt;
                    if go(i + 1, inst, q, options, back, slots, cleared, per_dma) {
                        return true;
                    }
                }
            }
        }
        false
    }
    go(0, inst, q, &options, &back, &mut slots, 0, &mut per_dma).then_some(slots)
}

/// Smallest nationwide cap the oracle can satisfy.
pub fn brute_force_min_cleared(inst: &Instance, q: &Question) -> Option<usize> {
    (0..=inst.len()).find(|&b| {
        brute_force(
            inst,
            &Question {
                b: Some(b),
                ..q.clone()
            },
        )
        .is_some()
    })
}

/// Random small instance with mixed constraints. DMAs are 1..=3. The
/// universe has `2..=max_channels + 1` channels and its top one is never
/// forbidden, so a 6 MHz target always leaves at most `max_channels`.
pub fn random_instance(rng: &mut impl Rng, max_n: usize, max_channels: usize) -> Instance {
    let n = rng.gen_range(1..=max_n);
    let dmas = rng.gen_range(1..=3u32);
    let stations: Vec<Station> = (0..n)
        .map(|i| Station {
            id: format!("t{i}"),
            dma: rng.gen_range(1..=dmas),
            affiliation: Affiliation::None,
            revenue: 0.0,
        })
        .collect();
    let count = rng.gen_range(2..=max_channels + 1);
    let forbidden: Vec<u32> = (0..count as u32 - 1)
        .map(|k| 14 + k)
        .filter(|_| rng.gen_bool(0.1))
        .collect();
    let universe = ChannelUniverse::contiguous(14, count, forbidden);
    let density = rng.gen_range(0.0..0.6);
    let mut interference = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if a < b && rng.gen_bool(density) {
                interference.push(Interference {
                    kind: InterferenceKind::Co,
                    a,
                    b,
                });
            }
            if rng.gen_bool(density / 3.0) {
                interference.push(Interference {
                    kind: InterferenceKind::AdjUp,
                    a,
                    b,
                });
            }
            if rng.gen_bool(density / 3.0) {
                interference.push(Interference {
                    kind: InterferenceKind::AdjDown,
                    a,
                    b,
                });
            }
        }
    }
    let mut domain = Vec::new();
    for station in 0..n {
        for &channel in &universe.channels {
            if rng.gen_bool(0.1) {
                domain.push(DomainConstraint { station, channel });
            }
        }
    }
    let names = (1..=dmas).map(|d| (d, format!("Market {d}"))).collect();
    Instance::from_indexed(stations, universe, interference, domain, names)
        .expect("valid random instance")
}

/// A random question over `inst`: target, R, caps and the domain switch.
pub fn random_problem<'a>(rng: &mut impl Rng, inst: &'a Instance) -> RepackProblem<'a> {
    let usable = inst
        .universe()
        .channels
        .iter()
        .filter(|c| !inst.universe().forbidden.contains(c))
        .count();
    let removed = rng.gen_range(1..=usable.min(2)) as u32;
    let mut p = RepackProblem::new(inst, 6 * removed)
        .expect("target in range")
        .with_domain(rng.gen_bool(0.7));
    let n = inst.len();
    let r: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    p = p.with_must_repack(r).unwrap();
    if rng.gen_bool(0.5) {
        p = p.with_max_cleared(Some(rng.gen_range(0..=n)));
    }
    if rng.gen_bool(0.3) {
        let dma = *inst.dmas().keys().next().unwrap();
        p = p.with_dma_cap(dma, rng.gen_range(0..=2)).unwrap();
    }
    if rng.gen_bool(0.3) {
        p = p.with_max_dmas(Some(rng.gen_range(0..=inst.dma_members().len())));
    }
    p
}

/// Whether `card` admits a register completion when the inputs take the
/// values in `bits`. With inputs fixed every clause is Horn in the
/// registers, so forward chaining from all-false decides it exactly.
pub fn card_completes(vars: &[Lit], card: &Cardinality, bits: u64) -> bool {
    let input: HashMap<Var, bool> = vars
        .iter()
        .enumerate()
        .map(|(i, l)| (l.var(), (bits >> i) & 1 == 1))
        .collect();
    let mut regs: HashMap<Var, bool> = HashMap::new();
    let value = |l: Lit, regs: &HashMap<Var, bool>| {
        let v = input
            .get(&l.var())
            .or_else(|| regs.get(&l.var()))
            .copied()
            .unwrap_or(false);
        v == l.is_positive()
    };
    loop {
        let mut changed = false;
        for c in &card.clauses {
            if c.iter().any(|&l| value(l, &regs)) {
                continue;
            }
            let heads: Vec<Lit> = c
                .iter()
                .copied()
                .filter(|l| l.is_positive() && !input.contains_key(&l.var()))
                .collect();
            assert!(heads.len() <= 1, "clause not Horn once inputs are fixed");
            match heads.first() {
                Some(h) => {
                    regs.insert(h.var(), true);
                    changed = true;
                }
                None => return false,
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Input literal value under `bits`, for the `<= k` predicate.
pub fn true_inputs(vars: &[Lit], bits: u64) -> usize {
    vars.iter()
        .enumerate()
        .filter(|(i, l)| ((bits >> i) & 1 == 1) == l.is_positive())
        .count()
}
