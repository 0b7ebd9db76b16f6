use crate::instance::{ChannelAssignment, InterferenceKind, RepackProblem, Slot};

use super::{CnfError, CnfFormula, Lit, SemanticVar, Var};

/// Translate `problem` into CNF.
///
/// Per station `i` there is a cleared variable `x[i][0]` followed by one
/// variable per available channel. Clause families, in emission order:
///
/// - stations outside `R`: at least one slot (cleared or a channel);
/// - stations in `R`: at least one channel;
/// - pairwise at-most-one over each station's slots;
/// - co-channel pairs never share a channel;
/// - `ADJ_UP(a, b)`: `a` never sits one channel above `b`;
/// - `ADJ_DOWN(a, b)`: `a` never sits one channel below `b`;
/// - forbidden channels for everyone, plus domain rows when enabled;
/// - at most `b` stations cleared nationwide;
/// - at most `b'` cleared inside each capped DMA;
/// - DMA indicators `y[j] <-> some station of j is cleared`, with at most
///   `d` of them true.
///
/// Adjacency uses channel numbers, so a pair whose partner channel is not in
/// the available set produces no clause.
pub fn encode(problem: &RepackProblem<'_>) -> CnfFormula {
    let inst = problem.instance;
    let channels = &problem.available.channels;
    let c = channels.len();
    let mut f = CnfFormula::default();

    // slot(i, 0) = cleared, slot(i, p + 1) = channels[p]
    let mut slots: Vec<Vec<Var>> = Vec::with_capacity(inst.len());
    for i in 0..inst.len() {
        let mut row = Vec::with_capacity(c + 1);
        row.push(f.fresh(SemanticVar::Cleared { station: i }));
        for &ch in channels {
            row.push(f.fresh(SemanticVar::OnChannel {
                station: i,
                channel: ch,
            }));
        }
        slots.push(row);
    }

    let dma_vars: Vec<(u32, Var)> = if problem.max_dmas_with_clearing.is_some() {
        inst.dma_members()
            .keys()
            .map(|&dma| (dma, f.fresh(SemanticVar::DmaHasClearing { dma })))
            .collect()
    } else {
        Vec::new()
    };

    // (1), (2)
    for (i, row) in slots.iter().enumerate() {
        if problem.is_must_repack(i) {
            if c == 0 {
                f.add_clause(vec![row[0].pos()]);
                f.add_clause(vec![row[0].neg()]);
            } else {
                f.add_clause(row[1..].iter().map(|v| v.pos()).collect());
            }
        } else {
            f.add_clause(row.iter().map(|v| v.pos()).collect());
        }
    }

    // (3)
    for row in &slots {
        for j in 0..row.len() {
            for k in j + 1..row.len() {
                f.add_clause(vec![row[j].neg(), row[k].neg()]);
            }
        }
    }

    // (4)-(6)
    for con in inst.interference() {
        let (a, b) = (&slots[con.a], &slots[con.b]);
        for (p, &ch) in channels.iter().enumerate() {
            let partner = match con.kind {
                InterferenceKind::Co => Some(ch),
                InterferenceKind::AdjUp => ch.checked_sub(1),
                InterferenceKind::AdjDown => Some(ch + 1),
            };
            if let Some(q) = partner.and_then(|pc| problem.available.position(pc)) {
                f.add_clause(vec![a[p + 1].neg(), b[q + 1].neg()]);
            }
        }
    }

    // (7)
    for (i, row) in slots.iter().enumerate() {
        for (p, &ch) in channels.iter().enumerate() {
            if problem.channel_excluded(i, ch) {
                f.add_clause(vec![row[p + 1].neg()]);
            }
        }
    }

    // (8)
    if let Some(b) = problem.max_cleared_nationwide {
        let cleared: Vec<Lit> = slots.iter().map(|r| r[0].pos()).collect();
        f.add_at_most(&cleared, b);
    }

    // (9)
    for (&dma, &cap) in &problem.dma_caps {
        let cleared: Vec<Lit> = inst
            .members_of(dma)
            .iter()
            .map(|&i| slots[i][0].pos())
            .collect();
        f.add_at_most(&cleared, cap);
    }

    // (10)-(12)
    if let Some(d) = problem.max_dmas_with_clearing {
        for &(dma, y) in &dma_vars {
            let members = inst.members_of(dma);
            for &i in members {
                f.add_clause(vec![slots[i][0].neg(), y.pos()]);
            }
            let mut back: Vec<Lit> = members.iter().map(|&i| slots[i][0].pos()).collect();
            back.push(y.neg());
            f.add_clause(back);
        }
        let ys: Vec<Lit> = dma_vars.iter().map(|(_, y)| y.pos()).collect();
        f.add_at_most(&ys, d);
    }

    f
}

/// Read the channel assignment out of a model of [`encode`]'s output.
pub fn decode(
    problem: &RepackProblem<'_>,
    formula: &CnfFormula,
    model: &[bool],
) -> Result<ChannelAssignment, CnfError> {
    if model.len() != formula.var_count() as usize {
        return Err(CnfError::ModelSize {
            expected: formula.var_count() as usize,
            got: model.len(),
        });
    }
    let inst = problem.instance;
    let mut slots: Vec<Option<Slot>> = vec![None; inst.len()];
    let mut counts = vec![0usize; inst.len()];
    for (var, meaning) in formula.var_map().entries() {
        if !model[var.index()] {
            continue;
        }
        let (station, slot) = match meaning {
            SemanticVar::Cleared { station } => (station, Slot::Cleared),
            SemanticVar::OnChannel { station, channel } => (station, Slot::Channel(channel)),
            _ => continue,
        };
        counts[station] += 1;
        slots[station] = Some(slot);
    }
    if let Some((i, &count)) = counts.iter().enumerate().find(|(_, &n)| n != 1) {
        return Err(CnfError::NotExactlyOne {
            station: inst.station(i).id.clone(),
            count,
        });
    }
    Ok(ChannelAssignment::new(
        slots.into_iter().map(Option::unwrap).collect(),
    ))
}
