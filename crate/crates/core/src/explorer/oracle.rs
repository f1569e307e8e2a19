//! Brute-force enumeration of every admissible interleaving, without any
//! partial-order reduction. Used to cross-check the explorer.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{schedule_of, trace::canonical_trace_id, TraceId};
use crate::coherence::check_extension;
use crate::engine::{EngineError, ExecState, Machine, Pid};
use crate::ir::Program;
use crate::par::Pool;
use crate::relations::{compute_relations, RelationSet};

pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnumerateError {
    #[error("{events} schedulable events exceed the cap of {cap} (about {estimate:.3e} interleavings)")]
    TooLarge {
        events: usize,
        cap: usize,
        estimate: f64,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumerated {
    pub schedule: Vec<Pid>,
    pub trace_id: TraceId,
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub sequences: Vec<Enumerated>,
    /// Prefixes with no admissible extension.
    pub blocked: u64,
}

impl Enumeration {
    pub fn trace_ids(&self) -> BTreeSet<TraceId> {
        self.sequences.iter().map(|s| s.trace_id.clone()).collect()
    }
}

/// Upper bound on interleavings: the multinomial coefficient over the
/// per-process event counts, with each thread bounded by its longest path.
fn estimate(p: &Program) -> f64 {
    let mut counts = Vec::new();
    for t in &p.threads {
        let single = Program {
            threads: vec![t.clone()],
            ..p.clone()
        };
        let n = single.schedulable_event_bound();
        counts.push(n.div_ceil(2));
        counts.push(n / 2);
    }
    let total: usize = counts.iter().sum();
    let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let ln = ln_fact(total) - counts.iter().map(|&c| ln_fact(c)).sum::<f64>();
    ln.exp()
}

struct Frontier {
    state: ExecState,
    rels: RelationSet,
}

fn successors(m: &Machine, f: &Frontier) -> Result<Vec<Frontier>, EngineError> {
    let mut out = Vec::new();
    for p in m.enabled(&f.state) {
        let mut next = f.state.clone();
        let range = m.step(&mut next, p)?;
        let mut rels = f.rels.clone();
        rels.update(&next.seq);
        if check_extension(&next.seq, &rels, range.start).is_none() {
            out.push(Frontier { state: next, rels });
        }
    }
    Ok(out)
}

fn dfs(m: &Machine, f: Frontier, out: &mut Enumeration) -> Result<(), EngineError> {
    if m.is_terminal(&f.state) {
        out.sequences.push(Enumerated {
            schedule: schedule_of(&f.state.seq),
            trace_id: canonical_trace_id(&f.state.seq, &f.rels),
        });
        return Ok(());
    }
    let next = successors(m, &f)?;
    if next.is_empty() {
        out.blocked += 1;
    }
    for s in next {
        dfs(m, s, out)?;
    }
    Ok(())
}

/// Every maximal admissible sequence of `p` (taken as is, without the
/// early-write transformation), in schedule order. Refuses programs with
/// more than `cap` schedulable events.
pub fn enumerate_all(p: &Program, cap: usize, pool: &Pool) -> Result<Enumeration, EnumerateError> {
    let events = p.schedulable_event_bound();
    if events > cap {
        return Err(EnumerateError::TooLarge {
            events,
            cap,
            estimate: estimate(p),
        });
    }
    let m = Machine::new(p);
    let root = m.initial_state()?;
    let rels = compute_relations(&root.seq);
    let mut out = Enumeration {
        sequences: Vec::new(),
        blocked: 0,
    };

    // split on short prefixes so the subtrees can be searched in parallel
    let mut frontier = vec![Frontier { state: root, rels }];
    let target = if pool.is_parallel() { 64 } else { 1 };
    while frontier.len() < target {
        let mut next = Vec::new();
        let mut grew = false;
        for f in frontier {
            if m.is_terminal(&f.state) {
                next.push(f);
                continue;
            }
            let succ = successors(&m, &f)?;
            if succ.is_empty() {
                out.blocked += 1;
            }
            grew = true;
            next.extend(succ);
        }
        frontier = next;
        if !grew {
            break;
        }
    }
    let parts = pool.map(&frontier_refs(&frontier), |&i| {
        let f = &frontier[i];
        let mut part = Enumeration {
            sequences: Vec::new(),
            blocked: 0,
        };
        let own = Frontier {
            state: f.state.clone(),
            rels: f.rels.clone(),
        };
        dfs(&m, own, &mut part).map(|_| part)
    });
    for part in parts {
        let part = part?;
        out.sequences.extend(part.sequences);
        out.blocked += part.blocked;
    }
    Ok(out)
}

fn frontier_refs(f: &[Frontier]) -> Vec<usize> {
    (0..f.len()).collect()
}
