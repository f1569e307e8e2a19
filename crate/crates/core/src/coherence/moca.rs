use super::{CoherenceVerdict, Rule, Violation};
use crate::engine::{EngineError, ExecState, Machine, Pid, Sequence};
use crate::ir::{Action, MemoryOrder};
use crate::relations::RelationSet;

/// Position of an event in the sequence; a write whose shadow-write has not
/// happened yet is published at some unknown later point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    At(usize),
    Pending,
}

fn shadow_pos(seq: &Sequence, w: usize) -> Pos {
    seq.steps[w].shadow.map_or(Pos::Pending, Pos::At)
}

/// `a` must occur before `b`. Fails only when that is already impossible:
/// `b` happened and `a` did not happen before it.
fn must_precede(a: Pos, b: Pos) -> bool {
    match (a, b) {
        (_, Pos::Pending) => true,
        (Pos::Pending, Pos::At(_)) => false,
        (Pos::At(x), Pos::At(y)) => x < y,
    }
}

fn is_read(seq: &Sequence, i: usize) -> bool {
    let e = seq.steps[i].event;
    e.is_program() && e.is_read()
}

fn is_write(seq: &Sequence, i: usize) -> bool {
    let e = seq.steps[i].event;
    (e.is_program() || i < seq.init_len) && e.is_write()
}

struct Checker<'a> {
    seq: &'a Sequence,
    rels: &'a RelationSet,
    /// Only rule instances involving a step at or after `from` are checked.
    from: usize,
}

impl Checker<'_> {
    /// Program event `e` is new, or `e` is a write whose shadow is new.
    fn touched(&self, e: usize) -> bool {
        e >= self.from || self.seq.steps[e].shadow.is_some_and(|s| s >= self.from)
    }

    fn shco(&self) -> Option<Violation> {
        let seq = self.seq;
        for r in seq.program_events().filter(|&r| r >= self.from && is_read(seq, r)) {
            let Some(w) = seq.steps[r].rf else { continue };
            let visible = seq.thread_of(w) == seq.thread_of(r)
                || must_precede(shadow_pos(seq, w), Pos::At(r));
            if !visible || self.rels.hb(r, w) {
                return Some(Violation {
                    rule: Rule::Shco,
                    witness: vec![w, r],
                });
            }
        }
        None
    }

    fn shmo(&self) -> Option<Violation> {
        let seq = self.seq;
        for chain in &self.rels.mo {
            for pair in chain.windows(2) {
                let (a, b) = (seq.steps[pair[0]].shadow, seq.steps[pair[1]].shadow);
                if !matches!((a, b), (Some(x), Some(y)) if x < y) {
                    return Some(Violation {
                        rule: Rule::Shmo,
                        witness: pair.to_vec(),
                    });
                }
            }
        }
        None
    }

    fn shmo1(&self) -> Option<Violation> {
        let (seq, rels) = (self.seq, self.rels);
        for e in seq.program_events().filter(|&e| self.touched(e)) {
            let te = seq.thread_of(e);
            let target = if is_write(seq, e) {
                shadow_pos(seq, e)
            } else {
                Pos::At(e)
            };
            if target == Pos::Pending {
                continue;
            }
            for x in rels.hb_preds(e).filter(|&x| x >= seq.init_len) {
                if !rels.mhb(x, e) {
                    continue;
                }
                // trigger 1: mhb(e_w, e); trigger 2: rf(e_w, x) and mhb(x, e)
                let mut sources = [None, None];
                if is_write(seq, x) {
                    sources[0] = Some((x, vec![x, e]));
                }
                if is_read(seq, x) {
                    if let Some(w) = seq.steps[x].rf {
                        sources[1] = Some((w, vec![w, x, e]));
                    }
                }
                for (ew, witness) in sources.into_iter().flatten() {
                    if ew < seq.init_len || seq.thread_of(ew) == te {
                        continue;
                    }
                    if !must_precede(shadow_pos(seq, ew), target) {
                        return Some(Violation {
                            rule: Rule::Shmo1,
                            witness,
                        });
                    }
                }
            }
        }
        None
    }

    fn shmo2(&self) -> Option<Violation> {
        let (seq, rels) = (self.seq, self.rels);
        for r2 in seq.program_events().filter(|&r| is_read(seq, r)) {
            let Some(w2) = seq.steps[r2].rf else { continue };
            if !(r2 >= self.from || self.touched(w2)) {
                continue;
            }
            let o = seq.obj(r2);
            for r1 in rels.hb_preds(r2).filter(|&r| is_read(seq, r) && seq.obj(r) == o) {
                let Some(w1) = seq.steps[r1].rf else { continue };
                if w1 != w2 && !must_precede(shadow_pos(seq, w1), shadow_pos(seq, w2)) {
                    return Some(Violation {
                        rule: Rule::Shmo2,
                        witness: vec![w1, r1, w2, r2],
                    });
                }
            }
        }
        None
    }

    fn shmo3(&self) -> Option<Violation> {
        let (seq, rels) = (self.seq, self.rels);
        for r in seq.program_events().filter(|&r| is_read(seq, r)) {
            let Some(w2) = seq.steps[r].rf else { continue };
            if !(r >= self.from || self.touched(w2)) {
                continue;
            }
            let o = seq.obj(r);
            for w1 in rels.hb_preds(r).filter(|&w| is_write(seq, w) && seq.obj(w) == o) {
                if w1 != w2 && !must_precede(shadow_pos(seq, w1), shadow_pos(seq, w2)) {
                    return Some(Violation {
                        rule: Rule::Shmo3,
                        witness: vec![w1, w2, r],
                    });
                }
            }
        }
        None
    }

    fn shrmo(&self) -> Option<Violation> {
        let (seq, rels) = (self.seq, self.rels);
        for e in seq.program_events().filter(|&e| e >= self.from) {
            if seq.steps[e].event.act != Action::Rmw {
                continue;
            }
            let Some(src) = seq.steps[e].rf else { continue };
            let ok = match rels.mo_position(e) {
                Some(p) if p > 0 => rels.mo[seq.obj(e).unwrap().0 as usize][p - 1] == src,
                Some(_) => false,
                // publication is atomic with the rmw, so it is never pending
                None => false,
            };
            if !ok {
                return Some(Violation {
                    rule: Rule::Shrmo,
                    witness: vec![src, e],
                });
            }
        }
        None
    }

    fn shto(&self) -> Option<Violation> {
        let (seq, rels) = (self.seq, self.rels);
        let sc: Vec<(usize, Pos)> = seq
            .program_events()
            .filter(|&e| seq.steps[e].event.ord == MemoryOrder::Sc)
            .map(|e| {
                let p = if seq.steps[e].event.act == Action::Write {
                    shadow_pos(seq, e)
                } else {
                    Pos::At(e)
                };
                (e, p)
            })
            .collect();
        let newer = |e: usize, p: Pos| e >= self.from || matches!(p, Pos::At(x) if x >= self.from);
        for &(a, pa) in &sc {
            for &(b, pb) in &sc {
                if a == b || !(newer(a, pa) || newer(b, pb)) {
                    continue;
                }
                // to(a, b): a is placed strictly before b
                let to_ab = match (pa, pb) {
                    (Pos::At(x), Pos::At(y)) => x < y,
                    (Pos::At(_), Pos::Pending) => true,
                    _ => false,
                };
                if to_ab && (rels.hb(b, a) || rels.mo_before(b, a)) {
                    return Some(Violation {
                        rule: Rule::Shto,
                        witness: vec![a, b],
                    });
                }
            }
        }
        None
    }

    fn run(&self, rule: Rule) -> Option<Violation> {
        match rule {
            Rule::Shco => self.shco(),
            Rule::Shmo => self.shmo(),
            Rule::Shmo1 => self.shmo1(),
            Rule::Shmo2 => self.shmo2(),
            Rule::Shmo3 => self.shmo3(),
            Rule::Shrmo => self.shrmo(),
            Rule::Shto => self.shto(),
            _ => None,
        }
    }
}

/// Evaluates every MoCA rule over all instances of `seq`. Writes whose
/// shadow-write has not happened yet count as published in the future, so a
/// non-maximal prefix passes when it can still be completed.
pub fn check_moca(seq: &Sequence, rels: &RelationSet) -> CoherenceVerdict {
    let c = Checker { seq, rels, from: 0 };
    let violations = Rule::MOCA.iter().filter_map(|r| c.run(*r)).collect();
    CoherenceVerdict::from_violations(&Rule::MOCA, violations)
}

/// First violation among the rule instances that involve a step at index
/// `from` or later (or the publication of a write at `from` or later).
pub fn check_extension(seq: &Sequence, rels: &RelationSet, from: usize) -> Option<Violation> {
    let c = Checker { seq, rels, from };
    Rule::MOCA.iter().find_map(|r| c.run(*r))
}

pub enum Admission {
    Pass {
        state: Box<ExecState>,
        rels: Box<RelationSet>,
    },
    Prune(Violation),
}

/// Executes `pid` from `state` and decides whether the extended prefix is
/// still admissible.
pub fn check_incremental(
    machine: &Machine,
    state: &ExecState,
    rels: &RelationSet,
    pid: Pid,
) -> Result<Admission, EngineError> {
    let mut next = state.clone();
    let range = machine.step(&mut next, pid)?;
    let mut r = rels.clone();
    r.update(&next.seq);
    Ok(match check_extension(&next.seq, &r, range.start) {
        Some(v) => Admission::Prune(v),
        None => Admission::Pass {
            state: Box::new(next),
            rels: Box::new(r),
        },
    })
}
