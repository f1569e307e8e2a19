use super::{CoherenceVerdict, Rule, Violation};
use crate::engine::Sequence;
use crate::relations::RelationSet;

/// Classic C11 coherence over program events and init writes; shadow-writes
/// only contribute through `mo` and `to`.
pub fn check_c11_oracle(seq: &Sequence, rels: &RelationSet) -> CoherenceVerdict {
    let events: Vec<usize> = (0..seq.len())
        .filter(|&i| {
            let e = seq.steps[i].event;
            e.is_program() || (i < seq.init_len && e.is_write())
        })
        .collect();
    let writes: Vec<usize> = events
        .iter()
        .copied()
        .filter(|&i| seq.steps[i].event.is_write())
        .collect();
    let reads: Vec<usize> = events
        .iter()
        .copied()
        .filter(|&i| seq.steps[i].event.is_read())
        .collect();
    let same = |a: usize, b: usize| seq.obj(a) == seq.obj(b);
    let rf = |r: usize| seq.steps[r].rf;
    let mut out: Vec<Violation> = Vec::new();
    let mut fail = |rule: Rule, witness: Vec<usize>| {
        if !out.iter().any(|v| v.rule == rule) {
            out.push(Violation { rule, witness });
        }
    };

    for &w1 in &writes {
        for &w2 in &writes {
            if w1 != w2 && same(w1, w2) && rels.hb(w1, w2) && !rels.mo_before(w1, w2) {
                fail(Rule::Mo1, vec![w1, w2]);
            }
        }
    }
    for &r1 in &reads {
        for &r2 in &reads {
            if r1 == r2 || !same(r1, r2) || !rels.hb(r1, r2) {
                continue;
            }
            let (Some(w1), Some(w2)) = (rf(r1), rf(r2)) else {
                continue;
            };
            if w1 != w2 && !rels.mo_before(w1, w2) {
                fail(Rule::Mo2, vec![w1, r1, w2, r2]);
            }
        }
    }
    for &r1 in &reads {
        for &w1 in &writes {
            if r1 == w1 || !same(r1, w1) || !rels.hb(r1, w1) {
                continue;
            }
            match rf(r1) {
                Some(w2) if rels.mo_before(w2, w1) => {}
                _ => fail(Rule::Mo3, vec![r1, w1]),
            }
        }
    }
    for &w1 in &writes {
        for &r1 in &reads {
            if r1 == w1 || !same(r1, w1) || !rels.hb(w1, r1) {
                continue;
            }
            match rf(r1) {
                Some(w2) if w2 == w1 || rels.mo_before(w1, w2) => {}
                _ => fail(Rule::Mo4, vec![w1, r1]),
            }
        }
    }
    for (k, &a) in rels.to.iter().enumerate() {
        for &b in &rels.to[k + 1..] {
            if rels.hb(b, a) || rels.mo_before(b, a) {
                fail(Rule::To, vec![a, b]);
            }
        }
    }
    for &r in &reads {
        match rf(r) {
            Some(w) if !rels.hb(r, w) => {}
            other => fail(Rule::Co, other.into_iter().chain([r]).collect()),
        }
    }
    CoherenceVerdict::from_violations(&Rule::C11, out)
}
