use std::fmt::{self, Write as _};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{ExecState, Sequence};
use crate::ir::{Action, AssertVar, MemoryOrder, Program};
use crate::relations::RelationSet;

/// Hex digest identifying the equivalence class of a maximal sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct TraceId(pub String);

impl fmt::Display for TraceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TraceId {
    pub fn short(&self) -> &str {
        &self.0[..12.min(self.0.len())]
    }
}

/// Events are renamed by `(actor, per-actor index)`, which does not depend
/// on where they sit in the sequence. The digest covers program events with
/// their values, `hb` among them, `rf`, and `mo` per object.
pub fn canonical_trace_id(seq: &Sequence, rels: &RelationSet) -> TraceId {
    let name = |i: usize| seq.steps[i].event.to_string();
    let mut events: Vec<usize> = seq.program_events().collect();
    events.sort_by_key(|&i| {
        let e = seq.steps[i].event;
        (e.thread().0, e.idx)
    });
    let mut text = String::new();
    for &i in &events {
        let st = &seq.steps[i];
        let _ = writeln!(text, "E {} {:?} {:?}", name(i), st.read, st.written);
    }
    for &b in &events {
        let mut preds: Vec<String> = rels
            .hb_preds(b)
            .filter(|&a| a >= seq.init_len && seq.steps[a].event.is_program())
            .map(name)
            .collect();
        preds.sort();
        for a in preds {
            let _ = writeln!(text, "HB {a} {}", name(b));
        }
    }
    for &r in &events {
        if let Some(w) = seq.steps[r].rf {
            let _ = writeln!(text, "RF {} {}", name(w), name(r));
        }
    }
    for (o, ws) in rels.mo.iter().enumerate() {
        let chain: Vec<String> = ws.iter().map(|&w| name(w)).collect();
        let _ = writeln!(text, "MO {o} {}", chain.join(" "));
    }
    let digest = Sha256::digest(text.as_bytes());
    TraceId(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Pairs of non-atomic accesses to one object from different threads, at
/// least one a write, ordered by `mhb` in neither direction. Each pair is
/// reported once, earlier step first.
pub fn detect_na_races(seq: &Sequence, rels: &RelationSet) -> Vec<(usize, usize)> {
    let na: Vec<usize> = seq
        .program_events()
        .filter(|&i| {
            let e = seq.steps[i].event;
            e.ord == MemoryOrder::Na && e.obj.is_some() && e.act != Action::Fence
        })
        .collect();
    let mut out = Vec::new();
    for (k, &a) in na.iter().enumerate() {
        for &b in &na[k + 1..] {
            let (ea, eb) = (seq.steps[a].event, seq.steps[b].event);
            if ea.obj != eb.obj || ea.thread() == eb.thread() {
                continue;
            }
            if !(ea.is_write() || eb.is_write()) {
                continue;
            }
            if !rels.mhb(a, b) && !rels.mhb(b, a) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Indices of `assert never` predicates that hold in the final state. A
/// predicate that reads an unassigned local yields a diagnostic instead.
pub fn check_asserts(p: &Program, fin: &ExecState) -> (Vec<usize>, Vec<String>) {
    let mut violated = Vec::new();
    let mut diagnostics = Vec::new();
    for (k, a) in p.asserts.iter().enumerate() {
        let lookup = |v: AssertVar| match v {
            AssertVar::Shared(o) => fin.shr.get(o.0 as usize).copied(),
            AssertVar::Local(t, l) => fin.local(t, l),
        };
        match a.pred.eval(&lookup) {
            Ok(0) => {}
            Ok(_) => violated.push(k),
            Err(err) => diagnostics.push(format!("assertion at line {}: {err}", a.line)),
        }
    }
    (violated, diagnostics)
}
