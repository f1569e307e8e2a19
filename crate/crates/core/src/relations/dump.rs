//! Edge-list dumps of a relation set, as JSON-serialisable data and DOT.
//!
//! JSON shape:
//! `{ "events": [{"id", "label"}], "po": [[a, b]], "sw": [...], "dob": [...],
//!    "hb": [...], "rf": [[w, r]], "mo": {"x": [w...]}, "to": [e...] }`.
//! `po` lists immediate successors only; `hb` is the full closure over
//! non-init events.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::RelationSet;
use crate::engine::{Machine, Sequence};

#[derive(Debug, Clone, Serialize)]
pub struct EventLabel {
    pub id: usize,
    pub label: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationsDump {
    pub events: Vec<EventLabel>,
    pub po: Vec<(usize, usize)>,
    pub sw: Vec<(usize, usize)>,
    pub dob: Vec<(usize, usize)>,
    pub hb: Vec<(usize, usize)>,
    pub rf: Vec<(usize, usize)>,
    pub mo: BTreeMap<String, Vec<usize>>,
    pub to: Vec<usize>,
}

pub fn dump(m: &Machine, seq: &Sequence, r: &RelationSet) -> RelationsDump {
    let n = seq.len();
    let events = (0..n)
        .map(|i| EventLabel {
            id: i,
            label: m.describe(seq, i),
        })
        .collect();
    let po = (0..n)
        .filter_map(|i| r.po_prev[i].map(|p| (p, i)))
        .collect();
    let mut hb = Vec::new();
    for b in seq.init_len..n {
        for a in r.hb_preds(b).filter(|&a| a >= seq.init_len) {
            hb.push((a, b));
        }
    }
    let rf = (0..n)
        .filter_map(|i| seq.steps[i].rf.map(|w| (w, i)))
        .collect();
    let mo = r
        .mo
        .iter()
        .enumerate()
        .map(|(o, ws)| (m.program().objects[o].name.clone(), ws.clone()))
        .collect();
    RelationsDump {
        events,
        po,
        sw: r.sw.clone(),
        dob: r.dob.clone(),
        hb,
        rf,
        mo,
        to: r.to.clone(),
    }
}

/// Graphviz rendering: `po` black, `sw` blue, `dob` purple, `rf` red,
/// `mo` dashed green.
pub fn to_dot(d: &RelationsDump) -> String {
    let mut out = String::from("digraph relations {\n  node [shape=box, fontname=monospace];\n");
    for e in &d.events {
        let _ = writeln!(out, "  e{} [label=\"{}\"];", e.id, e.label.replace('"', "'"));
    }
    let mut edges = |pairs: &[(usize, usize)], attrs: &str| {
        for (a, b) in pairs {
            let _ = writeln!(out, "  e{a} -> e{b} [{attrs}];");
        }
    };
    edges(&d.po, "color=black");
    edges(&d.sw, "color=blue, label=sw");
    edges(&d.dob, "color=purple, label=dob");
    edges(&d.rf, "color=red, label=rf");
    for ws in d.mo.values() {
        let pairs: Vec<(usize, usize)> = ws.windows(2).map(|w| (w[0], w[1])).collect();
        edges(&pairs, "color=darkgreen, style=dashed, label=mo");
    }
    out.push_str("}\n");
    out
}
