//! Shared helpers for the integration tests: corpus access, a generator of
//! small random litmus programs, and the happens-before validity checks.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moca::coherence::{check_extension, check_moca};
use moca::engine::{ExecState, Machine, Pid, Sequence};
use moca::explorer::{canonical_trace_id, dependence_order, schedule_of, TraceId};
use moca::ir::Action;
use moca::relations::{compute_relations, RelationSet};
use moca::transform::early_write_transform;
use moca::{parse_program, Program};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every corpus program, sorted by file name.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "lit"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let text = std::fs::read_to_string(&f).unwrap();
            let p = parse_program(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
            (f.file_stem().unwrap().to_string_lossy().into_owned(), p)
        })
        .collect()
}

pub fn corpus_program(name: &str) -> Program {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.lit"))).unwrap();
    parse_program(&text).unwrap()
}

// ---------------------------------------------------------------------------
// random programs

#[derive(Debug, Clone)]
pub enum Op {
    Store { obj: u8, val: i64, ord: &'static str },
    /// Stores the latest local plus one, or a constant without a local.
    StoreDep { obj: u8, ord: &'static str },
    Load { obj: u8, ord: &'static str },
    Fadd { obj: u8, ord: &'static str },
    Cas { obj: u8, expect: i64, desired: i64, ord: &'static str },
    Fence { ord: &'static str },
    /// Store guarded by the latest local.
    IfStore { obj: u8, cond: i64, val: i64, ord: &'static str },
}

const OBJS: [&str; 2] = ["x", "y"];

fn store_ord() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["na", "rlx", "rel", "sc"])
}

fn load_ord() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["na", "rlx", "acq", "sc"])
}

fn rmw_ord() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["rlx", "acq", "rel", "acq_rel", "sc"])
}

fn fence_ord() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["acq", "rel", "acq_rel", "sc"])
}

fn arb_op() -> impl Strategy<Value = Op> {
    let obj = 0u8..2;
    prop_oneof![
        4 => (obj.clone(), 1i64..3, store_ord()).prop_map(|(obj, val, ord)| Op::Store { obj, val, ord }),
        1 => (obj.clone(), store_ord()).prop_map(|(obj, ord)| Op::StoreDep { obj, ord }),
        4 => (obj.clone(), load_ord()).prop_map(|(obj, ord)| Op::Load { obj, ord }),
        1 => (obj.clone(), rmw_ord()).prop_map(|(obj, ord)| Op::Fadd { obj, ord }),
        1 => (obj.clone(), 0i64..2, 1i64..3, rmw_ord())
            .prop_map(|(obj, expect, desired, ord)| Op::Cas { obj, expect, desired, ord }),
        1 => fence_ord().prop_map(|ord| Op::Fence { ord }),
        1 => (obj, 0i64..2, 1i64..3, store_ord())
            .prop_map(|(obj, cond, val, ord)| Op::IfStore { obj, cond, val, ord }),
    ]
}

/// Renders thread bodies as a litmus program, keeping at most
/// `max_events` shared accesses in total.
pub fn render(threads: &[Vec<Op>], max_events: usize) -> String {
    let mut s = String::from("program random\ninit x = 0, y = 0\n");
    let mut budget = max_events;
    for (t, ops) in threads.iter().enumerate() {
        let _ = writeln!(s, "thread T{}:", t + 1);
        let mut locals = 0usize;
        let mut body = 0;
        for op in ops {
            let accesses = usize::from(!matches!(op, Op::Fence { .. }));
            if accesses > budget {
                break;
            }
            budget -= accesses;
            body += 1;
            let last = locals.checked_sub(1).map(|k| format!("r{k}"));
            match op {
                Op::Store { obj, val, ord } => {
                    let _ = writeln!(s, "  store({}, {val}, {ord})", OBJS[*obj as usize]);
                }
                Op::StoreDep { obj, ord } => {
                    let v = last.map_or_else(|| "1".to_string(), |l| format!("{l} + 1"));
                    let _ = writeln!(s, "  store({}, {v}, {ord})", OBJS[*obj as usize]);
                }
                Op::Load { obj, ord } => {
                    let _ = writeln!(s, "  r{locals} = load({}, {ord})", OBJS[*obj as usize]);
                    locals += 1;
                }
                Op::Fadd { obj, ord } => {
                    let _ = writeln!(s, "  r{locals} = fadd({}, 1, {ord})", OBJS[*obj as usize]);
                    locals += 1;
                }
                Op::Cas {
                    obj,
                    expect,
                    desired,
                    ord,
                } => {
                    let _ = writeln!(
                        s,
                        "  r{locals} = cas({}, {expect}, {desired}, {ord})",
                        OBJS[*obj as usize]
                    );
                    locals += 1;
                }
                Op::Fence { ord } => {
                    let _ = writeln!(s, "  fence({ord})");
                }
                Op::IfStore {
                    obj,
                    cond,
                    val,
                    ord,
                } => {
                    let o = OBJS[*obj as usize];
                    match last {
                        Some(l) => {
                            let _ = writeln!(s, "  if ({l} == {cond}):\n    store({o}, {val}, {ord})");
                        }
                        None => {
                            let _ = writeln!(s, "  store({o}, {val}, {ord})");
                        }
                    }
                }
            }
        }
        if body == 0 {
            let _ = writeln!(s, "  fence(sc)");
        }
    }
    s
}

/// Programs with up to `threads` threads and `max_events` shared accesses.
pub fn arb_program(threads: usize, max_events: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::collection::vec(arb_op(), 1..=3), 1..=threads)
        .prop_map(move |ts| render(&ts, max_events))
}

// ---------------------------------------------------------------------------
// sequences

/// Leading step index of every transition after initialisation.
pub fn units(seq: &Sequence) -> Vec<usize> {
    (seq.init_len..seq.len())
        .filter(|&i| {
            let st = &seq.steps[i];
            st.pid.is_some()
                && !(st.event.is_shadow()
                    && st
                        .shadow_of
                        .is_some_and(|w| seq.steps[w].event.act == Action::Rmw))
        })
        .collect()
}

/// A random topological order of `nodes` under `pairs`.
pub fn linearize(nodes: &[usize], pairs: &[(usize, usize)], rng: &mut impl Rng) -> Vec<usize> {
    let pos = |x: usize| nodes.iter().position(|&n| n == x).unwrap();
    let mut indeg = vec![0usize; nodes.len()];
    let mut succ = vec![Vec::new(); nodes.len()];
    for &(a, b) in pairs {
        let (a, b) = (pos(a), pos(b));
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&k| indeg[k] == 0).collect();
    let mut out = Vec::new();
    while !ready.is_empty() {
        let k = ready.swap_remove(rng.gen_range(0..ready.len()));
        out.push(nodes[k]);
        for &n in &succ[k] {
            indeg[n] -= 1;
            if indeg[n] == 0 {
                ready.push(n);
            }
        }
    }
    assert_eq!(out.len(), nodes.len(), "dependence order is cyclic");
    out
}

/// Comparable summary of a state: store, locals, program counters and the
/// pending writes of every shadow-thread, named by event.
pub fn state_key(s: &ExecState) -> String {
    let pending: Vec<Vec<String>> = s
        .pending
        .iter()
        .map(|q| q.iter().map(|&i| s.seq.steps[i].event.to_string()).collect())
        .collect();
    format!("{:?} {:?} {:?} {:?}", s.shr, s.lcl, s.pc, pending)
}

pub struct Replayed {
    pub state: ExecState,
    pub rels: RelationSet,
    pub id: TraceId,
}

/// Replays `schedule`, requiring every transition to be enabled and every
/// extension to pass the coherence rules.
pub fn replay_checked(m: &Machine, schedule: &[Pid]) -> Result<Replayed, String> {
    let mut state = m.initial_state().map_err(|e| e.to_string())?;
    let mut rels = compute_relations(&state.seq);
    for &p in schedule {
        if !m.is_enabled(&state, p) {
            return Err(format!("{} not enabled", m.pid_name(p)));
        }
        let r = m.step(&mut state, p).map_err(|e| e.to_string())?;
        rels.update(&state.seq);
        if let Some(v) = check_extension(&state.seq, &rels, r.start) {
            return Err(format!("{} breaks {:?}", m.pid_name(p), v));
        }
    }
    let id = canonical_trace_id(&state.seq, &rels);
    Ok(Replayed { state, rels, id })
}

fn pids_of(seq: &Sequence, order: &[usize]) -> Vec<Pid> {
    order.iter().map(|&i| seq.steps[i].pid.unwrap()).collect()
}

// ---------------------------------------------------------------------------
// happens-before validity

/// Maximal sequences of the transformed program, one per explored trace.
pub fn explored(p: &Program, limit: usize) -> (Machine, Vec<Vec<Pid>>) {
    let q = early_write_transform(p);
    let m = Machine::new(&q);
    let cfg = moca::explorer::ExploreConfig {
        jobs: 1,
        ..Default::default()
    };
    let report = moca::explorer::explore(p, &cfg);
    let scheds = report
        .traces
        .iter()
        .take(limit)
        .map(|t| t.schedule.iter().map(|tok| m.parse_pid(tok).unwrap()).collect())
        .collect();
    (m, scheds)
}

pub fn hb_partial_order(seq: &Sequence, rels: &RelationSet) -> Result<(), String> {
    let n = seq.len();
    for a in 0..n {
        if rels.hb(a, a) {
            return Err(format!("hb is reflexive at {a}"));
        }
        for b in 0..n {
            if rels.hb(a, b) && b < a {
                return Err(format!("hb({a},{b}) against sequence order"));
            }
            if rels.hb(a, b) {
                for c in 0..n {
                    if rels.hb(b, c) && !rels.hb(a, c) {
                        return Err(format!("hb not transitive at {a},{b},{c}"));
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn actor_order_total(seq: &Sequence, rels: &RelationSet) -> Result<(), String> {
    for i in seq.init_len..seq.len() {
        if let Some(p) = rels.po_prev[i] {
            if p >= seq.init_len && !rels.hb(p, i) {
                return Err(format!("consecutive events {p},{i} of one actor unordered"));
            }
        }
    }
    Ok(())
}

pub fn prefix_stable(m: &Machine, sched: &[Pid], full: &Replayed) -> Result<(), String> {
    for k in 0..=sched.len() {
        let pre = m.run_sequence(&sched[..k]).map_err(|e| e.to_string())?;
        let rels = compute_relations(&pre.seq);
        let n = pre.seq.len();
        for a in 0..n {
            for b in 0..n {
                if rels.hb(a, b) != full.rels.hb(a, b) {
                    return Err(format!("hb({a},{b}) changes after prefix of {k}"));
                }
            }
            if rels.rf[a] != full.rels.rf[a] {
                return Err(format!("rf of {a} changes after prefix of {k}"));
            }
        }
        for (o, chain) in rels.mo.iter().enumerate() {
            if full.rels.mo[o][..chain.len()] != chain[..] {
                return Err(format!("mo of object {o} changes after prefix of {k}"));
            }
        }
    }
    Ok(())
}

/// Random linearizations of the dependence order are
/// admissible sequences of the same trace and reach the same state.
pub fn linearizations_equivalent(
    m: &Machine,
    full: &Replayed,
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Result<(), String> {
    let seq = &full.state.seq;
    let nodes = units(seq);
    let pairs = dependence_order(seq, &full.rels);
    let want = state_key(&full.state);
    for _ in 0..samples {
        let order = linearize(&nodes, &pairs, rng);
        let sched = pids_of(seq, &order);
        let names: Vec<String> = sched.iter().map(|p| m.pid_name(*p)).collect();
        let r = replay_checked(m, &sched).map_err(|e| format!("{}: {e}", names.join(" ")))?;
        if !check_moca(&r.state.seq, &r.rels).is_ok() {
            return Err(format!("{} is not coherent", names.join(" ")));
        }
        if r.id != full.id {
            return Err(format!("{} changes the trace", names.join(" ")));
        }
        if state_key(&r.state) != want {
            return Err(format!("{} reaches another state", names.join(" ")));
        }
    }
    Ok(())
}

/// At a random cut, an equivalent prefix followed by the same
/// continuation stays equivalent, and an inequivalent one stays apart.
pub fn extension_preserves_equivalence(
    m: &Machine,
    sched: &[Pid],
    full: &Replayed,
    rng: &mut ChaCha8Rng,
) -> Result<(), String> {
    let k = rng.gen_range(0..=sched.len());
    let (head, tail) = sched.split_at(k);
    let pre = replay_checked(m, head)?;
    let seq = &pre.state.seq;
    let order = linearize(&units(seq), &dependence_order(seq, &pre.rels), rng);
    let alt: Vec<Pid> = pids_of(seq, &order);
    let same = replay_checked(m, &alt)?;
    if same.id != pre.id {
        return Err("linearized prefix changes the trace".into());
    }
    let joined: Vec<Pid> = alt.iter().chain(tail).copied().collect();
    let ext = replay_checked(m, &joined).map_err(|e| format!("equivalent prefix: {e}"))?;
    if ext.id != full.id {
        return Err("equivalent prefixes diverge under a common extension".into());
    }
    let mut shuffled = head.to_vec();
    shuffled.shuffle(rng);
    if let Ok(other) = replay_checked(m, &shuffled) {
        let joined: Vec<Pid> = shuffled.iter().chain(tail).copied().collect();
        if let Ok(ext) = replay_checked(m, &joined) {
            if m.is_terminal(&ext.state) && (other.id == pre.id) != (ext.id == full.id) {
                return Err("common extension merges or splits traces".into());
            }
        }
    }
    Ok(())
}

/// At a random cut, if e1 happens before e2 right after it, and
/// e3 is unrelated to e1, then e1 still happens before e2 after e3. Events
/// are identified together with their reads-from source.
pub fn interposition_keeps_hb(
    m: &Machine,
    sched: &[Pid],
    rng: &mut ChaCha8Rng,
) -> Result<usize, String> {
    let k = rng.gen_range(0..=sched.len());
    let base = replay_checked(m, &sched[..k])?;
    let extend = |from: &[Pid], p: Pid| -> Option<Replayed> {
        let mut s = from.to_vec();
        s.push(p);
        replay_checked(m, &s).ok()
    };
    let mut checked = 0;
    let pids: Vec<Pid> = (0..m.num_pids() as u32).map(Pid).collect();
    for &p1 in &pids {
        let s1: Vec<Pid> = sched[..k].iter().copied().chain([p1]).collect();
        let Some(r1) = replay_checked(m, &s1).ok() else {
            continue;
        };
        let e1 = base.state.seq.len();
        for &p2 in &pids {
            let Some(r12) = extend(&s1, p2) else { continue };
            let e2 = r1.state.seq.len();
            if !r12.rels.hb(e1, e2) {
                continue;
            }
            for &p3 in pids.iter().filter(|&&p| p != p2) {
                let Some(r13) = extend(&s1, p3) else { continue };
                if r13.rels.hb(e1, e2) {
                    continue;
                }
                let s13: Vec<Pid> = s1.iter().copied().chain([p3]).collect();
                let Some(r132) = extend(&s13, p2) else { continue };
                let e2_after = r13.state.seq.len();
                // e2 is the same event only if it also reads from the same write
                let source = |st: &ExecState, i: usize| {
                    st.seq.steps[i].rf.map(|w| st.seq.steps[w].event)
                };
                if r132.state.seq.steps[e2_after].event != r12.state.seq.steps[e2].event
                    || source(&r132.state, e2_after) != source(&r12.state, e2)
                {
                    continue;
                }
                checked += 1;
                if !r132.rels.hb(e1, e2_after) {
                    return Err(format!(
                        "hb({}, {}) lost when {} is interposed",
                        m.pid_name(p1),
                        m.pid_name(p2),
                        m.pid_name(p3)
                    ));
                }
            }
        }
    }
    Ok(checked)
}

/// Every happens-before validity check over the explored sequences of `src`.
pub fn check_hb_validity(src: &str, seed: u64) -> Result<(), String> {
    let p = parse_program(src).map_err(|e| format!("generator produced bad program: {e}"))?;
    let (m, scheds) = explored(&p, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sched in &scheds {
        let full = replay_checked(&m, sched)?;
        let seq = &full.state.seq;
        if schedule_of(seq) != *sched {
            return Err("schedule does not round-trip".into());
        }
        hb_partial_order(seq, &full.rels).map_err(|e| format!("partial order: {e}"))?;
        actor_order_total(seq, &full.rels).map_err(|e| format!("actor order: {e}"))?;
        prefix_stable(&m, sched, &full).map_err(|e| format!("prefix stability: {e}"))?;
        linearizations_equivalent(&m, &full, &mut rng, 3)
            .map_err(|e| format!("linearization: {e}"))?;
        extension_preserves_equivalence(&m, sched, &full, &mut rng).map_err(|e| format!("extension: {e}"))?;
        interposition_keeps_hb(&m, sched, &mut rng).map_err(|e| format!("interposition: {e}"))?;
    }
    Ok(())
}

/// Trace ids found by the explorer and by brute force, or `None` when the
/// program exceeds the brute-force cap.
pub fn trace_sets(p: &Program, cap: usize) -> Option<(BTreeSet<TraceId>, BTreeSet<TraceId>)> {
    let cfg = moca::explorer::ExploreConfig {
        jobs: 1,
        ..Default::default()
    };
    let report = moca::explorer::explore(p, &cfg);
    let q = early_write_transform(p);
    let pool = moca::par::Pool::sequential();
    let all = moca::explorer::enumerate_all(&q, cap, &pool).ok()?;
    let ours = report.traces.iter().map(|t| t.id.clone()).collect();
    Some((ours, all.trace_ids()))
}
