//! Exploration of all MCA-valid traces of a program.
//!
//! [`explore`] runs source-DPOR over the early-write transformed program,
//! prunes extensions that break coherence, and analyses every maximal
//! sequence: trace identity, assertion outcomes, non-atomic races, and the
//! C11 coherence oracle. [`enumerate_all`] is the unreduced brute-force
//! counterpart used to validate it.

mod deps;
mod dpor;
mod oracle;
mod trace;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::coherence::{check_c11_oracle, check_moca, Rule};
use crate::engine::{ExecState, Machine, Pid, Sequence};
use crate::ir::print::print_assert_expr;
use crate::ir::{Action, Program};
use crate::par::Pool;
use crate::relations::RelationSet;
use crate::transform::early_write_transform;

pub use oracle::{enumerate_all, EnumerateError, Enumerated, Enumeration, DEFAULT_CAP};
pub use trace::{canonical_trace_id, check_asserts, detect_na_races, TraceId};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    pub max_seqs: u64,
    pub max_depth: usize,
    /// Apply the early-write transformation before exploring.
    pub early_write: bool,
    /// Analysis workers; `0` means one per core, `1` is sequential.
    pub jobs: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            max_seqs: 1_000_000,
            max_depth: 10_000,
            early_write: true,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertViolation {
    pub assert: usize,
    pub line: usize,
    pub predicate: String,
    pub trace: TraceId,
    pub schedule: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RaceReport {
    pub first: String,
    pub second: String,
    pub schedule: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct C11Failure {
    pub rules: Vec<Rule>,
    pub schedule: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub id: TraceId,
    /// Explored sequences that belong to this trace.
    pub sequences: u64,
    pub schedule: Vec<String>,
    pub shared: BTreeMap<String, i64>,
    pub locals: BTreeMap<String, i64>,
    pub rf: Vec<String>,
    pub racy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplorationReport {
    pub schema_version: u32,
    pub program: String,
    pub sequences_explored: u64,
    /// Prefixes abandoned because every extension broke coherence.
    pub blocked_sequences: u64,
    pub distinct_traces: usize,
    pub non_mca_sequences: u64,
    pub c11_failures: Vec<C11Failure>,
    pub violations: Vec<AssertViolation>,
    pub na_races: Vec<RaceReport>,
    pub racy_sequence_count: u64,
    pub traces: Vec<TraceSummary>,
    pub complete: bool,
    pub diagnostics: Vec<String>,
}

impl ExplorationReport {
    pub fn racy_trace_count(&self) -> usize {
        self.traces.iter().filter(|t| t.racy).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.na_races.is_empty() && self.non_mca_sequences == 0
    }
}

/// Scheduling tokens of a sequence; an rmw and its publication are one
/// transition, so the trailing shadow-write is not listed.
pub fn schedule_of(seq: &Sequence) -> Vec<Pid> {
    seq.steps[seq.init_len..]
        .iter()
        .filter(|st| {
            !(st.event.is_shadow()
                && st
                    .shadow_of
                    .is_some_and(|w| seq.steps[w].event.act == Action::Rmw))
        })
        .filter_map(|st| st.pid)
        .collect()
}

/// Pairs `(i, j)` of steps of `seq` whose relative order the explorer
/// treats as significant: the same process, a write before its
/// publication, or dependent events of different processes. Both indices
/// name the leading step of a transition (an rmw's publication is part of
/// the rmw). Every schedule that respects these pairs reaches the same
/// trace as `seq`.
pub fn dependence_order(seq: &Sequence, rels: &RelationSet) -> Vec<(usize, usize)> {
    deps::order_pairs(seq, rels)
}

/// Everything learned from one maximal sequence.
#[derive(Debug, Clone)]
struct Analysis {
    schedule: Vec<String>,
    id: TraceId,
    moca_ok: bool,
    c11_failed: Vec<Rule>,
    races: Vec<(String, String)>,
    violated: Vec<usize>,
    diagnostics: Vec<String>,
    shared: BTreeMap<String, i64>,
    locals: BTreeMap<String, i64>,
    rf: Vec<String>,
}

fn analyse(m: &Machine, state: &ExecState, rels: &RelationSet) -> Analysis {
    let p = m.program();
    let seq = &state.seq;
    let label = |i: usize| m.describe(seq, i);
    let event_name = |i: usize| label(i).split(':').next().unwrap_or_default().to_string();
    let (violated, diagnostics) = check_asserts(p, state);
    let c11 = check_c11_oracle(seq, rels);
    let shared = p
        .objects
        .iter()
        .zip(&state.shr)
        .map(|(o, v)| (o.name.clone(), *v))
        .collect();
    let mut locals = BTreeMap::new();
    for (t, th) in p.threads.iter().enumerate() {
        for (l, name) in th.locals.iter().enumerate() {
            if let Some(v) = state.lcl[t][l] {
                locals.insert(format!("{}.{}", th.name, name), v);
            }
        }
    }
    let rf = seq
        .program_events()
        .filter_map(|r| seq.steps[r].rf.map(|w| format!("{} <- {}", label(r), event_name(w))))
        .collect();
    Analysis {
        schedule: schedule_of(seq).into_iter().map(|p| m.pid_name(p)).collect(),
        id: canonical_trace_id(seq, rels),
        moca_ok: check_moca(seq, rels).is_ok(),
        c11_failed: c11.failures().map(|(r, _)| r).collect(),
        races: detect_na_races(seq, rels)
            .into_iter()
            .map(|(a, b)| (label(a), label(b)))
            .collect(),
        violated,
        diagnostics,
        shared,
        locals,
        rf,
    }
}

struct Collector<'a> {
    m: &'a Machine,
    report: ExplorationReport,
    trace_index: HashMap<TraceId, usize>,
    seen_violations: BTreeMap<(usize, TraceId), ()>,
    seen_races: BTreeMap<(String, String), ()>,
}

impl Collector<'_> {
    fn absorb(&mut self, a: Analysis) {
        let r = &mut self.report;
        r.sequences_explored += 1;
        if !a.moca_ok {
            r.non_mca_sequences += 1;
        }
        if !a.c11_failed.is_empty() {
            r.c11_failures.push(C11Failure {
                rules: a.c11_failed.clone(),
                schedule: a.schedule.clone(),
            });
        }
        if !a.races.is_empty() {
            r.racy_sequence_count += 1;
        }
        for d in &a.diagnostics {
            if !r.diagnostics.contains(d) {
                r.diagnostics.push(d.clone());
            }
        }
        for (first, second) in &a.races {
            let key = (first.clone(), second.clone());
            if self.seen_races.insert(key, ()).is_none() {
                r.na_races.push(RaceReport {
                    first: first.clone(),
                    second: second.clone(),
                    schedule: a.schedule.clone(),
                });
            }
        }
        let p = self.m.program();
        for &k in &a.violated {
            if self.seen_violations.insert((k, a.id.clone()), ()).is_none() {
                r.violations.push(AssertViolation {
                    assert: k,
                    line: p.asserts[k].line,
                    predicate: print_assert_expr(&p.asserts[k].pred, p),
                    trace: a.id.clone(),
                    schedule: a.schedule.clone(),
                });
            }
        }
        match self.trace_index.get(&a.id) {
            Some(&i) => r.traces[i].sequences += 1,
            None => {
                self.trace_index.insert(a.id.clone(), r.traces.len());
                r.traces.push(TraceSummary {
                    id: a.id,
                    sequences: 1,
                    schedule: a.schedule,
                    shared: a.shared,
                    locals: a.locals,
                    rf: a.rf,
                    racy: !a.races.is_empty(),
                });
            }
        }
    }
}

const BATCH: usize = 256;

/// Explores `p` and reports every trace reached, with assertion failures
/// and non-atomic races. Deterministic for a given program and config.
pub fn explore(p: &Program, cfg: &ExploreConfig) -> ExplorationReport {
    let prog = if cfg.early_write {
        early_write_transform(p)
    } else {
        p.clone()
    };
    let m = Machine::new(&prog);
    let pool = Pool::new(cfg.jobs);
    let mut c = Collector {
        m: &m,
        report: ExplorationReport {
            schema_version: SCHEMA_VERSION,
            program: p.name.clone(),
            sequences_explored: 0,
            blocked_sequences: 0,
            distinct_traces: 0,
            non_mca_sequences: 0,
            c11_failures: Vec::new(),
            violations: Vec::new(),
            na_races: Vec::new(),
            racy_sequence_count: 0,
            traces: Vec::new(),
            complete: true,
            diagnostics: Vec::new(),
        },
        trace_index: HashMap::new(),
        seen_violations: BTreeMap::new(),
        seen_races: BTreeMap::new(),
    };
    let root = match m.initial_state() {
        Ok(s) => s,
        Err(e) => {
            c.report.diagnostics.push(e.to_string());
            c.report.complete = false;
            return c.report;
        }
    };
    let limits = dpor::Limits {
        max_seqs: cfg.max_seqs,
        max_depth: cfg.max_depth,
    };
    let mut search = dpor::Dpor::new(&m, limits);
    let mut batch: Vec<(ExecState, RelationSet)> = Vec::new();
    let flush = |batch: &mut Vec<(ExecState, RelationSet)>, c: &mut Collector| {
        let done = pool.map(batch, |(s, r)| analyse(&m, s, r));
        batch.clear();
        for a in done {
            c.absorb(a);
        }
    };
    search.run(root, &mut |s, r| {
        batch.push((s.clone(), r.clone()));
        if batch.len() >= BATCH {
            flush(&mut batch, &mut c);
        }
    });
    flush(&mut batch, &mut c);
    let stats = search.stats;
    let r = &mut c.report;
    r.blocked_sequences = stats.blocked;
    r.distinct_traces = r.traces.len();
    r.complete = !stats.incomplete;
    for d in stats.diagnostics {
        if !r.diagnostics.contains(&d) {
            r.diagnostics.push(d);
        }
    }
    c.report
}
