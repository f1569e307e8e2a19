use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ir::print::print_stmt_head;
use crate::ir::{Expr, LocalId, ObjId, Program, Stmt, StmtId, StmtKind, Thread};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SprRule {
    Spr1,
    Spr2,
    Spr3,
}

impl fmt::Display for SprRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SprRule::Spr1 => "spr1",
            SprRule::Spr2 => "spr2",
            SprRule::Spr3 => "spr3",
        })
    }
}

/// Outcome per rule; a failing rule carries a human-readable reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SprVerdict {
    pub rules: BTreeMap<SprRule, Option<String>>,
}

impl SprVerdict {
    pub fn is_ok(&self) -> bool {
        self.rules.values().all(Option::is_none)
    }

    pub fn passes(&self, r: SprRule) -> bool {
        self.rules.get(&r).is_some_and(Option::is_none)
    }
}

/// Statement identity that survives reordering and re-parsing: its text and
/// its occurrence number among textually identical statements of the thread.
type Key = (String, usize);

fn keyed<'a>(p: &Program, t: &'a Thread) -> Vec<(Key, &'a Stmt)> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    t.walk()
        .into_iter()
        .map(|s| {
            let head = print_stmt_head(s, p, t);
            let n = seen.entry(head.clone()).or_default();
            *n += 1;
            ((head, *n), s)
        })
        .collect()
}

fn spr1(a: &Program, b: &Program) -> Option<String> {
    if a.threads.len() != b.threads.len() {
        return Some(format!(
            "thread count {} vs {}",
            a.threads.len(),
            b.threads.len()
        ));
    }
    for (ta, tb) in a.threads.iter().zip(&b.threads) {
        let ka: BTreeSet<Key> = keyed(a, ta).into_iter().map(|(k, _)| k).collect();
        let kb: BTreeSet<Key> = keyed(b, tb).into_iter().map(|(k, _)| k).collect();
        if ta.name != tb.name || ka != kb {
            return Some(format!("statements of {} differ", ta.name));
        }
    }
    None
}

fn spr3(a: &Program, b: &Program) -> Option<String> {
    for (ta, tb) in a.threads.iter().zip(&b.threads) {
        let order = |p: &Program, t: &Thread| {
            let mut per: BTreeMap<ObjId, Vec<Key>> = BTreeMap::new();
            for (k, s) in keyed(p, t) {
                if let Some(o) = s.object() {
                    per.entry(o).or_default().push(k);
                }
            }
            per
        };
        let (oa, ob) = (order(a, ta), order(b, tb));
        if oa != ob {
            let o = oa
                .keys()
                .chain(ob.keys())
                .find(|o| oa.get(o) != ob.get(o))
                .copied()
                .unwrap_or(ObjId(0));
            return Some(format!(
                "{}: access order on {} differs",
                ta.name,
                a.object_name(o)
            ));
        }
    }
    None
}

/// Where a read takes its value from in a single-thread run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    Own(Key),
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Obs {
    Read(Source, i64),
    Write(i64),
    Error,
}

/// Input for one read: take the thread's own last write, or this value.
#[derive(Debug, Clone, Copy)]
enum Choice {
    Own,
    Ext(i64),
}

struct Sim<'a> {
    keys: BTreeMap<StmtId, Key>,
    choices: &'a BTreeMap<Key, Choice>,
    locals: Vec<Option<i64>>,
    last_write: BTreeMap<ObjId, (Key, i64)>,
    obs: BTreeMap<Key, Obs>,
    failed: bool,
}

impl Sim<'_> {
    fn read(&mut self, k: &Key, obj: ObjId) -> i64 {
        let own = self.last_write.get(&obj).cloned();
        let (src, v) = match (self.choices.get(k), own) {
            (Some(Choice::Own), Some((wk, v))) => (Source::Own(wk), v),
            (Some(Choice::Ext(v)), _) => (Source::External, *v),
            _ => (Source::External, 0),
        };
        self.obs.insert(k.clone(), Obs::Read(src, v));
        v
    }

    fn write(&mut self, k: &Key, obj: ObjId, v: i64) {
        self.last_write.insert(obj, (k.clone(), v));
        self.obs.insert(k.clone(), Obs::Write(v));
    }

    fn eval(&self, e: &Expr) -> Option<i64> {
        e.eval(&|l: LocalId| self.locals[l.0 as usize]).ok()
    }

    fn run(&mut self, body: &[Stmt]) {
        for s in body {
            if self.failed {
                return;
            }
            let k = self.keys[&s.id].clone();
            match &s.kind {
                StmtKind::Load { dst, obj, .. } => {
                    let v = self.read(&k, *obj);
                    self.locals[dst.0 as usize] = Some(v);
                }
                StmtKind::Store { obj, value, .. } => match self.eval(value) {
                    Some(v) => self.write(&k, *obj, v),
                    None => self.fail(k),
                },
                StmtKind::Fadd {
                    dst, obj, delta, ..
                } => {
                    let Some(d) = self.eval(delta) else {
                        return self.fail(k);
                    };
                    let old = self.read(&k, *obj);
                    let Some(new) = old.checked_add(d) else {
                        return self.fail(k);
                    };
                    self.last_write.insert(*obj, (k.clone(), new));
                    if let Some(d) = dst {
                        self.locals[d.0 as usize] = Some(old);
                    }
                }
                StmtKind::Cas {
                    dst,
                    obj,
                    expected,
                    desired,
                    ..
                } => {
                    let (Some(e), Some(n)) = (self.eval(expected), self.eval(desired)) else {
                        return self.fail(k);
                    };
                    let old = self.read(&k, *obj);
                    if old == e {
                        self.last_write.insert(*obj, (k.clone(), n));
                    }
                    if let Some(d) = dst {
                        self.locals[d.0 as usize] = Some(old);
                    }
                }
                StmtKind::Fence { .. } => {}
                StmtKind::Assign { dst, value } => match self.eval(value) {
                    Some(v) => self.locals[dst.0 as usize] = Some(v),
                    None => self.fail(k),
                },
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                } => match self.eval(cond) {
                    Some(c) if c != 0 => self.run(then_body),
                    Some(_) => self.run(else_body),
                    None => self.fail(k),
                },
            }
        }
    }

    fn fail(&mut self, k: Key) {
        self.obs.insert(k, Obs::Error);
        self.failed = true;
    }
}

type Outcome = (BTreeMap<Key, Obs>, Vec<Option<i64>>);

fn simulate(p: &Program, t: &Thread, choices: &BTreeMap<Key, Choice>) -> Outcome {
    let keys = keyed(p, t)
        .into_iter()
        .map(|(k, s)| (s.id, k))
        .collect();
    let mut sim = Sim {
        keys,
        choices,
        locals: vec![None; t.locals.len()],
        last_write: BTreeMap::new(),
        obs: BTreeMap::new(),
        failed: false,
    };
    sim.run(&t.body);
    (sim.obs, sim.locals)
}

/// Upper bound on single-thread runs per thread.
const MAX_RUNS: usize = 1 << 16;

fn domain(p: &Program, reads: usize) -> Vec<i64> {
    let mut d: BTreeSet<i64> = [0, 1].into();
    d.extend(p.objects.iter().map(|o| o.init));
    for t in &p.threads {
        for s in t.walk() {
            let mut cs = Vec::new();
            match &s.kind {
                StmtKind::Store { value, .. } => value.constants(&mut cs),
                StmtKind::Fadd { delta, .. } => delta.constants(&mut cs),
                StmtKind::Cas {
                    expected, desired, ..
                } => {
                    expected.constants(&mut cs);
                    desired.constants(&mut cs);
                }
                StmtKind::If { cond, .. } | StmtKind::Assign { value: cond, .. } => {
                    cond.constants(&mut cs)
                }
                _ => {}
            }
            d.extend(cs);
        }
    }
    let mut d: Vec<i64> = d.into_iter().collect();
    while d.len() > 1 && (d.len() + 1).checked_pow(reads as u32).is_none_or(|n| n > MAX_RUNS) {
        d.pop();
    }
    d
}

fn spr2(a: &Program, b: &Program) -> Option<String> {
    for (ta, tb) in a.threads.iter().zip(&b.threads) {
        let reads: Vec<Key> = keyed(a, ta)
            .into_iter()
            .filter(|(_, s)| s.is_read())
            .map(|(k, _)| k)
            .collect();
        let dom = domain(a, reads.len());
        let options: Vec<Choice> = std::iter::once(Choice::Own)
            .chain(dom.iter().map(|&v| Choice::Ext(v)))
            .collect();
        let mut idx = vec![0usize; reads.len()];
        'runs: loop {
            let choices: BTreeMap<Key, Choice> = reads
                .iter()
                .zip(&idx)
                .map(|(k, &i)| (k.clone(), options[i]))
                .collect();
            let oa = simulate(a, ta, &choices);
            let ob = simulate(b, tb, &choices);
            if oa != ob {
                return Some(format!("{}: sequential behaviour differs", ta.name));
            }
            // odometer over all choice vectors
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    break 'runs;
                }
                idx[pos] += 1;
                if idx[pos] < options.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
    None
}

/// Checks that `transformed` preserves the semantics of `original`.
pub fn check_spr(original: &Program, transformed: &Program) -> SprVerdict {
    let mut rules = BTreeMap::new();
    let s1 = spr1(original, transformed);
    let comparable = original.threads.len() == transformed.threads.len();
    rules.insert(SprRule::Spr1, s1);
    let (s2, s3) = if comparable {
        (spr2(original, transformed), spr3(original, transformed))
    } else {
        let skip = Some("thread count differs".to_string());
        (skip.clone(), skip)
    };
    rules.insert(SprRule::Spr2, s2);
    rules.insert(SprRule::Spr3, s3);
    SprVerdict { rules }
}
