//! Source-DPOR with sleep sets over program threads and shadow-threads.
//!
//! The search is an explicit stack of nodes, one per executed transition.
//! A transition whose extension breaks a coherence rule is treated as
//! disabled at that node. Races are detected when an event is executed,
//! against the happens-before of the explored sequence (program order,
//! issue-before-publication, and the dependence of [`super::deps`]).

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use fixedbitset::FixedBitSet;

use super::deps::{creation_source, dependent, Kind, OpInfo};
use crate::coherence::check_extension;
use crate::engine::{ExecState, Machine, Pid};
use crate::relations::{compute_relations, RelationSet};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Limits {
    pub max_seqs: u64,
    pub max_depth: usize,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Stats {
    pub maximal: u64,
    pub blocked: u64,
    pub sleep_blocked: u64,
    pub incomplete: bool,
    pub diagnostics: Vec<String>,
}

enum Probe {
    Pass {
        child: Option<Box<(ExecState, RelationSet)>>,
        range: Range<usize>,
    },
    Pruned,
    Failed,
}

struct Node {
    state: ExecState,
    rels: RelationSet,
    enabled: Vec<Pid>,
    probes: BTreeMap<Pid, Probe>,
    backtrack: BTreeSet<Pid>,
    done: BTreeSet<Pid>,
    sleep: Vec<(Pid, OpInfo)>,
    current: Option<(Pid, OpInfo)>,
    started: bool,
}

impl Node {
    fn new(m: &Machine, state: ExecState, rels: RelationSet, sleep: Vec<(Pid, OpInfo)>) -> Node {
        Node {
            enabled: m.enabled(&state),
            state,
            rels,
            probes: BTreeMap::new(),
            backtrack: BTreeSet::new(),
            done: BTreeSet::new(),
            sleep,
            current: None,
            started: false,
        }
    }

    fn asleep(&self, p: Pid) -> bool {
        self.sleep.iter().any(|(q, _)| *q == p)
    }
}

pub(crate) struct Dpor<'m> {
    m: &'m Machine,
    limits: Limits,
    stack: Vec<Node>,
    /// Per step index of the current path: description, happens-before
    /// past (including itself), and the stack depth it was executed from.
    infos: Vec<Option<OpInfo>>,
    past: Vec<FixedBitSet>,
    owner: Vec<usize>,
    pub stats: Stats,
}

impl<'m> Dpor<'m> {
    pub fn new(m: &'m Machine, limits: Limits) -> Self {
        Dpor {
            m,
            limits,
            stack: Vec::new(),
            infos: Vec::new(),
            past: Vec::new(),
            owner: Vec::new(),
            stats: Stats::default(),
        }
    }

    /// Runs the search from `root`, handing every maximal sequence to
    /// `sink`. Returns early once the sequence budget is exhausted.
    pub fn run(&mut self, root: ExecState, sink: &mut dyn FnMut(&ExecState, &RelationSet)) {
        let rels = compute_relations(&root.seq);
        let n = root.seq.len();
        self.infos = vec![None; n];
        self.past = (0..n).map(|_| FixedBitSet::new()).collect();
        self.owner = vec![usize::MAX; n];
        self.stack = vec![Node::new(self.m, root, rels, Vec::new())];
        while !self.stack.is_empty() {
            match self.next_choice(sink) {
                Some(p) => self.execute(p),
                None => self.pop(),
            }
            if self.stats.incomplete && self.stats.maximal >= self.limits.max_seqs {
                break;
            }
        }
    }

    fn probe(&mut self, d: usize, p: Pid) -> &mut Probe {
        let m = self.m;
        let node = &mut self.stack[d];
        if !node.probes.contains_key(&p) {
            let mut next = node.state.clone();
            let probe = match m.step(&mut next, p) {
                Ok(range) => {
                    let mut rels = node.rels.clone();
                    rels.update(&next.seq);
                    if check_extension(&next.seq, &rels, range.start).is_some() {
                        Probe::Pruned
                    } else {
                        Probe::Pass {
                            child: Some(Box::new((next, rels))),
                            range,
                        }
                    }
                }
                Err(e) => {
                    let msg = e.to_string();
                    if !self.stats.diagnostics.contains(&msg) {
                        self.stats.diagnostics.push(msg);
                    }
                    Probe::Failed
                }
            };
            node.probes.insert(p, probe);
        }
        node.probes.get_mut(&p).unwrap()
    }

    fn executable(&mut self, d: usize, p: Pid) -> bool {
        self.stack[d].enabled.contains(&p) && matches!(self.probe(d, p), Probe::Pass { .. })
    }

    fn next_choice(&mut self, sink: &mut dyn FnMut(&ExecState, &RelationSet)) -> Option<Pid> {
        let d = self.stack.len() - 1;
        if !self.stack[d].started {
            self.stack[d].started = true;
            let node = &self.stack[d];
            if node.enabled.is_empty() {
                if self.stats.maximal >= self.limits.max_seqs {
                    self.stats.incomplete = true;
                    return None;
                }
                self.stats.maximal += 1;
                sink(&node.state, &node.rels);
                return None;
            }
            if node.state.seq.len() - node.state.seq.init_len >= self.limits.max_depth {
                self.stats.incomplete = true;
                return None;
            }
            let awake: Vec<Pid> = node
                .enabled
                .iter()
                .copied()
                .filter(|p| !node.asleep(*p))
                .collect();
            if awake.is_empty() {
                self.stats.sleep_blocked += 1;
                return None;
            }
            match awake.into_iter().find(|&p| self.executable(d, p)) {
                Some(p) => {
                    self.stack[d].backtrack.insert(p);
                }
                None => {
                    self.stats.blocked += 1;
                    return None;
                }
            }
        }
        loop {
            let node = &self.stack[d];
            let p = node.backtrack.difference(&node.done).next().copied()?;
            if node.asleep(p) || !self.executable(d, p) {
                self.stack[d].done.insert(p);
                continue;
            }
            return Some(p);
        }
    }

    fn execute(&mut self, p: Pid) {
        let d = self.stack.len() - 1;
        let Probe::Pass { child, range } = self.probe(d, p) else {
            unreachable!("executing a non-executable process");
        };
        let range = range.clone();
        let (state, rels) = *child.take().expect("probe consumed twice");
        let info = OpInfo::of(&state.seq, &rels, range.start).expect("schedulable step");
        let past = self.analyse(range.start, &info);
        for i in range.clone() {
            self.infos.push((i == range.start).then(|| info.clone()));
            let mut b = past.clone();
            b.grow(i + 1);
            b.insert(i);
            self.past.push(b);
            self.owner.push(d);
        }
        let node = &mut self.stack[d];
        let sleep = node
            .sleep
            .iter()
            .filter(|(_, s)| !dependent(s, &info))
            .cloned()
            .collect();
        node.current = Some((p, info));
        // the child state is not needed by the parent any more
        node.probes.insert(p, Probe::Failed);
        let child = Node::new(self.m, state, rels, sleep);
        self.stack.push(child);
    }

    fn pop(&mut self) {
        self.stack.pop();
        if let Some(parent) = self.stack.last_mut() {
            let n = parent.state.seq.len();
            self.infos.truncate(n);
            self.past.truncate(n);
            self.owner.truncate(n);
            if let Some((p, info)) = parent.current.take() {
                parent.done.insert(p);
                parent.sleep.push((p, info));
                // reprobe lazily if a later race asks for it again
                parent.probes.remove(&p);
            }
        }
    }

    /// Race detection for the event `info` about to occupy step `j`; adds
    /// backtrack points and returns the happens-before past of `j`.
    fn analyse(&mut self, j: usize, info: &OpInfo) -> FixedBitSet {
        let init_len = self.stack[0].state.seq.init_len;
        let po_prev = (init_len..j)
            .rev()
            .find(|&k| self.infos[k].as_ref().is_some_and(|x| x.pid == info.pid));
        let creation = creation_source(info);
        let deps: Vec<usize> = (init_len..j)
            .filter(|&k| {
                self.infos[k]
                    .as_ref()
                    .is_some_and(|x| x.pid != info.pid && dependent(x, info))
            })
            .collect();
        let mut preds: Vec<usize> = deps.clone();
        preds.extend(po_prev);
        preds.extend(creation);
        preds.sort_unstable();
        preds.dedup();

        let mut past = FixedBitSet::with_capacity(j + 1);
        for &k in &preds {
            past.union_with(&self.past[k]);
        }
        past.grow(j + 1);
        past.insert(j);

        for &i in &deps {
            if Some(i) == creation || self.irreversible(i, info) {
                continue;
            }
            let mut others = FixedBitSet::with_capacity(j);
            for &k in preds.iter().filter(|&&k| k != i) {
                others.union_with(&self.past[k]);
            }
            if others.contains(i) {
                continue;
            }
            self.reverse(i, j, info, &past);
        }
        past
    }

    /// An rmw (or failed compare-and-swap) waits for its own thread's queue on the object to drain, so
    /// it can never be moved before one of those shadow-writes.
    fn irreversible(&self, i: usize, info: &OpInfo) -> bool {
        let earlier = self.infos[i].as_ref().unwrap();
        info.drains
            && matches!(earlier.kind, Kind::Shadow(_))
            && earlier.thread == info.thread
            && earlier.obj == info.obj
    }

    fn reverse(&mut self, i: usize, j: usize, info: &OpInfo, past_j: &FixedBitSet) {
        let d = self.owner[i];
        let v: Vec<usize> = (i + 1..j)
            .filter(|&k| self.infos[k].is_some() && !self.past[k].contains(i))
            .collect();
        let mut initials: Vec<Pid> = Vec::new();
        let mut seen: BTreeSet<Pid> = BTreeSet::new();
        for (n, &k) in v.iter().enumerate() {
            let pid = self.infos[k].as_ref().unwrap().pid;
            let fresh = seen.insert(pid);
            if fresh && !v[..n].iter().any(|&k2| self.past[k].contains(k2)) {
                initials.push(pid);
            }
        }
        if !seen.contains(&info.pid) && !v.iter().any(|&k2| past_j.contains(k2)) {
            initials.push(info.pid);
        }
        let node = &self.stack[d];
        if initials
            .iter()
            .any(|p| node.backtrack.contains(p) || node.asleep(*p))
        {
            return;
        }
        initials.sort_unstable();
        for &p in &initials {
            if self.executable(d, p) {
                self.stack[d].backtrack.insert(p);
                return;
            }
        }
        // no initial can run here; fall back to every runnable process
        let enabled = self.stack[d].enabled.clone();
        for p in enabled {
            if !self.stack[d].asleep(p) && self.executable(d, p) {
                self.stack[d].backtrack.insert(p);
            }
        }
    }
}
