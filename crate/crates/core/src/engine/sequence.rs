use std::collections::BTreeMap;

use serde::Serialize;

use super::Pid;
use crate::ir::{Actor, Event, ObjId, StmtId, ThreadId};

/// One executed event with its resolved values and links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub event: Event,
    /// Process whose transition produced the step; `None` for init.
    pub pid: Option<Pid>,
    pub stmt: Option<StmtId>,
    /// Value returned by a read or rmw.
    pub read: Option<i64>,
    /// Value stored by a write, rmw or shadow-write.
    pub written: Option<i64>,
    /// Index of the write this read takes its value from.
    pub rf: Option<usize>,
    /// For a write: index of its shadow-write once published.
    pub shadow: Option<usize>,
    /// For a shadow-write: index of the write it publishes.
    pub shadow_of: Option<usize>,
    /// A compare-and-swap that did not update; recorded as a read but, like
    /// any rmw, it waited for its thread's writes to the object to publish.
    pub failed_cas: bool,
}

/// An executed sequence `τ`. The first `init_len` steps are the init writes
/// and their shadow-writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sequence {
    pub steps: Vec<Step>,
    pub init_len: usize,
    pub num_threads: usize,
    pub num_objects: usize,
}

impl Sequence {
    pub fn new(num_threads: usize, num_objects: usize) -> Self {
        Sequence {
            steps: Vec::new(),
            init_len: 0,
            num_threads,
            num_objects,
        }
    }

    pub(crate) fn push(&mut self, s: Step) -> usize {
        self.steps.push(s);
        self.steps.len() - 1
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.steps[i].event
    }

    /// `shw(e)` for a write.
    pub fn shw(&self, i: usize) -> Option<usize> {
        self.steps[i].shadow
    }

    /// `prw(e)` for a shadow-write.
    pub fn prw(&self, i: usize) -> Option<usize> {
        self.steps[i].shadow_of
    }

    /// Truncates to the first `n` steps, unlinking shadows that fall off.
    pub fn prefix(&self, n: usize) -> Sequence {
        let mut p = self.clone();
        p.steps.truncate(n);
        for s in &mut p.steps {
            if s.shadow.is_some_and(|x| x >= n) {
                s.shadow = None;
            }
        }
        p
    }

    pub fn shadow_map(&self) -> ShadowMap {
        let mut m = ShadowMap::default();
        for (i, s) in self.steps.iter().enumerate() {
            if let Some(w) = s.shadow_of {
                m.forward.insert(w, i);
                m.backward.insert(i, w);
            }
        }
        m
    }

    /// The program (or init) thread an event belongs to.
    pub fn thread_of(&self, i: usize) -> ThreadId {
        self.steps[i].event.actor.owner()
    }

    pub fn obj(&self, i: usize) -> Option<ObjId> {
        self.steps[i].event.obj
    }

    pub fn is_init(&self, i: usize) -> bool {
        i < self.init_len
    }

    /// Indices of program events (non-init, non-shadow).
    pub fn program_events(&self) -> impl Iterator<Item = usize> + '_ {
        (self.init_len..self.len()).filter(|&i| matches!(self.steps[i].event.actor, Actor::Thread(_)))
    }
}

/// `shw`/`prw` as explicit maps over step indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShadowMap {
    pub forward: BTreeMap<usize, usize>,
    pub backward: BTreeMap<usize, usize>,
}

impl ShadowMap {
    /// The shadow-thread that publishes writes of thread `t` to object `o`.
    pub fn owner(t: ThreadId, o: ObjId) -> Actor {
        Actor::Shadow(t, o)
    }
}
