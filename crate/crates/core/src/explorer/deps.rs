//! Dependence between schedulable events, used for race detection and
//! sleep sets.
//!
//! Two events of different processes are dependent when swapping them can
//! change an outcome or the admissibility of the sequence:
//! - shadow-writes of the same object (mo order);
//! - a shadow-write and a read of its object (rf);
//! - a write issue and another thread's shadow-write of the same object
//!   (which of the two a later own read observes);
//! - two events placed in the total order of sc events;
//! - a shadow-write of `w` and an acquire-class event that `w` happens
//!   before (`w` must be published by then).
//!
//! An rmw counts as both a read and a shadow-write of its own value.

use fixedbitset::FixedBitSet;

use crate::engine::{Pid, Sequence};
use crate::ir::{Action, MemoryOrder, ObjId, ThreadId};
use crate::relations::RelationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Issue,
    Read,
    Rmw,
    Fence,
    /// Publication of the program write at this step index.
    Shadow(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct OpInfo {
    pub pid: Pid,
    pub thread: ThreadId,
    pub kind: Kind,
    pub obj: Option<ObjId>,
    pub acquire: bool,
    pub sc_point: bool,
    /// Enabled only once the thread's writes to the object are published
    /// (an rmw, including a failed compare-and-swap).
    pub drains: bool,
    /// For reads: the latest write of the same thread to the object issued
    /// before the read, provided no other write of the object was published
    /// since (so the read returns it whether or not it is published).
    pub own_latest: Option<usize>,
    /// For acquire-class events: every step that happens before it.
    pub synced: Option<FixedBitSet>,
}

impl OpInfo {
    /// Describes the step at index `i` (an rmw is described by its leading
    /// step; the trailing shadow-write of an rmw has no description).
    pub fn of(seq: &Sequence, rels: &RelationSet, i: usize) -> Option<OpInfo> {
        let st = &seq.steps[i];
        let pid = st.pid?;
        let e = st.event;
        let kind = match e.act {
            Action::Write => Kind::Issue,
            Action::Read => Kind::Read,
            Action::Rmw => Kind::Rmw,
            Action::Fence => Kind::Fence,
            Action::ShadowWrite => {
                let w = st.shadow_of?;
                if seq.steps[w].event.act == Action::Rmw {
                    return None;
                }
                Kind::Shadow(w)
            }
        };
        let acquire = e.is_program() && e.is_acquire_class();
        let sc_point = e.ord == MemoryOrder::Sc
            && match kind {
                Kind::Issue => false,
                Kind::Shadow(w) => seq.steps[w].event.act == Action::Write,
                _ => true,
            };
        let own_latest = if matches!(kind, Kind::Read | Kind::Rmw) {
            (seq.init_len..i).rev().find(|&k| {
                let ek = seq.steps[k].event;
                ek.is_program() && ek.is_write() && ek.thread() == e.thread() && ek.obj == e.obj
            })
        } else {
            None
        };
        // another publication after the own write would win over it
        let own_latest = own_latest.filter(|&w| {
            (w + 1..i).all(|k| {
                let st = &seq.steps[k];
                !(st.event.is_shadow() && st.event.obj == e.obj && st.shadow_of != Some(w))
            })
        });
        let synced = acquire.then(|| {
            let mut b = FixedBitSet::with_capacity(seq.len());
            for p in rels.hb_preds(i) {
                b.insert(p);
            }
            b
        });
        Some(OpInfo {
            pid,
            thread: e.thread(),
            kind,
            obj: e.obj,
            acquire,
            sc_point,
            own_latest,
            drains: kind == Kind::Rmw || st.failed_cas,
            synced,
        })
    }

    fn publishes(&self) -> Option<usize> {
        match self.kind {
            Kind::Shadow(w) => Some(w),
            _ => None,
        }
    }

    fn shadow_like(&self) -> bool {
        matches!(self.kind, Kind::Shadow(_) | Kind::Rmw)
    }

    fn read_like(&self) -> bool {
        matches!(self.kind, Kind::Read | Kind::Rmw)
    }

    fn is_shadow(&self) -> bool {
        matches!(self.kind, Kind::Shadow(_))
    }
}

/// `a` and `b` (in either order) do not commute.
pub(crate) fn dependent(a: &OpInfo, b: &OpInfo) -> bool {
    if a.pid == b.pid {
        return true;
    }
    if a.thread == b.thread {
        return own_dependent(a, b) || own_dependent(b, a);
    }
    let same_obj = a.obj.is_some() && a.obj == b.obj;
    if same_obj {
        if a.shadow_like() && (b.shadow_like() || b.read_like() || b.kind == Kind::Issue) {
            return true;
        }
        if b.shadow_like() && (a.read_like() || a.kind == Kind::Issue) {
            return true;
        }
    }
    if a.sc_point && b.sc_point {
        return true;
    }
    synchronises(a, b) || synchronises(b, a)
}

/// A program event of thread `t` against a shadow-write of the same thread.
fn own_dependent(p: &OpInfo, s: &OpInfo) -> bool {
    let Some(w) = s.publishes() else {
        return false;
    };
    if p.sc_point && s.sc_point {
        return true;
    }
    if p.is_shadow() || p.obj != s.obj {
        return false;
    }
    match p.kind {
        // the read sees its own latest write whether or not that write is
        // already published; publishing an older one makes it stale
        Kind::Read => p.drains || p.own_latest != Some(w),
        Kind::Rmw | Kind::Issue => true,
        _ => false,
    }
}

fn synchronises(s: &OpInfo, e: &OpInfo) -> bool {
    let w = match s.kind {
        Kind::Shadow(w) => w,
        _ => return false,
    };
    e.acquire && e.synced.as_ref().is_some_and(|b| b.contains(w))
}

/// The shadow-write at `j` cannot be moved before the issue of its write.
pub(crate) fn creation_source(info: &OpInfo) -> Option<usize> {
    info.publishes()
}

/// Pairs `(i, j)`, `i < j`, of schedulable steps whose relative order is
/// significant: same process, issue before publication, or dependent.
/// Steps are named by their leading index (an rmw's publication is folded
/// into the rmw).
pub(crate) fn order_pairs(seq: &Sequence, rels: &RelationSet) -> Vec<(usize, usize)> {
    let infos: Vec<(usize, OpInfo)> = (seq.init_len..seq.len())
        .filter_map(|i| OpInfo::of(seq, rels, i).map(|x| (i, x)))
        .collect();
    let mut out = Vec::new();
    for (n, (j, b)) in infos.iter().enumerate() {
        for (i, a) in &infos[..n] {
            if creation_source(b) == Some(*i) || dependent(a, b) {
                out.push((*i, *j));
            }
        }
    }
    out
}
