//! Early-write transformation and its semantics-preservation oracle.
//!
//! [`early_write_transform`] hoists each shared write to the earliest point
//! of its basic block that it may legally reorder above. [`check_spr`]
//! compares two programs thread by thread: same statements, same
//! sequential behaviour, same per-object access order.

mod spr;

use serde::Serialize;

use crate::ir::{DepInfo, MemoryOrder, Program, Stmt, StmtId, StmtKind};

pub use spr::{check_spr, SprRule, SprVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RestrictionKind {
    /// `earlier` is an acquire-class read or fence; nothing moves above it.
    Noup,
    /// `later` is a release-class write or fence; nothing moves below it.
    Nodown,
    /// `later` depends on `earlier` through data or control flow.
    Dep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReorderRestriction {
    pub kind: RestrictionKind,
    pub earlier: StmtId,
    pub later: StmtId,
}

fn acquire_class(s: &Stmt) -> bool {
    let acq = s.order().is_some_and(|o| o.is_acquire());
    match s.kind {
        StmtKind::Fence { .. } => acq,
        _ => s.is_read() && acq,
    }
}

fn release_class(s: &Stmt) -> bool {
    let rel = s.order().is_some_and(|o| o.is_release());
    match s.kind {
        StmtKind::Fence { .. } => rel,
        _ => s.is_write() && rel,
    }
}

/// The restriction, if any, that forbids moving `later` above `earlier`
/// (same thread, `earlier` first in program order).
pub fn restriction(deps: &DepInfo, earlier: &Stmt, later: &Stmt) -> Option<ReorderRestriction> {
    let kind = if deps.depends(earlier.id, later.id) {
        RestrictionKind::Dep
    } else if acquire_class(earlier) {
        RestrictionKind::Noup
    } else if release_class(later) {
        RestrictionKind::Nodown
    } else {
        return None;
    };
    Some(ReorderRestriction {
        kind,
        earlier: earlier.id,
        later: later.id,
    })
}

/// `w` (a shared write) may not be hoisted above `s`.
fn blocks(deps: &DepInfo, s: &Stmt, w: &Stmt) -> bool {
    if restriction(deps, s, w).is_some() {
        return true;
    }
    match &s.kind {
        StmtKind::If { .. } => return true,
        // a store after a release fence is what publishes the fence
        StmtKind::Fence { ord } if *ord != MemoryOrder::Rlx && *ord != MemoryOrder::Na => {
            return true
        }
        _ => {}
    }
    if s.is_write() || (s.object().is_some() && s.object() == w.object()) {
        return true;
    }
    let wd = w.defines();
    let sd = s.defines();
    let anti = wd.is_some_and(|d| s.uses().contains(&d));
    let output = wd.is_some() && wd == sd;
    let flow = sd.is_some_and(|d| w.uses().contains(&d));
    anti || output || flow
}

fn hoist_block(deps: &DepInfo, body: &mut Vec<Stmt>) {
    for s in body.iter_mut() {
        if let StmtKind::If {
            then_body,
            else_body,
            ..
        } = &mut s.kind
        {
            hoist_block(deps, then_body);
            hoist_block(deps, else_body);
        }
    }
    for i in 0..body.len() {
        if !body[i].is_write() {
            continue;
        }
        let mut j = i;
        while j > 0 && !blocks(deps, &body[j - 1], &body[i]) {
            j -= 1;
        }
        if j < i {
            let w = body.remove(i);
            body.insert(j, w);
        }
    }
}

/// Hoists every shared write within its basic block above the statements it
/// may reorder with. Writes keep their relative order; idempotent.
pub fn early_write_transform(p: &Program) -> Program {
    let mut out = p.clone();
    for t in &mut out.threads {
        let deps = DepInfo::new(t);
        hoist_block(&deps, &mut t.body);
    }
    out
}

#[cfg(test)]
mod tests;
