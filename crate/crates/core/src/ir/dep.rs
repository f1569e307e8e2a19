//! Program dependence (data and control) between statements of one thread.
//!
//! Shared objects are named statically, so address dependence is vacuous:
//! no statement computes the location another statement accesses.

use std::collections::{BTreeSet, HashMap};

use super::program::*;
use super::{Actor, Event};

/// Transitive data/control dependence sets for every statement of a thread.
#[derive(Debug, Clone, Default)]
pub struct DepInfo {
    deps: HashMap<StmtId, BTreeSet<StmtId>>,
}

impl DepInfo {
    pub fn new(thread: &Thread) -> Self {
        let mut info = DepInfo::default();
        let mut env: HashMap<LocalId, BTreeSet<StmtId>> = HashMap::new();
        info.walk(&thread.body, &mut env, &BTreeSet::new());
        info
    }

    fn walk(
        &mut self,
        body: &[Stmt],
        env: &mut HashMap<LocalId, BTreeSet<StmtId>>,
        control: &BTreeSet<StmtId>,
    ) {
        for s in body {
            let mut inputs = control.clone();
            for u in s.uses() {
                if let Some(src) = env.get(&u) {
                    inputs.extend(src.iter().copied());
                }
            }
            self.deps.insert(s.id, inputs.clone());
            if let StmtKind::If {
                then_body,
                else_body,
                ..
            } = &s.kind
            {
                let mut inner = inputs.clone();
                inner.insert(s.id);
                let mut env_else = env.clone();
                self.walk(then_body, env, &inner);
                self.walk(else_body, &mut env_else, &inner);
                for (l, src) in env_else {
                    env.entry(l).or_default().extend(src);
                }
            }
            if let Some(d) = s.defines() {
                let mut src = inputs;
                src.insert(s.id);
                env.insert(d, src);
            }
        }
    }

    /// `later` depends on `earlier` through locals or an enclosing branch.
    pub fn depends(&self, earlier: StmtId, later: StmtId) -> bool {
        self.deps
            .get(&later)
            .is_some_and(|d| d.contains(&earlier))
    }

    /// Every statement `s` depends on.
    pub fn sources(&self, s: StmtId) -> impl Iterator<Item = StmtId> + '_ {
        self.deps.get(&s).into_iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DepError {
    #[error("dependence is only defined between events of the same program thread")]
    DifferentThreads,
    #[error("event {0} has no statement in the execution context")]
    UnknownEvent(String),
}

/// Maps executed program events back to their statements.
#[derive(Debug, Clone)]
pub struct ExecContext {
    infos: Vec<DepInfo>,
    stmt_of: HashMap<(ThreadId, u32), StmtId>,
}

impl ExecContext {
    pub fn new(program: &Program, executed: impl IntoIterator<Item = (Event, StmtId)>) -> Self {
        let infos = program.threads.iter().map(DepInfo::new).collect();
        let stmt_of = executed
            .into_iter()
            .filter_map(|(e, s)| match e.actor {
                Actor::Thread(t) => Some(((t, e.idx), s)),
                _ => None,
            })
            .collect();
        ExecContext { infos, stmt_of }
    }

    fn stmt(&self, e: &Event) -> Result<(ThreadId, StmtId), DepError> {
        let t = match e.actor {
            Actor::Thread(t) => t,
            _ => return Err(DepError::UnknownEvent(e.to_string())),
        };
        self.stmt_of
            .get(&(t, e.idx))
            .map(|s| (t, *s))
            .ok_or_else(|| DepError::UnknownEvent(e.to_string()))
    }
}

/// `dep(e', e)`: `e` is data- or control-dependent on the earlier `e'`.
pub fn dep(ctx: &ExecContext, e_prime: &Event, e: &Event) -> Result<bool, DepError> {
    let (t1, s1) = ctx.stmt(e_prime)?;
    let (t2, s2) = ctx.stmt(e)?;
    if t1 != t2 {
        return Err(DepError::DifferentThreads);
    }
    if e_prime.idx >= e.idx {
        return Ok(false);
    }
    Ok(ctx.infos[t1.0 as usize].depends(s1, s2))
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn info(src: &str) -> (Program, DepInfo) {
        let p = parse_program(src).unwrap();
        let i = DepInfo::new(&p.threads[0]);
        (p, i)
    }

    fn ids(p: &Program) -> Vec<StmtId> {
        p.threads[0].walk().iter().map(|s| s.id).collect()
    }

    #[test]
    fn control_dependence() {
        let (p, i) = info("init x, y\nthread T:\n  r1 = load(x, rlx)\n  if (r1 == 1):\n    store(y, 1, rlx)\n");
        let s = ids(&p);
        assert!(i.depends(s[0], s[2]));
    }

    #[test]
    fn disjoint_statements() {
        let (p, i) = info("init x, y\nthread T:\n  store(x, 1, rlx)\n  store(y, 1, rlx)\n");
        let s = ids(&p);
        assert!(!i.depends(s[0], s[1]));
    }

    /// Independent def-use oracle: follow local reads backwards by hand.
    #[test]
    fn data_chain_through_assignment() {
        let (p, i) = info("init x, y\nthread T:\n  r1 = load(x, rlx)\n  r2 = r1 + 1\n  store(y, r2, rlx)\n");
        let s = ids(&p);
        let t = &p.threads[0];
        let store = t.walk()[2];
        let used = store.uses();
        let def = t.walk().into_iter().find(|x| x.defines() == Some(used[0])).unwrap();
        let def_src = def.uses();
        let load = t.walk().into_iter().find(|x| x.defines() == Some(def_src[0])).unwrap();
        assert_eq!(load.id, s[0]);
        assert!(i.depends(s[0], s[2]));
        assert!(i.depends(s[1], s[2]));
    }

    #[test]
    fn irreflexive_and_forward_only() {
        let (p, i) = info("init x\nthread T:\n  r = load(x, rlx)\n  r = r + 1\n  store(x, r, rlx)\n");
        for a in ids(&p) {
            assert!(!i.depends(a, a));
        }
        let s = ids(&p);
        assert!(!i.depends(s[2], s[0]));
    }

    #[test]
    fn redefinition_kills_dependence() {
        let (p, i) = info("init x, y\nthread T:\n  r = load(x, rlx)\n  r = 5\n  store(y, r, rlx)\n");
        let s = ids(&p);
        assert!(!i.depends(s[0], s[2]));
        assert!(i.depends(s[1], s[2]));
    }

    #[test]
    fn different_threads_is_a_contract_violation() {
        let p = parse_program("init x\nthread A:\n  store(x, 1, rlx)\nthread B:\n  store(x, 2, rlx)\n").unwrap();
        let ev = |t: u16| Event {
            actor: Actor::Thread(ThreadId(t)),
            act: super::super::Action::Write,
            obj: Some(ObjId(0)),
            ord: super::super::MemoryOrder::Rlx,
            idx: 0,
        };
        let ctx = ExecContext::new(
            &p,
            vec![(ev(0), p.threads[0].body[0].id), (ev(1), p.threads[1].body[0].id)],
        );
        assert_eq!(dep(&ctx, &ev(0), &ev(1)), Err(DepError::DifferentThreads));
    }
}
