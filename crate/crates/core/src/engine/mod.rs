//! Operational semantics of the MCA machine.
//!
//! Program threads execute their statements in order. A write only *issues*
//! (it is queued on the shadow-thread of its thread and object); the
//! shadow-thread later performs the shadow-write that updates shared
//! memory. Reads are resolved deterministically from the prefix: they see
//! the latest published write, or the thread's own newer unpublished write.

mod compile;
mod sequence;

use std::collections::VecDeque;

use serde::Serialize;

use crate::ir::{Action, Actor, Event, EvalError, LocalId, ObjId, Program, StmtId, ThreadId};

pub use compile::{Instr, SharedOp};
pub use sequence::{Sequence, ShadowMap, Step};

/// Schedulable unit: a program thread or a shadow-thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pid(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("process {0} is not enabled")]
    NotEnabled(String),
    #[error("evaluation failed at line {line}: {err}")]
    Eval { line: usize, err: EvalError },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("replay failed at schedule step {step}: {kind}")]
pub struct ReplayError {
    pub step: usize,
    pub kind: EngineError,
}

/// Compiled program plus process naming; shared read-only by all states.
#[derive(Debug, Clone)]
pub struct Machine {
    program: Program,
    code: Vec<Vec<Instr>>,
}

/// Snapshot of the machine: shared store, locals, program counters and
/// the pending queue of every shadow-thread, plus the executed sequence.
#[derive(Debug, Clone)]
pub struct ExecState {
    pub shr: Vec<i64>,
    pub lcl: Vec<Vec<Option<i64>>>,
    pub pc: Vec<usize>,
    /// Step indices of issued, unpublished writes per shadow-thread.
    pub pending: Vec<VecDeque<usize>>,
    pub seq: Sequence,
    thread_idx: Vec<u32>,
    shadow_idx: Vec<u32>,
    last_shadow: Vec<usize>,
    last_own_write: Vec<Option<usize>>,
}

impl ExecState {
    pub fn local(&self, t: ThreadId, l: LocalId) -> Option<i64> {
        self.lcl[t.0 as usize][l.0 as usize]
    }

    /// The write whose shadow-write most recently updated `o`.
    pub fn lw(&self, o: ObjId) -> usize {
        lw(&self.seq, o)
    }
}

/// `lw(τ, o)`: the write published by the latest shadow-write of `o`, or
/// the init write.
pub fn lw(seq: &Sequence, o: ObjId) -> usize {
    seq.steps
        .iter()
        .rposition(|s| s.event.is_shadow() && s.event.obj == Some(o))
        .and_then(|i| seq.steps[i].shadow_of)
        .expect("every object has an init write")
}

/// Reads-from source for a read of `o` by thread `t` appended to `seq`: the
/// thread's latest write to `o` if it was issued after the latest
/// shadow-write of `o`, otherwise `lw(seq, o)`.
pub fn resolve_rf(seq: &Sequence, t: ThreadId, o: ObjId) -> usize {
    let last_shadow = seq
        .steps
        .iter()
        .rposition(|s| s.event.is_shadow() && s.event.obj == Some(o))
        .expect("every object has an init write");
    let own = seq.steps.iter().rposition(|s| {
        s.event.actor == Actor::Thread(t) && s.event.is_write() && s.event.obj == Some(o)
    });
    match own {
        Some(w) if w > last_shadow => w,
        _ => seq.steps[last_shadow].shadow_of.unwrap(),
    }
}

impl Machine {
    pub fn new(program: &Program) -> Self {
        let code = program.threads.iter().map(compile::compile).collect();
        Machine {
            program: program.clone(),
            code,
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn num_threads(&self) -> usize {
        self.program.num_threads()
    }

    pub fn num_objects(&self) -> usize {
        self.program.num_objects()
    }

    pub fn num_pids(&self) -> usize {
        self.num_threads() * (1 + self.num_objects())
    }

    pub fn thread_pid(&self, t: ThreadId) -> Pid {
        Pid(t.0 as u32)
    }

    pub fn shadow_pid(&self, t: ThreadId, o: ObjId) -> Pid {
        Pid((self.num_threads() + t.0 as usize * self.num_objects() + o.0 as usize) as u32)
    }

    /// Decodes a pid into the actor it schedules.
    pub fn actor(&self, pid: Pid) -> Actor {
        let p = pid.0 as usize;
        let nt = self.num_threads();
        if p < nt {
            Actor::Thread(ThreadId(p as u16))
        } else {
            let k = p - nt;
            let no = self.num_objects();
            Actor::Shadow(ThreadId((k / no) as u16), ObjId((k % no) as u16))
        }
    }

    fn queue_index(&self, t: ThreadId, o: ObjId) -> usize {
        t.0 as usize * self.num_objects() + o.0 as usize
    }

    /// Schedule token: `T1` for a thread, `sh(T1,x)` for a shadow-thread.
    pub fn pid_name(&self, pid: Pid) -> String {
        match self.actor(pid) {
            Actor::Thread(t) => self.program.thread_name(t).to_string(),
            Actor::Shadow(t, o) => format!(
                "sh({},{})",
                self.program.thread_name(t),
                self.program.object_name(o)
            ),
            Actor::Init => "init".to_string(),
        }
    }

    pub fn parse_pid(&self, token: &str) -> Option<Pid> {
        let token = token.trim();
        if let Some(inner) = token.strip_prefix("sh(").and_then(|r| r.strip_suffix(')')) {
            let (t, o) = inner.split_once(',')?;
            let t = self.program.thread_id(t.trim())?;
            let o = self.program.object_id(o.trim())?;
            return Some(self.shadow_pid(t, o));
        }
        self.program.thread_id(token).map(|t| self.thread_pid(t))
    }

    /// Initial state: init writes and their shadow-writes already executed,
    /// in object order, and every thread advanced to its first shared op.
    pub fn initial_state(&self) -> Result<ExecState, EngineError> {
        let nt = self.num_threads();
        let no = self.num_objects();
        let mut seq = Sequence::new(nt, no);
        let mut last_shadow = Vec::with_capacity(no);
        for (i, obj) in self.program.objects.iter().enumerate() {
            let o = ObjId(i as u16);
            let w = seq.push(Step {
                event: Event {
                    actor: Actor::Init,
                    act: Action::Write,
                    obj: Some(o),
                    ord: crate::ir::MemoryOrder::Na,
                    idx: i as u32,
                },
                pid: None,
                stmt: None,
                read: None,
                written: Some(obj.init),
                rf: None,
                shadow: None,
                shadow_of: None,
                failed_cas: false,
            });
            let s = seq.push(Step {
                event: Event {
                    actor: Actor::Shadow(ThreadId::INIT, o),
                    act: Action::ShadowWrite,
                    obj: Some(o),
                    ord: crate::ir::MemoryOrder::Na,
                    idx: 0,
                },
                pid: None,
                stmt: None,
                read: None,
                written: Some(obj.init),
                rf: None,
                shadow: None,
                shadow_of: Some(w),
                failed_cas: false,
            });
            seq.steps[w].shadow = Some(s);
            last_shadow.push(s);
        }
        seq.init_len = seq.steps.len();
        let mut state = ExecState {
            shr: self.program.objects.iter().map(|o| o.init).collect(),
            lcl: self
                .program
                .threads
                .iter()
                .map(|t| vec![None; t.locals.len()])
                .collect(),
            pc: vec![0; nt],
            pending: vec![VecDeque::new(); nt * no],
            seq,
            thread_idx: vec![0; nt],
            shadow_idx: vec![0; nt * no],
            last_shadow,
            last_own_write: vec![None; nt * no],
        };
        for t in 0..nt {
            self.run_local(&mut state, t)?;
        }
        Ok(state)
    }

    /// Executes local instructions of thread `t` until its next shared op.
    fn run_local(&self, s: &mut ExecState, t: usize) -> Result<(), EngineError> {
        let code = &self.code[t];
        loop {
            let pc = s.pc[t];
            let Some(instr) = code.get(pc) else {
                return Ok(());
            };
            match instr {
                Instr::Op { .. } => return Ok(()),
                Instr::Assign { dst, value, line } => {
                    let v = eval(value, &s.lcl[t], *line)?;
                    s.lcl[t][dst.0 as usize] = Some(v);
                    s.pc[t] += 1;
                }
                Instr::BranchFalse { cond, target, line } => {
                    let v = eval(cond, &s.lcl[t], *line)?;
                    s.pc[t] = if v == 0 { *target } else { pc + 1 };
                }
                Instr::Jump(target) => s.pc[t] = *target,
            }
        }
    }

    /// Next shared operation of thread `t`, if it has not finished.
    pub fn next_op(&self, s: &ExecState, t: ThreadId) -> Option<(&SharedOp, StmtId, usize)> {
        match self.code[t.0 as usize].get(s.pc[t.0 as usize]) {
            Some(Instr::Op { op, stmt, line }) => Some((op, *stmt, *line)),
            _ => None,
        }
    }

    pub fn is_enabled(&self, s: &ExecState, pid: Pid) -> bool {
        match self.actor(pid) {
            Actor::Thread(t) => match self.next_op(s, t) {
                None => false,
                // an rmw publishes atomically, so the thread's own earlier
                // writes to the same object must be published first
                Some((op, _, _)) if op.is_rmw() => {
                    s.pending[self.queue_index(t, op.obj().unwrap())].is_empty()
                }
                Some(_) => true,
            },
            Actor::Shadow(t, o) => !s.pending[self.queue_index(t, o)].is_empty(),
            Actor::Init => false,
        }
    }

    /// Enabled processes in ascending pid order (threads before shadows).
    pub fn enabled(&self, s: &ExecState) -> Vec<Pid> {
        (0..self.num_pids() as u32)
            .map(Pid)
            .filter(|p| self.is_enabled(s, *p))
            .collect()
    }

    /// True when nothing is enabled: every thread finished, every queue empty.
    pub fn is_terminal(&self, s: &ExecState) -> bool {
        self.enabled(s).is_empty()
    }

    /// The event `pid` would execute next (the leading event for an rmw).
    pub fn next_event(&self, s: &ExecState, pid: Pid) -> Option<Event> {
        if !self.is_enabled(s, pid) {
            return None;
        }
        Some(match self.actor(pid) {
            Actor::Thread(t) => {
                let (op, _, _) = self.next_op(s, t)?;
                let act = match op {
                    SharedOp::Load { .. } => Action::Read,
                    SharedOp::Store { .. } => Action::Write,
                    SharedOp::Fadd { .. } => Action::Rmw,
                    SharedOp::Cas { obj, expected, .. } => {
                        let exp = eval(expected, &s.lcl[t.0 as usize], 0).ok()?;
                        if s.shr[obj.0 as usize] == exp {
                            Action::Rmw
                        } else {
                            Action::Read
                        }
                    }
                    SharedOp::Fence { .. } => Action::Fence,
                };
                Event {
                    actor: Actor::Thread(t),
                    act,
                    obj: op.obj(),
                    ord: op.ord(),
                    idx: s.thread_idx[t.0 as usize],
                }
            }
            Actor::Shadow(t, o) => {
                let w = *s.pending[self.queue_index(t, o)].front()?;
                Event {
                    actor: Actor::Shadow(t, o),
                    act: Action::ShadowWrite,
                    obj: Some(o),
                    ord: s.seq.steps[w].event.ord,
                    idx: s.shadow_idx[self.queue_index(t, o)],
                }
            }
            Actor::Init => return None,
        })
    }

    /// Executes one transition of `pid`; returns the indices of the steps
    /// appended (two for a successful rmw: the rmw and its shadow-write).
    pub fn step(&self, s: &mut ExecState, pid: Pid) -> Result<std::ops::Range<usize>, EngineError> {
        if !self.is_enabled(s, pid) {
            return Err(EngineError::NotEnabled(self.pid_name(pid)));
        }
        let start = s.seq.steps.len();
        match self.actor(pid) {
            Actor::Thread(t) => self.step_thread(s, pid, t)?,
            Actor::Shadow(t, o) => {
                let q = self.queue_index(t, o);
                let w = s.pending[q].pop_front().unwrap();
                self.publish(s, pid, t, o, w);
            }
            Actor::Init => unreachable!(),
        }
        Ok(start..s.seq.steps.len())
    }

    fn publish(&self, s: &mut ExecState, pid: Pid, t: ThreadId, o: ObjId, w: usize) {
        let q = self.queue_index(t, o);
        let value = s.seq.steps[w].written.unwrap();
        let idx = s.shadow_idx[q];
        s.shadow_idx[q] += 1;
        let sh = s.seq.push(Step {
            event: Event {
                actor: Actor::Shadow(t, o),
                act: Action::ShadowWrite,
                obj: Some(o),
                ord: s.seq.steps[w].event.ord,
                idx,
            },
            pid: Some(pid),
            stmt: s.seq.steps[w].stmt,
            read: None,
            written: Some(value),
            rf: None,
            shadow: None,
            shadow_of: Some(w),
            failed_cas: false,
        });
        s.seq.steps[w].shadow = Some(sh);
        s.shr[o.0 as usize] = value;
        s.last_shadow[o.0 as usize] = sh;
    }

    fn rf_source(&self, s: &ExecState, t: ThreadId, o: ObjId) -> usize {
        let last = s.last_shadow[o.0 as usize];
        match s.last_own_write[self.queue_index(t, o)] {
            Some(w) if w > last => w,
            _ => s.seq.steps[last].shadow_of.unwrap(),
        }
    }

    fn step_thread(&self, s: &mut ExecState, pid: Pid, t: ThreadId) -> Result<(), EngineError> {
        let ti = t.0 as usize;
        let (op, stmt, line) = {
            let (op, stmt, line) = self.next_op(s, t).unwrap();
            (op.clone(), stmt, line)
        };
        let idx = s.thread_idx[ti];
        s.thread_idx[ti] += 1;
        let event = |act, obj, ord| Event {
            actor: Actor::Thread(t),
            act,
            obj,
            ord,
            idx,
        };
        let mut step = Step {
            event: event(Action::Fence, None, op.ord()),
            pid: Some(pid),
            stmt: Some(stmt),
            read: None,
            written: None,
            rf: None,
            shadow: None,
            shadow_of: None,
            failed_cas: false,
        };
        match &op {
            SharedOp::Load { dst, obj, ord } => {
                let src = self.rf_source(s, t, *obj);
                let v = s.seq.steps[src].written.unwrap();
                step.event = event(Action::Read, Some(*obj), *ord);
                step.read = Some(v);
                step.rf = Some(src);
                s.lcl[ti][dst.0 as usize] = Some(v);
                s.seq.push(step);
            }
            SharedOp::Store { obj, value, ord } => {
                let v = eval(value, &s.lcl[ti], line)?;
                step.event = event(Action::Write, Some(*obj), *ord);
                step.written = Some(v);
                let w = s.seq.push(step);
                let q = self.queue_index(t, *obj);
                s.pending[q].push_back(w);
                s.last_own_write[q] = Some(w);
            }
            SharedOp::Fadd {
                dst,
                obj,
                delta,
                ord,
            } => {
                let d = eval(delta, &s.lcl[ti], line)?;
                let src = self.rf_source(s, t, *obj);
                let old = s.seq.steps[src].written.unwrap();
                let new = old
                    .checked_add(d)
                    .ok_or(EngineError::Eval { line, err: EvalError::Overflow })?;
                self.rmw(s, pid, t, step, event(Action::Rmw, Some(*obj), *ord), src, old, new);
                if let Some(d) = dst {
                    s.lcl[ti][d.0 as usize] = Some(old);
                }
            }
            SharedOp::Cas {
                dst,
                obj,
                expected,
                desired,
                ord,
            } => {
                let exp = eval(expected, &s.lcl[ti], line)?;
                let des = eval(desired, &s.lcl[ti], line)?;
                let src = self.rf_source(s, t, *obj);
                let old = s.seq.steps[src].written.unwrap();
                if old == exp {
                    self.rmw(s, pid, t, step, event(Action::Rmw, Some(*obj), *ord), src, old, des);
                } else {
                    step.event = event(Action::Read, Some(*obj), *ord);
                    step.failed_cas = true;
                    step.read = Some(old);
                    step.rf = Some(src);
                    s.seq.push(step);
                }
                if let Some(d) = dst {
                    s.lcl[ti][d.0 as usize] = Some(old);
                }
            }
            SharedOp::Fence { ord } => {
                step.event = event(Action::Fence, None, *ord);
                s.seq.push(step);
            }
        }
        s.pc[ti] += 1;
        self.run_local(s, ti)
    }

    #[allow(clippy::too_many_arguments)]
    fn rmw(
        &self,
        s: &mut ExecState,
        pid: Pid,
        t: ThreadId,
        mut step: Step,
        ev: Event,
        src: usize,
        old: i64,
        new: i64,
    ) {
        let o = ev.obj.unwrap();
        step.event = ev;
        step.read = Some(old);
        step.written = Some(new);
        step.rf = Some(src);
        let w = s.seq.push(step);
        let q = self.queue_index(t, o);
        s.last_own_write[q] = Some(w);
        self.publish(s, pid, t, o, w);
    }

    /// Replays `schedule` from the initial state.
    pub fn run_sequence(&self, schedule: &[Pid]) -> Result<ExecState, ReplayError> {
        let mut s = self
            .initial_state()
            .map_err(|kind| ReplayError { step: 0, kind })?;
        for (i, pid) in schedule.iter().enumerate() {
            self.step(&mut s, *pid)
                .map_err(|kind| ReplayError { step: i, kind })?;
        }
        Ok(s)
    }

    /// Store consistency: every object holds the value of the write
    /// published by its latest shadow-write.
    pub fn store_consistent(&self, s: &ExecState) -> bool {
        (0..self.num_objects()).all(|o| {
            let o = ObjId(o as u16);
            s.shr[o.0 as usize] == s.seq.steps[lw(&s.seq, o)].written.unwrap()
        })
    }

    /// Shared-store snapshot after each transition of `schedule`.
    pub fn trace_snapshots(&self, schedule: &[Pid]) -> Result<Vec<Snapshot>, ReplayError> {
        let mut s = self
            .initial_state()
            .map_err(|kind| ReplayError { step: 0, kind })?;
        let mut out = vec![Snapshot {
            token: None,
            events: Vec::new(),
            shared: self.shared_named(&s),
        }];
        for (i, pid) in schedule.iter().enumerate() {
            let r = self
                .step(&mut s, *pid)
                .map_err(|kind| ReplayError { step: i, kind })?;
            out.push(Snapshot {
                token: Some(self.pid_name(*pid)),
                events: r.map(|k| self.describe(&s.seq, k)).collect(),
                shared: self.shared_named(&s),
            });
        }
        Ok(out)
    }

    fn shared_named(&self, s: &ExecState) -> Vec<(String, i64)> {
        self.program
            .objects
            .iter()
            .zip(&s.shr)
            .map(|(o, v)| (o.name.clone(), *v))
            .collect()
    }

    /// Human-readable event label using program names.
    pub fn describe(&self, seq: &Sequence, i: usize) -> String {
        let st = &seq.steps[i];
        let e = &st.event;
        let who = match e.actor {
            Actor::Init => "init".to_string(),
            Actor::Thread(t) => self.program.thread_name(t).to_string(),
            Actor::Shadow(t, o) => format!(
                "sh({},{})",
                self.program.thread_name(t),
                self.program.object_name(o)
            ),
        };
        let obj = e
            .obj
            .map(|o| self.program.object_name(o).to_string())
            .unwrap_or_default();
        match e.act {
            Action::Read => format!("{who}#{}: read {obj}={} {}", e.idx, st.read.unwrap(), e.ord),
            Action::Write => format!("{who}#{}: write {obj}:={} {}", e.idx, st.written.unwrap(), e.ord),
            Action::Rmw => format!(
                "{who}#{}: rmw {obj} {}->{} {}",
                e.idx,
                st.read.unwrap(),
                st.written.unwrap(),
                e.ord
            ),
            Action::Fence => format!("{who}#{}: fence {}", e.idx, e.ord),
            Action::ShadowWrite => format!("{who}#{}: publish {obj}={}", e.idx, st.written.unwrap()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub token: Option<String>,
    pub events: Vec<String>,
    pub shared: Vec<(String, i64)>,
}

fn eval(e: &crate::ir::Expr, lcl: &[Option<i64>], line: usize) -> Result<i64, EngineError> {
    e.eval(&|l: LocalId| lcl[l.0 as usize])
        .map_err(|err| EngineError::Eval { line, err })
}
