use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MemoryOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ThreadId(pub u16);

impl ThreadId {
    /// The virtual thread that performs the initialization writes.
    pub const INIT: ThreadId = ThreadId(u16::MAX);

    pub fn is_init(self) -> bool {
        self == Self::INIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalId(pub u16);

/// Statement identity. Stable across the early-write transformation so
/// that a statement can be tracked through reordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding power used by both the parser and the printer.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }
}

/// Variables visible inside an assertion predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssertVar {
    Shared(ObjId),
    Local(ThreadId, LocalId),
}

/// Integer expression over variables of type `V` (thread locals by default).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr<V = LocalId> {
    Const(i64),
    Var(V),
    Unary(UnOp, Box<Expr<V>>),
    Binary(BinOp, Box<Expr<V>>, Box<Expr<V>>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("variable read before assignment")]
    Unassigned,
}

impl<V: Copy> Expr<V> {
    pub fn eval(&self, lookup: &impl Fn(V) -> Option<i64>) -> Result<i64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => lookup(*v).ok_or(EvalError::Unassigned)?,
            Expr::Unary(UnOp::Neg, e) => e.eval(lookup)?.checked_neg().ok_or(EvalError::Overflow)?,
            Expr::Unary(UnOp::Not, e) => (e.eval(lookup)? == 0) as i64,
            Expr::Binary(op, l, r) => {
                let a = l.eval(lookup)?;
                // short-circuit so that `p && q` never fails on q when p is false
                match op {
                    BinOp::And if a == 0 => return Ok(0),
                    BinOp::Or if a != 0 => return Ok(1),
                    _ => {}
                }
                let b = r.eval(lookup)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(EvalError::Overflow)?,
                    BinOp::Sub => a.checked_sub(b).ok_or(EvalError::Overflow)?,
                    BinOp::Mul => a.checked_mul(b).ok_or(EvalError::Overflow)?,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::And | BinOp::Or => (b != 0) as i64,
                }
            }
        })
    }

    pub fn vars(&self, out: &mut Vec<V>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Unary(_, e) => e.vars(out),
            Expr::Binary(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
        }
    }

    pub fn constants(&self, out: &mut Vec<i64>) {
        match self {
            Expr::Const(c) => out.push(*c),
            Expr::Var(_) => {}
            Expr::Unary(_, e) => e.constants(out),
            Expr::Binary(_, l, r) => {
                l.constants(out);
                r.constants(out);
            }
        }
    }
}

impl Expr<LocalId> {
    pub fn uses(&self, local: LocalId) -> bool {
        let mut v = Vec::new();
        self.vars(&mut v);
        v.contains(&local)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Load {
        dst: LocalId,
        obj: ObjId,
        ord: MemoryOrder,
    },
    Store {
        obj: ObjId,
        value: Expr,
        ord: MemoryOrder,
    },
    /// Fetch-and-add; `dst` receives the previous value.
    Fadd {
        dst: Option<LocalId>,
        obj: ObjId,
        delta: Expr,
        ord: MemoryOrder,
    },
    /// Compare-and-swap; `dst` receives the value read.
    Cas {
        dst: Option<LocalId>,
        obj: ObjId,
        expected: Expr,
        desired: Expr,
        ord: MemoryOrder,
    },
    Fence {
        ord: MemoryOrder,
    },
    Assign {
        dst: LocalId,
        value: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub id: StmtId,
    pub line: usize,
    pub kind: StmtKind,
}

impl Stmt {
    /// Shared object touched by this statement, if it is a memory access.
    pub fn object(&self) -> Option<ObjId> {
        match &self.kind {
            StmtKind::Load { obj, .. }
            | StmtKind::Store { obj, .. }
            | StmtKind::Fadd { obj, .. }
            | StmtKind::Cas { obj, .. } => Some(*obj),
            _ => None,
        }
    }

    pub fn order(&self) -> Option<MemoryOrder> {
        match &self.kind {
            StmtKind::Load { ord, .. }
            | StmtKind::Store { ord, .. }
            | StmtKind::Fadd { ord, .. }
            | StmtKind::Cas { ord, .. }
            | StmtKind::Fence { ord } => Some(*ord),
            _ => None,
        }
    }

    /// Statement issues a shared write (store or read-modify-write).
    pub fn is_write(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::Store { .. } | StmtKind::Fadd { .. } | StmtKind::Cas { .. }
        )
    }

    /// Statement performs a shared read (load or read-modify-write).
    pub fn is_read(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::Load { .. } | StmtKind::Fadd { .. } | StmtKind::Cas { .. }
        )
    }

    pub fn is_event(&self) -> bool {
        !matches!(self.kind, StmtKind::Assign { .. } | StmtKind::If { .. })
    }

    /// Local written by this statement.
    pub fn defines(&self) -> Option<LocalId> {
        match &self.kind {
            StmtKind::Load { dst, .. } | StmtKind::Assign { dst, .. } => Some(*dst),
            StmtKind::Fadd { dst, .. } | StmtKind::Cas { dst, .. } => *dst,
            _ => None,
        }
    }

    /// Locals read by this statement itself (not by nested bodies).
    pub fn uses(&self) -> Vec<LocalId> {
        let mut out = Vec::new();
        match &self.kind {
            StmtKind::Store { value, .. } | StmtKind::Assign { value, .. } => value.vars(&mut out),
            StmtKind::Fadd { delta, .. } => delta.vars(&mut out),
            StmtKind::Cas {
                expected, desired, ..
            } => {
                expected.vars(&mut out);
                desired.vars(&mut out);
            }
            StmtKind::If { cond, .. } => cond.vars(&mut out),
            StmtKind::Load { .. } | StmtKind::Fence { .. } => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Object {
    pub name: String,
    pub init: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub name: String,
    pub locals: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Thread {
    pub fn local_name(&self, l: LocalId) -> &str {
        &self.locals[l.0 as usize]
    }

    pub fn local_id(&self, name: &str) -> Option<LocalId> {
        self.locals
            .iter()
            .position(|n| n == name)
            .map(|i| LocalId(i as u16))
    }

    /// All statements in textual order, nested bodies included.
    pub fn walk(&self) -> Vec<&Stmt> {
        fn go<'a>(body: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in body {
                out.push(s);
                if let StmtKind::If {
                    then_body,
                    else_body,
                    ..
                } = &s.kind
                {
                    go(then_body, out);
                    go(else_body, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub pred: Expr<AssertVar>,
    pub line: usize,
}

/// Declared expectations used by the corpus runner (`expect <key> = N`).
pub type Expectations = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub objects: Vec<Object>,
    pub threads: Vec<Thread>,
    pub asserts: Vec<Assertion>,
    pub expectations: Expectations,
}

impl Program {
    pub fn object_name(&self, o: ObjId) -> &str {
        &self.objects[o.0 as usize].name
    }

    pub fn object_id(&self, name: &str) -> Option<ObjId> {
        self.objects
            .iter()
            .position(|o| o.name == name)
            .map(|i| ObjId(i as u16))
    }

    pub fn thread(&self, t: ThreadId) -> &Thread {
        &self.threads[t.0 as usize]
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        if t.is_init() {
            "init"
        } else {
            &self.threads[t.0 as usize].name
        }
    }

    pub fn thread_id(&self, name: &str) -> Option<ThreadId> {
        self.threads
            .iter()
            .position(|t| t.name == name)
            .map(|i| ThreadId(i as u16))
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    /// Upper bound on schedulable events along any path: every access
    /// statement plus one shadow-write per write statement.
    pub fn schedulable_event_bound(&self) -> usize {
        fn bound(body: &[Stmt]) -> usize {
            body.iter()
                .map(|s| match &s.kind {
                    StmtKind::If {
                        then_body,
                        else_body,
                        ..
                    } => bound(then_body).max(bound(else_body)),
                    _ if s.is_write() => 2,
                    _ if s.is_event() => 1,
                    _ => 0,
                })
                .sum()
        }
        self.threads.iter().map(|t| bound(&t.body)).sum()
    }

    pub fn expectation(&self, key: &str) -> Option<u64> {
        self.expectations.get(key).copied()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print::print_program(self))
    }
}
