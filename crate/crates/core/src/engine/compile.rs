use crate::ir::{Expr, LocalId, MemoryOrder, ObjId, Stmt, StmtId, StmtKind, Thread};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SharedOp {
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
    Fadd {
        dst: Option<LocalId>,
        obj: ObjId,
        delta: Expr,
        ord: MemoryOrder,
    },
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
}

impl SharedOp {
    pub fn obj(&self) -> Option<ObjId> {
        match self {
            SharedOp::Load { obj, .. }
            | SharedOp::Store { obj, .. }
            | SharedOp::Fadd { obj, .. }
            | SharedOp::Cas { obj, .. } => Some(*obj),
            SharedOp::Fence { .. } => None,
        }
    }

    pub fn ord(&self) -> MemoryOrder {
        match self {
            SharedOp::Load { ord, .. }
            | SharedOp::Store { ord, .. }
            | SharedOp::Fadd { ord, .. }
            | SharedOp::Cas { ord, .. }
            | SharedOp::Fence { ord } => *ord,
        }
    }

    pub fn is_rmw(&self) -> bool {
        matches!(self, SharedOp::Fadd { .. } | SharedOp::Cas { .. })
    }

    pub fn is_read(&self) -> bool {
        matches!(self, SharedOp::Load { .. }) || self.is_rmw()
    }

    pub fn is_write(&self) -> bool {
        matches!(self, SharedOp::Store { .. }) || self.is_rmw()
    }
}

/// Linear code for one thread; `if` compiles to a conditional jump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Op {
        op: SharedOp,
        stmt: StmtId,
        line: usize,
    },
    Assign {
        dst: LocalId,
        value: Expr,
        line: usize,
    },
    BranchFalse {
        cond: Expr,
        target: usize,
        line: usize,
    },
    Jump(usize),
}

pub fn compile(thread: &Thread) -> Vec<Instr> {
    let mut code = Vec::new();
    emit(&thread.body, &mut code);
    code
}

fn emit(body: &[Stmt], code: &mut Vec<Instr>) {
    for s in body {
        let op = |op| Instr::Op {
            op,
            stmt: s.id,
            line: s.line,
        };
        match &s.kind {
            StmtKind::Load { dst, obj, ord } => code.push(op(SharedOp::Load {
                dst: *dst,
                obj: *obj,
                ord: *ord,
            })),
            StmtKind::Store { obj, value, ord } => code.push(op(SharedOp::Store {
                obj: *obj,
                value: value.clone(),
                ord: *ord,
            })),
            StmtKind::Fadd {
                dst,
                obj,
                delta,
                ord,
            } => code.push(op(SharedOp::Fadd {
                dst: *dst,
                obj: *obj,
                delta: delta.clone(),
                ord: *ord,
            })),
            StmtKind::Cas {
                dst,
                obj,
                expected,
                desired,
                ord,
            } => code.push(op(SharedOp::Cas {
                dst: *dst,
                obj: *obj,
                expected: expected.clone(),
                desired: desired.clone(),
                ord: *ord,
            })),
            StmtKind::Fence { ord } => code.push(op(SharedOp::Fence { ord: *ord })),
            StmtKind::Assign { dst, value } => code.push(Instr::Assign {
                dst: *dst,
                value: value.clone(),
                line: s.line,
            }),
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let branch = code.len();
                code.push(Instr::Jump(0));
                emit(then_body, code);
                if else_body.is_empty() {
                    code[branch] = Instr::BranchFalse {
                        cond: cond.clone(),
                        target: code.len(),
                        line: s.line,
                    };
                } else {
                    let skip = code.len();
                    code.push(Instr::Jump(0));
                    code[branch] = Instr::BranchFalse {
                        cond: cond.clone(),
                        target: code.len(),
                        line: s.line,
                    };
                    emit(else_body, code);
                    code[skip] = Instr::Jump(code.len());
                }
            }
        }
    }
}
