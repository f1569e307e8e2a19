use std::fmt::Write;

use super::program::*;

fn expr_str<V: Copy>(e: &Expr<V>, name: &impl Fn(V) -> String, parent: u8) -> String {
    match e {
        Expr::Const(c) => c.to_string(),
        Expr::Var(v) => name(*v),
        Expr::Unary(UnOp::Neg, inner) => format!("-({})", expr_str(inner, name, 0)),
        Expr::Unary(UnOp::Not, inner) => format!("!({})", expr_str(inner, name, 0)),
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            // left-associative: the right operand needs parens at equal precedence
            let s = format!(
                "{} {} {}",
                expr_str(l, name, p),
                op.symbol(),
                expr_str(r, name, p + 1)
            );
            if p < parent {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn print_expr(e: &Expr, thread: &Thread) -> String {
    expr_str(e, &|l| thread.local_name(l).to_string(), 0)
}

pub fn print_assert_expr(e: &Expr<AssertVar>, p: &Program) -> String {
    expr_str(
        e,
        &|v| match v {
            AssertVar::Shared(o) => p.object_name(o).to_string(),
            AssertVar::Local(t, l) => format!("{}.{}", p.thread(t).name, p.thread(t).local_name(l)),
        },
        0,
    )
}

/// Renders one statement (without nested bodies) as DSL text.
pub fn print_stmt_head(s: &Stmt, p: &Program, thread: &Thread) -> String {
    let lhs = |d: &Option<LocalId>| match d {
        Some(l) => format!("{} = ", thread.local_name(*l)),
        None => String::new(),
    };
    match &s.kind {
        StmtKind::Load { dst, obj, ord } => format!(
            "{} = load({}, {ord})",
            thread.local_name(*dst),
            p.object_name(*obj)
        ),
        StmtKind::Store { obj, value, ord } => format!(
            "store({}, {}, {ord})",
            p.object_name(*obj),
            print_expr(value, thread)
        ),
        StmtKind::Fadd {
            dst,
            obj,
            delta,
            ord,
        } => format!(
            "{}fadd({}, {}, {ord})",
            lhs(dst),
            p.object_name(*obj),
            print_expr(delta, thread)
        ),
        StmtKind::Cas {
            dst,
            obj,
            expected,
            desired,
            ord,
        } => format!(
            "{}cas({}, {}, {}, {ord})",
            lhs(dst),
            p.object_name(*obj),
            print_expr(expected, thread),
            print_expr(desired, thread)
        ),
        StmtKind::Fence { ord } => format!("fence({ord})"),
        StmtKind::Assign { dst, value } => {
            format!("{} = {}", thread.local_name(*dst), print_expr(value, thread))
        }
        StmtKind::If { cond, .. } => format!("if ({}):", print_expr(cond, thread)),
    }
}

fn print_body(out: &mut String, body: &[Stmt], p: &Program, thread: &Thread, depth: usize) {
    let pad = "  ".repeat(depth);
    for s in body {
        let _ = writeln!(out, "{pad}{}", print_stmt_head(s, p, thread));
        if let StmtKind::If {
            then_body,
            else_body,
            ..
        } = &s.kind
        {
            print_body(out, then_body, p, thread, depth + 1);
            if !else_body.is_empty() {
                let _ = writeln!(out, "{pad}else:");
                print_body(out, else_body, p, thread, depth + 1);
            }
        }
    }
}

/// Renders a program back to DSL text that parses to the same structure.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {}", p.name);
    if !p.objects.is_empty() {
        let decls: Vec<String> = p
            .objects
            .iter()
            .map(|o| format!("{} = {}", o.name, o.init))
            .collect();
        let _ = writeln!(out, "init {}", decls.join(", "));
    }
    for t in &p.threads {
        let _ = writeln!(out, "thread {}:", t.name);
        print_body(&mut out, &t.body, p, t, 1);
    }
    for a in &p.asserts {
        let _ = writeln!(out, "assert never ({})", print_assert_expr(&a.pred, p));
    }
    for (k, v) in &p.expectations {
        let _ = writeln!(out, "expect {k} = {v}");
    }
    out
}
