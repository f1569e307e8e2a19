//! Parser for the litmus DSL.
//!
//! The format is line oriented: one statement per line, `#` starts a
//! comment, and indentation delimits the bodies of `thread`, `if` and
//! `else` blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::program::*;
use super::MemoryOrder;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("loop construct `{0}` is not supported (programs must be acyclic)")]
    Loop(String),
    #[error("local `{0}` used before assignment")]
    UnassignedLocal(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("unknown thread `{0}`")]
    UnknownThread(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

/// All diagnostics produced for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}

const LOOP_KEYWORDS: &[&str] = &["while", "for", "loop", "do", "goto"];

#[derive(Debug, Clone)]
struct Line<'a> {
    no: usize,
    indent: usize,
    text: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    Colon,
    Assign,
}

const OPS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "!",
];

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i].parse::<i64>().map_err(|_| ParseError {
                line,
                col,
                kind: ParseErrorKind::Syntax("integer literal out of range".into()),
            })?;
            out.push((Tok::Int(v), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let d = bytes[i] as char;
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(text[start..i].to_string()), col));
            continue;
        }
        match c {
            '(' => out.push((Tok::LParen, col)),
            ')' => out.push((Tok::RParen, col)),
            ',' => out.push((Tok::Comma, col)),
            ':' => out.push((Tok::Colon, col)),
            _ => {
                if let Some(op) = OPS.iter().find(|op| text[i..].starts_with(**op)) {
                    out.push((Tok::Op(op), col));
                    i += op.len();
                    continue;
                }
                if c == '=' {
                    out.push((Tok::Assign, col));
                } else {
                    return Err(ParseError {
                        line,
                        col,
                        kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                    });
                }
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Cursor<'t> {
    toks: &'t [(Tok, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'t> Cursor<'t> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end_col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col(),
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        let col = self.col();
        match self.next() {
            Some(Tok::Ident(s)) => Ok((s, col)),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.done() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }
}

fn binop(op: &str) -> Option<BinOp> {
    Some(match op {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "&&" => BinOp::And,
        "||" => BinOp::Or,
        _ => return None,
    })
}

/// Precedence-climbing expression parser; `var` resolves identifiers.
fn parse_expr<V, F>(cur: &mut Cursor<'_>, var: &mut F, min_prec: u8) -> Result<Expr<V>, ParseError>
where
    F: FnMut(&str, usize) -> Result<V, ParseError>,
{
    let mut lhs = parse_atom(cur, var)?;
    while let Some(op) = cur.peek().and_then(|t| match t {
        Tok::Op(o) => binop(o),
        _ => None,
    }) {
        let prec = op.precedence();
        if prec < min_prec {
            break;
        }
        cur.next();
        let rhs = parse_expr(cur, var, prec + 1)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_atom<V, F>(cur: &mut Cursor<'_>, var: &mut F) -> Result<Expr<V>, ParseError>
where
    F: FnMut(&str, usize) -> Result<V, ParseError>,
{
    let col = cur.col();
    match cur.next() {
        Some(Tok::Int(v)) => Ok(Expr::Const(v)),
        Some(Tok::Ident(name)) => Ok(Expr::Var(var(&name, col)?)),
        Some(Tok::LParen) => {
            let e = parse_expr(cur, var, 0)?;
            cur.expect(&Tok::RParen, "`)`")?;
            Ok(e)
        }
        Some(Tok::Op("-")) => {
            // fold negative literals so that `-1` prints and re-parses identically
            if let Some(Tok::Int(v)) = cur.peek().cloned() {
                cur.next();
                return Ok(Expr::Const(-v));
            }
            Ok(Expr::Unary(UnOp::Neg, Box::new(parse_atom(cur, var)?)))
        }
        Some(Tok::Op("!")) => Ok(Expr::Unary(UnOp::Not, Box::new(parse_atom(cur, var)?))),
        _ => {
            cur.pos -= 1;
            Err(cur.err("expected expression"))
        }
    }
}

struct ThreadCtx<'a> {
    objects: &'a BTreeMap<String, ObjId>,
    locals: Vec<String>,
    next_id: &'a mut u32,
    errors: &'a mut Vec<ParseError>,
}

impl ThreadCtx<'_> {
    fn local(&mut self, name: &str) -> LocalId {
        match self.locals.iter().position(|l| l == name) {
            Some(i) => LocalId(i as u16),
            None => {
                self.locals.push(name.to_string());
                LocalId((self.locals.len() - 1) as u16)
            }
        }
    }

    fn object(&self, name: &str, line: usize, col: usize) -> Result<ObjId, ParseError> {
        self.objects.get(name).copied().ok_or(ParseError {
            line,
            col,
            kind: ParseErrorKind::UndeclaredObject(name.to_string()),
        })
    }

    fn fresh_id(&mut self) -> StmtId {
        let id = StmtId(*self.next_id);
        *self.next_id += 1;
        id
    }
}

fn parse_order(cur: &mut Cursor<'_>) -> Result<MemoryOrder, ParseError> {
    let (name, col) = cur.ident("memory order")?;
    name.parse::<MemoryOrder>().map_err(|msg| ParseError {
        line: cur.line,
        col,
        kind: ParseErrorKind::Syntax(msg),
    })
}

fn local_expr(ctx: &mut ThreadCtx<'_>, cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    let line = cur.line;
    let mut resolve = |name: &str, col: usize| {
        if ctx.objects.contains_key(name) {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::Syntax(format!(
                    "shared object `{name}` cannot appear in an expression; bind it with load first"
                )),
            });
        }
        if !is_plain_ident(name) {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::Syntax(format!("invalid local name `{name}`")),
            });
        }
        Ok(ctx.local(name))
    };
    parse_expr(cur, &mut resolve, 0)
}

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "load" | "store" | "fadd" | "cas" | "fence" | "if" | "else" | "thread" | "init"
            | "assert" | "expect" | "program"
    )
}

/// Parses a shared-memory call after its name: `(args...)`.
fn parse_call(
    ctx: &mut ThreadCtx<'_>,
    cur: &mut Cursor<'_>,
    func: &str,
    dst: Option<LocalId>,
) -> Result<StmtKind, ParseError> {
    cur.expect(&Tok::LParen, "`(`")?;
    let line = cur.line;
    let kind = match func {
        "fence" => StmtKind::Fence {
            ord: parse_order(cur)?,
        },
        _ => {
            let (oname, ocol) = cur.ident("object name")?;
            let obj = ctx.object(&oname, line, ocol)?;
            cur.expect(&Tok::Comma, "`,`")?;
            match func {
                "load" => StmtKind::Load {
                    dst: dst.ok_or_else(|| cur.err("load result must be assigned to a local"))?,
                    obj,
                    ord: parse_order(cur)?,
                },
                "store" => {
                    let value = local_expr(ctx, cur)?;
                    cur.expect(&Tok::Comma, "`,`")?;
                    StmtKind::Store {
                        obj,
                        value,
                        ord: parse_order(cur)?,
                    }
                }
                "fadd" => {
                    let delta = local_expr(ctx, cur)?;
                    cur.expect(&Tok::Comma, "`,`")?;
                    StmtKind::Fadd {
                        dst,
                        obj,
                        delta,
                        ord: parse_order(cur)?,
                    }
                }
                "cas" => {
                    let expected = local_expr(ctx, cur)?;
                    cur.expect(&Tok::Comma, "`,`")?;
                    let desired = local_expr(ctx, cur)?;
                    cur.expect(&Tok::Comma, "`,`")?;
                    StmtKind::Cas {
                        dst,
                        obj,
                        expected,
                        desired,
                        ord: parse_order(cur)?,
                    }
                }
                _ => unreachable!(),
            }
        }
    };
    cur.expect(&Tok::RParen, "`)`")?;
    if func == "store" && dst.is_some() {
        return Err(cur.err("store has no result"));
    }
    if func == "fence" && dst.is_some() {
        return Err(cur.err("fence has no result"));
    }
    Ok(kind)
}

fn parse_simple_stmt(
    ctx: &mut ThreadCtx<'_>,
    line: &Line<'_>,
    toks: &[(Tok, usize)],
) -> Result<StmtKind, ParseError> {
    let mut cur = Cursor {
        toks,
        pos: 0,
        line: line.no,
        end_col: line.indent + line.text.len() + 1,
    };
    let (first, col) = cur.ident("statement")?;
    let kind = if cur.peek() == Some(&Tok::Assign) {
        if is_keyword(&first) || !is_plain_ident(&first) {
            return Err(ParseError {
                line: line.no,
                col,
                kind: ParseErrorKind::Syntax(format!("cannot assign to `{first}`")),
            });
        }
        if ctx.objects.contains_key(&first) {
            return Err(ParseError {
                line: line.no,
                col,
                kind: ParseErrorKind::Syntax(format!(
                    "cannot assign to shared object `{first}`; use store"
                )),
            });
        }
        cur.next();
        let dst = ctx.local(&first);
        match (cur.peek().cloned(), cur.toks.get(cur.pos + 1).map(|t| &t.0)) {
            (Some(Tok::Ident(f)), Some(Tok::LParen))
                if matches!(f.as_str(), "load" | "fadd" | "cas" | "store" | "fence") =>
            {
                cur.next();
                parse_call(ctx, &mut cur, &f, Some(dst))?
            }
            _ => StmtKind::Assign {
                dst,
                value: local_expr(ctx, &mut cur)?,
            },
        }
    } else if matches!(first.as_str(), "store" | "fadd" | "cas" | "fence") {
        parse_call(ctx, &mut cur, &first, None)?
    } else if first == "load" {
        return Err(ParseError {
            line: line.no,
            col,
            kind: ParseErrorKind::Syntax("load result must be assigned to a local".into()),
        });
    } else {
        return Err(ParseError {
            line: line.no,
            col,
            kind: ParseErrorKind::Syntax(format!("unknown statement `{first}`")),
        });
    };
    cur.finish()?;
    Ok(kind)
}

/// Strips an `if`/`else` header down to the tokens between the keyword and
/// the trailing colon.
fn header_tokens<'t>(
    toks: &'t [(Tok, usize)],
    line: &Line<'_>,
) -> Result<&'t [(Tok, usize)], ParseError> {
    match toks.last() {
        Some((Tok::Colon, _)) => Ok(&toks[1..toks.len() - 1]),
        _ => Err(ParseError {
            line: line.no,
            col: line.indent + line.text.len() + 1,
            kind: ParseErrorKind::Syntax("expected `:` at end of block header".into()),
        }),
    }
}

fn parse_block(
    ctx: &mut ThreadCtx<'_>,
    lines: &[Line<'_>],
    pos: &mut usize,
    indent: usize,
) -> Vec<Stmt> {
    let mut body = Vec::new();
    while *pos < lines.len() && lines[*pos].indent >= indent {
        let line = lines[*pos].clone();
        *pos += 1;
        if line.indent > indent {
            ctx.errors.push(ParseError {
                line: line.no,
                col: line.indent + 1,
                kind: ParseErrorKind::Syntax("unexpected indentation".into()),
            });
            continue;
        }
        let toks = match tokenize(line.text, line.no, line.indent + 1) {
            Ok(t) => t,
            Err(e) => {
                ctx.errors.push(e);
                skip_nested(lines, pos, indent);
                continue;
            }
        };
        let head = match toks.first() {
            Some((Tok::Ident(s), _)) => s.clone(),
            _ => String::new(),
        };
        if LOOP_KEYWORDS.contains(&head.as_str()) {
            ctx.errors.push(ParseError {
                line: line.no,
                col: line.indent + 1,
                kind: ParseErrorKind::Loop(head),
            });
            skip_nested(lines, pos, indent);
            continue;
        }
        if head == "else" {
            ctx.errors.push(ParseError {
                line: line.no,
                col: line.indent + 1,
                kind: ParseErrorKind::Syntax("`else` without matching `if`".into()),
            });
            skip_nested(lines, pos, indent);
            continue;
        }
        if head == "if" {
            let cond = header_tokens(&toks, &line).and_then(|inner| {
                let mut cur = Cursor {
                    toks: inner,
                    pos: 0,
                    line: line.no,
                    end_col: line.indent + line.text.len(),
                };
                let e = local_expr(ctx, &mut cur)?;
                cur.finish()?;
                Ok(e)
            });
            let id = ctx.fresh_id();
            let then_body = nested(ctx, lines, pos, indent, &line);
            let mut else_body = Vec::new();
            if *pos < lines.len() && lines[*pos].indent == indent {
                let next = lines[*pos].clone();
                let is_else = next.text.strip_prefix("else").is_some_and(|r| {
                    r.trim_start().starts_with(':')
                });
                if is_else {
                    *pos += 1;
                    let compact: String = next.text.chars().filter(|c| !c.is_whitespace()).collect();
                    if compact != "else:" {
                        ctx.errors.push(ParseError {
                            line: next.no,
                            col: next.indent + 1,
                            kind: ParseErrorKind::Syntax("expected `else:`".into()),
                        });
                    }
                    else_body = nested(ctx, lines, pos, indent, &next);
                }
            }
            match cond {
                Ok(cond) => body.push(Stmt {
                    id,
                    line: line.no,
                    kind: StmtKind::If {
                        cond,
                        then_body,
                        else_body,
                    },
                }),
                Err(e) => ctx.errors.push(e),
            }
            continue;
        }
        let id = ctx.fresh_id();
        match parse_simple_stmt(ctx, &line, &toks) {
            Ok(kind) => body.push(Stmt {
                id,
                line: line.no,
                kind,
            }),
            Err(e) => ctx.errors.push(e),
        }
        if *pos < lines.len() && lines[*pos].indent > indent {
            ctx.errors.push(ParseError {
                line: lines[*pos].no,
                col: lines[*pos].indent + 1,
                kind: ParseErrorKind::Syntax("unexpected indentation".into()),
            });
            skip_nested(lines, pos, indent);
        }
    }
    body
}

fn nested(
    ctx: &mut ThreadCtx<'_>,
    lines: &[Line<'_>],
    pos: &mut usize,
    indent: usize,
    header: &Line<'_>,
) -> Vec<Stmt> {
    if *pos < lines.len() && lines[*pos].indent > indent {
        let inner = lines[*pos].indent;
        parse_block(ctx, lines, pos, inner)
    } else {
        ctx.errors.push(ParseError {
            line: header.no,
            col: header.indent + header.text.len() + 1,
            kind: ParseErrorKind::Syntax("expected an indented block".into()),
        });
        Vec::new()
    }
}

fn skip_nested(lines: &[Line<'_>], pos: &mut usize, indent: usize) {
    while *pos < lines.len() && lines[*pos].indent > indent {
        *pos += 1;
    }
}

/// Definite-assignment check: every local is written on all paths before
/// it is read.
fn check_assigned(thread: &Thread, errors: &mut Vec<ParseError>) {
    fn go(
        body: &[Stmt],
        assigned: &mut BTreeSet<LocalId>,
        thread: &Thread,
        errors: &mut Vec<ParseError>,
    ) {
        for s in body {
            for u in s.uses() {
                if !assigned.contains(&u) {
                    errors.push(ParseError {
                        line: s.line,
                        col: 1,
                        kind: ParseErrorKind::UnassignedLocal(thread.local_name(u).to_string()),
                    });
                    // report each local once
                    assigned.insert(u);
                }
            }
            if let StmtKind::If {
                then_body,
                else_body,
                ..
            } = &s.kind
            {
                let mut a = assigned.clone();
                let mut b = assigned.clone();
                go(then_body, &mut a, thread, errors);
                go(else_body, &mut b, thread, errors);
                *assigned = a.intersection(&b).copied().collect();
            }
            if let Some(d) = s.defines() {
                assigned.insert(d);
            }
        }
    }
    go(&thread.body, &mut BTreeSet::new(), thread, errors);
}

fn strip_comment(s: &str) -> &str {
    match s.find('#') {
        Some(i) => &s[..i],
        None => s,
    }
}

/// Parses and validates a litmus program.
pub fn parse_program(text: &str) -> Result<Program, ParseErrors> {
    let mut errors = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let expanded = raw.replace('\t', "    ");
        let body = strip_comment(&expanded).trim_end();
        let trimmed = body.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - trimmed.len();
        lines.push((i + 1, indent, trimmed.to_string()));
    }
    let lines: Vec<Line<'_>> = lines
        .iter()
        .map(|(no, indent, text)| Line {
            no: *no,
            indent: *indent,
            text: text.as_str(),
        })
        .collect();

    let mut name = String::new();
    let mut objects: Vec<Object> = Vec::new();
    let mut obj_ids: BTreeMap<String, ObjId> = BTreeMap::new();
    let mut expectations = Expectations::new();

    // first pass: program header, declarations and expectations
    for line in lines.iter().filter(|l| l.indent == 0) {
        let word = line.text.split_whitespace().next().unwrap_or("");
        match word {
            "program" => {
                let rest = line.text["program".len()..].trim();
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    errors.push(ParseError {
                        line: line.no,
                        col: 9,
                        kind: ParseErrorKind::Syntax("expected a single program name".into()),
                    });
                } else if !name.is_empty() {
                    errors.push(ParseError {
                        line: line.no,
                        col: 1,
                        kind: ParseErrorKind::Duplicate("program".into()),
                    });
                } else {
                    name = rest.to_string();
                }
            }
            "init" => {
                let rest = &line.text["init".len()..];
                if rest.trim().is_empty() {
                    continue;
                }
                for decl in rest.split(',') {
                    let offset = decl.as_ptr() as usize - line.text.as_ptr() as usize;
                    let col = offset + 1 + (decl.len() - decl.trim_start().len());
                    let mut parts = decl.splitn(2, '=');
                    let oname = parts.next().unwrap_or("").trim();
                    let init = match parts.next().map(str::trim) {
                        None => Ok(0),
                        Some(v) => v.parse::<i64>().map_err(|_| format!("invalid initial value `{v}`")),
                    };
                    if !is_plain_ident(oname) || is_keyword(oname) {
                        errors.push(ParseError {
                            line: line.no,
                            col,
                            kind: ParseErrorKind::Syntax(format!("invalid object name `{oname}`")),
                        });
                        continue;
                    }
                    match init {
                        Err(msg) => errors.push(ParseError {
                            line: line.no,
                            col,
                            kind: ParseErrorKind::Syntax(msg),
                        }),
                        Ok(init) => {
                            if obj_ids.contains_key(oname) {
                                errors.push(ParseError {
                                    line: line.no,
                                    col,
                                    kind: ParseErrorKind::Duplicate(oname.to_string()),
                                });
                            } else {
                                obj_ids.insert(oname.to_string(), ObjId(objects.len() as u16));
                                objects.push(Object {
                                    name: oname.to_string(),
                                    init,
                                });
                            }
                        }
                    }
                }
            }
            "expect" => {
                let rest = line.text["expect".len()..].trim();
                let mut parts = rest.splitn(2, '=');
                let key = parts.next().unwrap_or("").trim();
                let val = parts.next().map(str::trim).and_then(|v| v.parse::<u64>().ok());
                match val {
                    Some(v) if is_plain_ident(key) => {
                        expectations.insert(key.to_string(), v);
                    }
                    _ => errors.push(ParseError {
                        line: line.no,
                        col: 1,
                        kind: ParseErrorKind::Syntax("expected `expect <key> = <count>`".into()),
                    }),
                }
            }
            _ => {}
        }
    }

    // second pass: threads and assertions
    let mut threads: Vec<Thread> = Vec::new();
    let mut next_id = 0u32;
    let mut pending_asserts: Vec<&Line<'_>> = Vec::new();
    let mut pos = 0;
    while pos < lines.len() {
        let line = &lines[pos];
        pos += 1;
        if line.indent > 0 {
            errors.push(ParseError {
                line: line.no,
                col: line.indent + 1,
                kind: ParseErrorKind::Syntax("unexpected indentation".into()),
            });
            continue;
        }
        let word = line.text.split_whitespace().next().unwrap_or("");
        match word {
            "program" | "init" | "expect" => {}
            "assert" => pending_asserts.push(line),
            "thread" => {
                let header = line.text["thread".len()..].trim();
                let tname = header.strip_suffix(':').map(str::trim);
                let tname = match tname {
                    Some(n) if is_plain_ident(n) => n.to_string(),
                    _ => {
                        errors.push(ParseError {
                            line: line.no,
                            col: 8,
                            kind: ParseErrorKind::Syntax("expected `thread NAME:`".into()),
                        });
                        skip_nested(&lines, &mut pos, 0);
                        continue;
                    }
                };
                if threads.iter().any(|t| t.name == tname) {
                    errors.push(ParseError {
                        line: line.no,
                        col: 8,
                        kind: ParseErrorKind::Duplicate(tname.clone()),
                    });
                }
                let mut ctx = ThreadCtx {
                    objects: &obj_ids,
                    locals: Vec::new(),
                    next_id: &mut next_id,
                    errors: &mut errors,
                };
                let body = if pos < lines.len() && lines[pos].indent > 0 {
                    let indent = lines[pos].indent;
                    parse_block(&mut ctx, &lines, &mut pos, indent)
                } else {
                    Vec::new()
                };
                let locals = ctx.locals;
                let thread = Thread {
                    name: tname,
                    locals,
                    body,
                };
                check_assigned(&thread, &mut errors);
                threads.push(thread);
            }
            w if LOOP_KEYWORDS.contains(&w) => {
                errors.push(ParseError {
                    line: line.no,
                    col: 1,
                    kind: ParseErrorKind::Loop(w.to_string()),
                });
                skip_nested(&lines, &mut pos, 0);
            }
            _ => {
                errors.push(ParseError {
                    line: line.no,
                    col: 1,
                    kind: ParseErrorKind::Syntax(format!("unknown declaration `{word}`")),
                });
                skip_nested(&lines, &mut pos, 0);
            }
        }
    }

    let mut asserts = Vec::new();
    for line in pending_asserts {
        match parse_assert(line, &obj_ids, &threads) {
            Ok(a) => asserts.push(a),
            Err(e) => errors.push(e),
        }
    }

    if name.is_empty() && errors.is_empty() {
        name = "unnamed".to_string();
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| (e.line, e.col));
        return Err(ParseErrors(errors));
    }
    Ok(Program {
        name,
        objects,
        threads,
        asserts,
        expectations,
    })
}

fn parse_assert(
    line: &Line<'_>,
    objects: &BTreeMap<String, ObjId>,
    threads: &[Thread],
) -> Result<Assertion, ParseError> {
    let toks = tokenize(line.text, line.no, line.indent + 1)?;
    let mut cur = Cursor {
        toks: &toks,
        pos: 0,
        line: line.no,
        end_col: line.text.len() + 1,
    };
    cur.ident("assert")?;
    match cur.ident("`never`")? {
        (w, _) if w == "never" => {}
        (_, col) => {
            return Err(ParseError {
                line: line.no,
                col,
                kind: ParseErrorKind::Syntax("expected `assert never (...)`".into()),
            })
        }
    }
    let no = line.no;
    let mut resolve = |name: &str, col: usize| -> Result<AssertVar, ParseError> {
        if let Some((t, l)) = name.split_once('.') {
            let tid = threads
                .iter()
                .position(|th| th.name == t)
                .ok_or_else(|| ParseError {
                    line: no,
                    col,
                    kind: ParseErrorKind::UnknownThread(t.to_string()),
                })?;
            let lid = threads[tid].local_id(l).ok_or_else(|| ParseError {
                line: no,
                col,
                kind: ParseErrorKind::UnassignedLocal(name.to_string()),
            })?;
            Ok(AssertVar::Local(ThreadId(tid as u16), lid))
        } else {
            objects
                .get(name)
                .map(|o| AssertVar::Shared(*o))
                .ok_or_else(|| ParseError {
                    line: no,
                    col,
                    kind: ParseErrorKind::UndeclaredObject(name.to_string()),
                })
        }
    };
    let pred = parse_expr(&mut cur, &mut resolve, 0)?;
    cur.finish()?;
    Ok(Assertion {
        pred,
        line: line.no,
    })
}
