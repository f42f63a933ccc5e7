//! Prefix-notation serialization of symbolic expressions.
//!
//! Artifacts store every expression as an s-expression string, e.g.
//! `(+ A (* 4 tid))` or `(<= N 32)`. Params and dimensions print under their
//! source names; analysis-introduced variables (induction, fresh, opaque)
//! print as `name#id` so two loops that both use a counter `i` stay distinct.

use std::fmt::Write as _;

use super::expr::{BNode, Node, SymBool, SymCmp, SymExpr};
use super::var::{SymVarId, VarOrigin, VarTable};

pub fn var_display_name(table: &VarTable, id: SymVarId) -> String {
    let info = table.info(id);
    match info.origin {
        VarOrigin::Param { .. } | VarOrigin::Bid | VarOrigin::Tid | VarOrigin::Bdim | VarOrigin::Gdim => {
            info.name.clone()
        }
        _ => format!("{}#{}", info.name, id.0),
    }
}

pub fn expr_to_sexpr(e: &SymExpr, table: &VarTable) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, table);
    s
}

pub fn bool_to_sexpr(b: &SymBool, table: &VarTable) -> String {
    let mut s = String::new();
    write_bool(&mut s, b, table);
    s
}

fn write_expr(out: &mut String, e: &SymExpr, table: &VarTable) {
    match e.node() {
        Node::Const(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Var(id) => out.push_str(&var_display_name(table, *id)),
        Node::Add(xs) => write_nary(out, "+", xs, table),
        Node::Mul(xs) => write_nary(out, "*", xs, table),
        Node::Min(xs) => write_nary(out, "min", xs, table),
        Node::Max(xs) => write_nary(out, "max", xs, table),
        Node::Div(a, b) => write_pair(out, "div", a, b, table),
        Node::Rem(a, b) => write_pair(out, "rem", a, b, table),
        Node::And(a, b) => write_pair(out, "band", a, b, table),
        Node::Or(a, b) => write_pair(out, "bor", a, b, table),
        Node::Xor(a, b) => write_pair(out, "bxor", a, b, table),
        Node::Shl(a, b) => write_pair(out, "shl", a, b, table),
        Node::Shr(a, b) => write_pair(out, "shr", a, b, table),
    }
}

fn write_nary(out: &mut String, op: &str, xs: &[SymExpr], table: &VarTable) {
    out.push('(');
    out.push_str(op);
    for x in xs {
        out.push(' ');
        write_expr(out, x, table);
    }
    out.push(')');
}

fn write_pair(out: &mut String, op: &str, a: &SymExpr, b: &SymExpr, table: &VarTable) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    write_expr(out, a, table);
    out.push(' ');
    write_expr(out, b, table);
    out.push(')');
}

fn write_bool(out: &mut String, b: &SymBool, table: &VarTable) {
    match b.node() {
        BNode::Const(v) => out.push_str(if *v { "true" } else { "false" }),
        BNode::Cmp(op, a, c) => {
            let sym = match op {
                SymCmp::Lt => "<",
                SymCmp::Le => "<=",
                SymCmp::Eq => "=",
                SymCmp::Ne => "!=",
            };
            write_pair(out, sym, a, c, table);
        }
        BNode::All(xs) => {
            out.push_str("(and");
            for x in xs {
                out.push(' ');
                write_bool(out, x, table);
            }
            out.push(')');
        }
        BNode::Any(xs) => {
            out.push_str("(or");
            for x in xs {
                out.push(' ');
                write_bool(out, x, table);
            }
            out.push(')');
        }
    }
}

#[derive(Clone, Copy)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Result<Vec<Tok<'_>>, String> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push(Tok::Open);
                i += 1;
            }
            b')' => {
                toks.push(Tok::Close);
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                toks.push(Tok::Atom(&src[start..i]));
            }
        }
    }
    if toks.is_empty() {
        return Err("empty expression".to_string());
    }
    Ok(toks)
}

struct SexprParser<'a, 'r> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    resolve: &'r mut dyn FnMut(&str) -> Option<SymVarId>,
}

impl<'a, 'r> SexprParser<'a, 'r> {
    fn next(&mut self) -> Result<Tok<'a>, String> {
        let t = *self.toks.get(self.pos).ok_or_else(|| "unexpected end of expression".to_string())?;
        self.pos += 1;
        Ok(t)
    }

    fn expr(&mut self) -> Result<SymExpr, String> {
        match self.next()? {
            Tok::Close => Err("unexpected `)`".to_string()),
            Tok::Atom(a) => self.atom_expr(a),
            Tok::Open => {
                let op = match self.next()? {
                    Tok::Atom(a) => a,
                    _ => return Err("expected operator after `(`".to_string()),
                };
                let mut args = Vec::new();
                loop {
                    match self.toks.get(self.pos) {
                        Some(Tok::Close) => {
                            self.pos += 1;
                            break;
                        }
                        None => return Err("missing `)`".to_string()),
                        _ => args.push(self.expr()?),
                    }
                }
                build_expr(op, args)
            }
        }
    }

    fn atom_expr(&mut self, a: &str) -> Result<SymExpr, String> {
        if let Ok(v) = a.parse::<i64>() {
            return Ok(SymExpr::constant(v));
        }
        match (self.resolve)(a) {
            Some(id) => Ok(SymExpr::var(id)),
            None => Err(format!("unknown variable `{a}`")),
        }
    }

    fn boolean(&mut self) -> Result<SymBool, String> {
        match self.next()? {
            Tok::Atom(a) => match a {
                "true" => Ok(SymBool::tt()),
                "false" => Ok(SymBool::ff()),
                other => Err(format!("expected boolean, found `{other}`")),
            },
            Tok::Close => Err("unexpected `)`".to_string()),
            Tok::Open => {
                let op = match self.next()? {
                    Tok::Atom(a) => a,
                    _ => return Err("expected operator after `(`".to_string()),
                };
                match op {
                    "<" | "<=" | "=" | "!=" => {
                        let a = self.expr()?;
                        let b = self.expr()?;
                        self.close()?;
                        let cmp = match op {
                            "<" => SymCmp::Lt,
                            "<=" => SymCmp::Le,
                            "=" => SymCmp::Eq,
                            _ => SymCmp::Ne,
                        };
                        Ok(SymBool::cmp(cmp, a, b))
                    }
                    "and" | "or" => {
                        let mut args = Vec::new();
                        loop {
                            match self.toks.get(self.pos) {
                                Some(Tok::Close) => {
                                    self.pos += 1;
                                    break;
                                }
                                None => return Err("missing `)`".to_string()),
                                _ => args.push(self.boolean()?),
                            }
                        }
                        Ok(if op == "and" { SymBool::all(args) } else { SymBool::any(args) })
                    }
                    other => Err(format!("unknown boolean operator `{other}`")),
                }
            }
        }
    }

    fn close(&mut self) -> Result<(), String> {
        match self.next()? {
            Tok::Close => Ok(()),
            _ => Err("expected `)`".to_string()),
        }
    }

    fn finish(&self) -> Result<(), String> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err("trailing tokens after expression".to_string())
        }
    }
}

fn build_expr(op: &str, args: Vec<SymExpr>) -> Result<SymExpr, String> {
    let arity2 = |args: Vec<SymExpr>| -> Result<(SymExpr, SymExpr), String> {
        if args.len() == 2 {
            let mut it = args.into_iter();
            Ok((it.next().unwrap(), it.next().unwrap()))
        } else {
            Err("operator expects exactly 2 arguments".to_string())
        }
    };
    match op {
        "+" => Ok(SymExpr::add(args)),
        "*" => Ok(SymExpr::mul(args)),
        "min" => Ok(SymExpr::min(args)),
        "max" => Ok(SymExpr::max(args)),
        "div" => arity2(args).map(|(a, b)| SymExpr::div(a, b)),
        "rem" => arity2(args).map(|(a, b)| SymExpr::rem(a, b)),
        "band" => arity2(args).map(|(a, b)| SymExpr::band(a, b)),
        "bor" => arity2(args).map(|(a, b)| SymExpr::bor(a, b)),
        "bxor" => arity2(args).map(|(a, b)| SymExpr::bxor(a, b)),
        "shl" => arity2(args).map(|(a, b)| SymExpr::shl(a, b)),
        "shr" => arity2(args).map(|(a, b)| SymExpr::shr(a, b)),
        other => Err(format!("unknown operator `{other}`")),
    }
}

pub fn parse_sexpr_expr(
    src: &str,
    resolve: &mut dyn FnMut(&str) -> Option<SymVarId>,
) -> Result<SymExpr, String> {
    let mut p = SexprParser { toks: tokenize(src)?, pos: 0, resolve };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_sexpr_bool(
    src: &str,
    resolve: &mut dyn FnMut(&str) -> Option<SymVarId>,
) -> Result<SymBool, String> {
    let mut p = SexprParser { toks: tokenize(src)?, pos: 0, resolve };
    let b = p.boolean()?;
    p.finish()?;
    Ok(b)
}
