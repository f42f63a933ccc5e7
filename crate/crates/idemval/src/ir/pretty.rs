//! Canonical printer for kernels. `parse_kernel(pretty_print(k))` returns a
//! kernel structurally equal to `k`.

use std::fmt::Write;

use super::ast::*;
use super::parser::int_prec;

fn bin_op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Rem => "%",
        BinOp::And => "&",
        BinOp::Or => "|",
        BinOp::Xor => "^",
        BinOp::Shl => "<<",
        BinOp::Shr => ">>",
    }
}

fn cmp_op_text(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
        CmpOp::Eq => "==",
        CmpOp::Ne => "!=",
    }
}

fn int_expr_prec(e: &IntExpr) -> u8 {
    match e {
        IntExpr::Bin(op, ..) => int_prec(*op),
        IntExpr::Neg(_) => 7,
        _ => 8,
    }
}

pub(crate) fn write_int(out: &mut String, e: &IntExpr) {
    write_int_paren(out, e, 0, false)
}

fn write_int_paren(out: &mut String, e: &IntExpr, parent_prec: u8, is_right: bool) {
    let prec = int_expr_prec(e);
    let needs_paren = prec < parent_prec || (prec == parent_prec && is_right);
    if needs_paren {
        out.push('(');
    }
    match e {
        IntExpr::Const(v) => {
            let _ = write!(out, "{v}");
        }
        IntExpr::Ident(name) => out.push_str(name),
        IntExpr::Bid => out.push_str("bid"),
        IntExpr::Tid => out.push_str("tid"),
        IntExpr::Bdim => out.push_str("bdim"),
        IntExpr::Gdim => out.push_str("gdim"),
        IntExpr::Bin(op, a, b) => {
            write_int_paren(out, a, prec, false);
            let _ = write!(out, " {} ", bin_op_text(*op));
            write_int_paren(out, b, prec + 1, true);
        }
        IntExpr::Neg(a) => {
            out.push('-');
            write_int_paren(out, a, prec + 1, false);
        }
        IntExpr::Min(a, b) | IntExpr::Max(a, b) => {
            out.push_str(if matches!(e, IntExpr::Min(..)) { "min(" } else { "max(" });
            write_int(out, a);
            out.push_str(", ");
            write_int(out, b);
            out.push(')');
        }
    }
    if needs_paren {
        out.push(')');
    }
}

fn bool_prec(e: &BoolExpr) -> u8 {
    match e {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        BoolExpr::Not(_) => 3,
        BoolExpr::Cmp(..) => 4,
    }
}

pub(crate) fn write_bool(out: &mut String, e: &BoolExpr) {
    write_bool_paren(out, e, 0, false)
}

fn write_bool_paren(out: &mut String, e: &BoolExpr, parent_prec: u8, is_right: bool) {
    let prec = bool_prec(e);
    let needs_paren = prec < parent_prec || (prec == parent_prec && is_right);
    if needs_paren {
        out.push('(');
    }
    match e {
        BoolExpr::Cmp(op, a, b) => {
            write_int(out, a);
            let _ = write!(out, " {} ", cmp_op_text(*op));
            write_int(out, b);
        }
        BoolExpr::And(a, b) => {
            write_bool_paren(out, a, prec, false);
            out.push_str(" && ");
            write_bool_paren(out, b, prec + 1, true);
        }
        BoolExpr::Or(a, b) => {
            write_bool_paren(out, a, prec, false);
            out.push_str(" || ");
            write_bool_paren(out, b, prec + 1, true);
        }
        BoolExpr::Not(a) => {
            out.push_str("!(");
            write_bool(out, a);
            out.push(')');
        }
    }
    if needs_paren {
        out.push(')');
    }
}

fn write_stmt(out: &mut String, s: &Stmt, indent: usize) {
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    match s {
        Stmt::Let { dest, value } => {
            let _ = write!(out, "let {dest} = ");
            write_int(out, value);
        }
        Stmt::Load { dest, addr, width } => {
            let _ = write!(out, "let {dest} = load [");
            write_int(out, addr);
            let _ = write!(out, "] :{}", width.bytes());
        }
        Stmt::Store { addr, value, width } => {
            out.push_str("store [");
            write_int(out, addr);
            out.push_str("] = ");
            write_int(out, value);
            let _ = write!(out, " :{}", width.bytes());
        }
        Stmt::AtomicAdd { addr, value, width } => {
            out.push_str("atomic_add [");
            write_int(out, addr);
            out.push_str("] += ");
            write_int(out, value);
            let _ = write!(out, " :{}", width.bytes());
        }
        Stmt::If { cond, then_body, else_body } => {
            out.push_str("if ");
            write_bool(out, cond);
            out.push_str(" {\n");
            for inner in then_body {
                write_stmt(out, inner, indent + 1);
            }
            out.push_str(&pad);
            out.push('}');
            if !else_body.is_empty() {
                out.push_str(" else {\n");
                for inner in else_body {
                    write_stmt(out, inner, indent + 1);
                }
                out.push_str(&pad);
                out.push('}');
            }
        }
        Stmt::ForCounted { counter, lo, hi, body } => {
            let _ = write!(out, "for {counter} in ");
            write_int(out, lo);
            out.push_str(" .. ");
            write_int(out, hi);
            out.push_str(" {\n");
            for inner in body {
                write_stmt(out, inner, indent + 1);
            }
            out.push_str(&pad);
            out.push('}');
        }
        Stmt::While { cond, body } => {
            out.push_str("while ");
            write_bool(out, cond);
            out.push_str(" {\n");
            for inner in body {
                write_stmt(out, inner, indent + 1);
            }
            out.push_str(&pad);
            out.push('}');
        }
        Stmt::CallIndirect { target } => {
            out.push_str("call_indirect ");
            write_int(out, target);
        }
    }
    out.push('\n');
}

pub fn pretty_print(k: &Kernel) -> String {
    let mut out = String::new();
    for pre in &k.preconditions {
        out.push_str("@require ");
        write_bool(&mut out, pre);
        out.push('\n');
    }
    let _ = write!(out, "kernel {}(", k.name);
    for (i, p) in k.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let kind = match p.kind {
            ParamKind::Buffer => "buf",
            ParamKind::ScalarI64 => "i64",
            ParamKind::ScalarI32 => "i32",
        };
        let _ = write!(out, "{}: {}", p.name, kind);
    }
    out.push_str(") {\n");
    for s in &k.body {
        write_stmt(&mut out, s, 1);
    }
    out.push_str("}\n");
    out
}
