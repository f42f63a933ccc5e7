//! Hand-rolled lexer and recursive-descent parser for the `.gk` format.
//!
//! Every input either parses or produces exactly one located error; the
//! parser never panics. Identifier scoping is checked during the parse so
//! undefined-identifier errors carry exact source positions.

use super::ast::*;
use super::error::{IrError, Loc};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    KwKernel,
    KwLet,
    KwLoad,
    KwStore,
    KwAtomicAdd,
    KwIf,
    KwElse,
    KwFor,
    KwIn,
    KwWhile,
    KwCallIndirect,
    KwMin,
    KwMax,
    KwBuf,
    KwI64,
    KwI32,
    KwRequire,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    PlusAssign,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Amp,
    Pipe,
    Caret,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwKernel => "kernel",
            Tok::KwLet => "let",
            Tok::KwLoad => "load",
            Tok::KwStore => "store",
            Tok::KwAtomicAdd => "atomic_add",
            Tok::KwIf => "if",
            Tok::KwElse => "else",
            Tok::KwFor => "for",
            Tok::KwIn => "in",
            Tok::KwWhile => "while",
            Tok::KwCallIndirect => "call_indirect",
            Tok::KwMin => "min",
            Tok::KwMax => "max",
            Tok::KwBuf => "buf",
            Tok::KwI64 => "i64",
            Tok::KwI32 => "i32",
            Tok::KwRequire => "@require",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::DotDot => "..",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Caret => "^",
            Tok::Shl => "<<",
            Tok::Shr => ">>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => unreachable!(),
        }
    }
}

pub const RESERVED_NAMES: [&str; 4] = ["bid", "tid", "bdim", "gdim"];

fn lex(src: &str) -> Result<Vec<(Tok, Loc)>, IrError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let bytes = src.as_bytes();
    let mut i = 0;
    macro_rules! push {
        ($t:expr, $loc:expr, $len:expr) => {{
            toks.push(($t, $loc));
            i += $len;
            col += $len as u32;
        }};
    }
    while i < bytes.len() {
        let loc = Loc { line, col };
        let b = bytes[i];
        match b {
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => push!(Tok::LParen, loc, 1),
            b')' => push!(Tok::RParen, loc, 1),
            b'{' => push!(Tok::LBrace, loc, 1),
            b'}' => push!(Tok::RBrace, loc, 1),
            b'[' => push!(Tok::LBracket, loc, 1),
            b']' => push!(Tok::RBracket, loc, 1),
            b',' => push!(Tok::Comma, loc, 1),
            b':' => push!(Tok::Colon, loc, 1),
            b'.' if bytes.get(i + 1) == Some(&b'.') => push!(Tok::DotDot, loc, 2),
            b'+' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::PlusAssign, loc, 2),
            b'+' => push!(Tok::Plus, loc, 1),
            b'-' => push!(Tok::Minus, loc, 1),
            b'*' => push!(Tok::Star, loc, 1),
            b'/' => push!(Tok::Slash, loc, 1),
            b'%' => push!(Tok::Percent, loc, 1),
            b'^' => push!(Tok::Caret, loc, 1),
            b'&' if bytes.get(i + 1) == Some(&b'&') => push!(Tok::AndAnd, loc, 2),
            b'&' => push!(Tok::Amp, loc, 1),
            b'|' if bytes.get(i + 1) == Some(&b'|') => push!(Tok::OrOr, loc, 2),
            b'|' => push!(Tok::Pipe, loc, 1),
            b'<' if bytes.get(i + 1) == Some(&b'<') => push!(Tok::Shl, loc, 2),
            b'<' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Le, loc, 2),
            b'<' => push!(Tok::Lt, loc, 1),
            b'>' if bytes.get(i + 1) == Some(&b'>') => push!(Tok::Shr, loc, 2),
            b'>' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ge, loc, 2),
            b'>' => push!(Tok::Gt, loc, 1),
            b'=' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::EqEq, loc, 2),
            b'=' => push!(Tok::Assign, loc, 1),
            b'!' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ne, loc, 2),
            b'!' => push!(Tok::Bang, loc, 1),
            b'@' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &src[start..j];
                if word == "require" {
                    let len = j - i;
                    push!(Tok::KwRequire, loc, len);
                } else {
                    return Err(IrError::syntax(loc, format!("unknown annotation `@{word}`")));
                }
            }
            b'0'..=b'9' => {
                let mut j = i;
                let mut value: i128 = 0;
                if bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x') | Some(b'X')) {
                    j = i + 2;
                    let digits_start = j;
                    while j < bytes.len() && bytes[j].is_ascii_hexdigit() {
                        value = value * 16 + (src[j..j + 1].chars().next().unwrap().to_digit(16).unwrap() as i128);
                        if value > i64::MAX as i128 {
                            return Err(IrError::syntax(loc, "integer literal out of range"));
                        }
                        j += 1;
                    }
                    if j == digits_start {
                        return Err(IrError::syntax(loc, "expected hex digits after `0x`"));
                    }
                } else {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        value = value * 10 + (bytes[j] - b'0') as i128;
                        if value > i64::MAX as i128 {
                            return Err(IrError::syntax(loc, "integer literal out of range"));
                        }
                        j += 1;
                    }
                }
                let len = j - i;
                push!(Tok::Int(value as i64), loc, len);
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &src[i..j];
                let tok = match word {
                    "kernel" => Tok::KwKernel,
                    "let" => Tok::KwLet,
                    "load" => Tok::KwLoad,
                    "store" => Tok::KwStore,
                    "atomic_add" => Tok::KwAtomicAdd,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "for" => Tok::KwFor,
                    "in" => Tok::KwIn,
                    "while" => Tok::KwWhile,
                    "call_indirect" => Tok::KwCallIndirect,
                    "min" => Tok::KwMin,
                    "max" => Tok::KwMax,
                    "buf" => Tok::KwBuf,
                    "i64" => Tok::KwI64,
                    "i32" => Tok::KwI32,
                    _ => Tok::Ident(word.to_string()),
                };
                let len = j - i;
                push!(tok, loc, len);
            }
            _ => {
                return Err(IrError::syntax(loc, format!("unexpected character `{}`", b as char)));
            }
        }
    }
    toks.push((Tok::Eof, Loc { line, col }));
    Ok(toks)
}

/// Integer-operator precedence, loosest first. Shared with the printer.
pub(crate) fn int_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::Xor => 2,
        BinOp::And => 3,
        BinOp::Shl | BinOp::Shr => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}


struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    /// Scope stack: params in the outermost frame, one frame per block.
    /// Loop counters are flagged immutable.
    scopes: Vec<Vec<(String, bool)>>,
    /// Identifier uses inside `@require` lines, resolved after the header.
    require_idents: Vec<(String, Loc)>,
    in_require: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), IrError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(IrError::syntax(
                self.loc(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Loc), IrError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok((name, loc))
            }
            other => Err(IrError::syntax(loc, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn visible(&self, name: &str) -> Option<bool> {
        for scope in self.scopes.iter().rev() {
            if let Some((_, imm)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Some(*imm);
            }
        }
        None
    }

    fn define(&mut self, name: &str, immutable: bool) {
        self.scopes.last_mut().expect("scope stack").push((name.to_string(), immutable));
    }

    fn check_def_name(&self, name: &str, loc: Loc) -> Result<(), IrError> {
        if RESERVED_NAMES.contains(&name) {
            return Err(IrError::syntax(loc, format!("`{name}` is a reserved builtin name")));
        }
        Ok(())
    }

    fn int_primary(&mut self) -> Result<IntExpr, IrError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(IntExpr::Const(v))
            }
            Tok::Minus => {
                self.bump();
                let inner = self.int_primary()?;
                Ok(match inner {
                    IntExpr::Const(c) => IntExpr::Const(c.wrapping_neg()),
                    other => IntExpr::Neg(Box::new(other)),
                })
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "bid" => Ok(IntExpr::Bid),
                    "tid" => Ok(IntExpr::Tid),
                    "bdim" => Ok(IntExpr::Bdim),
                    "gdim" => Ok(IntExpr::Gdim),
                    _ => {
                        if self.in_require {
                            self.require_idents.push((name.clone(), loc));
                        } else if self.visible(&name).is_none() {
                            return Err(IrError::UndefinedIdentifier { name, loc });
                        }
                        Ok(IntExpr::Ident(name))
                    }
                }
            }
            Tok::KwMin | Tok::KwMax => {
                let is_min = matches!(self.peek(), Tok::KwMin);
                self.bump();
                self.expect(Tok::LParen)?;
                let a = self.int_expr()?;
                self.expect(Tok::Comma)?;
                let b = self.int_expr()?;
                self.expect(Tok::RParen)?;
                Ok(if is_min {
                    IntExpr::Min(Box::new(a), Box::new(b))
                } else {
                    IntExpr::Max(Box::new(a), Box::new(b))
                })
            }
            Tok::LParen => {
                self.bump();
                let e = self.int_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(IrError::syntax(loc, format!("expected expression, found {}", other.describe()))),
        }
    }

    fn int_expr_prec(&mut self, min_prec: u8) -> Result<IntExpr, IrError> {
        let mut lhs = self.int_primary()?;
        loop {
            let op = match self.peek() {
                Tok::Pipe => BinOp::Or,
                Tok::Caret => BinOp::Xor,
                Tok::Amp => BinOp::And,
                Tok::Shl => BinOp::Shl,
                Tok::Shr => BinOp::Shr,
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => break,
            };
            let prec = int_prec(op);
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.int_expr_prec(prec + 1)?;
            lhs = IntExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn int_expr(&mut self) -> Result<IntExpr, IrError> {
        self.int_expr_prec(1)
    }

    fn bool_atom(&mut self) -> Result<BoolExpr, IrError> {
        if *self.peek() == Tok::LParen {
            // Parenthesized input is tried as an integer comparison first and
            // as a nested boolean expression second; exactly one succeeds.
            let save = self.pos;
            match self.comparison() {
                Ok(e) => return Ok(e),
                Err(first_err) => {
                    self.pos = save;
                    self.bump();
                    match self.bool_expr() {
                        Ok(inner) => {
                            self.expect(Tok::RParen)?;
                            return Ok(inner);
                        }
                        Err(_) => {
                            self.pos = save;
                            return Err(first_err);
                        }
                    }
                }
            }
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<BoolExpr, IrError> {
        let lhs = self.int_expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            other => {
                return Err(IrError::syntax(
                    self.loc(),
                    format!("expected comparison operator, found {}", other.describe()),
                ))
            }
        };
        self.bump();
        let rhs = self.int_expr()?;
        Ok(BoolExpr::Cmp(op, lhs, rhs))
    }

    fn bool_not(&mut self) -> Result<BoolExpr, IrError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            Ok(BoolExpr::Not(Box::new(self.bool_not()?)))
        } else {
            self.bool_atom()
        }
    }

    fn bool_and(&mut self) -> Result<BoolExpr, IrError> {
        let mut lhs = self.bool_not()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.bool_not()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_expr(&mut self) -> Result<BoolExpr, IrError> {
        let mut lhs = self.bool_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.bool_and()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn width(&mut self) -> Result<Width, IrError> {
        self.expect(Tok::Colon)?;
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(v) => {
                let w = u8::try_from(v).ok().and_then(Width::new);
                match w {
                    Some(w) => {
                        self.bump();
                        Ok(w)
                    }
                    None => Err(IrError::syntax(loc, format!("access width must be 1, 2, 4, or 8, found {v}"))),
                }
            }
            other => Err(IrError::syntax(loc, format!("expected access width, found {}", other.describe()))),
        }
    }

    /// `let x = e`, `let x = load [a] :w`, or the `x = ...` sugar for both.
    fn let_or_assign(&mut self, had_let_kw: bool) -> Result<Stmt, IrError> {
        let (dest, dloc) = self.expect_ident("destination name")?;
        self.check_def_name(&dest, dloc)?;
        if let Some(true) = self.visible(&dest) {
            return Err(IrError::syntax(dloc, format!("cannot assign loop counter `{dest}`")));
        }
        if !had_let_kw && self.visible(&dest).is_none() {
            return Err(IrError::UndefinedIdentifier { name: dest, loc: dloc });
        }
        self.expect(Tok::Assign)?;
        let stmt = if *self.peek() == Tok::KwLoad {
            self.bump();
            self.expect(Tok::LBracket)?;
            let addr = self.int_expr()?;
            self.expect(Tok::RBracket)?;
            let width = self.width()?;
            Stmt::Load { dest: dest.clone(), addr, width }
        } else {
            let value = self.int_expr()?;
            Stmt::Let { dest: dest.clone(), value }
        };
        if self.visible(&dest).is_none() {
            self.define(&dest, false);
        }
        Ok(stmt)
    }

    fn stmt(&mut self) -> Result<Stmt, IrError> {
        match self.peek().clone() {
            Tok::KwLet => {
                self.bump();
                self.let_or_assign(true)
            }
            Tok::Ident(_) => self.let_or_assign(false),
            Tok::KwStore => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let addr = self.int_expr()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Assign)?;
                let value = self.int_expr()?;
                let width = self.width()?;
                Ok(Stmt::Store { addr, value, width })
            }
            Tok::KwAtomicAdd => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let addr = self.int_expr()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::PlusAssign)?;
                let value = self.int_expr()?;
                let width = self.width()?;
                Ok(Stmt::AtomicAdd { addr, value, width })
            }
            Tok::KwIf => {
                self.bump();
                let cond = self.bool_expr()?;
                let then_body = self.block()?;
                let else_body = if *self.peek() == Tok::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_body, else_body })
            }
            Tok::KwFor => {
                self.bump();
                let (counter, cloc) = self.expect_ident("loop counter")?;
                self.check_def_name(&counter, cloc)?;
                self.expect(Tok::KwIn)?;
                let lo = self.int_expr()?;
                self.expect(Tok::DotDot)?;
                let hi = self.int_expr()?;
                let body = self.block_with(|p| p.define(&counter, true))?;
                Ok(Stmt::ForCounted { counter, lo, hi, body })
            }
            Tok::KwWhile => {
                self.bump();
                let cond = self.bool_expr()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::KwCallIndirect => {
                self.bump();
                let target = self.int_expr()?;
                Ok(Stmt::CallIndirect { target })
            }
            other => Err(IrError::syntax(self.loc(), format!("expected statement, found {}", other.describe()))),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, IrError> {
        self.block_with(|_| {})
    }

    fn block_with(&mut self, prelude: impl FnOnce(&mut Parser)) -> Result<Vec<Stmt>, IrError> {
        self.expect(Tok::LBrace)?;
        self.scopes.push(Vec::new());
        prelude(self);
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                let loc = self.loc();
                self.scopes.pop();
                return Err(IrError::syntax(loc, "expected `}`, found end of input"));
            }
            match self.stmt() {
                Ok(s) => body.push(s),
                Err(e) => {
                    self.scopes.pop();
                    return Err(e);
                }
            }
        }
        self.bump();
        self.scopes.pop();
        Ok(body)
    }

    fn kernel(&mut self) -> Result<Kernel, IrError> {
        let mut preconditions = Vec::new();
        while *self.peek() == Tok::KwRequire {
            self.bump();
            self.in_require = true;
            let e = self.bool_expr();
            self.in_require = false;
            preconditions.push(e?);
        }
        self.expect(Tok::KwKernel)?;
        let (name, _) = self.expect_ident("kernel name")?;
        self.expect(Tok::LParen)?;
        let mut params: Vec<Param> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (pname, ploc) = self.expect_ident("parameter name")?;
                self.check_def_name(&pname, ploc)?;
                if params.iter().any(|p| p.name == pname) {
                    return Err(IrError::DuplicateParam { name: pname });
                }
                self.expect(Tok::Colon)?;
                let kind = match self.peek() {
                    Tok::KwBuf => ParamKind::Buffer,
                    Tok::KwI64 => ParamKind::ScalarI64,
                    Tok::KwI32 => ParamKind::ScalarI32,
                    other => {
                        return Err(IrError::syntax(
                            self.loc(),
                            format!("expected parameter type `buf`, `i64`, or `i32`, found {}", other.describe()),
                        ))
                    }
                };
                self.bump();
                params.push(Param { name: pname, kind });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        for (name, loc) in std::mem::take(&mut self.require_idents) {
            if !params.iter().any(|p| p.name == name) {
                return Err(IrError::UndefinedIdentifier { name, loc });
            }
        }
        self.scopes.push(params.iter().map(|p| (p.name.clone(), false)).collect());
        let body = self.block()?;
        self.scopes.pop();
        if *self.peek() != Tok::Eof {
            return Err(IrError::syntax(
                self.loc(),
                format!("expected end of input after kernel body, found {}", self.peek().describe()),
            ));
        }
        Ok(Kernel { name, params, preconditions, body })
    }
}

/// Parse one kernel definition. The result always passes
/// [`super::validate::validate_kernel`].
pub fn parse_kernel(src: &str) -> Result<Kernel, IrError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, scopes: Vec::new(), require_idents: Vec::new(), in_require: false };
    let k = p.kernel()?;
    super::validate::validate_kernel(&k)?;
    Ok(k)
}
