//! Abstract syntax for `.gk` kernel programs.
//!
//! A kernel is a straight-line/structured program executed by every thread of
//! a launch grid. Threads are identified by the builtins `bid` (block id) and
//! `tid` (thread id within a block); `bdim` and `gdim` are the launch
//! dimensions. All integer arithmetic is 64-bit two's-complement with
//! wrap-around; division and modulo by zero are runtime errors; shift amounts
//! are taken modulo 64 and `>>` is arithmetic.

use serde::{Deserialize, Serialize};

/// Access width in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Width(u8);

impl Width {
    pub const W1: Width = Width(1);
    pub const W2: Width = Width(2);
    pub const W4: Width = Width(4);
    pub const W8: Width = Width(8);

    pub fn new(bytes: u8) -> Option<Width> {
        matches!(bytes, 1 | 2 | 4 | 8).then_some(Width(bytes))
    }

    pub fn bytes(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    /// Base address of a global-memory buffer. Unless the kernel carries an
    /// explicit `@require` mentioning the parameter, buffers get the implicit
    /// preconditions `0 < p < 2^56` and `p % 256 == 0`.
    Buffer,
    ScalarI64,
    /// Bound to the low 32 bits of the launch argument, sign-extended.
    ScalarI32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// Truncating signed division.
    Div,
    /// Truncating signed remainder (sign follows the dividend).
    Rem,
    And,
    Or,
    Xor,
    Shl,
    /// Arithmetic right shift.
    Shr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntExpr {
    Const(i64),
    /// Reference to a param, let-bound local, load destination, or loop counter.
    Ident(String),
    Bid,
    Tid,
    Bdim,
    Gdim,
    Bin(BinOp, Box<IntExpr>, Box<IntExpr>),
    Neg(Box<IntExpr>),
    Min(Box<IntExpr>, Box<IntExpr>),
    Max(Box<IntExpr>, Box<IntExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolExpr {
    Cmp(CmpOp, IntExpr, IntExpr),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stmt {
    /// `let x = e`. Re-binding a visible name assigns to it; loop counters
    /// cannot be assigned.
    Let { dest: String, value: IntExpr },
    /// `let x = load [addr] :w`
    Load { dest: String, addr: IntExpr, width: Width },
    /// `store [addr] = v :w`
    Store { addr: IntExpr, value: IntExpr, width: Width },
    /// `atomic_add [addr] += v :w` — an atomic read-modify-write.
    AtomicAdd { addr: IntExpr, value: IntExpr, width: Width },
    If { cond: BoolExpr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    /// `for c in lo .. hi { .. }` — c ranges over `[lo, hi)`, step 1. The
    /// counter is fresh within its scope and immutable.
    ForCounted { counter: String, lo: IntExpr, hi: IntExpr, body: Vec<Stmt> },
    While { cond: BoolExpr, body: Vec<Stmt> },
    /// `call_indirect target` — opaque control transfer; analysis gives up.
    CallIndirect { target: IntExpr },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kernel {
    pub name: String,
    pub params: Vec<Param>,
    /// `@require` lines: constraints over params and `bdim`/`gdim` that every
    /// launch is expected to satisfy. Never reference `bid`/`tid`.
    pub preconditions: Vec<BoolExpr>,
    pub body: Vec<Stmt>,
}

impl Kernel {
    /// Index of a param by name.
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

/// Statement ids used by access sites and error locations: pre-order index of
/// the statement within the kernel body. Deterministic for a given kernel.
pub fn number_statements(k: &Kernel) -> Vec<&Stmt> {
    fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
        for s in stmts {
            out.push(s);
            match s {
                Stmt::If { then_body, else_body, .. } => {
                    walk(then_body, out);
                    walk(else_body, out);
                }
                Stmt::ForCounted { body, .. } | Stmt::While { body, .. } => walk(body, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(&k.body, &mut out);
    out
}
