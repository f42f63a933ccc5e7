//! Canonical symbolic expressions over 64-bit wrapping integers.
//!
//! All construction goes through the smart constructors on [`SymExpr`] and
//! [`SymBool`]; they flatten associative operators, fold constants, and order
//! commutative operands so that semantically written-alike expressions compare
//! equal with `==`. The rewrites used here are exact under two's-complement
//! wrapping (e.g. `x << c` becomes `x * 2^c`, which agrees modulo 2^64), never
//! merely "usually right".

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use super::var::SymVarId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymCmp {
    Lt,
    Le,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
pub struct SymExpr(Rc<Node>);

/// Invariants (maintained by constructors, relied on everywhere):
/// - `Add`/`Mul`/`Min`/`Max` hold >= 2 operands, none of the same kind.
/// - `Add` holds at most one constant, placed last, never 0.
/// - `Mul` holds at most one constant, placed first, never 0 or 1.
/// - `Min`/`Max` operands are sorted and deduplicated, at most one constant.
/// - Non-constant `Add`/`Mul` operands are sorted by the structural order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Const(i64),
    Var(SymVarId),
    Add(Vec<SymExpr>),
    Mul(Vec<SymExpr>),
    Div(SymExpr, SymExpr),
    Rem(SymExpr, SymExpr),
    And(SymExpr, SymExpr),
    Or(SymExpr, SymExpr),
    Xor(SymExpr, SymExpr),
    Shl(SymExpr, SymExpr),
    Shr(SymExpr, SymExpr),
    Min(Vec<SymExpr>),
    Max(Vec<SymExpr>),
}

impl PartialEq for SymExpr {
    fn eq(&self, other: &SymExpr) -> bool {
        Rc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for SymExpr {}

impl PartialOrd for SymExpr {
    fn partial_cmp(&self, other: &SymExpr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SymExpr {
    fn cmp(&self, other: &SymExpr) -> Ordering {
        if Rc::ptr_eq(&self.0, &other.0) {
            Ordering::Equal
        } else {
            self.0.cmp(&other.0)
        }
    }
}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    DivByZero,
    Unbound(SymVarId),
}

impl SymExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(v: i64) -> SymExpr {
        SymExpr(Rc::new(Node::Const(v)))
    }

    pub fn var(id: SymVarId) -> SymExpr {
        SymExpr(Rc::new(Node::Var(id)))
    }

    pub fn as_const(&self) -> Option<i64> {
        match &*self.0 {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn add(operands: Vec<SymExpr>) -> SymExpr {
        let mut terms = Vec::with_capacity(operands.len());
        let mut acc: i64 = 0;
        let flatten = |e: SymExpr, terms: &mut Vec<SymExpr>, acc: &mut i64| match &*e.0 {
            Node::Const(v) => *acc = acc.wrapping_add(*v),
            Node::Add(inner) => {
                for x in inner {
                    match &*x.0 {
                        Node::Const(v) => *acc = acc.wrapping_add(*v),
                        _ => terms.push(x.clone()),
                    }
                }
            }
            _ => terms.push(e),
        };
        for e in operands {
            flatten(e, &mut terms, &mut acc);
        }
        terms.sort();
        if acc != 0 {
            terms.push(SymExpr::constant(acc));
        }
        match terms.len() {
            0 => SymExpr::constant(0),
            1 => terms.pop().unwrap(),
            _ => SymExpr(Rc::new(Node::Add(terms))),
        }
    }

    pub fn add2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::add(vec![a, b])
    }

    pub fn sub(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::add(vec![a, SymExpr::neg(b)])
    }

    pub fn neg(a: SymExpr) -> SymExpr {
        SymExpr::mul(vec![SymExpr::constant(-1), a])
    }

    pub fn mul(operands: Vec<SymExpr>) -> SymExpr {
        let mut factors = Vec::with_capacity(operands.len());
        let mut acc: i64 = 1;
        for e in operands {
            match &*e.0 {
                Node::Const(v) => acc = acc.wrapping_mul(*v),
                Node::Mul(inner) => {
                    for x in inner {
                        match &*x.0 {
                            Node::Const(v) => acc = acc.wrapping_mul(*v),
                            _ => factors.push(x.clone()),
                        }
                    }
                }
                _ => factors.push(e),
            }
        }
        if acc == 0 {
            // Exact even under wrap: 0 * x == 0 mod 2^64.
            return SymExpr::constant(0);
        }
        factors.sort();
        let mut out = Vec::with_capacity(factors.len() + 1);
        if acc != 1 {
            out.push(SymExpr::constant(acc));
        }
        out.extend(factors);
        match out.len() {
            0 => SymExpr::constant(1),
            1 => out.pop().unwrap(),
            _ => SymExpr(Rc::new(Node::Mul(out))),
        }
    }

    pub fn mul2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::mul(vec![a, b])
    }

    pub fn div(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            // Division by a constant zero is a runtime trap; keep the node so
            // downstream layers see it rather than a silently folded value.
            (Some(x), Some(y)) if y != 0 => SymExpr::constant(x.wrapping_div(y)),
            (_, Some(1)) => a,
            _ => SymExpr(Rc::new(Node::Div(a, b))),
        }
    }

    pub fn rem(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0 => SymExpr::constant(x.wrapping_rem(y)),
            (_, Some(1)) | (_, Some(-1)) => SymExpr::constant(0),
            _ => SymExpr(Rc::new(Node::Rem(a, b))),
        }
    }

    pub fn band(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return SymExpr::constant(x & y),
            (Some(0), _) | (_, Some(0)) => return SymExpr::constant(0),
            (Some(-1), _) => return b,
            (_, Some(-1)) => return a,
            _ => {}
        }
        let (a, b) = sort_pair(a, b);
        SymExpr(Rc::new(Node::And(a, b)))
    }

    pub fn bor(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return SymExpr::constant(x | y),
            (Some(-1), _) | (_, Some(-1)) => return SymExpr::constant(-1),
            (Some(0), _) => return b,
            (_, Some(0)) => return a,
            _ => {}
        }
        let (a, b) = sort_pair(a, b);
        SymExpr(Rc::new(Node::Or(a, b)))
    }

    pub fn bxor(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return SymExpr::constant(x ^ y),
            (Some(0), _) => return b,
            (_, Some(0)) => return a,
            _ => {}
        }
        if a == b {
            return SymExpr::constant(0);
        }
        let (a, b) = sort_pair(a, b);
        SymExpr(Rc::new(Node::Xor(a, b)))
    }

    pub fn shl(a: SymExpr, b: SymExpr) -> SymExpr {
        if let Some(c) = b.as_const() {
            // x << c == x * 2^(c & 63) exactly, modulo 2^64.
            return SymExpr::mul2(a, SymExpr::constant(1i64.wrapping_shl(c as u32)));
        }
        SymExpr(Rc::new(Node::Shl(a, b)))
    }

    pub fn shr(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => SymExpr::constant(x.wrapping_shr(y as u32)),
            (_, Some(0)) => a,
            _ => SymExpr(Rc::new(Node::Shr(a, b))),
        }
    }

    pub fn min(operands: Vec<SymExpr>) -> SymExpr {
        SymExpr::fold_minmax(operands, true)
    }

    pub fn max(operands: Vec<SymExpr>) -> SymExpr {
        SymExpr::fold_minmax(operands, false)
    }

    pub fn min2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::min(vec![a, b])
    }

    pub fn max2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::max(vec![a, b])
    }

    fn fold_minmax(operands: Vec<SymExpr>, is_min: bool) -> SymExpr {
        let mut items = Vec::with_capacity(operands.len());
        let mut acc: Option<i64> = None;
        for e in operands {
            let inner = match (&*e.0, is_min) {
                (Node::Min(xs), true) | (Node::Max(xs), false) => Some(xs.clone()),
                _ => None,
            };
            for x in inner.unwrap_or_else(|| vec![e]) {
                match x.as_const() {
                    Some(v) => {
                        acc = Some(match acc {
                            None => v,
                            Some(a) if is_min => a.min(v),
                            Some(a) => a.max(v),
                        })
                    }
                    None => items.push(x),
                }
            }
        }
        items.sort();
        items.dedup();
        if let Some(v) = acc {
            items.push(SymExpr::constant(v));
        }
        match items.len() {
            0 => panic!("min/max of zero operands"),
            1 => items.pop().unwrap(),
            _ if is_min => SymExpr(Rc::new(Node::Min(items))),
            _ => SymExpr(Rc::new(Node::Max(items))),
        }
    }

    pub fn vars_into(&self, out: &mut BTreeSet<SymVarId>) {
        match &*self.0 {
            Node::Const(_) => {}
            Node::Var(v) => {
                out.insert(*v);
            }
            Node::Add(xs) | Node::Mul(xs) | Node::Min(xs) | Node::Max(xs) => {
                for x in xs {
                    x.vars_into(out);
                }
            }
            Node::Div(a, b)
            | Node::Rem(a, b)
            | Node::And(a, b)
            | Node::Or(a, b)
            | Node::Xor(a, b)
            | Node::Shl(a, b)
            | Node::Shr(a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<SymVarId> {
        let mut s = BTreeSet::new();
        self.vars_into(&mut s);
        s
    }

    pub fn contains_var(&self, id: SymVarId) -> bool {
        match &*self.0 {
            Node::Const(_) => false,
            Node::Var(v) => *v == id,
            Node::Add(xs) | Node::Mul(xs) | Node::Min(xs) | Node::Max(xs) => {
                xs.iter().any(|x| x.contains_var(id))
            }
            Node::Div(a, b)
            | Node::Rem(a, b)
            | Node::And(a, b)
            | Node::Or(a, b)
            | Node::Xor(a, b)
            | Node::Shl(a, b)
            | Node::Shr(a, b) => a.contains_var(id) || b.contains_var(id),
        }
    }

    /// Rebuild with `f`-mapped variables; vars mapped to `None` stay.
    /// Reconstruction runs through the smart constructors, so the result is
    /// canonical (substituting constants folds arithmetic away).
    pub fn subst(&self, f: &impl Fn(SymVarId) -> Option<SymExpr>) -> SymExpr {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(v) => f(*v).unwrap_or_else(|| self.clone()),
            Node::Add(xs) => SymExpr::add(xs.iter().map(|x| x.subst(f)).collect()),
            Node::Mul(xs) => SymExpr::mul(xs.iter().map(|x| x.subst(f)).collect()),
            Node::Min(xs) => SymExpr::min(xs.iter().map(|x| x.subst(f)).collect()),
            Node::Max(xs) => SymExpr::max(xs.iter().map(|x| x.subst(f)).collect()),
            Node::Div(a, b) => SymExpr::div(a.subst(f), b.subst(f)),
            Node::Rem(a, b) => SymExpr::rem(a.subst(f), b.subst(f)),
            Node::And(a, b) => SymExpr::band(a.subst(f), b.subst(f)),
            Node::Or(a, b) => SymExpr::bor(a.subst(f), b.subst(f)),
            Node::Xor(a, b) => SymExpr::bxor(a.subst(f), b.subst(f)),
            Node::Shl(a, b) => SymExpr::shl(a.subst(f), b.subst(f)),
            Node::Shr(a, b) => SymExpr::shr(a.subst(f), b.subst(f)),
        }
    }

    /// Concrete evaluation with exactly the runtime semantics: wrapping
    /// arithmetic, truncating division, shift counts mod 64, arithmetic `>>`.
    pub fn eval(&self, env: &impl Fn(SymVarId) -> Option<i64>) -> Result<i64, EvalError> {
        match &*self.0 {
            Node::Const(v) => Ok(*v),
            Node::Var(v) => env(*v).ok_or(EvalError::Unbound(*v)),
            Node::Add(xs) => {
                let mut acc = 0i64;
                for x in xs {
                    acc = acc.wrapping_add(x.eval(env)?);
                }
                Ok(acc)
            }
            Node::Mul(xs) => {
                let mut acc = 1i64;
                for x in xs {
                    acc = acc.wrapping_mul(x.eval(env)?);
                }
                Ok(acc)
            }
            Node::Min(xs) => {
                let mut acc = i64::MAX;
                for x in xs {
                    acc = acc.min(x.eval(env)?);
                }
                Ok(acc)
            }
            Node::Max(xs) => {
                let mut acc = i64::MIN;
                for x in xs {
                    acc = acc.max(x.eval(env)?);
                }
                Ok(acc)
            }
            Node::Div(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                if b == 0 {
                    Err(EvalError::DivByZero)
                } else {
                    Ok(a.wrapping_div(b))
                }
            }
            Node::Rem(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                if b == 0 {
                    Err(EvalError::DivByZero)
                } else {
                    Ok(a.wrapping_rem(b))
                }
            }
            Node::And(a, b) => Ok(a.eval(env)? & b.eval(env)?),
            Node::Or(a, b) => Ok(a.eval(env)? | b.eval(env)?),
            Node::Xor(a, b) => Ok(a.eval(env)? ^ b.eval(env)?),
            Node::Shl(a, b) => Ok(a.eval(env)?.wrapping_shl(b.eval(env)? as u32)),
            Node::Shr(a, b) => Ok(a.eval(env)?.wrapping_shr(b.eval(env)? as u32)),
        }
    }
}

fn sort_pair(a: SymExpr, b: SymExpr) -> (SymExpr, SymExpr) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct SymBool(Rc<BNode>);

/// Boolean formulas are kept in negation normal form: negation is applied
/// eagerly at construction, so only comparisons, conjunction, and disjunction
/// appear. That makes "c is the complement of d" checkable syntactically via
/// `c.negate() == d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BNode {
    Const(bool),
    Cmp(SymCmp, SymExpr, SymExpr),
    All(Vec<SymBool>),
    Any(Vec<SymBool>),
}

impl PartialEq for SymBool {
    fn eq(&self, other: &SymBool) -> bool {
        Rc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for SymBool {}

impl PartialOrd for SymBool {
    fn partial_cmp(&self, other: &SymBool) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SymBool {
    fn cmp(&self, other: &SymBool) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl Hash for SymBool {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl SymBool {
    pub fn node(&self) -> &BNode {
        &self.0
    }

    pub fn tt() -> SymBool {
        SymBool(Rc::new(BNode::Const(true)))
    }

    pub fn ff() -> SymBool {
        SymBool(Rc::new(BNode::Const(false)))
    }

    pub fn as_const(&self) -> Option<bool> {
        match &*self.0 {
            BNode::Const(b) => Some(*b),
            _ => None,
        }
    }

    pub fn cmp(op: SymCmp, a: SymExpr, b: SymExpr) -> SymBool {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            let v = match op {
                SymCmp::Lt => x < y,
                SymCmp::Le => x <= y,
                SymCmp::Eq => x == y,
                SymCmp::Ne => x != y,
            };
            return if v { SymBool::tt() } else { SymBool::ff() };
        }
        match op {
            SymCmp::Eq | SymCmp::Ne => {
                if a == b {
                    return if op == SymCmp::Eq { SymBool::tt() } else { SymBool::ff() };
                }
                let (a, b) = sort_pair(a, b);
                SymBool(Rc::new(BNode::Cmp(op, a, b)))
            }
            _ => {
                if a == b {
                    // x < x is false, x <= x is true.
                    return if op == SymCmp::Le { SymBool::tt() } else { SymBool::ff() };
                }
                SymBool(Rc::new(BNode::Cmp(op, a, b)))
            }
        }
    }

    pub fn lt(a: SymExpr, b: SymExpr) -> SymBool {
        SymBool::cmp(SymCmp::Lt, a, b)
    }

    pub fn le(a: SymExpr, b: SymExpr) -> SymBool {
        SymBool::cmp(SymCmp::Le, a, b)
    }

    pub fn eq(a: SymExpr, b: SymExpr) -> SymBool {
        SymBool::cmp(SymCmp::Eq, a, b)
    }

    pub fn all(operands: Vec<SymBool>) -> SymBool {
        let mut items = Vec::with_capacity(operands.len());
        for e in operands {
            match &*e.0 {
                BNode::Const(true) => {}
                BNode::Const(false) => return SymBool::ff(),
                BNode::All(inner) => items.extend(inner.iter().cloned()),
                _ => items.push(e),
            }
        }
        items.sort();
        items.dedup();
        match items.len() {
            0 => SymBool::tt(),
            1 => items.pop().unwrap(),
            _ => SymBool(Rc::new(BNode::All(items))),
        }
    }

    pub fn any(operands: Vec<SymBool>) -> SymBool {
        let mut items = Vec::with_capacity(operands.len());
        for e in operands {
            match &*e.0 {
                BNode::Const(false) => {}
                BNode::Const(true) => return SymBool::tt(),
                BNode::Any(inner) => items.extend(inner.iter().cloned()),
                _ => items.push(e),
            }
        }
        items.sort();
        items.dedup();
        match items.len() {
            0 => SymBool::ff(),
            1 => items.pop().unwrap(),
            _ => SymBool(Rc::new(BNode::Any(items))),
        }
    }

    pub fn and2(a: SymBool, b: SymBool) -> SymBool {
        SymBool::all(vec![a, b])
    }

    /// Logical complement, pushed down to the comparison leaves.
    pub fn negate(&self) -> SymBool {
        match &*self.0 {
            BNode::Const(b) => {
                if *b {
                    SymBool::ff()
                } else {
                    SymBool::tt()
                }
            }
            BNode::Cmp(op, a, b) => match op {
                SymCmp::Lt => SymBool::cmp(SymCmp::Le, b.clone(), a.clone()),
                SymCmp::Le => SymBool::cmp(SymCmp::Lt, b.clone(), a.clone()),
                SymCmp::Eq => SymBool::cmp(SymCmp::Ne, a.clone(), b.clone()),
                SymCmp::Ne => SymBool::cmp(SymCmp::Eq, a.clone(), b.clone()),
            },
            BNode::All(xs) => SymBool::any(xs.iter().map(|x| x.negate()).collect()),
            BNode::Any(xs) => SymBool::all(xs.iter().map(|x| x.negate()).collect()),
        }
    }

    pub fn vars_into(&self, out: &mut BTreeSet<SymVarId>) {
        match &*self.0 {
            BNode::Const(_) => {}
            BNode::Cmp(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            BNode::All(xs) | BNode::Any(xs) => {
                for x in xs {
                    x.vars_into(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<SymVarId> {
        let mut s = BTreeSet::new();
        self.vars_into(&mut s);
        s
    }

    pub fn subst(&self, f: &impl Fn(SymVarId) -> Option<SymExpr>) -> SymBool {
        match &*self.0 {
            BNode::Const(_) => self.clone(),
            BNode::Cmp(op, a, b) => SymBool::cmp(*op, a.subst(f), b.subst(f)),
            BNode::All(xs) => SymBool::all(xs.iter().map(|x| x.subst(f)).collect()),
            BNode::Any(xs) => SymBool::any(xs.iter().map(|x| x.subst(f)).collect()),
        }
    }

    pub fn eval(&self, env: &impl Fn(SymVarId) -> Option<i64>) -> Result<bool, EvalError> {
        match &*self.0 {
            BNode::Const(b) => Ok(*b),
            BNode::Cmp(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                Ok(match op {
                    SymCmp::Lt => a < b,
                    SymCmp::Le => a <= b,
                    SymCmp::Eq => a == b,
                    SymCmp::Ne => a != b,
                })
            }
            BNode::All(xs) => {
                for x in xs {
                    if !x.eval(env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            BNode::Any(xs) => {
                for x in xs {
                    if x.eval(env)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}
