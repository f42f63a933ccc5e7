//! Static detection of induction structure in loops.
//!
//! A local qualifies as an induction variable of a loop when the loop body
//! assigns it exactly once, at the top level, as `v = v + c` (or `v - c`) with
//! constant `c`. Counted-loop counters always qualify with step 1. A while
//! loop additionally qualifies for trip-count derivation when its condition is
//! a simple comparison between one of its induction locals and a
//! loop-invariant bound, compared in the direction the step makes progress.

use std::collections::{BTreeSet, HashMap};

use crate::ir::{BinOp, BoolExpr, CmpOp, IntExpr, Kernel, Stmt, number_statements};

/// Fixed-step local: `name := name + step` once per iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLocal {
    pub name: String,
    pub step: i64,
}

/// Qualifying while condition `var <op> bound` (normalized so the induction
/// local is on the left).
#[derive(Debug, Clone, PartialEq)]
pub struct WhileCond {
    pub var: String,
    pub op: CmpOp,
    pub bound: IntExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopShape {
    pub loop_stmt: u32,
    pub is_for: bool,
    /// Counted-loop counter name (step 1 by construction).
    pub counter: Option<String>,
    /// Fixed-step locals mutated by the body, counter excluded.
    pub step_locals: Vec<StepLocal>,
    /// Present when a while loop's trip count is derivable from its condition.
    pub while_cond: Option<WhileCond>,
}

/// Maps statements to their stable pre-order ids.
pub(crate) struct StmtIds {
    map: HashMap<usize, u32>,
}

impl StmtIds {
    pub(crate) fn build(k: &Kernel) -> StmtIds {
        let mut map = HashMap::new();
        for (i, s) in number_statements(k).into_iter().enumerate() {
            map.insert(s as *const Stmt as usize, i as u32);
        }
        StmtIds { map }
    }

    pub(crate) fn id(&self, s: &Stmt) -> u32 {
        self.map[&(s as *const Stmt as usize)]
    }
}

/// Every name assigned anywhere inside `body`, nested scopes included.
pub(crate) fn assigned_names(body: &[Stmt], out: &mut BTreeSet<String>) {
    for s in body {
        match s {
            Stmt::Let { dest, .. } | Stmt::Load { dest, .. } => {
                out.insert(dest.clone());
            }
            Stmt::If { then_body, else_body, .. } => {
                assigned_names(then_body, out);
                assigned_names(else_body, out);
            }
            Stmt::ForCounted { body, .. } | Stmt::While { body, .. } => assigned_names(body, out),
            Stmt::Store { .. } | Stmt::AtomicAdd { .. } | Stmt::CallIndirect { .. } => {}
        }
    }
}

fn idents(e: &IntExpr, out: &mut BTreeSet<String>) {
    match e {
        IntExpr::Const(_) | IntExpr::Bid | IntExpr::Tid | IntExpr::Bdim | IntExpr::Gdim => {}
        IntExpr::Ident(n) => {
            out.insert(n.clone());
        }
        IntExpr::Bin(_, a, b) | IntExpr::Min(a, b) | IntExpr::Max(a, b) => {
            idents(a, out);
            idents(b, out);
        }
        IntExpr::Neg(a) => idents(a, out),
    }
}

/// Matches `v + c`, `c + v`, `v - c` for a given `v`; returns the step.
fn step_of(value: &IntExpr, v: &str) -> Option<i64> {
    match value {
        IntExpr::Bin(BinOp::Add, a, b) => match (&**a, &**b) {
            (IntExpr::Ident(n), IntExpr::Const(c)) if n == v => Some(*c),
            (IntExpr::Const(c), IntExpr::Ident(n)) if n == v => Some(*c),
            _ => None,
        },
        IntExpr::Bin(BinOp::Sub, a, b) => match (&**a, &**b) {
            (IntExpr::Ident(n), IntExpr::Const(c)) if n == v => Some(c.wrapping_neg()),
            _ => None,
        },
        _ => None,
    }
}

fn count_assignments(body: &[Stmt], v: &str) -> usize {
    let mut n = 0;
    for s in body {
        match s {
            Stmt::Let { dest, .. } | Stmt::Load { dest, .. } if dest == v => n += 1,
            Stmt::If { then_body, else_body, .. } => {
                n += count_assignments(then_body, v) + count_assignments(else_body, v);
            }
            Stmt::ForCounted { body, .. } | Stmt::While { body, .. } => {
                n += count_assignments(body, v);
            }
            _ => {}
        }
    }
    n
}

/// Fixed-step locals of one loop body: assigned exactly once, top level,
/// as `v := v + c`.
fn body_step_locals(body: &[Stmt]) -> Vec<StepLocal> {
    let mut out = Vec::new();
    for s in body {
        if let Stmt::Let { dest, value } = s {
            if let Some(step) = step_of(value, dest) {
                if count_assignments(body, dest) == 1 {
                    out.push(StepLocal { name: dest.clone(), step });
                }
            }
        }
    }
    out
}

fn qualify_while_cond(cond: &BoolExpr, body: &[Stmt], locals: &[StepLocal]) -> Option<WhileCond> {
    let BoolExpr::Cmp(op, lhs, rhs) = cond else { return None };
    let mut mutated = BTreeSet::new();
    assigned_names(body, &mut mutated);
    // Accept `v op B` directly or `B op v` with the comparison flipped.
    let candidates = [(lhs, rhs, *op), (rhs, lhs, flip(*op))];
    for (a, b, op) in candidates {
        let IntExpr::Ident(name) = a else { continue };
        let Some(local) = locals.iter().find(|l| &l.name == name) else { continue };
        let mut bound_ids = BTreeSet::new();
        idents(b, &mut bound_ids);
        if bound_ids.iter().any(|n| mutated.contains(n)) {
            continue;
        }
        // The comparison must bound the direction the step moves.
        let progresses = match op {
            CmpOp::Lt | CmpOp::Le => local.step > 0,
            CmpOp::Gt | CmpOp::Ge => local.step < 0,
            CmpOp::Eq | CmpOp::Ne => false,
        };
        if progresses {
            return Some(WhileCond { var: name.clone(), op, bound: b.clone() });
        }
    }
    None
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        CmpOp::Eq => CmpOp::Eq,
        CmpOp::Ne => CmpOp::Ne,
    }
}

fn walk(stmts: &[Stmt], ids: &StmtIds, out: &mut Vec<LoopShape>) {
    for s in stmts {
        match s {
            Stmt::ForCounted { counter, body, .. } => {
                let mut step_locals = body_step_locals(body);
                step_locals.retain(|l| &l.name != counter);
                out.push(LoopShape {
                    loop_stmt: ids.id(s),
                    is_for: true,
                    counter: Some(counter.clone()),
                    step_locals,
                    while_cond: None,
                });
                walk(body, ids, out);
            }
            Stmt::While { cond, body } => {
                let step_locals = body_step_locals(body);
                let while_cond = qualify_while_cond(cond, body, &step_locals);
                out.push(LoopShape {
                    loop_stmt: ids.id(s),
                    is_for: false,
                    counter: None,
                    step_locals,
                    while_cond,
                });
                walk(body, ids, out);
            }
            Stmt::If { then_body, else_body, .. } => {
                walk(then_body, ids, out);
                walk(else_body, ids, out);
            }
            _ => {}
        }
    }
}

/// Induction table of a kernel: one entry per loop, in statement order.
pub fn detect_induction(k: &Kernel) -> Vec<LoopShape> {
    let ids = StmtIds::build(k);
    let mut out = Vec::new();
    walk(&k.body, &ids, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_kernel;

    #[test]
    fn for_counter_qualifies() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64) {\n  for i in 0 .. n {\n    store [a + 4*i] = i :4\n  }\n}",
        )
        .unwrap();
        let shapes = detect_induction(&k);
        assert_eq!(shapes.len(), 1);
        assert!(shapes[0].is_for);
        assert_eq!(shapes[0].counter.as_deref(), Some("i"));
        assert!(shapes[0].step_locals.is_empty());
    }

    #[test]
    fn while_step_local_with_invariant_bound_qualifies() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64) {\n  let i = 0\n  while i < 2*n {\n    store [a + 4*i] = i :4\n    i = i + 2\n  }\n}",
        )
        .unwrap();
        let shapes = detect_induction(&k);
        assert_eq!(shapes.len(), 1);
        let s = &shapes[0];
        assert!(!s.is_for);
        assert_eq!(s.step_locals, vec![StepLocal { name: "i".into(), step: 2 }]);
        let wc = s.while_cond.as_ref().expect("cond should qualify");
        assert_eq!(wc.var, "i");
        assert_eq!(wc.op, CmpOp::Lt);
    }

    #[test]
    fn geometric_update_does_not_qualify() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64) {\n  let x = 1\n  while x < n {\n    store [a + x] = 0 :1\n    x = x * 2\n  }\n}",
        )
        .unwrap();
        let shapes = detect_induction(&k);
        assert_eq!(shapes.len(), 1);
        assert!(shapes[0].step_locals.is_empty());
        assert!(shapes[0].while_cond.is_none());
    }

    #[test]
    fn conditional_step_does_not_qualify() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64, flag: i64) {\n  let i = 0\n  while i < n {\n    if flag == 1 {\n      i = i + 1\n    }\n    store [a + i] = 0 :1\n  }\n}",
        )
        .unwrap();
        let shapes = detect_induction(&k);
        assert!(shapes[0].step_locals.is_empty());
        assert!(shapes[0].while_cond.is_none());
    }

    #[test]
    fn bound_mutated_in_body_disqualifies_cond() {
        let k = parse_kernel(
            "kernel f(a: buf) {\n  let i = 0\n  let lim = 8\n  while i < lim {\n    i = i + 1\n    lim = lim - 1\n  }\n}",
        )
        .unwrap();
        let shapes = detect_induction(&k);
        // Both locals step, but the bound is mutated, so no trip derivation.
        assert_eq!(shapes[0].step_locals.len(), 2);
        assert!(shapes[0].while_cond.is_none());
    }

    #[test]
    fn flipped_comparison_normalizes() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64) {\n  let i = 0\n  while n > i {\n    store [a + i] = 0 :1\n    i = i + 1\n  }\n}",
        )
        .unwrap();
        let wc = detect_induction(&k)[0].while_cond.clone().expect("qualifies");
        assert_eq!(wc.var, "i");
        assert_eq!(wc.op, CmpOp::Lt);
    }

    #[test]
    fn downward_loop_direction_must_match() {
        let k = parse_kernel(
            "kernel f(a: buf, n: i64) {\n  let i = n\n  while i > 0 {\n    i = i - 1\n    store [a + i] = 0 :1\n  }\n}",
        )
        .unwrap();
        let s = &detect_induction(&k)[0];
        assert_eq!(s.step_locals, vec![StepLocal { name: "i".into(), step: -1 }]);
        let wc = s.while_cond.as_ref().expect("qualifies");
        assert_eq!(wc.op, CmpOp::Gt);
    }
}
