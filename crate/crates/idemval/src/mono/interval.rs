//! Saturating interval evaluation of symbolic expressions, plus the
//! structural value domains every proof in this module assumes.
//!
//! Intervals are kept in `i128` and clamped to +-2^80, far outside the 64-bit
//! value range, so products of in-range values never overflow the carrier
//! type. Each evaluation also reports whether the expression is wrap-free: an
//! expression whose mathematical value can escape the signed 64-bit range at
//! any node may wrap at runtime, and no order reasoning done over mathematical
//! integers transfers to it.

use crate::ir::ParamKind;

use crate::sym::{Node, SymBool, SymCmp, SymExpr, SymVarId, VarOrigin, VarTable, BDIM, GDIM};

/// Grid/block caps assumed by the prover and enforced as preconditions.
pub const BDIM_CAP: i64 = 1 << 10;
pub const GDIM_CAP: i64 = 1 << 20;
/// Buffer parameters live in this window: never null, clear of the top of
/// the address space so small offsets cannot wrap.
pub const BUF_LO: i64 = 1;
pub const BUF_HI: i64 = (1 << 56) - 1;

const SAT: i128 = 1 << 80;
const I64_LO: i128 = i64::MIN as i128;
const I64_HI: i128 = i64::MAX as i128;

fn sat(v: i128) -> i128 {
    v.clamp(-SAT, SAT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: i128,
    pub hi: i128,
}

pub const FULL64: Interval = Interval { lo: I64_LO, hi: I64_HI };

impl Interval {
    pub fn new(lo: i128, hi: i128) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo: sat(lo), hi: sat(hi) }
    }

    pub fn point(v: i64) -> Interval {
        Interval { lo: v as i128, hi: v as i128 }
    }

    pub fn within_i64(&self) -> bool {
        self.lo >= I64_LO && self.hi <= I64_HI
    }

    pub fn hull(a: Interval, b: Interval) -> Interval {
        Interval { lo: a.lo.min(b.lo), hi: a.hi.max(b.hi) }
    }

    fn meet(self, other: Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        // An empty meet means the constraints are unsatisfiable; collapse to
        // a point so downstream arithmetic stays well-formed.
        if lo > hi {
            Interval { lo, hi: lo }
        } else {
            Interval { lo, hi }
        }
    }

    pub fn width(&self) -> i128 {
        self.hi - self.lo
    }
}

/// Interval of an expression together with wrap-freedom of every node.
#[derive(Debug, Clone, Copy)]
pub struct Evald {
    pub iv: Interval,
    pub wrap_free: bool,
}

fn exact(iv: Interval, wrap_free: bool) -> Evald {
    Evald { iv, wrap_free }
}

/// A node whose mathematical range escapes i64 may wrap; its runtime value is
/// then still *some* i64, so parents continue from the full range.
fn escaped(wrap_free: bool, lo: i128, hi: i128) -> Evald {
    let iv = Interval::new(lo, hi);
    if iv.within_i64() {
        exact(iv, wrap_free)
    } else {
        exact(FULL64, false)
    }
}

fn next_pow2_minus1(v: i128) -> i128 {
    let mut b = 1i128;
    while b - 1 < v && b < SAT {
        b <<= 1;
    }
    b - 1
}

fn corners(av: Interval, cv: Interval, f: impl Fn(i128, i128) -> i128) -> (i128, i128) {
    let mut lo = i128::MAX;
    let mut hi = i128::MIN;
    // Split operands at zero so each piece is monotone in both arguments and
    // corner evaluation is exact.
    let pieces = |iv: Interval| -> Vec<Interval> {
        if iv.lo < 0 && iv.hi > 0 {
            vec![Interval { lo: iv.lo, hi: -1 }, Interval { lo: 0, hi: iv.hi }]
        } else {
            vec![iv]
        }
    };
    for a in pieces(av) {
        for c in pieces(cv) {
            for x in [a.lo, a.hi] {
                for y in [c.lo, c.hi] {
                    let v = f(x, y);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    (lo, hi)
}

pub fn eval_interval(e: &SymExpr, dom: &impl Fn(SymVarId) -> Interval) -> Evald {
    match e.node() {
        Node::Const(v) => exact(Interval::point(*v), true),
        Node::Var(v) => exact(dom(*v), true),
        Node::Add(xs) => {
            let mut lo = 0i128;
            let mut hi = 0i128;
            let mut wf = true;
            for x in xs {
                let r = eval_interval(x, dom);
                wf &= r.wrap_free;
                lo = sat(lo + r.iv.lo);
                hi = sat(hi + r.iv.hi);
            }
            escaped(wf, lo, hi)
        }
        Node::Mul(xs) => {
            let mut acc = Interval::point(1);
            let mut wf = true;
            for x in xs {
                let r = eval_interval(x, dom);
                wf &= r.wrap_free;
                let (lo, hi) = corners(acc, r.iv, |a, b| sat(a.saturating_mul(b)));
                let next = escaped(wf, lo, hi);
                acc = next.iv;
                wf = next.wrap_free;
            }
            exact(acc, wf)
        }
        Node::Min(xs) | Node::Max(xs) => {
            let is_min = matches!(e.node(), Node::Min(_));
            let mut acc: Option<Interval> = None;
            let mut wf = true;
            for x in xs {
                let r = eval_interval(x, dom);
                wf &= r.wrap_free;
                acc = Some(match acc {
                    None => r.iv,
                    Some(a) if is_min => Interval { lo: a.lo.min(r.iv.lo), hi: a.hi.min(r.iv.hi) },
                    Some(a) => Interval { lo: a.lo.max(r.iv.lo), hi: a.hi.max(r.iv.hi) },
                });
            }
            exact(acc.expect("min/max holds operands"), wf)
        }
        Node::Div(a, b) => {
            let (a, b) = (eval_interval(a, dom), eval_interval(b, dom));
            if b.iv.lo <= 0 && b.iv.hi >= 0 {
                // The divisor may be zero: a trap, which no interval covers.
                return exact(FULL64, false);
            }
            let (lo, hi) = corners(a.iv, b.iv, |x, y| x / y);
            escaped(a.wrap_free && b.wrap_free, lo, hi)
        }
        Node::Rem(a, b) => {
            let (a, b) = (eval_interval(a, dom), eval_interval(b, dom));
            if b.iv.lo <= 0 && b.iv.hi >= 0 {
                return exact(FULL64, false);
            }
            let m = b.iv.lo.abs().max(b.iv.hi.abs()) - 1;
            let iv = Interval { lo: -m, hi: m }.meet(Interval {
                lo: if a.iv.lo >= 0 { 0 } else { a.iv.lo },
                hi: if a.iv.hi <= 0 { 0 } else { a.iv.hi },
            });
            escaped(a.wrap_free && b.wrap_free, iv.lo, iv.hi)
        }
        Node::And(a, b) => {
            let (a, b) = (eval_interval(a, dom), eval_interval(b, dom));
            let wf = a.wrap_free && b.wrap_free;
            // A nonnegative operand clears the sign bit and caps the result.
            let iv = match (a.iv.lo >= 0, b.iv.lo >= 0) {
                (true, true) => Interval { lo: 0, hi: a.iv.hi.min(b.iv.hi) },
                (true, false) => Interval { lo: 0, hi: a.iv.hi },
                (false, true) => Interval { lo: 0, hi: b.iv.hi },
                (false, false) => FULL64,
            };
            exact(iv, wf)
        }
        Node::Or(a, b) | Node::Xor(a, b) => {
            let (a, b) = (eval_interval(a, dom), eval_interval(b, dom));
            let wf = a.wrap_free && b.wrap_free;
            if a.iv.lo >= 0 && b.iv.lo >= 0 {
                let hi = next_pow2_minus1(a.iv.hi.max(b.iv.hi));
                let lo = if matches!(e.node(), Node::Or(..)) { a.iv.lo.max(b.iv.lo) } else { 0 };
                exact(Interval { lo, hi }, wf)
            } else {
                exact(FULL64, wf)
            }
        }
        Node::Shl(a, s) => {
            let (a, s) = (eval_interval(a, dom), eval_interval(s, dom));
            if s.iv.lo < 0 || s.iv.hi > 63 {
                // The count is masked mod 64; the jump at the mask boundary
                // has no mathematical reading, so treat it as a wrap.
                return exact(FULL64, false);
            }
            let (lo, hi) = corners(a.iv, s.iv, |x, y| sat(x.saturating_mul(1i128 << y)));
            escaped(a.wrap_free && s.wrap_free, lo, hi)
        }
        Node::Shr(a, s) => {
            let (a, s) = (eval_interval(a, dom), eval_interval(s, dom));
            if s.iv.lo < 0 || s.iv.hi > 63 {
                return exact(FULL64, false);
            }
            let (lo, hi) = corners(a.iv, s.iv, |x, y| x >> y);
            escaped(a.wrap_free && s.wrap_free, lo, hi)
        }
    }
}

/// Per-variable value domains: structural facts about the machine (thread id
/// ranges, buffer windows) refined by whatever the preconditions pin down.
#[derive(Debug, Clone)]
pub struct DomainMap {
    ivs: Vec<Interval>,
}

impl DomainMap {
    pub fn get(&self, v: SymVarId) -> Interval {
        self.ivs.get(v.0 as usize).copied().unwrap_or(FULL64)
    }

    /// Domain for a variable interned after construction (a rewrite-fresh
    /// var); bounds were computed by the caller.
    pub fn push(&mut self, v: SymVarId, iv: Interval) {
        assert_eq!(v.0 as usize, self.ivs.len(), "fresh vars are interned in order");
        self.ivs.push(iv);
    }

    pub fn build(vars: &VarTable, preconds: &[SymBool]) -> DomainMap {
        let mut ivs: Vec<Interval> = Vec::with_capacity(vars.len());
        for v in vars.ids() {
            let iv = match vars.origin(v) {
                VarOrigin::Bid => Interval { lo: 0, hi: (GDIM_CAP - 1) as i128 },
                VarOrigin::Tid => Interval { lo: 0, hi: (BDIM_CAP - 1) as i128 },
                VarOrigin::Bdim => Interval { lo: 1, hi: BDIM_CAP as i128 },
                VarOrigin::Gdim => Interval { lo: 1, hi: GDIM_CAP as i128 },
                VarOrigin::Param { kind: ParamKind::Buffer, .. } => {
                    Interval { lo: BUF_LO as i128, hi: BUF_HI as i128 }
                }
                VarOrigin::Param { kind: ParamKind::ScalarI32, .. } => {
                    Interval { lo: i32::MIN as i128, hi: i32::MAX as i128 }
                }
                VarOrigin::Param { kind: ParamKind::ScalarI64, .. } => FULL64,
                // Induction and Fresh bounds reference earlier vars; filled
                // below once params have been refined.
                VarOrigin::Induction { .. } | VarOrigin::Fresh { .. } => FULL64,
                VarOrigin::NonParam(_) => FULL64,
            };
            ivs.push(iv);
        }

        let mut flat = Vec::new();
        for c in preconds {
            flatten_conjuncts(c, &mut flat);
        }
        // A couple of passes so bounds referencing other parameters settle.
        for _ in 0..3 {
            for c in &flat {
                refine(&mut ivs, c);
            }
        }

        for v in vars.ids() {
            let idx = v.0 as usize;
            let dom = |u: SymVarId| ivs.get(u.0 as usize).copied().unwrap_or(FULL64);
            match vars.origin(v) {
                VarOrigin::Induction { initial, step, trip, .. } => {
                    let iv0 = eval_interval(initial, &dom).iv;
                    let end = match trip {
                        Some(t) => {
                            let last = SymExpr::add2(
                                initial.clone(),
                                SymExpr::mul2(
                                    SymExpr::constant(*step),
                                    SymExpr::sub(
                                        SymExpr::max2(t.clone(), SymExpr::constant(1)),
                                        SymExpr::constant(1),
                                    ),
                                ),
                            );
                            eval_interval(&last, &dom).iv
                        }
                        None => FULL64,
                    };
                    ivs[idx] = Interval::hull(iv0, end);
                }
                VarOrigin::Fresh { lo, hi } => {
                    let l = eval_interval(lo, &dom).iv;
                    let h = eval_interval(hi, &dom).iv;
                    ivs[idx] = Interval::new(l.lo.min(h.lo), h.hi.max(l.hi));
                }
                _ => {}
            }
        }
        DomainMap { ivs }
    }
}

fn flatten_conjuncts(b: &SymBool, out: &mut Vec<SymBool>) {
    use crate::sym::BNode;
    match b.node() {
        BNode::All(xs) => {
            for x in xs {
                flatten_conjuncts(x, out);
            }
        }
        _ => out.push(b.clone()),
    }
}

/// Narrow single-variable sides of a comparison. `v < e` caps v by the
/// *largest* value e can take (the bound must hold for every satisfying
/// assignment of e's own variables).
fn refine(ivs: &mut [Interval], c: &SymBool) {
    use crate::sym::BNode;
    let BNode::Cmp(op, a, b) = c.node() else { return };
    fn eval(ivs: &[Interval], e: &SymExpr) -> Interval {
        eval_interval(e, &|u: SymVarId| ivs.get(u.0 as usize).copied().unwrap_or(FULL64)).iv
    }
    if let Node::Var(v) = a.node() {
        let r = eval(ivs, b);
        let idx = v.0 as usize;
        match op {
            SymCmp::Lt => ivs[idx] = ivs[idx].meet(Interval { lo: I64_LO, hi: r.hi - 1 }),
            SymCmp::Le => ivs[idx] = ivs[idx].meet(Interval { lo: I64_LO, hi: r.hi }),
            SymCmp::Eq => ivs[idx] = ivs[idx].meet(r),
            SymCmp::Ne => {}
        }
    }
    if let Node::Var(v) = b.node() {
        let r = eval(ivs, a);
        let idx = v.0 as usize;
        match op {
            SymCmp::Lt => ivs[idx] = ivs[idx].meet(Interval { lo: r.lo + 1, hi: I64_HI }),
            SymCmp::Le => ivs[idx] = ivs[idx].meet(Interval { lo: r.lo, hi: I64_HI }),
            SymCmp::Eq => ivs[idx] = ivs[idx].meet(r),
            SymCmp::Ne => {}
        }
    }
}

/// The structural facts the domains assume, as runtime-checkable formulas.
/// Every plan carries these next to the kernel's own `@require` lines; an
/// instance outside the window is rejected before any range is trusted.
///
/// Buffer windows are always enforced (the domains assume them), but the
/// alignment part of the implicit buffer contract is dropped for a parameter
/// an explicit `@require` mentions.
pub fn structural_preconditions(vars: &VarTable, explicit: &[SymBool]) -> Vec<SymBool> {
    let mut mentioned = std::collections::BTreeSet::new();
    for c in explicit {
        c.vars_into(&mut mentioned);
    }
    let mut out = vec![
        SymBool::le(SymExpr::constant(1), SymExpr::var(BDIM)),
        SymBool::le(SymExpr::var(BDIM), SymExpr::constant(BDIM_CAP)),
        SymBool::le(SymExpr::constant(1), SymExpr::var(GDIM)),
        SymBool::le(SymExpr::var(GDIM), SymExpr::constant(GDIM_CAP)),
    ];
    for v in vars.ids() {
        match vars.origin(v) {
            VarOrigin::Param { kind: ParamKind::Buffer, .. } => {
                out.push(SymBool::le(SymExpr::constant(BUF_LO), SymExpr::var(v)));
                out.push(SymBool::le(SymExpr::var(v), SymExpr::constant(BUF_HI)));
                if !mentioned.contains(&v) {
                    out.push(SymBool::eq(
                        SymExpr::rem(SymExpr::var(v), SymExpr::constant(256)),
                        SymExpr::constant(0),
                    ));
                }
            }
            VarOrigin::Param { kind: ParamKind::ScalarI32, .. } => {
                out.push(SymBool::le(SymExpr::constant(i32::MIN as i64), SymExpr::var(v)));
                out.push(SymBool::le(SymExpr::var(v), SymExpr::constant(i32::MAX as i64)));
            }
            _ => {}
        }
    }
    out
}
