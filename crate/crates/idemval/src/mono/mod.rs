//! Order proofs and range rewriting for address expressions.
//!
//! The range model substitutes domain extremes of `bid`, `tid`, and loop
//! counters into an address to get its lowest and highest value. That is only
//! valid when the address moves one way as each of those variables grows, so
//! every claim here is a proof obligation, discharged in three steps:
//!
//! 1. wrap-freedom: interval evaluation shows no node of the expression can
//!    leave the signed 64-bit range, hence runtime (wrapping) arithmetic
//!    agrees with arithmetic over the integers;
//! 2. step sign: the expression minus itself shifted by one in the variable,
//!    normalized as a polynomial over opaque atoms, has a provably
//!    nonnegative (or nonpositive) value interval;
//! 3. refutation: a seeded sample of reduced-domain points double-checks the
//!    claim against concrete evaluation before it is returned.
//!
//! Addresses that resist the proof are rewritten: the smallest offending
//! subexpression is replaced by a fresh bounded variable (`tid % 10` becomes
//! `v` with `0 <= v <= 9`), which over-approximates the touched range but
//! never misses a byte. Addresses built from loaded values collapse to a
//! single unbounded variable and are reported opaque.

mod interval;
mod poly;

pub use interval::{
    eval_interval, structural_preconditions, DomainMap, Evald, Interval, BDIM_CAP, BUF_HI,
    BUF_LO, FULL64, GDIM_CAP,
};

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sym::{
    BNode, Node, SymBool, SymCmp, SymExpr, SymVarId, VarOrigin, VarTable, BDIM, GDIM,
};
use crate::AnalysisConfig;

use poly::{step_poly, AtomTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneVerdict {
    /// Never decreases as the variable increases through its domain.
    Increasing,
    /// Never increases.
    Decreasing,
    /// No sound claim; the caller must rewrite or give up on ranges.
    Unknown,
}

/// Result of [`MonoCtx::make_monotone`].
#[derive(Debug, Clone)]
pub struct MonoResult {
    pub addr: SymExpr,
    /// Fresh variables interned while rewriting (some may have been
    /// superseded by a later replacement and no longer appear in `addr`).
    pub fresh: Vec<SymVarId>,
    /// The address had to be collapsed to a full-range variable; nothing is
    /// known about where it points.
    pub opaque: bool,
}

/// Launch-evaluable bounds of one range variable: `lo <= var <= hi`, with
/// both sides formulas over params and dimensions only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBounds {
    pub var: SymVarId,
    pub lo: SymExpr,
    pub hi: SymExpr,
}

/// One kernel's proving context: the variable domains implied by structural
/// machine facts and the kernel's preconditions, plus the analysis budget.
pub struct MonoCtx {
    cfg: AnalysisConfig,
    deadline: Instant,
    pub domains: DomainMap,
}

/// `true` when every variable of `e` is fixed at launch (params, `bdim`,
/// `gdim`): such an expression is evaluable by the runtime validator.
pub fn params_dims_only(e: &SymExpr, vars: &VarTable) -> bool {
    e.vars().into_iter().all(|u| vars.is_launch_arg(u))
}

/// Condition counterpart of [`params_dims_only`].
pub fn params_dims_only_bool(b: &SymBool, vars: &VarTable) -> bool {
    b.vars().into_iter().all(|u| vars.is_launch_arg(u))
}

/// Variables an access ranges over within one launch.
pub fn is_range_var(vars: &VarTable, v: SymVarId) -> bool {
    matches!(
        vars.origin(v),
        VarOrigin::Bid | VarOrigin::Tid | VarOrigin::Induction { .. } | VarOrigin::Fresh { .. }
    )
}

impl MonoCtx {
    pub fn new(cfg: &AnalysisConfig, vars: &VarTable, preconds: &[SymBool]) -> MonoCtx {
        MonoCtx {
            cfg: cfg.clone(),
            deadline: Instant::now() + cfg.prover_budget,
            domains: DomainMap::build(vars, preconds),
        }
    }

    /// Is `e` monotone in `v` over the assumed domains?
    ///
    /// `Increasing`/`Decreasing` are sound claims about runtime values; both
    /// are weak (constant expressions count as either, and an expression not
    /// containing `v` is reported `Increasing`).
    pub fn check_monotone(&self, e: &SymExpr, v: SymVarId) -> MonotoneVerdict {
        if !e.contains_var(v) {
            // Step is identically zero; holds even for wrapping expressions.
            return MonotoneVerdict::Increasing;
        }
        if Instant::now() >= self.deadline {
            return MonotoneVerdict::Unknown;
        }
        let dom = |u: SymVarId| self.domains.get(u);
        if !eval_interval(e, &dom).wrap_free {
            return MonotoneVerdict::Unknown;
        }
        // Monotonicity over the domain reduces to comparing adjacent points
        // x and x+1, both inside the domain, so the shifted copy is
        // evaluated over the same domains (a superset of where it is used).
        let shifted =
            e.subst(&|u| (u == v).then(|| SymExpr::add2(SymExpr::var(v), SymExpr::constant(1))));
        if !eval_interval(&shifted, &dom).wrap_free {
            return MonotoneVerdict::Unknown;
        }
        let mut atoms = AtomTable::default();
        let Some(step) = step_poly(e, v, &mut atoms) else {
            return MonotoneVerdict::Unknown;
        };
        if step.is_zero() {
            return MonotoneVerdict::Increasing;
        }
        let b = step.bound(&atoms, &dom);
        let cand = if b.lo >= 0 {
            MonotoneVerdict::Increasing
        } else if b.hi <= 0 {
            MonotoneVerdict::Decreasing
        } else {
            return MonotoneVerdict::Unknown;
        };
        if self.refuted(e, v, cand) {
            return MonotoneVerdict::Unknown;
        }
        cand
    }

    /// Rewrite `addr` until it is monotone in every range variable it
    /// contains, introducing fresh bounded variables for the parts that
    /// resist proof. The result never covers fewer bytes than `addr`.
    pub fn make_monotone(&mut self, addr: &SymExpr, vars: &mut VarTable) -> MonoResult {
        if addr.vars().into_iter().any(|u| vars.is_non_param(u)) {
            // A loaded value anywhere poisons the whole address: its
            // contribution is unbounded, so no subterm bound helps.
            let id = self.intern_fresh(
                vars,
                SymExpr::constant(i64::MIN),
                SymExpr::constant(i64::MAX),
                FULL64,
            );
            return MonoResult { addr: SymExpr::var(id), fresh: vec![id], opaque: true };
        }
        let mut cur = addr.clone();
        let mut fresh = Vec::new();
        let mut opaque = false;
        for _ in 0..self.cfg.rewrite_max_iters.max(1) {
            if !self.has_offender(&cur, vars) {
                return MonoResult { addr: cur, fresh, opaque };
            }
            cur = self.sweep(&cur, vars, &mut fresh, &mut opaque);
        }
        if self.has_offender(&cur, vars) {
            // One sweep replaces offending nodes all the way up to the root,
            // so this is only reachable when the prover deadline expired
            // mid-sweep. Collapse whatever is left.
            let (lo, hi, iv, op) = self.fresh_bounds(&cur, vars);
            let id = self.intern_fresh(vars, lo, hi, iv);
            fresh.push(id);
            opaque |= op;
            cur = SymExpr::var(id);
        }
        MonoResult { addr: cur, fresh, opaque }
    }

    /// Bounds of one range variable: structural facts of its origin combined
    /// with whatever path conditions pin it tighter. Returns the indexes of
    /// the conditions that were absorbed into the bounds.
    pub fn tighten_bounds(
        &self,
        v: SymVarId,
        conds: &[SymBool],
        vars: &VarTable,
    ) -> (VarBounds, Vec<usize>) {
        let one = SymExpr::constant(1);
        let (slo, shi) = match vars.origin(v) {
            VarOrigin::Tid => {
                (SymExpr::constant(0), SymExpr::sub(SymExpr::var(BDIM), one.clone()))
            }
            VarOrigin::Bid => {
                (SymExpr::constant(0), SymExpr::sub(SymExpr::var(GDIM), one.clone()))
            }
            VarOrigin::Induction { initial, step, trip: Some(t), .. } => {
                let last = SymExpr::add2(
                    initial.clone(),
                    SymExpr::mul2(
                        SymExpr::constant(*step),
                        SymExpr::sub(SymExpr::max2(t.clone(), one.clone()), one.clone()),
                    ),
                );
                if *step >= 0 {
                    (initial.clone(), last)
                } else {
                    (last, initial.clone())
                }
            }
            VarOrigin::Fresh { lo, hi } => (lo.clone(), hi.clone()),
            _ => (SymExpr::constant(i64::MIN), SymExpr::constant(i64::MAX)),
        };
        let mut los = vec![slo];
        let mut his = vec![shi];
        let mut used = Vec::new();
        for (i, c) in conds.iter().enumerate() {
            let BNode::Cmp(op, a, b) = c.node() else { continue };
            let mut hit = false;
            // c*v + R  op  B  with B and R launch-evaluable.
            if let Some((coef, rest)) = var_part(a, v, vars) {
                if params_dims_only(b, vars) {
                    let rhs = SymExpr::sub(b.clone(), rest);
                    match op {
                        SymCmp::Lt => {
                            his.push(scaled(SymExpr::sub(rhs, one.clone()), coef));
                            hit = true;
                        }
                        SymCmp::Le => {
                            his.push(scaled(rhs, coef));
                            hit = true;
                        }
                        SymCmp::Eq => {
                            his.push(scaled(rhs.clone(), coef));
                            los.push(scaled(rhs, coef));
                            hit = true;
                        }
                        SymCmp::Ne => {}
                    }
                }
            }
            // B  op  c*v + R: the mirrored orientation yields lower bounds.
            if let Some((coef, rest)) = var_part(b, v, vars) {
                if params_dims_only(a, vars) {
                    let lhs = SymExpr::sub(a.clone(), rest);
                    match op {
                        SymCmp::Lt => {
                            los.push(scaled(SymExpr::add2(lhs, one.clone()), coef));
                            hit = true;
                        }
                        SymCmp::Le => {
                            los.push(scaled(lhs, coef));
                            hit = true;
                        }
                        SymCmp::Eq => {
                            los.push(scaled(lhs.clone(), coef));
                            his.push(scaled(lhs, coef));
                            hit = true;
                        }
                        SymCmp::Ne => {}
                    }
                }
            }
            if hit {
                used.push(i);
            }
        }
        (VarBounds { var: v, lo: SymExpr::max(los), hi: SymExpr::min(his) }, used)
    }

    fn has_offender(&self, e: &SymExpr, vars: &VarTable) -> bool {
        e.vars().into_iter().any(|u| {
            is_range_var(vars, u) && self.check_monotone(e, u) == MonotoneVerdict::Unknown
        })
    }

    /// Bottom-up pass: children are rewritten first, then the node itself is
    /// replaced by a fresh bounded variable if, with its new children, it is
    /// still not provably monotone in some range variable it contains.
    fn sweep(
        &mut self,
        e: &SymExpr,
        vars: &mut VarTable,
        fresh: &mut Vec<SymVarId>,
        opaque: &mut bool,
    ) -> SymExpr {
        let rebuilt = match e.node() {
            Node::Const(_) | Node::Var(_) => return e.clone(),
            Node::Add(xs) => SymExpr::add(self.sweep_all(xs, vars, fresh, opaque)),
            Node::Mul(xs) => SymExpr::mul(self.sweep_all(xs, vars, fresh, opaque)),
            Node::Min(xs) => SymExpr::min(self.sweep_all(xs, vars, fresh, opaque)),
            Node::Max(xs) => SymExpr::max(self.sweep_all(xs, vars, fresh, opaque)),
            Node::Div(a, b) => SymExpr::div(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::Rem(a, b) => SymExpr::rem(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::And(a, b) => SymExpr::band(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::Or(a, b) => SymExpr::bor(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::Xor(a, b) => SymExpr::bxor(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::Shl(a, b) => SymExpr::shl(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
            Node::Shr(a, b) => SymExpr::shr(
                self.sweep(a, vars, fresh, opaque),
                self.sweep(b, vars, fresh, opaque),
            ),
        };
        if !self.has_offender(&rebuilt, vars) {
            return rebuilt;
        }
        let (lo, hi, iv, op) = self.fresh_bounds(&rebuilt, vars);
        let id = self.intern_fresh(vars, lo, hi, iv);
        fresh.push(id);
        *opaque |= op;
        SymExpr::var(id)
    }

    fn sweep_all(
        &mut self,
        xs: &[SymExpr],
        vars: &mut VarTable,
        fresh: &mut Vec<SymVarId>,
        opaque: &mut bool,
    ) -> Vec<SymExpr> {
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            out.push(self.sweep(x, vars, fresh, opaque));
        }
        out
    }

    /// Launch-evaluable bounds for a replacement variable standing in for
    /// `e`. Patterns give tight symbolic bounds where the shape allows;
    /// anything else falls back to the value interval as constants.
    fn fresh_bounds(&self, e: &SymExpr, vars: &VarTable) -> (SymExpr, SymExpr, Interval, bool) {
        let dom = |u: SymVarId| self.domains.get(u);
        if let Node::Rem(x, m) = e.node() {
            let ivm = eval_interval(m, &dom).iv;
            let ivx = eval_interval(x, &dom).iv;
            if ivm.lo >= 1 && ivx.lo >= 0 {
                let cap = ivx.hi.min(ivm.hi - 1);
                let hi = if params_dims_only(m, vars) {
                    SymExpr::sub(m.clone(), SymExpr::constant(1))
                } else {
                    SymExpr::constant(cap as i64)
                };
                return (SymExpr::constant(0), hi, Interval::new(0, cap), false);
            }
        }
        if let Node::And(a, b) = e.node() {
            if let Some(c) = a.as_const().or_else(|| b.as_const()) {
                if c >= 0 {
                    return (
                        SymExpr::constant(0),
                        SymExpr::constant(c),
                        Interval::new(0, c as i128),
                        false,
                    );
                }
            }
        }
        let iv = eval_interval(e, &dom).iv;
        let opaque = iv == FULL64;
        (SymExpr::constant(iv.lo as i64), SymExpr::constant(iv.hi as i64), iv, opaque)
    }

    fn intern_fresh(
        &mut self,
        vars: &mut VarTable,
        lo: SymExpr,
        hi: SymExpr,
        iv: Interval,
    ) -> SymVarId {
        let k = vars
            .ids()
            .filter(|&u| matches!(vars.origin(u), VarOrigin::Fresh { .. }))
            .count();
        let name = if k == 0 { "v".to_string() } else { format!("v{}", k + 1) };
        let id = vars.intern(name, VarOrigin::Fresh { lo, hi });
        self.domains.push(id, iv);
        id
    }

    /// Sampling safety net: evaluate `e` at seeded points near the domain
    /// edges and reject the claim on any concrete counterexample. Sampling
    /// can only demote claims to `Unknown`, never manufacture one.
    fn refuted(&self, e: &SymExpr, v: SymVarId, cand: MonotoneVerdict) -> bool {
        let dv = self.domains.get(v);
        if dv.width() == 0 {
            return false;
        }
        let vs: Vec<SymVarId> = e.vars().into_iter().collect();
        let window = 1i128 << self.cfg.sample_bits.min(40);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.sample_seed ^ ((v.0 as u64) << 17));
        for k in 0u32..64 {
            let mut env: HashMap<SymVarId, i64> = HashMap::new();
            for &u in &vs {
                let d = self.domains.get(u);
                let w = (d.width() + 1).min(window);
                let off = rng.gen_range(0..w as u64) as i128;
                let val = if (k + u.0) % 2 == 0 { d.lo + off } else { d.hi - off };
                env.insert(u, val as i64);
            }
            // Clamp so both points of the adjacent pair are in-domain.
            let x = (env[&v]).min((dv.hi - 1) as i64);
            env.insert(v, x);
            let Ok(at_x) = e.eval(&|u| env.get(&u).copied()) else { continue };
            env.insert(v, x + 1);
            let Ok(at_x1) = e.eval(&|u| env.get(&u).copied()) else { continue };
            let bad = match cand {
                MonotoneVerdict::Increasing => at_x1 < at_x,
                MonotoneVerdict::Decreasing => at_x1 > at_x,
                MonotoneVerdict::Unknown => false,
            };
            if bad {
                return true;
            }
        }
        false
    }
}

/// `x` when the coefficient is 1, otherwise `x / c` (truncating). For upper
/// bounds truncation is at or above the exact floor, for lower bounds at or
/// below the exact ceiling, so the same quotient is sound on both sides.
fn scaled(x: SymExpr, c: i64) -> SymExpr {
    if c == 1 {
        x
    } else {
        SymExpr::div(x, SymExpr::constant(c))
    }
}

/// Match `e` as `c*v + rest` with `c > 0` and `rest` launch-evaluable.
fn var_part(e: &SymExpr, v: SymVarId, vars: &VarTable) -> Option<(i64, SymExpr)> {
    match e.node() {
        Node::Var(u) if *u == v => Some((1, SymExpr::constant(0))),
        Node::Mul(_) => mul_coeff(e, v).map(|c| (c, SymExpr::constant(0))),
        Node::Add(xs) => {
            let mut coef = None;
            let mut rest = Vec::new();
            for x in xs {
                if x.contains_var(v) {
                    if coef.is_some() {
                        return None;
                    }
                    coef = Some(match x.node() {
                        Node::Var(u) if *u == v => 1,
                        Node::Mul(_) => mul_coeff(x, v)?,
                        _ => return None,
                    });
                } else {
                    if !params_dims_only(x, vars) {
                        return None;
                    }
                    rest.push(x.clone());
                }
            }
            coef.map(|c| (c, SymExpr::add(rest)))
        }
        _ => None,
    }
}

fn mul_coeff(e: &SymExpr, v: SymVarId) -> Option<i64> {
    let Node::Mul(xs) = e.node() else { return None };
    if xs.len() == 2 {
        if let (Some(c), Node::Var(u)) = (xs[0].as_const(), xs[1].node()) {
            if *u == v && c > 0 {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::ParamKind;
    use crate::sym::{NonParamSource, BID, TID};

    /// Exact evaluation over the integers; `None` where runtime semantics
    /// leave the mathematical reading (trap, or a shift count outside 0..64).
    fn math_eval(e: &SymExpr, env: &HashMap<SymVarId, i64>) -> Option<i128> {
        Some(match e.node() {
            Node::Const(v) => *v as i128,
            Node::Var(u) => *env.get(u)? as i128,
            Node::Add(xs) => {
                let mut acc = 0i128;
                for x in xs {
                    acc += math_eval(x, env)?;
                }
                acc
            }
            Node::Mul(xs) => {
                let mut acc = 1i128;
                for x in xs {
                    acc = acc.checked_mul(math_eval(x, env)?)?;
                }
                acc
            }
            Node::Min(xs) => {
                let mut acc = i128::MAX;
                for x in xs {
                    acc = acc.min(math_eval(x, env)?);
                }
                acc
            }
            Node::Max(xs) => {
                let mut acc = i128::MIN;
                for x in xs {
                    acc = acc.max(math_eval(x, env)?);
                }
                acc
            }
            Node::Div(a, b) => {
                let (a, b) = (math_eval(a, env)?, math_eval(b, env)?);
                if b == 0 {
                    return None;
                }
                a / b
            }
            Node::Rem(a, b) => {
                let (a, b) = (math_eval(a, env)?, math_eval(b, env)?);
                if b == 0 {
                    return None;
                }
                a % b
            }
            Node::And(a, b) => math_eval(a, env)? & math_eval(b, env)?,
            Node::Or(a, b) => math_eval(a, env)? | math_eval(b, env)?,
            Node::Xor(a, b) => math_eval(a, env)? ^ math_eval(b, env)?,
            Node::Shl(a, b) => {
                let (a, b) = (math_eval(a, env)?, math_eval(b, env)?);
                if !(0..64).contains(&b) {
                    return None;
                }
                a.checked_mul(1i128 << b)?
            }
            Node::Shr(a, b) => {
                let (a, b) = (math_eval(a, env)?, math_eval(b, env)?);
                if !(0..64).contains(&b) {
                    return None;
                }
                a >> b
            }
        })
    }

    /// Small-domain fixture: tid in 0..=3, bid in 0..=2, N in -2..=3.
    fn fixture() -> (VarTable, SymVarId, Vec<SymBool>, MonoCtx) {
        let mut vars = VarTable::with_builtins();
        let n = vars.intern("N", VarOrigin::Param { index: 0, kind: ParamKind::ScalarI32 });
        let pre = vec![
            SymBool::lt(SymExpr::var(TID), SymExpr::constant(4)),
            SymBool::lt(SymExpr::var(BID), SymExpr::constant(3)),
            SymBool::le(SymExpr::constant(-2), SymExpr::var(n)),
            SymBool::le(SymExpr::var(n), SymExpr::constant(3)),
        ];
        let ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &pre);
        (vars, n, pre, ctx)
    }

    fn all_envs(ctx: &MonoCtx, vs: &[SymVarId]) -> Vec<HashMap<SymVarId, i64>> {
        let mut envs = vec![HashMap::new()];
        for &u in vs {
            let d = ctx.domains.get(u);
            let mut next = Vec::new();
            for env in &envs {
                for val in d.lo..=d.hi {
                    let mut e = env.clone();
                    e.insert(u, val as i64);
                    next.push(e);
                }
            }
            envs = next;
        }
        envs
    }

    fn rand_expr(rng: &mut ChaCha8Rng, vs: &[SymVarId], depth: u32) -> SymExpr {
        if depth == 0 || rng.gen_range(0..10) < 3 {
            return if rng.gen_range(0..2) == 0 {
                SymExpr::var(vs[rng.gen_range(0..vs.len())])
            } else {
                SymExpr::constant(rng.gen_range(-8..64))
            };
        }
        let a = rand_expr(rng, vs, depth - 1);
        let b = rand_expr(rng, vs, depth - 1);
        match rng.gen_range(0..14) {
            0 | 1 | 2 => SymExpr::add2(a, b),
            3 | 4 => SymExpr::mul2(a, b),
            5 => SymExpr::sub(a, b),
            6 => SymExpr::min2(a, b),
            7 => SymExpr::max2(a, b),
            8 => SymExpr::div(a, b),
            9 => SymExpr::rem(a, b),
            10 => SymExpr::band(a, b),
            11 => SymExpr::bor(a, b),
            12 => SymExpr::bxor(a, b),
            _ => SymExpr::shr(a, b),
        }
    }

    #[test]
    fn interval_contains_every_runtime_value() {
        let (_, n, _, ctx) = fixture();
        let vs = [TID, BID, n];
        let envs = all_envs(&ctx, &vs);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..400 {
            let e = rand_expr(&mut rng, &vs, 3);
            let ev = eval_interval(&e, &|u| ctx.domains.get(u));
            for env in &envs {
                let Ok(rt) = e.eval(&|u| env.get(&u).copied()) else {
                    assert!(!ev.wrap_free, "trapping expr claimed wrap-free: {:?}", e);
                    continue;
                };
                assert!(
                    ev.iv.lo <= rt as i128 && rt as i128 <= ev.iv.hi,
                    "{:?}: value {} outside [{}, {}] at {:?}",
                    e,
                    rt,
                    ev.iv.lo,
                    ev.iv.hi,
                    env
                );
                if ev.wrap_free {
                    // Wrap-free must mean runtime equals exact arithmetic.
                    match math_eval(&e, env) {
                        Some(m) => assert_eq!(m, rt as i128, "wrap-free mismatch: {:?}", e),
                        None => panic!("wrap-free expr left math domain: {:?}", e),
                    }
                }
            }
        }
    }

    #[test]
    fn prover_never_claims_wrongly() {
        let (_, n, _, ctx) = fixture();
        let vs = [TID, BID, n];
        let envs = all_envs(&ctx, &vs);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut claims = 0;
        for _ in 0..400 {
            let e = rand_expr(&mut rng, &vs, 3);
            for &v in &vs {
                if !e.contains_var(v) {
                    continue;
                }
                let verdict = ctx.check_monotone(&e, v);
                if verdict == MonotoneVerdict::Unknown {
                    continue;
                }
                claims += 1;
                let hi = ctx.domains.get(v).hi as i64;
                for env in &envs {
                    if env[&v] >= hi {
                        continue;
                    }
                    let Ok(at_x) = e.eval(&|u| env.get(&u).copied()) else { continue };
                    let mut env1 = env.clone();
                    env1.insert(v, env[&v] + 1);
                    let Ok(at_x1) = e.eval(&|u| env1.get(&u).copied()) else { continue };
                    match verdict {
                        MonotoneVerdict::Increasing => assert!(
                            at_x1 >= at_x,
                            "claimed increasing in {:?} but {} -> {}: {:?} at {:?}",
                            v,
                            at_x,
                            at_x1,
                            e,
                            env
                        ),
                        MonotoneVerdict::Decreasing => assert!(
                            at_x1 <= at_x,
                            "claimed decreasing in {:?} but {} -> {}: {:?} at {:?}",
                            v,
                            at_x,
                            at_x1,
                            e,
                            env
                        ),
                        MonotoneVerdict::Unknown => unreachable!(),
                    }
                }
            }
        }
        // The check is vacuous if the prover never commits; on this corpus
        // it proves plenty.
        assert!(claims > 100, "only {} claims over 400 exprs", claims);
    }

    fn grid_addr(vars: &mut VarTable) -> (SymExpr, SymVarId) {
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let idx = SymExpr::add2(
            SymExpr::mul2(SymExpr::var(BID), SymExpr::var(BDIM)),
            SymExpr::var(TID),
        );
        (SymExpr::add2(SymExpr::var(x), SymExpr::mul2(SymExpr::constant(4), idx)), x)
    }

    #[test]
    fn grid_linear_address_is_increasing() {
        let mut vars = VarTable::with_builtins();
        let (addr, _) = grid_addr(&mut vars);
        let ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        assert_eq!(ctx.check_monotone(&addr, TID), MonotoneVerdict::Increasing);
        assert_eq!(ctx.check_monotone(&addr, BID), MonotoneVerdict::Increasing);
        // Vacuous direction: the address does not mention gdim.
        assert_eq!(ctx.check_monotone(&addr, GDIM), MonotoneVerdict::Increasing);
    }

    #[test]
    fn reversed_index_is_decreasing() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let n = vars.intern("N", VarOrigin::Param { index: 1, kind: ParamKind::ScalarI32 });
        // X + 4*(N - 1 - tid)
        let addr = SymExpr::add2(
            SymExpr::var(x),
            SymExpr::mul2(
                SymExpr::constant(4),
                SymExpr::sub(
                    SymExpr::sub(SymExpr::var(n), SymExpr::constant(1)),
                    SymExpr::var(TID),
                ),
            ),
        );
        let ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        assert_eq!(ctx.check_monotone(&addr, TID), MonotoneVerdict::Decreasing);
        assert_eq!(ctx.check_monotone(&addr, BID), MonotoneVerdict::Increasing);
    }

    #[test]
    fn modulo_address_rewrites_to_bounded_var() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let addr = SymExpr::add2(
            SymExpr::var(x),
            SymExpr::rem(SymExpr::var(TID), SymExpr::constant(10)),
        );
        let mut ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        assert_eq!(ctx.check_monotone(&addr, TID), MonotoneVerdict::Unknown);

        let r = ctx.make_monotone(&addr, &mut vars);
        assert!(!r.opaque);
        assert_eq!(r.fresh.len(), 1);
        let f = r.fresh[0];
        assert_eq!(r.addr, SymExpr::add2(SymExpr::var(x), SymExpr::var(f)));
        match vars.origin(f) {
            VarOrigin::Fresh { lo, hi } => {
                assert_eq!(*lo, SymExpr::constant(0));
                assert_eq!(*hi, SymExpr::constant(9));
            }
            o => panic!("expected fresh origin, got {:?}", o),
        }
        assert_eq!(ctx.domains.get(f), Interval::new(0, 9));
        assert_eq!(ctx.check_monotone(&r.addr, f), MonotoneVerdict::Increasing);
        assert!(!r.addr.contains_var(TID));
    }

    #[test]
    fn masked_scaled_address_keeps_scale() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        // X + (tid & 7) * 8: only the mask is opaque, the scale survives.
        let addr = SymExpr::add2(
            SymExpr::var(x),
            SymExpr::mul2(
                SymExpr::band(SymExpr::var(TID), SymExpr::constant(7)),
                SymExpr::constant(8),
            ),
        );
        let mut ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        let r = ctx.make_monotone(&addr, &mut vars);
        assert!(!r.opaque);
        assert_eq!(r.fresh.len(), 1);
        let f = r.fresh[0];
        assert_eq!(
            r.addr,
            SymExpr::add2(
                SymExpr::var(x),
                SymExpr::mul2(SymExpr::var(f), SymExpr::constant(8))
            )
        );
        assert_eq!(ctx.domains.get(f), Interval::new(0, 7));
        assert_eq!(ctx.check_monotone(&r.addr, f), MonotoneVerdict::Increasing);
    }

    #[test]
    fn loaded_index_collapses_whole_address() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let ld = vars.intern("ld0", VarOrigin::NonParam(NonParamSource::Load { stmt: 3 }));
        let addr = SymExpr::add2(
            SymExpr::var(x),
            SymExpr::mul2(SymExpr::constant(4), SymExpr::var(ld)),
        );
        let mut ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        let r = ctx.make_monotone(&addr, &mut vars);
        assert!(r.opaque);
        assert_eq!(r.fresh.len(), 1);
        assert_eq!(r.addr, SymExpr::var(r.fresh[0]));
        assert_eq!(ctx.domains.get(r.fresh[0]), FULL64);
    }

    #[test]
    fn monotone_address_passes_through_unchanged() {
        let mut vars = VarTable::with_builtins();
        let (addr, _) = grid_addr(&mut vars);
        let mut ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        let r = ctx.make_monotone(&addr, &mut vars);
        assert_eq!(r.addr, addr);
        assert!(r.fresh.is_empty());
        assert!(!r.opaque);
    }

    #[test]
    fn scaled_offset_needs_positive_sign_to_stay_symbolic() {
        // tid * N is monotone in tid only when N's sign is pinned.
        let mut vars = VarTable::with_builtins();
        let n = vars.intern("N", VarOrigin::Param { index: 0, kind: ParamKind::ScalarI32 });
        let addr = SymExpr::mul2(SymExpr::var(TID), SymExpr::var(n));
        let free = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        assert_eq!(free.check_monotone(&addr, TID), MonotoneVerdict::Unknown);
        let pinned = MonoCtx::new(
            &AnalysisConfig::default(),
            &vars,
            &[SymBool::le(SymExpr::constant(0), SymExpr::var(n))],
        );
        assert_eq!(pinned.check_monotone(&addr, TID), MonotoneVerdict::Increasing);
    }

    #[test]
    fn symbolic_modulus_bound_needs_positive_precondition() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let m = vars.intern("M", VarOrigin::Param { index: 1, kind: ParamKind::ScalarI64 });
        let addr =
            SymExpr::add2(SymExpr::var(x), SymExpr::rem(SymExpr::var(TID), SymExpr::var(m)));
        let pre = vec![SymBool::le(SymExpr::constant(1), SymExpr::var(m))];
        let mut ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &pre);
        let r = ctx.make_monotone(&addr, &mut vars);
        assert!(!r.opaque);
        let f = r.fresh[0];
        match vars.origin(f) {
            VarOrigin::Fresh { lo, hi } => {
                assert_eq!(*lo, SymExpr::constant(0));
                assert_eq!(*hi, SymExpr::sub(SymExpr::var(m), SymExpr::constant(1)));
            }
            o => panic!("expected fresh origin, got {:?}", o),
        }
        // tid's own cap still bounds the value domain.
        assert_eq!(ctx.domains.get(f), Interval::new(0, BDIM_CAP as i128 - 1));
    }

    #[test]
    fn tighten_combines_structural_and_guard_bounds() {
        let (vars, n, _, ctx) = fixture();
        let conds = vec![SymBool::lt(SymExpr::var(TID), SymExpr::var(n))];
        let (b, used) = ctx.tighten_bounds(TID, &conds, &vars);
        assert_eq!(used, vec![0]);
        assert_eq!(b.lo, SymExpr::constant(0));
        assert_eq!(
            b.hi,
            SymExpr::min(vec![
                SymExpr::sub(SymExpr::var(BDIM), SymExpr::constant(1)),
                SymExpr::sub(SymExpr::var(n), SymExpr::constant(1)),
            ])
        );
    }

    #[test]
    fn tighten_divides_scaled_guards_soundly() {
        let (vars, n, _, ctx) = fixture();
        // 4*tid <= N  =>  tid <= N/4 (truncation can only loosen upward).
        let upper = SymBool::le(
            SymExpr::mul2(SymExpr::constant(4), SymExpr::var(TID)),
            SymExpr::var(n),
        );
        // N < 4*tid  =>  tid >= (N+1)/4 (truncation can only loosen down).
        let lower = SymBool::lt(
            SymExpr::var(n),
            SymExpr::mul2(SymExpr::constant(4), SymExpr::var(TID)),
        );
        let (b, used) = ctx.tighten_bounds(TID, &[upper, lower], &vars);
        assert_eq!(used, vec![0, 1]);
        assert_eq!(
            b.hi,
            SymExpr::min(vec![
                SymExpr::sub(SymExpr::var(BDIM), SymExpr::constant(1)),
                SymExpr::div(SymExpr::var(n), SymExpr::constant(4)),
            ])
        );
        assert_eq!(
            b.lo,
            SymExpr::max(vec![
                SymExpr::constant(0),
                SymExpr::div(
                    SymExpr::add2(SymExpr::var(n), SymExpr::constant(1)),
                    SymExpr::constant(4)
                ),
            ])
        );
    }

    #[test]
    fn tighten_ignores_conditions_mixing_range_vars() {
        let (vars, n, _, ctx) = fixture();
        let mixed = SymBool::lt(
            SymExpr::add2(SymExpr::var(TID), SymExpr::var(BID)),
            SymExpr::var(n),
        );
        let (b, used) = ctx.tighten_bounds(TID, &[mixed], &vars);
        assert!(used.is_empty());
        assert_eq!(b.hi, SymExpr::sub(SymExpr::var(BDIM), SymExpr::constant(1)));
    }

    #[test]
    fn induction_bounds_follow_initial_step_trip() {
        let mut vars = VarTable::with_builtins();
        let n = vars.intern("N", VarOrigin::Param { index: 0, kind: ParamKind::ScalarI32 });
        let up = vars.intern(
            "i",
            VarOrigin::Induction {
                loop_stmt: 0,
                initial: SymExpr::constant(0),
                step: 1,
                trip: Some(SymExpr::var(n)),
            },
        );
        let down = vars.intern(
            "j",
            VarOrigin::Induction {
                loop_stmt: 1,
                initial: SymExpr::var(n),
                step: -1,
                trip: Some(SymExpr::var(n)),
            },
        );
        let ctx = MonoCtx::new(&AnalysisConfig::default(), &vars, &[]);
        let last = SymExpr::sub(
            SymExpr::max2(SymExpr::var(n), SymExpr::constant(1)),
            SymExpr::constant(1),
        );
        let (b, used) = ctx.tighten_bounds(up, &[], &vars);
        assert!(used.is_empty());
        assert_eq!(b.lo, SymExpr::constant(0));
        assert_eq!(b.hi, last.clone());

        let (b, _) = ctx.tighten_bounds(down, &[], &vars);
        // Counting down from N: the final value is N - (max(N,1) - 1).
        assert_eq!(b.lo, SymExpr::sub(SymExpr::var(n), last));
        assert_eq!(b.hi, SymExpr::var(n));
    }

    #[test]
    fn structural_preconditions_cover_assumed_windows() {
        let mut vars = VarTable::with_builtins();
        let x = vars.intern("X", VarOrigin::Param { index: 0, kind: ParamKind::Buffer });
        let y = vars.intern("Y", VarOrigin::Param { index: 1, kind: ParamKind::Buffer });
        let n = vars.intern("N", VarOrigin::Param { index: 2, kind: ParamKind::ScalarI32 });
        let explicit = vec![SymBool::le(SymExpr::constant(4096), SymExpr::var(y))];
        let got = structural_preconditions(&vars, &explicit);
        let align =
            |v| SymBool::eq(SymExpr::rem(SymExpr::var(v), SymExpr::constant(256)), SymExpr::constant(0));
        assert!(got.contains(&SymBool::le(SymExpr::var(BDIM), SymExpr::constant(BDIM_CAP))));
        assert!(got.contains(&SymBool::le(SymExpr::var(GDIM), SymExpr::constant(GDIM_CAP))));
        assert!(got.contains(&SymBool::le(SymExpr::constant(BUF_LO), SymExpr::var(x))));
        assert!(got.contains(&SymBool::le(SymExpr::var(x), SymExpr::constant(BUF_HI))));
        // Alignment is implicit for X, overridden for Y, absent for scalars.
        assert!(got.contains(&align(x)));
        assert!(!got.contains(&align(y)));
        assert!(got.contains(&SymBool::le(SymExpr::var(y), SymExpr::constant(BUF_HI))));
        assert!(got.contains(&SymBool::le(SymExpr::var(n), SymExpr::constant(i32::MAX as i64))));
    }

    #[test]
    fn domains_refine_from_preconditions() {
        let (_, n, _, ctx) = fixture();
        assert_eq!(ctx.domains.get(TID), Interval::new(0, 3));
        assert_eq!(ctx.domains.get(BID), Interval::new(0, 2));
        assert_eq!(ctx.domains.get(n), Interval::new(-2, 3));
    }
}
