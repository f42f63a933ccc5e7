//! The launch-time validator: decides idempotency of one instance in
//! microseconds.
//!
//! [`compile_plan`] lowers a kernel's analysis into a flat register program
//! evaluated straight-line at validation time, in three segments with early
//! exit: preconditions, then the global condition, then descriptor guards
//! and bounds. The pair loop intersects byte extents of every read against
//! every write. [`validate_strawman`] is the baseline it is benchmarked
//! against: per-thread enumeration of every access of the unrolled summary.
//!
//! Division by zero while evaluating a segment cannot be ruled idempotent,
//! so it yields that segment's violation verdict (sticky trap, no panic).

mod artifact;

pub use artifact::{read_artifact, write_artifact, ArtifactError};

use std::cell::RefCell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ir::ParamKind;
use crate::range::KernelAnalysis;
use crate::sym::{
    AccessSite, EvalError, KernelClass, NonIdemReason, SymBool, SymExpr, SymVarId, VarOrigin,
    BDIM, BID, GDIM, TID,
};

/// One kernel launch as the runtime sees it: argument values plus grid and
/// block sizes. Everything the validator may consult.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub kernel: String,
    pub args: Vec<i64>,
    pub gdim: u32,
    pub bdim: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Decision {
    Idempotent,
    NonIdempotent(Cause),
}

/// Why an instance failed validation. `Overlap` carries the witness pair
/// and the intersecting byte interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Cause {
    /// The kernel never validates, for the classified reason.
    KernelLevel(NonIdemReason),
    PreconditionViolated,
    /// Launch outside the analyzed window (an unrolling budget, usually).
    GlobalConditionViolated,
    /// An address the analysis could not bound is live alongside an access
    /// of the opposite kind.
    OpaqueAddress,
    Overlap {
        read: AccessSite,
        write: AccessSite,
        /// First and last overlapping byte.
        lo: i64,
        hi: i64,
        /// A witness descriptor assumed a condition on loaded values; the
        /// overlap may be spurious.
        assumed: bool,
    },
    /// The strawman found a concrete read byte also written.
    EnumeratedOverlap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub latency_ns: u64,
}

impl Verdict {
    pub fn is_idempotent(&self) -> bool {
        self.decision == Decision::Idempotent
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("instance is for kernel `{got}` but the plan is for `{expected}`")]
    KernelMismatch { expected: String, got: String },
    #[error("kernel `{kernel}` takes {expected} arguments, instance has {got}")]
    ArgCount { kernel: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlanOp {
    Add,
    Mul,
    Div,
    Rem,
    Min,
    Max,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Lt,
    Le,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy)]
struct Inst {
    op: PlanOp,
    dst: u32,
    a: u32,
    b: u32,
}

#[derive(Debug, Clone)]
struct PlanDesc {
    kind: crate::sym::AccessKind,
    width: u8,
    lb: u32,
    ub: u32,
    /// Bool registers; the descriptor is active when all are 1.
    guards: Vec<u32>,
    opaque: bool,
    nc: bool,
    site: AccessSite,
}

/// Register program deciding one kernel's launches. Compile once per
/// kernel, validate per launch.
#[derive(Debug, Clone)]
pub struct Plan {
    kernel: String,
    class: KernelClass,
    n_regs: u32,
    consts: Vec<(u32, i64)>,
    /// `(register, argument index, sign-extend from 32 bits)`.
    params: Vec<(u32, usize, bool)>,
    bdim_reg: u32,
    gdim_reg: u32,
    code: Vec<Inst>,
    pre_end: u32,
    glob_end: u32,
    pre_checks: Vec<u32>,
    glob_checks: Vec<u32>,
    descs: Vec<PlanDesc>,
    /// Precomputed (read, write) descriptor index pairs.
    pairs: Vec<(u32, u32)>,
    n_args: usize,
}

impl Plan {
    pub fn kernel(&self) -> &str {
        &self.kernel
    }

    pub fn class(&self) -> KernelClass {
        self.class
    }

    /// Instructions across all three segments; a proxy for plan size.
    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }
}

struct Compiler<'a> {
    vars: &'a crate::sym::VarTable,
    next: u32,
    consts: Vec<(u32, i64)>,
    const_map: std::collections::HashMap<i64, u32>,
    params: Vec<(u32, usize, bool)>,
    var_map: std::collections::HashMap<SymVarId, u32>,
    expr_map: std::collections::HashMap<SymExpr, u32>,
    bool_map: std::collections::HashMap<SymBool, u32>,
    code: Vec<Inst>,
    bdim_reg: u32,
    gdim_reg: u32,
}

impl<'a> Compiler<'a> {
    fn new(vars: &'a crate::sym::VarTable) -> Compiler<'a> {
        let mut c = Compiler {
            vars,
            next: 0,
            consts: Vec::new(),
            const_map: std::collections::HashMap::new(),
            params: Vec::new(),
            var_map: std::collections::HashMap::new(),
            expr_map: std::collections::HashMap::new(),
            bool_map: std::collections::HashMap::new(),
            code: Vec::new(),
            bdim_reg: 0,
            gdim_reg: 0,
        };
        c.bdim_reg = c.alloc();
        c.gdim_reg = c.alloc();
        c
    }

    fn alloc(&mut self) -> u32 {
        let r = self.next;
        self.next += 1;
        r
    }

    fn const_reg(&mut self, v: i64) -> u32 {
        if let Some(&r) = self.const_map.get(&v) {
            return r;
        }
        let r = self.alloc();
        self.consts.push((r, v));
        self.const_map.insert(v, r);
        r
    }

    fn var_reg(&mut self, v: SymVarId) -> u32 {
        if let Some(&r) = self.var_map.get(&v) {
            return r;
        }
        let r = match self.vars.origin(v) {
            VarOrigin::Bdim => self.bdim_reg,
            VarOrigin::Gdim => self.gdim_reg,
            VarOrigin::Param { index, kind } => {
                let r = self.alloc();
                self.params.push((r, *index, *kind == ParamKind::ScalarI32));
                r
            }
            other => unreachable!(
                "plan expressions are launch-evaluable; `{}` has origin {other:?}",
                self.vars.name(v)
            ),
        };
        self.var_map.insert(v, r);
        r
    }

    fn emit(&mut self, op: PlanOp, a: u32, b: u32) -> u32 {
        let dst = self.alloc();
        self.code.push(Inst { op, dst, a, b });
        dst
    }

    fn fold(&mut self, op: PlanOp, xs: &[SymExpr]) -> u32 {
        let mut acc = self.expr(&xs[0]);
        for x in &xs[1..] {
            let r = self.expr(x);
            acc = self.emit(op, acc, r);
        }
        acc
    }

    fn expr(&mut self, e: &SymExpr) -> u32 {
        if let Some(&r) = self.expr_map.get(e) {
            return r;
        }
        use crate::sym::Node;
        let r = match e.node() {
            Node::Const(v) => self.const_reg(*v),
            Node::Var(v) => self.var_reg(*v),
            Node::Add(xs) => self.fold(PlanOp::Add, xs),
            Node::Mul(xs) => self.fold(PlanOp::Mul, xs),
            Node::Min(xs) => self.fold(PlanOp::Min, xs),
            Node::Max(xs) => self.fold(PlanOp::Max, xs),
            Node::Div(a, b) => self.pair(PlanOp::Div, a, b),
            Node::Rem(a, b) => self.pair(PlanOp::Rem, a, b),
            Node::And(a, b) => self.pair(PlanOp::And, a, b),
            Node::Or(a, b) => self.pair(PlanOp::Or, a, b),
            Node::Xor(a, b) => self.pair(PlanOp::Xor, a, b),
            Node::Shl(a, b) => self.pair(PlanOp::Shl, a, b),
            Node::Shr(a, b) => self.pair(PlanOp::Shr, a, b),
        };
        self.expr_map.insert(e.clone(), r);
        r
    }

    fn pair(&mut self, op: PlanOp, a: &SymExpr, b: &SymExpr) -> u32 {
        let (ra, rb) = (self.expr(a), self.expr(b));
        self.emit(op, ra, rb)
    }

    /// Bool register holding 0 or 1.
    fn cond(&mut self, b: &SymBool) -> u32 {
        if let Some(&r) = self.bool_map.get(b) {
            return r;
        }
        use crate::sym::{BNode, SymCmp};
        let r = match b.node() {
            BNode::Const(v) => self.const_reg(*v as i64),
            BNode::Cmp(op, x, y) => {
                let op = match op {
                    SymCmp::Lt => PlanOp::Lt,
                    SymCmp::Le => PlanOp::Le,
                    SymCmp::Eq => PlanOp::Eq,
                    SymCmp::Ne => PlanOp::Ne,
                };
                self.pair(op, x, y)
            }
            BNode::All(xs) => {
                let mut acc = self.cond(&xs[0]);
                for x in &xs[1..] {
                    let r = self.cond(x);
                    acc = self.emit(PlanOp::And, acc, r);
                }
                acc
            }
            BNode::Any(xs) => {
                let mut acc = self.cond(&xs[0]);
                for x in &xs[1..] {
                    let r = self.cond(x);
                    acc = self.emit(PlanOp::Or, acc, r);
                }
                acc
            }
        };
        self.bool_map.insert(b.clone(), r);
        r
    }
}

pub fn compile_plan(analysis: &KernelAnalysis) -> Plan {
    let vars = &analysis.summary.vars;
    let mut c = Compiler::new(vars);

    let pre_checks: Vec<u32> = analysis.preconditions.iter().map(|p| c.cond(p)).collect();
    let pre_end = c.code.len() as u32;
    let glob_checks: Vec<u32> =
        analysis.summary.global_condition.iter().map(|g| c.cond(g)).collect();
    let glob_end = c.code.len() as u32;

    let descs: Vec<PlanDesc> = analysis
        .descriptors
        .iter()
        .map(|d| {
            let guards = d.guard.iter().map(|g| c.cond(g)).collect();
            let (lb, ub) = if d.opaque {
                (c.const_reg(i64::MIN), c.const_reg(i64::MAX))
            } else {
                (c.expr(&d.lb), c.expr(&d.ub))
            };
            PlanDesc {
                kind: d.kind,
                width: d.width,
                lb,
                ub,
                guards,
                opaque: d.opaque,
                nc: d.nc,
                site: d.provenance.clone(),
            }
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, r) in descs.iter().enumerate() {
        if r.kind != crate::sym::AccessKind::Read {
            continue;
        }
        for (j, w) in descs.iter().enumerate() {
            if w.kind == crate::sym::AccessKind::Write {
                pairs.push((i as u32, j as u32));
            }
        }
    }

    let n_args = vars
        .ids()
        .filter(|&v| matches!(vars.origin(v), VarOrigin::Param { .. }))
        .count();

    Plan {
        kernel: analysis.summary.kernel.clone(),
        class: analysis.class,
        n_regs: c.next,
        consts: c.consts,
        params: c.params,
        bdim_reg: c.bdim_reg,
        gdim_reg: c.gdim_reg,
        code: c.code,
        pre_end,
        glob_end,
        pre_checks,
        glob_checks,
        descs,
        pairs,
        n_args,
    }
}

thread_local! {
    static SCRATCH: RefCell<Vec<i64>> = const { RefCell::new(Vec::new()) };
}

#[inline]
fn run_seg(code: &[Inst], s: &mut [i64], trap: &mut bool) {
    for i in code {
        let a = s[i.a as usize];
        let b = s[i.b as usize];
        s[i.dst as usize] = match i.op {
            PlanOp::Add => a.wrapping_add(b),
            PlanOp::Mul => a.wrapping_mul(b),
            PlanOp::Div => {
                if b == 0 {
                    *trap = true;
                    0
                } else {
                    a.wrapping_div(b)
                }
            }
            PlanOp::Rem => {
                if b == 0 {
                    *trap = true;
                    0
                } else {
                    a.wrapping_rem(b)
                }
            }
            PlanOp::Min => a.min(b),
            PlanOp::Max => a.max(b),
            PlanOp::And => a & b,
            PlanOp::Or => a | b,
            PlanOp::Xor => a ^ b,
            PlanOp::Shl => a.wrapping_shl(b as u32),
            PlanOp::Shr => a.wrapping_shr(b as u32),
            PlanOp::Lt => (a < b) as i64,
            PlanOp::Le => (a <= b) as i64,
            PlanOp::Eq => (a == b) as i64,
            PlanOp::Ne => (a != b) as i64,
        };
    }
}

/// Decide one instance against a compiled plan. The verdict carries the
/// wall-clock latency of the decision itself.
pub fn validate(plan: &Plan, inst: &Instance) -> Result<Verdict, PlanError> {
    let t0 = Instant::now();
    let decision = decide(plan, inst)?;
    Ok(Verdict { decision, latency_ns: t0.elapsed().as_nanos() as u64 })
}

fn decide(plan: &Plan, inst: &Instance) -> Result<Decision, PlanError> {
    if inst.kernel != plan.kernel {
        return Err(PlanError::KernelMismatch {
            expected: plan.kernel.clone(),
            got: inst.kernel.clone(),
        });
    }
    match plan.class {
        KernelClass::Idempotent => return Ok(Decision::Idempotent),
        KernelClass::NonIdempotent(r) => {
            return Ok(Decision::NonIdempotent(Cause::KernelLevel(r)))
        }
        KernelClass::CondIdempotent => {}
    }
    if inst.args.len() != plan.n_args {
        return Err(PlanError::ArgCount {
            kernel: plan.kernel.clone(),
            expected: plan.n_args,
            got: inst.args.len(),
        });
    }
    SCRATCH.with(|cell| {
        let mut s = cell.borrow_mut();
        if s.len() < plan.n_regs as usize {
            s.resize(plan.n_regs as usize, 0);
        }
        Ok(run_plan(plan, inst, &mut s))
    })
}

fn run_plan(plan: &Plan, inst: &Instance, s: &mut [i64]) -> Decision {
    for &(r, v) in &plan.consts {
        s[r as usize] = v;
    }
    for &(r, idx, narrow) in &plan.params {
        let v = inst.args[idx];
        s[r as usize] = if narrow { (v as i32) as i64 } else { v };
    }
    s[plan.bdim_reg as usize] = inst.bdim as i64;
    s[plan.gdim_reg as usize] = inst.gdim as i64;

    let mut trap = false;
    run_seg(&plan.code[..plan.pre_end as usize], s, &mut trap);
    if trap || plan.pre_checks.iter().any(|&r| s[r as usize] == 0) {
        return Decision::NonIdempotent(Cause::PreconditionViolated);
    }
    run_seg(&plan.code[plan.pre_end as usize..plan.glob_end as usize], s, &mut trap);
    if trap || plan.glob_checks.iter().any(|&r| s[r as usize] == 0) {
        return Decision::NonIdempotent(Cause::GlobalConditionViolated);
    }
    run_seg(&plan.code[plan.glob_end as usize..], s, &mut trap);
    if trap {
        return Decision::NonIdempotent(Cause::OpaqueAddress);
    }

    // Activity, then opaque coexistence: an unbounded access alongside any
    // active access of the opposite kind cannot be ruled non-overlapping.
    let active: Vec<bool> = plan
        .descs
        .iter()
        .map(|d| d.guards.iter().all(|&r| s[r as usize] != 0))
        .collect();
    let mut live_read = false;
    let mut live_write = false;
    let mut opaque_read = false;
    let mut opaque_write = false;
    for (d, &on) in plan.descs.iter().zip(&active) {
        if !on {
            continue;
        }
        match d.kind {
            crate::sym::AccessKind::Read => {
                live_read = true;
                opaque_read |= d.opaque;
            }
            crate::sym::AccessKind::Write => {
                live_write = true;
                opaque_write |= d.opaque;
            }
            crate::sym::AccessKind::Atomic => {}
        }
    }
    if (opaque_read && live_write) || (opaque_write && live_read) {
        return Decision::NonIdempotent(Cause::OpaqueAddress);
    }

    for &(i, j) in &plan.pairs {
        if !active[i as usize] || !active[j as usize] {
            continue;
        }
        let r = &plan.descs[i as usize];
        let w = &plan.descs[j as usize];
        if r.opaque || w.opaque {
            continue;
        }
        let r_lo = s[r.lb as usize];
        let r_hi = s[r.ub as usize].saturating_add((r.width - 1) as i64);
        let w_lo = s[w.lb as usize];
        let w_hi = s[w.ub as usize].saturating_add((w.width - 1) as i64);
        let lo = r_lo.max(w_lo);
        let hi = r_hi.min(w_hi);
        if lo <= hi {
            return Decision::NonIdempotent(Cause::Overlap {
                read: r.site.clone(),
                write: w.site.clone(),
                lo,
                hi,
                assumed: r.nc || w.nc,
            });
        }
    }
    Decision::Idempotent
}

/// Baseline validator: enumerate every thread's accesses of the summary
/// and intersect concrete byte intervals. Orders of magnitude slower than
/// the plan; exists to be measured against.
///
/// Shares the summary's limits: iterations beyond the unrolling budget are
/// absent, so its answer is only meaningful where the global condition
/// holds, and conditions on loaded values are assumed true.
pub fn validate_strawman(analysis: &KernelAnalysis, inst: &Instance) -> Result<Verdict, PlanError> {
    let t0 = Instant::now();
    let decision = strawman_decide(analysis, inst)?;
    Ok(Verdict { decision, latency_ns: t0.elapsed().as_nanos() as u64 })
}

fn strawman_decide(analysis: &KernelAnalysis, inst: &Instance) -> Result<Decision, PlanError> {
    let summary = &analysis.summary;
    if inst.kernel != summary.kernel {
        return Err(PlanError::KernelMismatch {
            expected: summary.kernel.clone(),
            got: inst.kernel.clone(),
        });
    }
    match analysis.class {
        KernelClass::Idempotent => return Ok(Decision::Idempotent),
        KernelClass::NonIdempotent(r) => {
            return Ok(Decision::NonIdempotent(Cause::KernelLevel(r)))
        }
        KernelClass::CondIdempotent => {}
    }
    let vars = &summary.vars;
    let mut env: Vec<Option<i64>> = vec![None; vars.len()];
    let mut n_params = 0;
    for v in vars.ids() {
        if let VarOrigin::Param { index, kind } = vars.origin(v) {
            n_params += 1;
            let Some(&raw) = inst.args.get(*index) else { continue };
            env[v.0 as usize] = Some(if *kind == ParamKind::ScalarI32 {
                (raw as i32) as i64
            } else {
                raw
            });
        }
    }
    if inst.args.len() != n_params {
        return Err(PlanError::ArgCount {
            kernel: summary.kernel.clone(),
            expected: n_params,
            got: inst.args.len(),
        });
    }
    env[BDIM.0 as usize] = Some(inst.bdim as i64);
    env[GDIM.0 as usize] = Some(inst.gdim as i64);

    let mut reads: Vec<(i64, i64)> = Vec::new();
    let mut writes: Vec<(i64, i64)> = Vec::new();
    let mut opaque_read = false;
    let mut opaque_write = false;
    for bid in 0..inst.gdim as i64 {
        for tid in 0..inst.bdim as i64 {
            env[BID.0 as usize] = Some(bid);
            env[TID.0 as usize] = Some(tid);
            enumerate_thread(
                summary,
                0,
                &mut env,
                &mut reads,
                &mut writes,
                &mut opaque_read,
                &mut opaque_write,
            );
        }
    }
    if (opaque_read && (opaque_write || !writes.is_empty()))
        || (opaque_write && !reads.is_empty())
    {
        return Ok(Decision::NonIdempotent(Cause::OpaqueAddress));
    }
    reads.sort_unstable();
    writes.sort_unstable();
    if intervals_intersect(&reads, &writes) {
        return Ok(Decision::NonIdempotent(Cause::EnumeratedOverlap));
    }
    Ok(Decision::Idempotent)
}

fn enumerate_thread(
    summary: &crate::sym::SymbolicSummary,
    depth: usize,
    env: &mut Vec<Option<i64>>,
    reads: &mut Vec<(i64, i64)>,
    writes: &mut Vec<(i64, i64)>,
    opaque_read: &mut bool,
    opaque_write: &mut bool,
) {
    if let Some(info) = summary.induction.get(depth) {
        let lookup = |v: SymVarId| env.get(v.0 as usize).copied().flatten();
        let (Ok(init), Some(trip)) = (info.initial.eval(&lookup), &info.trip) else {
            // A loop the launch arguments cannot bound: give up on this
            // access set entirely.
            *opaque_read = true;
            *opaque_write = true;
            return;
        };
        let Ok(trip) = trip.eval(&lookup) else {
            *opaque_read = true;
            *opaque_write = true;
            return;
        };
        for k in 0..trip.max(0) {
            env[info.var.0 as usize] = Some(init + k * info.step);
            enumerate_thread(summary, depth + 1, env, reads, writes, opaque_read, opaque_write);
        }
        env[info.var.0 as usize] = None;
        return;
    }
    let lookup = |v: SymVarId| env.get(v.0 as usize).copied().flatten();
    'access: for a in &summary.accesses {
        for c in &a.path_conditions {
            match c.eval(&lookup) {
                Ok(false) => continue 'access,
                // Unknown (loaded value) or trapping: assume taken.
                Ok(true) | Err(_) => {}
            }
        }
        let sink = match a.kind {
            crate::sym::AccessKind::Read => &mut *reads,
            crate::sym::AccessKind::Write | crate::sym::AccessKind::Atomic => &mut *writes,
        };
        match a.address.eval(&lookup) {
            Ok(addr) => {
                sink.push((addr, addr.saturating_add((a.width.bytes() - 1) as i64)));
            }
            Err(EvalError::Unbound(_)) | Err(EvalError::DivByZero) => match a.kind {
                crate::sym::AccessKind::Read => *opaque_read = true,
                _ => *opaque_write = true,
            },
        }
    }
}

/// Two sorted interval lists share a byte iff a sweep finds them crossing.
fn intervals_intersect(xs: &[(i64, i64)], ys: &[(i64, i64)]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < xs.len() && j < ys.len() {
        let (xl, xh) = xs[i];
        let (yl, yh) = ys[j];
        if xl.max(yl) <= xh.min(yh) {
            return true;
        }
        if xh < yh {
            i += 1;
        } else {
            j += 1;
        }
    }
    false
}

/// Slow reference for the compiled plan: the same decision procedure, but
/// evaluating the analysis expressions directly. Differential tests hold
/// the plan to this.
pub fn validate_reference(analysis: &KernelAnalysis, inst: &Instance) -> Result<Decision, PlanError> {
    let vars = &analysis.summary.vars;
    match analysis.class {
        KernelClass::Idempotent => return Ok(Decision::Idempotent),
        KernelClass::NonIdempotent(r) => {
            return Ok(Decision::NonIdempotent(Cause::KernelLevel(r)))
        }
        KernelClass::CondIdempotent => {}
    }
    let mut env: Vec<Option<i64>> = vec![None; vars.len()];
    let mut n_params = 0;
    for v in vars.ids() {
        if let VarOrigin::Param { index, kind } = vars.origin(v) {
            n_params += 1;
            let Some(&raw) = inst.args.get(*index) else { continue };
            env[v.0 as usize] = Some(if *kind == ParamKind::ScalarI32 {
                (raw as i32) as i64
            } else {
                raw
            });
        }
    }
    if inst.args.len() != n_params {
        return Err(PlanError::ArgCount {
            kernel: analysis.summary.kernel.clone(),
            expected: n_params,
            got: inst.args.len(),
        });
    }
    env[BDIM.0 as usize] = Some(inst.bdim as i64);
    env[GDIM.0 as usize] = Some(inst.gdim as i64);
    let lookup = |v: SymVarId| env.get(v.0 as usize).copied().flatten();

    for p in &analysis.preconditions {
        if p.eval(&lookup) != Ok(true) {
            return Ok(Decision::NonIdempotent(Cause::PreconditionViolated));
        }
    }
    for g in &analysis.summary.global_condition {
        if g.eval(&lookup) != Ok(true) {
            return Ok(Decision::NonIdempotent(Cause::GlobalConditionViolated));
        }
    }

    struct Ext {
        kind: crate::sym::AccessKind,
        lo: i64,
        hi: i64,
        opaque: bool,
        nc: bool,
        site: AccessSite,
    }
    let mut exts = Vec::new();
    let mut trap = false;
    for d in &analysis.descriptors {
        // Evaluate guards and bounds unconditionally, exactly like the
        // straight-line plan: a division by zero anywhere in the segment
        // taints the whole segment.
        let mut on = true;
        for g in &d.guard {
            match g.eval(&lookup) {
                Ok(v) => on &= v,
                Err(_) => trap = true,
            }
        }
        let (lo, hi) = if d.opaque {
            (i64::MIN, i64::MAX)
        } else {
            let lo = d.lb.eval(&lookup);
            let hi = d.ub.eval(&lookup);
            match (lo, hi) {
                (Ok(lo), Ok(hi)) => (lo, hi.saturating_add((d.width - 1) as i64)),
                _ => {
                    trap = true;
                    (0, 0)
                }
            }
        };
        if on {
            exts.push(Ext {
                kind: d.kind,
                lo,
                hi,
                opaque: d.opaque,
                nc: d.nc,
                site: d.provenance.clone(),
            });
        }
    }
    if trap {
        return Ok(Decision::NonIdempotent(Cause::OpaqueAddress));
    }
    let has = |k: crate::sym::AccessKind| exts.iter().any(|e| e.kind == k);
    if (exts.iter().any(|e| e.opaque && e.kind == crate::sym::AccessKind::Read)
        && has(crate::sym::AccessKind::Write))
        || (exts.iter().any(|e| e.opaque && e.kind == crate::sym::AccessKind::Write)
            && has(crate::sym::AccessKind::Read))
    {
        return Ok(Decision::NonIdempotent(Cause::OpaqueAddress));
    }
    for r in exts.iter().filter(|e| e.kind == crate::sym::AccessKind::Read && !e.opaque) {
        for w in exts.iter().filter(|e| e.kind == crate::sym::AccessKind::Write && !e.opaque) {
            let lo = r.lo.max(w.lo);
            let hi = r.hi.min(w.hi);
            if lo <= hi {
                return Ok(Decision::NonIdempotent(Cause::Overlap {
                    read: r.site.clone(),
                    write: w.site.clone(),
                    lo,
                    hi,
                    assumed: r.nc || w.nc,
                }));
            }
        }
    }
    Ok(Decision::Idempotent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_kernel;
    use crate::range::analyze_kernel;
    use crate::AnalysisConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan_for(src: &str) -> (KernelAnalysis, Plan) {
        let k = parse_kernel(src).unwrap();
        let a = analyze_kernel(&k, &AnalysisConfig::default(), true);
        let p = compile_plan(&a);
        (a, p)
    }

    fn inst(kernel: &str, args: &[i64], gdim: u32, bdim: u32) -> Instance {
        Instance { kernel: kernel.into(), args: args.to_vec(), gdim, bdim }
    }

    const VADD: &str = "kernel vadd(a: buf, b: buf, c: buf, n: i64) {\n  if bid * bdim + tid < n {\n    let x = load [a + 8*(bid*bdim + tid)] :8\n    let y = load [b + 8*(bid*bdim + tid)] :8\n    store [c + 8*(bid*bdim + tid)] = x + y :8\n  }\n}";

    // Buffer bases satisfying the implicit window and alignment.
    const A: i64 = 0x1000_0000;
    const B: i64 = 0x1010_0000;
    const C: i64 = 0x1020_0000;

    #[test]
    fn distinct_buffers_validate_idempotent() {
        let (_, p) = plan_for(VADD);
        assert_eq!(p.class(), KernelClass::CondIdempotent);
        let v = validate(&p, &inst("vadd", &[A, B, C, 64], 2, 32)).unwrap();
        assert_eq!(v.decision, Decision::Idempotent);
    }

    #[test]
    fn aliased_output_overlaps_with_byte_witness() {
        let (_, p) = plan_for(VADD);
        let v = validate(&p, &inst("vadd", &[A, B, A, 64], 2, 32)).unwrap();
        let Decision::NonIdempotent(Cause::Overlap { lo, hi, assumed, .. }) = v.decision else {
            panic!("expected overlap, got {:?}", v.decision);
        };
        // Both accesses cover exactly [A, A + 8*64).
        assert_eq!((lo, hi), (A, A + 8 * 64 - 1));
        assert!(!assumed);
    }

    #[test]
    fn guard_bounds_make_partial_alias_precise() {
        // Read covers [a, a+8n); write covers [c, c+8n). Aliasing c = a + 8n
        // leaves them adjacent, not overlapping.
        let (_, p) = plan_for(VADD);
        let adjacent = A + 8 * 64;
        let v = validate(&p, &inst("vadd", &[A, B, adjacent, 64], 2, 32)).unwrap();
        assert_eq!(v.decision, Decision::Idempotent);
        // Half a buffer back (256-aligned): overlaps the tail of the read.
        let v = validate(&p, &inst("vadd", &[A, B, A + 256, 64], 2, 32)).unwrap();
        assert!(matches!(v.decision, Decision::NonIdempotent(Cause::Overlap { .. })));
    }

    #[test]
    fn precondition_beats_global_beats_overlap() {
        let src = "@require N >= 0\n@require N <= 1024\nkernel relu(A: buf, B: buf, N: i64) {\n  for i in 0 .. N {\n    let a = load [A + 4*((bid*bdim + tid)*N + i)] :4\n    store [B + 4*((bid*bdim + tid)*N + i)] = max(a, 0) :4\n  }\n}";
        let (_, p) = plan_for(src);
        // N negative: precondition.
        let v = validate(&p, &inst("relu", &[A, B, -1], 1, 4)).unwrap();
        assert_eq!(v.decision, Decision::NonIdempotent(Cause::PreconditionViolated));
        // Unaligned buffer: precondition.
        let v = validate(&p, &inst("relu", &[A + 4, B, 16], 1, 4)).unwrap();
        assert_eq!(v.decision, Decision::NonIdempotent(Cause::PreconditionViolated));
        // N beyond the unroll budget: global condition, even aliased.
        let v = validate(&p, &inst("relu", &[A, A, 64], 1, 4)).unwrap();
        assert_eq!(v.decision, Decision::NonIdempotent(Cause::GlobalConditionViolated));
        // In-window aliased: overlap.
        let v = validate(&p, &inst("relu", &[A, A, 16], 1, 4)).unwrap();
        assert!(matches!(v.decision, Decision::NonIdempotent(Cause::Overlap { .. })));
        // In-window distinct: idempotent.
        let v = validate(&p, &inst("relu", &[A, B, 16], 1, 4)).unwrap();
        assert_eq!(v.decision, Decision::Idempotent);
    }

    #[test]
    fn write_only_kernel_short_circuits() {
        let (a, p) = plan_for("kernel set(x: buf, v: i64) {\n  store [x + 8*(bid*bdim + tid)] = v :8\n}");
        assert_eq!(a.class, KernelClass::Idempotent);
        // Class shortcut: validates without consulting descriptors.
        let v = validate(&p, &inst("set", &[A, 3], 1024, 1024)).unwrap();
        assert_eq!(v.decision, Decision::Idempotent);
    }

    #[test]
    fn atomic_kernel_reports_kernel_level_cause() {
        let (_, p) = plan_for("kernel hist(h: buf) {\n  atomic_add [h + 8*(tid & 15)] += 1 :8\n}");
        let v = validate(&p, &inst("hist", &[A], 4, 64)).unwrap();
        assert_eq!(
            v.decision,
            Decision::NonIdempotent(Cause::KernelLevel(NonIdemReason::Atomic))
        );
    }

    #[test]
    fn opaque_read_with_live_write_rejects() {
        let src = "kernel gather(ix: buf, a: buf, o: buf) {\n  let j = load [ix + 8*tid] :8\n  let v = load [a + 8*j] :8\n  store [o + 8*tid] = v :8\n}";
        let (_, p) = plan_for(src);
        let v = validate(&p, &inst("gather", &[A, B, C], 1, 32)).unwrap();
        assert_eq!(v.decision, Decision::NonIdempotent(Cause::OpaqueAddress));
    }

    #[test]
    fn assumed_condition_marks_overlap() {
        // Write address is structurally distinct from the read but aliases
        // at launch; its guard depends on the loaded value.
        let src = "kernel m(x: buf, y: buf) {\n  let c = load [x + 8*tid] :8\n  if c == 1 {\n    store [y + 8*tid] = 0 :8\n  }\n}";
        let (a, p) = plan_for(src);
        assert_eq!(a.class, KernelClass::CondIdempotent);
        let v = validate(&p, &inst("m", &[A, A], 1, 8)).unwrap();
        let Decision::NonIdempotent(Cause::Overlap { assumed, .. }) = v.decision else {
            panic!("expected overlap, got {:?}", v.decision);
        };
        assert!(assumed, "overlap witness sits under a loaded-value guard");
        let ok = validate(&p, &inst("m", &[A, B], 1, 8)).unwrap();
        assert_eq!(ok.decision, Decision::Idempotent);
    }

    #[test]
    fn i32_params_bind_truncated() {
        let src = "kernel f(x: buf, n: i32) {\n  if tid < n {\n    store [x + 4*tid] = 1 :4\n  }\n}";
        let (a, p) = plan_for(src);
        // 2^32 + 5 truncates to 5: same verdict and bounds as passing 5.
        let wide = validate(&p, &inst("f", &[A, (1i64 << 32) + 5], 1, 8)).unwrap();
        let narrow = validate(&p, &inst("f", &[A, 5], 1, 8)).unwrap();
        assert_eq!(wide.decision, narrow.decision);
        let r1 = validate_reference(&a, &inst("f", &[A, (1i64 << 32) + 5], 1, 8)).unwrap();
        assert_eq!(wide.decision, r1);
    }

    #[test]
    fn mismatched_instance_errors() {
        let (_, p) = plan_for(VADD);
        let e = validate(&p, &inst("other", &[A, B, C, 4], 1, 1)).unwrap_err();
        assert!(matches!(e, PlanError::KernelMismatch { .. }));
        let e = validate(&p, &inst("vadd", &[A, B, C], 1, 1)).unwrap_err();
        assert_eq!(e, PlanError::ArgCount { kernel: "vadd".into(), expected: 4, got: 3 });
    }

    #[test]
    fn strawman_agrees_on_alias_and_distinct() {
        let k = parse_kernel(VADD).unwrap();
        // The strawman walks the unrolled summary.
        let a = analyze_kernel(&k, &AnalysisConfig::default(), false);
        let ok = validate_strawman(&a, &inst("vadd", &[A, B, C, 64], 2, 32)).unwrap();
        assert_eq!(ok.decision, Decision::Idempotent);
        let bad = validate_strawman(&a, &inst("vadd", &[A, B, A, 64], 2, 32)).unwrap();
        assert_eq!(bad.decision, Decision::NonIdempotent(Cause::EnumeratedOverlap));
        // Partial overlap by a single element.
        let edge = validate_strawman(&a, &inst("vadd", &[A, B, A + 8 * 63, 64], 2, 32)).unwrap();
        assert_eq!(edge.decision, Decision::NonIdempotent(Cause::EnumeratedOverlap));
    }

    #[test]
    fn plan_matches_reference_on_random_instances() {
        let sources = [
            VADD,
            "@require N >= 0\n@require N <= 1024\nkernel relu(A: buf, B: buf, N: i64) {\n  for i in 0 .. N {\n    let a = load [A + 4*((bid*bdim + tid)*N + i)] :4\n    store [B + 4*((bid*bdim + tid)*N + i)] = max(a, 0) :4\n  }\n}",
            "@require M >= 1\nkernel h(x: buf, y: buf, M: i64) {\n  let v = load [x + 8*(tid % M)] :8\n  store [y + 8*tid] = v :8\n}",
            "kernel s(x: buf, y: buf, flag: i64) {\n  if flag == 1 {\n    let v = load [x + 8*tid] :8\n    store [y + 8*tid] = v + 1 :8\n  }\n}",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1ff);
        for src in sources {
            let (a, p) = plan_for(src);
            let n_args = a
                .summary
                .vars
                .ids()
                .filter(|&v| matches!(a.summary.vars.origin(v), VarOrigin::Param { .. }))
                .count();
            for _ in 0..500 {
                let args: Vec<i64> = (0..n_args)
                    .map(|_| match rng.gen_range(0..4) {
                        // Mostly plausible values so every segment gets hit,
                        // some garbage so traps and windows get hit too.
                        0 => A + 0x100 * rng.gen_range(0..0x4000),
                        1 => rng.gen_range(-4..1024),
                        2 => rng.gen(),
                        _ => A + rng.gen_range(0..0x1000),
                    })
                    .collect();
                let i = Instance {
                    kernel: p.kernel().to_string(),
                    args,
                    gdim: rng.gen_range(1..=64),
                    bdim: rng.gen_range(1..=128),
                };
                let got = validate(&p, &i).unwrap().decision;
                let want = validate_reference(&a, &i).unwrap();
                assert_eq!(got, want, "plan disagrees with reference on {i:?}");
            }
        }
    }

    #[test]
    fn latency_is_reported_and_small() {
        let (_, p) = plan_for(VADD);
        // 2^20 threads touch 8MB per buffer; space the buffers accordingly.
        let i = inst("vadd", &[A, A + (64 << 20), A + (128 << 20), 1 << 20], 1024, 1024);
        // Warm the scratch buffer, then measure.
        validate(&p, &i).unwrap();
        let v = validate(&p, &i).unwrap();
        assert_eq!(v.decision, Decision::Idempotent);
        // Generous bound: the point is microseconds, not milliseconds.
        assert!(v.latency_ns < 1_000_000, "latency {}ns", v.latency_ns);
    }
}
