//! Range descriptors: a kernel's memory footprint as launch-evaluable
//! formulas.
//!
//! Each symbolic access becomes one descriptor `[lb, ub]` (base addresses of
//! the first and last cell, both formulas over params and dimensions), found
//! by substituting domain extremes for `bid`, `tid`, and loop counters in the
//! proven-monotone form of the address. Guard conditions that pin a range
//! variable tighten the bounds; launch-evaluable guards ride along on the
//! descriptor; anything else is dropped, which can only widen the descriptor.
//! Loop compaction runs the symbolic executor in template mode first, so a
//! loop contributes one descriptor instead of one per unrolled iteration.

use std::collections::BTreeSet;

use crate::ir::Kernel;
use crate::mono::{
    is_range_var, params_dims_only, params_dims_only_bool, structural_preconditions, MonoCtx,
    MonotoneVerdict,
};
use crate::sym::{
    classify_kernel, preconditions_sym, sym_execute, sym_execute_template, AccessKind,
    AccessSite, KernelClass, SymBool, SymExpr, SymbolicAccess, SymbolicSummary, VarTable,
};
use crate::AnalysisConfig;

/// One access range, evaluable from the launch arguments alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeDescriptor {
    pub kind: AccessKind,
    /// Bytes per cell; the byte extent is `[lb, ub + width - 1]`.
    pub width: u8,
    /// Base address of the lowest cell the access can touch.
    pub lb: SymExpr,
    /// Base address of the highest cell.
    pub ub: SymExpr,
    /// Launch-evaluable conditions; all must hold for any byte to be
    /// touched. Empty means the access always runs.
    pub guard: Vec<SymBool>,
    /// Address could not be bounded (it involves loaded values or escaped
    /// the analyzable window); `lb`/`ub` are vacuous.
    pub opaque: bool,
    /// Some guard of the original access referenced loaded values and was
    /// assumed true: the descriptor may cover bytes never touched.
    pub nc: bool,
    pub provenance: AccessSite,
}

/// Everything the offline analysis knows about one kernel.
#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    pub class: KernelClass,
    /// The summary descriptors were built from; its variable table includes
    /// any bounded variables introduced by rewriting.
    pub summary: SymbolicSummary,
    pub descriptors: Vec<RangeDescriptor>,
    /// `@require` lines plus the structural machine windows the proofs
    /// assume. Checked before anything else at validation time.
    pub preconditions: Vec<SymBool>,
    /// Guards that mixed range variables and could not be absorbed into
    /// bounds; each one widens a descriptor beyond the touched bytes.
    pub dropped_conditions: u32,
}

impl KernelAnalysis {
    pub fn kernel(&self) -> &str {
        &self.summary.kernel
    }
}

/// Template-mode summary, falling back to the unrolled run in the unlikely
/// case templating fails where unrolling would not.
pub fn compact_loops(k: &Kernel, cfg: &AnalysisConfig) -> SymbolicSummary {
    let t = sym_execute_template(k, cfg);
    if t.failures.is_empty() {
        return t;
    }
    let u = sym_execute(k, cfg);
    if u.failures.is_empty() {
        return u;
    }
    t
}

pub fn analyze_kernel(k: &Kernel, cfg: &AnalysisConfig, compaction: bool) -> KernelAnalysis {
    let mut summary = if compaction { compact_loops(k, cfg) } else { sym_execute(k, cfg) };
    let class = classify_kernel(&summary);
    let explicit = preconditions_sym(k, &summary.vars);
    let mut preconditions = explicit.clone();
    preconditions.extend(structural_preconditions(&summary.vars, &explicit));
    let (descriptors, dropped_conditions) =
        build_range_descriptors(&mut summary, &preconditions, cfg);
    KernelAnalysis { class, summary, descriptors, preconditions, dropped_conditions }
}

/// Turn every access of `summary` into a descriptor. Bounds may assume the
/// preconditions, the global condition, and the access's own path
/// conditions: the validator checks the first two before it ever consults a
/// descriptor, and the access touches no byte unless the rest held. Returns
/// the descriptors and the count of dropped guards; `summary.vars` grows by
/// the rewrite-fresh variables.
pub fn build_range_descriptors(
    summary: &mut SymbolicSummary,
    preconditions: &[SymBool],
    cfg: &AnalysisConfig,
) -> (Vec<RangeDescriptor>, u32) {
    let mut vars = summary.vars.clone();
    let assume: Vec<SymBool> =
        preconditions.iter().chain(&summary.global_condition).cloned().collect();
    let mut dropped = 0;
    let descriptors = summary
        .accesses
        .iter()
        .map(|a| {
            let mut local = assume.clone();
            local.extend(a.path_conditions.iter().cloned());
            let mut ctx = MonoCtx::new(cfg, &vars, &local);
            build_descriptor(&mut ctx, &mut vars, a, &mut dropped)
        })
        .collect();
    summary.vars = vars;
    (descriptors, dropped)
}

fn build_descriptor(
    ctx: &mut MonoCtx,
    vars: &mut VarTable,
    acc: &SymbolicAccess,
    dropped: &mut u32,
) -> RangeDescriptor {
    let conds = &acc.path_conditions;
    let mut used = BTreeSet::new();
    let rewritten = ctx.make_monotone(&acc.address, vars);
    let (lb, ub, opaque) = if rewritten.opaque {
        (SymExpr::constant(i64::MIN), SymExpr::constant(i64::MAX), true)
    } else {
        let lo = extreme(ctx, vars, &rewritten.addr, conds, true, &mut used);
        let hi = extreme(ctx, vars, &rewritten.addr, conds, false, &mut used);
        match (lo, hi) {
            (Some(lb), Some(ub)) => (lb, ub, false),
            _ => (SymExpr::constant(i64::MIN), SymExpr::constant(i64::MAX), true),
        }
    };
    debug_assert!(opaque || params_dims_only(&lb, vars));
    debug_assert!(opaque || params_dims_only(&ub, vars));
    let mut guard = Vec::new();
    let mut nc = false;
    for (i, c) in conds.iter().enumerate() {
        if c.vars().into_iter().any(|u| vars.is_non_param(u)) {
            // Depends on memory contents: assume it holds. The descriptor
            // stays a superset of the touched bytes either way.
            nc = true;
        } else if params_dims_only_bool(c, vars) {
            guard.push(c.clone());
        } else if !used.contains(&i) {
            *dropped += 1;
        }
    }
    RangeDescriptor {
        kind: acc.kind,
        width: acc.width.bytes(),
        lb,
        ub,
        guard,
        opaque,
        nc,
        provenance: acc.site.clone(),
    }
}

/// Substitute each range variable of `addr` by the extreme of its bounds
/// that minimizes (`want_lo`) or maximizes the address, innermost first so
/// bounds referencing outer variables resolve on later rounds. If a
/// substitution breaks monotonicity of what remains, the address is
/// re-rewritten; `None` means even that failed and the access is opaque.
fn extreme(
    ctx: &mut MonoCtx,
    vars: &mut VarTable,
    addr: &SymExpr,
    conds: &[SymBool],
    want_lo: bool,
    used: &mut BTreeSet<usize>,
) -> Option<SymExpr> {
    let mut cur = addr.clone();
    let rounds = 2 * vars.len() as u32 + 8;
    for _ in 0..rounds {
        let Some(v) = cur.vars().into_iter().filter(|&u| is_range_var(vars, u)).max() else {
            return Some(cur);
        };
        match ctx.check_monotone(&cur, v) {
            MonotoneVerdict::Unknown => {
                let r = ctx.make_monotone(&cur, vars);
                if r.opaque {
                    return None;
                }
                cur = r.addr;
            }
            verdict => {
                let (b, u) = ctx.tighten_bounds(v, conds, vars);
                used.extend(u);
                let increasing = verdict == MonotoneVerdict::Increasing;
                let sub = if want_lo == increasing { b.lo } else { b.hi };
                cur = cur.subst(&|x| (x == v).then(|| sub.clone()));
            }
        }
    }
    None
}
