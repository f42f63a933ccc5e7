//! Symbolic execution of kernels into access summaries.
//!
//! One abstract instance `(bid, tid)` is executed over symbolic params and
//! dimensions. Branches on symbolic conditions fork the path (bounded by
//! `max_paths`); counted loops with symbolic trip counts unroll up to
//! `unroll_limit` iterations under per-iteration guards, and the budget case
//! contributes a global condition asserting the loop really ends within the
//! window. While loops fork at each head evaluation. Loads produce fresh
//! unconstrained values; nothing is forwarded from stores.
//!
//! The engine has two modes. `Unrolled` is the baseline described above.
//! `Template` replaces each qualifying loop with a single pass over its body,
//! with induction variables bound to range-carrying symbols; the compaction
//! pass in the range layer merges those template accesses over the unrolled
//! summary.

use std::collections::{BTreeSet, HashMap};

use crate::ir::{BinOp, BoolExpr, CmpOp, IntExpr, Kernel, Stmt};
use crate::AnalysisConfig;

use super::expr::{SymBool, SymExpr};
use super::induction::{assigned_names, detect_induction, LoopShape, StmtIds};
use super::summary::{
    AccessKind, AccessSite, AnalysisFailure, FailureKind, InductionInfo, SymbolicAccess,
    SymbolicSummary,
};
use super::var::{NonParamSource, VarOrigin, VarTable, BDIM, BID, GDIM, TID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExecMode {
    Unrolled,
    Template,
}

#[derive(Debug, Clone)]
struct PathState {
    env: HashMap<String, SymExpr>,
    conds: Vec<SymBool>,
    unroll: Vec<u32>,
}

enum ForTrip {
    /// Constant trip within budget: unroll fully, no guards.
    Full(u32),
    /// Symbolic or over-budget: guarded iterations up to the unroll limit.
    Budget,
}

enum Cont<'a, 'k> {
    Done,
    Seq {
        stmts: &'k [Stmt],
        idx: usize,
        next: &'a Cont<'a, 'k>,
    },
    ForIter {
        stmt: &'k Stmt,
        counter: &'k str,
        body: &'k [Stmt],
        lo: SymExpr,
        hi: SymExpr,
        trip: ForTrip,
        k: u32,
        /// Guard pushed by the previous iteration, to retire on entry.
        cleanup: Option<SymBool>,
        next: &'a Cont<'a, 'k>,
    },
    WhileIter {
        stmt: &'k Stmt,
        cond: &'k BoolExpr,
        body: &'k [Stmt],
        k: u32,
        next: &'a Cont<'a, 'k>,
    },
    /// Apply env updates (scope exit, closed-form loop results).
    Restore {
        actions: &'a [(String, Option<SymExpr>)],
        next: &'a Cont<'a, 'k>,
    },
}

struct Engine<'k> {
    cfg: &'k AnalysisConfig,
    ids: StmtIds,
    shapes: Vec<LoopShape>,
    mode: ExecMode,
    vars: VarTable,
    accesses: Vec<SymbolicAccess>,
    global: Vec<SymBool>,
    induction: Vec<InductionInfo>,
    failures: Vec<AnalysisFailure>,
    paths: u32,
    aborted: bool,
}

pub fn sym_execute(k: &Kernel, cfg: &AnalysisConfig) -> SymbolicSummary {
    run_mode(k, cfg, ExecMode::Unrolled)
}

pub(crate) fn sym_execute_template(k: &Kernel, cfg: &AnalysisConfig) -> SymbolicSummary {
    run_mode(k, cfg, ExecMode::Template)
}

/// Param and dimension variables in their canonical id order.
pub fn seed_var_table(k: &Kernel) -> VarTable {
    let mut vars = VarTable::with_builtins();
    for (index, p) in k.params.iter().enumerate() {
        vars.intern(p.name.clone(), VarOrigin::Param { index, kind: p.kind });
    }
    vars
}

/// Kernel preconditions as symbolic formulas over the seeded table.
pub fn preconditions_sym(k: &Kernel, vars: &VarTable) -> Vec<SymBool> {
    let env: HashMap<String, SymExpr> = k
        .params
        .iter()
        .map(|p| (p.name.clone(), SymExpr::var(vars.find(&p.name).expect("param interned"))))
        .collect();
    k.preconditions.iter().map(|b| lower_bool(b, &env)).collect()
}

fn run_mode(k: &Kernel, cfg: &AnalysisConfig, mode: ExecMode) -> SymbolicSummary {
    let vars = seed_var_table(k);
    let mut env = HashMap::new();
    for p in &k.params {
        env.insert(p.name.clone(), SymExpr::var(vars.find(&p.name).expect("param interned")));
    }
    let mut eng = Engine {
        cfg,
        ids: StmtIds::build(k),
        shapes: detect_induction(k),
        mode,
        vars,
        accesses: Vec::new(),
        global: Vec::new(),
        induction: Vec::new(),
        failures: Vec::new(),
        paths: 1,
        aborted: false,
    };
    let st = PathState { env, conds: Vec::new(), unroll: Vec::new() };
    eng.run(st, &Cont::Seq { stmts: &k.body, idx: 0, next: &Cont::Done });
    let accesses = dedup_accesses(std::mem::take(&mut eng.accesses));
    let mut global = Vec::new();
    for g in std::mem::take(&mut eng.global) {
        if !global.contains(&g) {
            global.push(g);
        }
    }
    SymbolicSummary {
        kernel: k.name.clone(),
        vars: eng.vars,
        accesses,
        global_condition: global,
        induction: eng.induction,
        failures: eng.failures,
        paths: eng.paths,
        compacted: false,
    }
}

/// Same-site copies whose addresses coincide are merged; the merged access
/// keeps only conditions common to every copy. Dropping a condition can only
/// widen the summarized footprint, so the merge over-approximates soundly.
fn dedup_accesses(accesses: Vec<SymbolicAccess>) -> Vec<SymbolicAccess> {
    let mut out: Vec<SymbolicAccess> = Vec::with_capacity(accesses.len());
    let mut index: HashMap<(AccessSite, AccessKind, SymExpr, u8), usize> = HashMap::new();
    for a in accesses {
        let key = (a.site.clone(), a.kind, a.address.clone(), a.width.bytes());
        match index.get(&key) {
            Some(&i) => {
                let kept = &mut out[i];
                kept.path_conditions.retain(|c| a.path_conditions.contains(c));
            }
            None => {
                index.insert(key, out.len());
                out.push(a);
            }
        }
    }
    out
}

fn lower_int(e: &IntExpr, env: &HashMap<String, SymExpr>) -> SymExpr {
    match e {
        IntExpr::Const(c) => SymExpr::constant(*c),
        IntExpr::Ident(n) => env.get(n).expect("checked by validation").clone(),
        IntExpr::Bid => SymExpr::var(BID),
        IntExpr::Tid => SymExpr::var(TID),
        IntExpr::Bdim => SymExpr::var(BDIM),
        IntExpr::Gdim => SymExpr::var(GDIM),
        IntExpr::Neg(a) => SymExpr::neg(lower_int(a, env)),
        IntExpr::Min(a, b) => SymExpr::min2(lower_int(a, env), lower_int(b, env)),
        IntExpr::Max(a, b) => SymExpr::max2(lower_int(a, env), lower_int(b, env)),
        IntExpr::Bin(op, a, b) => {
            let (a, b) = (lower_int(a, env), lower_int(b, env));
            match op {
                BinOp::Add => SymExpr::add2(a, b),
                BinOp::Sub => SymExpr::sub(a, b),
                BinOp::Mul => SymExpr::mul2(a, b),
                BinOp::Div => SymExpr::div(a, b),
                BinOp::Rem => SymExpr::rem(a, b),
                BinOp::And => SymExpr::band(a, b),
                BinOp::Or => SymExpr::bor(a, b),
                BinOp::Xor => SymExpr::bxor(a, b),
                BinOp::Shl => SymExpr::shl(a, b),
                BinOp::Shr => SymExpr::shr(a, b),
            }
        }
    }
}

fn lower_bool(e: &BoolExpr, env: &HashMap<String, SymExpr>) -> SymBool {
    match e {
        BoolExpr::Cmp(op, a, b) => {
            let (a, b) = (lower_int(a, env), lower_int(b, env));
            match op {
                CmpOp::Lt => SymBool::lt(a, b),
                CmpOp::Le => SymBool::le(a, b),
                CmpOp::Gt => SymBool::lt(b, a),
                CmpOp::Ge => SymBool::le(b, a),
                CmpOp::Eq => SymBool::eq(a, b),
                CmpOp::Ne => SymBool::cmp(super::expr::SymCmp::Ne, a, b),
            }
        }
        BoolExpr::And(a, b) => SymBool::and2(lower_bool(a, env), lower_bool(b, env)),
        BoolExpr::Or(a, b) => SymBool::any(vec![lower_bool(a, env), lower_bool(b, env)]),
        BoolExpr::Not(a) => lower_bool(a, env).negate(),
    }
}

impl<'k> Engine<'k> {
    fn fail(&mut self, kind: FailureKind, stmt: &Stmt, unroll: &[u32]) {
        self.failures.push(AnalysisFailure {
            kind,
            site: AccessSite { stmt: self.ids.id(stmt), unroll: unroll.to_vec() },
        });
        self.aborted = true;
    }

    fn record(&mut self, st: &PathState, kind: AccessKind, stmt: &Stmt, address: SymExpr, width: crate::ir::Width) {
        self.accesses.push(SymbolicAccess {
            kind,
            address,
            width,
            path_conditions: st.conds.clone(),
            site: AccessSite { stmt: self.ids.id(stmt), unroll: st.unroll.clone() },
        });
    }

    fn shape(&self, loop_stmt: u32) -> &LoopShape {
        self.shapes
            .iter()
            .find(|s| s.loop_stmt == loop_stmt)
            .expect("every loop has a shape entry")
    }

    fn params_dims_only(&self, e: &SymExpr) -> bool {
        e.vars().iter().all(|v| self.vars.is_launch_arg(*v))
    }

    fn params_dims_only_bool(&self, b: &SymBool) -> bool {
        b.vars().iter().all(|v| self.vars.is_launch_arg(*v))
    }

    fn havoc(&mut self, st: &mut PathState, names: &BTreeSet<String>, loop_stmt: u32) {
        for n in names {
            let id = self
                .vars
                .intern(n.clone(), VarOrigin::NonParam(NonParamSource::LoopEscape { stmt: loop_stmt }));
            st.env.insert(n.clone(), SymExpr::var(id));
        }
    }

    fn run(&mut self, st: PathState, cont: &Cont<'_, 'k>) {
        if self.aborted {
            return;
        }
        match cont {
            Cont::Done => {}
            Cont::Seq { stmts, idx, next } => {
                if *idx >= stmts.len() {
                    self.run(st, next);
                } else {
                    self.step(st, &stmts[*idx], &Cont::Seq { stmts, idx: idx + 1, next });
                }
            }
            Cont::ForIter { .. } => self.for_iter(st, cont),
            Cont::WhileIter { stmt, cond, body, k, next } => {
                self.while_iter(st, stmt, cond, body, *k, next);
            }
            Cont::Restore { actions, next } => {
                let mut st = st;
                for (name, value) in actions.iter() {
                    match value {
                        Some(v) => {
                            st.env.insert(name.clone(), v.clone());
                        }
                        None => {
                            st.env.remove(name);
                        }
                    }
                }
                self.run(st, next);
            }
        }
    }

    fn step(&mut self, mut st: PathState, stmt: &'k Stmt, cont: &Cont<'_, 'k>) {
        if self.aborted {
            return;
        }
        match stmt {
            Stmt::Let { dest, value } => {
                let v = lower_int(value, &st.env);
                st.env.insert(dest.clone(), v);
                self.run(st, cont);
            }
            Stmt::Load { dest, addr, width } => {
                let a = lower_int(addr, &st.env);
                self.record(&st, AccessKind::Read, stmt, a, *width);
                let id = self.vars.intern(
                    dest.clone(),
                    VarOrigin::NonParam(NonParamSource::Load { stmt: self.ids.id(stmt) }),
                );
                st.env.insert(dest.clone(), SymExpr::var(id));
                self.run(st, cont);
            }
            Stmt::Store { addr, width, .. } => {
                let a = lower_int(addr, &st.env);
                self.record(&st, AccessKind::Write, stmt, a, *width);
                self.run(st, cont);
            }
            Stmt::AtomicAdd { addr, width, .. } => {
                let a = lower_int(addr, &st.env);
                self.record(&st, AccessKind::Atomic, stmt, a, *width);
                self.run(st, cont);
            }
            Stmt::CallIndirect { .. } => {
                let unroll = st.unroll.clone();
                self.fail(FailureKind::IndirectFlow, stmt, &unroll);
            }
            Stmt::If { cond, then_body, else_body } => {
                let c = lower_bool(cond, &st.env);
                match c.as_const() {
                    Some(true) => self.run(st, &Cont::Seq { stmts: then_body, idx: 0, next: cont }),
                    Some(false) => self.run(st, &Cont::Seq { stmts: else_body, idx: 0, next: cont }),
                    None => {
                        // A branch implied by conditions already on the path
                        // does not fork; this keeps loop-invariant branches
                        // from doubling the path count per iteration.
                        if st.conds.contains(&c) {
                            return self.run(st, &Cont::Seq { stmts: then_body, idx: 0, next: cont });
                        }
                        if st.conds.contains(&c.negate()) {
                            return self.run(st, &Cont::Seq { stmts: else_body, idx: 0, next: cont });
                        }
                        self.paths += 1;
                        if self.paths > self.cfg.max_paths {
                            let unroll = st.unroll.clone();
                            return self.fail(FailureKind::PathExplosion, stmt, &unroll);
                        }
                        let mut then_st = st.clone();
                        then_st.conds.push(c.clone());
                        self.run(then_st, &Cont::Seq { stmts: then_body, idx: 0, next: cont });
                        if self.aborted {
                            return;
                        }
                        let mut else_st = st;
                        else_st.conds.push(c.negate());
                        self.run(else_st, &Cont::Seq { stmts: else_body, idx: 0, next: cont });
                    }
                }
            }
            Stmt::ForCounted { counter, lo, hi, body } => {
                self.enter_for(st, stmt, counter, lo, hi, body, cont);
            }
            Stmt::While { cond, body } => {
                self.while_iter(st, stmt, cond, body, 0, cont);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn enter_for(
        &mut self,
        mut st: PathState,
        stmt: &'k Stmt,
        counter: &'k str,
        lo: &'k IntExpr,
        hi: &'k IntExpr,
        body: &'k [Stmt],
        cont: &Cont<'_, 'k>,
    ) {
        let lo_e = lower_int(lo, &st.env);
        let hi_e = lower_int(hi, &st.env);
        let trip_e = SymExpr::max2(SymExpr::sub(hi_e.clone(), lo_e.clone()), SymExpr::constant(0));

        if self.mode == ExecMode::Template && self.params_dims_only(&trip_e) {
            // The unroll window still gates applicability: the template only
            // changes how the in-budget iterations are represented, so it
            // contributes the same budget condition the iterated form would.
            if trip_e.as_const().map_or(true, |t| t > self.cfg.unroll_limit as i64) {
                let limit = SymExpr::constant(self.cfg.unroll_limit as i64);
                let exit =
                    SymBool::lt(SymExpr::add2(lo_e.clone(), limit.clone()), hi_e.clone()).negate();
                if exit.as_const() != Some(true) {
                    let g = if self.params_dims_only_bool(&exit) {
                        exit
                    } else {
                        SymBool::le(trip_e.clone(), limit)
                    };
                    self.global.push(g);
                }
            }
            let loop_id = self.ids.id(stmt);
            let shape = self.shape(loop_id).clone();
            let mut mutated = BTreeSet::new();
            assigned_names(body, &mut mutated);
            mutated.remove(counter);
            for l in &shape.step_locals {
                mutated.remove(&l.name);
            }
            self.havoc(&mut st, &mutated, loop_id);

            let i_var = self.vars.intern(
                counter.to_string(),
                VarOrigin::Induction {
                    loop_stmt: loop_id,
                    initial: lo_e.clone(),
                    step: 1,
                    trip: Some(trip_e.clone()),
                },
            );
            self.induction.push(InductionInfo {
                loop_stmt: loop_id,
                name: counter.to_string(),
                var: i_var,
                initial: lo_e.clone(),
                step: 1,
                trip: Some(trip_e.clone()),
            });
            let mut restore: Vec<(String, Option<SymExpr>)> = vec![(counter.to_string(), None)];
            st.env.insert(counter.to_string(), SymExpr::var(i_var));
            for l in &shape.step_locals {
                let initial = st.env.get(&l.name).expect("step local defined before loop").clone();
                let v = self.vars.intern(
                    l.name.clone(),
                    VarOrigin::Induction {
                        loop_stmt: loop_id,
                        initial: initial.clone(),
                        step: l.step,
                        trip: Some(trip_e.clone()),
                    },
                );
                self.induction.push(InductionInfo {
                    loop_stmt: loop_id,
                    name: l.name.clone(),
                    var: v,
                    initial: initial.clone(),
                    step: l.step,
                    trip: Some(trip_e.clone()),
                });
                // Past the loop the local holds its closed-form final value.
                let fin = SymExpr::add2(
                    initial,
                    SymExpr::mul2(SymExpr::constant(l.step), trip_e.clone()),
                );
                restore.push((l.name.clone(), Some(fin)));
                st.env.insert(l.name.clone(), SymExpr::var(v));
            }
            let entered = SymBool::lt(lo_e, hi_e.clone());
            let guard = SymBool::lt(SymExpr::var(i_var), hi_e);
            for c in [entered, guard] {
                if c.as_const() != Some(true) {
                    st.conds.push(c);
                }
            }
            let restore_ref: &[(String, Option<SymExpr>)] = &restore;
            return self.run(
                st,
                &Cont::Seq {
                    stmts: body,
                    idx: 0,
                    next: &Cont::Restore { actions: restore_ref, next: cont },
                },
            );
        }

        let trip = match (lo_e.as_const(), hi_e.as_const()) {
            (Some(l), Some(h)) => {
                let t = (h as i128 - l as i128).max(0);
                if t <= self.cfg.unroll_limit as i128 {
                    ForTrip::Full(t as u32)
                } else {
                    ForTrip::Budget
                }
            }
            _ => ForTrip::Budget,
        };
        self.for_iter(
            st,
            &Cont::ForIter {
                stmt,
                counter,
                body,
                lo: lo_e,
                hi: hi_e,
                trip,
                k: 0,
                cleanup: None,
                next: cont,
            },
        );
    }

    fn for_iter(&mut self, mut st: PathState, cont: &Cont<'_, 'k>) {
        if self.aborted {
            return;
        }
        let Cont::ForIter { stmt, counter, body, lo, hi, trip, k, cleanup, next } = cont else {
            unreachable!("for_iter called with a non-loop continuation");
        };
        if *k > 0 {
            st.unroll.pop();
        }
        if let Some(g) = cleanup {
            if let Some(i) = st.conds.iter().rposition(|c| c == g) {
                st.conds.remove(i);
            }
        }
        let limit = match trip {
            ForTrip::Full(t) => *t,
            ForTrip::Budget => self.cfg.unroll_limit,
        };
        if *k < limit {
            let value = SymExpr::add2(lo.clone(), SymExpr::constant(*k as i64));
            let guard = match trip {
                ForTrip::Full(_) => None,
                ForTrip::Budget => {
                    let g = SymBool::lt(value.clone(), hi.clone());
                    if g.as_const() == Some(true) {
                        None
                    } else {
                        st.conds.push(g.clone());
                        Some(g)
                    }
                }
            };
            st.env.insert(counter.to_string(), value);
            st.unroll.push(*k);
            self.run(
                st,
                &Cont::Seq {
                    stmts: body,
                    idx: 0,
                    next: &Cont::ForIter {
                        stmt,
                        counter,
                        body,
                        lo: lo.clone(),
                        hi: hi.clone(),
                        trip: match trip {
                            ForTrip::Full(t) => ForTrip::Full(*t),
                            ForTrip::Budget => ForTrip::Budget,
                        },
                        k: k + 1,
                        cleanup: guard,
                        next,
                    },
                },
            );
        } else {
            if let ForTrip::Budget = trip {
                // The summary only covers launches where the loop finishes
                // within the unroll window.
                let exit = SymBool::lt(
                    SymExpr::add2(lo.clone(), SymExpr::constant(limit as i64)),
                    hi.clone(),
                )
                .negate();
                if exit.as_const() != Some(true) {
                    if !self.params_dims_only_bool(&exit) {
                        let unroll = st.unroll.clone();
                        return self.fail(FailureKind::PathExplosion, stmt, &unroll);
                    }
                    self.global.push(exit);
                }
                let loop_id = self.ids.id(stmt);
                let mut mutated = BTreeSet::new();
                assigned_names(body, &mut mutated);
                mutated.remove(*counter);
                self.havoc(&mut st, &mutated, loop_id);
            }
            st.env.remove(*counter);
            self.run(st, next);
        }
    }

    fn while_iter(
        &mut self,
        mut st: PathState,
        stmt: &'k Stmt,
        cond: &'k BoolExpr,
        body: &'k [Stmt],
        k: u32,
        next: &Cont<'_, 'k>,
    ) {
        if self.aborted {
            return;
        }
        if k == 0 && self.mode == ExecMode::Template {
            if self.try_template_while(&mut st, stmt, cond, body, next) {
                return;
            }
        }
        let c = lower_bool(cond, &st.env);
        match c.as_const() {
            Some(false) => self.run(st, next),
            Some(true) => {
                if k >= self.cfg.unroll_limit {
                    // Structurally infinite within the window: no launch is
                    // covered by this summary.
                    self.global.push(SymBool::ff());
                    let loop_id = self.ids.id(stmt);
                    let mut mutated = BTreeSet::new();
                    assigned_names(body, &mut mutated);
                    self.havoc(&mut st, &mutated, loop_id);
                    self.run(st, next);
                } else {
                    self.run(
                        st,
                        &Cont::Seq {
                            stmts: body,
                            idx: 0,
                            next: &Cont::WhileIter { stmt, cond, body, k: k + 1, next },
                        },
                    );
                }
            }
            None => {
                // Symbolic head: the exit condition must be decidable from
                // launch arguments, otherwise the loop's extent is
                // data-dependent and the kernel is beyond this analysis.
                if !self.params_dims_only_bool(&c) {
                    let unroll = st.unroll.clone();
                    return self.fail(FailureKind::PathExplosion, stmt, &unroll);
                }
                if k >= self.cfg.unroll_limit {
                    self.global.push(c.negate());
                    self.run(st, next);
                } else {
                    self.paths += 1;
                    if self.paths > self.cfg.max_paths {
                        let unroll = st.unroll.clone();
                        return self.fail(FailureKind::PathExplosion, stmt, &unroll);
                    }
                    let mut cont_st = st.clone();
                    cont_st.conds.push(c.clone());
                    self.run(
                        cont_st,
                        &Cont::Seq {
                            stmts: body,
                            idx: 0,
                            next: &Cont::WhileIter { stmt, cond, body, k: k + 1, next },
                        },
                    );
                    if self.aborted {
                        return;
                    }
                    let mut exit_st = st;
                    exit_st.conds.push(c.negate());
                    self.run(exit_st, next);
                }
            }
        }
    }

    /// Attempt the single-pass induction treatment of a while loop. Returns
    /// false when the loop does not qualify, in which case the caller falls
    /// back to iteration.
    fn try_template_while(
        &mut self,
        st: &mut PathState,
        stmt: &'k Stmt,
        cond: &'k BoolExpr,
        body: &'k [Stmt],
        next: &Cont<'_, 'k>,
    ) -> bool {
        let loop_id = self.ids.id(stmt);
        let shape = self.shape(loop_id).clone();
        let Some(wc) = &shape.while_cond else { return false };
        let bound = lower_int(&wc.bound, &st.env);
        let cond_local = shape
            .step_locals
            .iter()
            .find(|l| l.name == wc.var)
            .expect("qualifying cond references a step local");
        let initial = st.env.get(&wc.var).expect("cond local defined before loop").clone();

        // distance: how far the induction value must travel; positive step
        // divides it, negative step mirrors to the downward case.
        let (distance, magnitude) = match (wc.op, cond_local.step) {
            (CmpOp::Lt, c) if c > 0 => (SymExpr::sub(bound.clone(), initial.clone()), c),
            (CmpOp::Le, c) if c > 0 => (
                SymExpr::add2(SymExpr::sub(bound.clone(), initial.clone()), SymExpr::constant(1)),
                c,
            ),
            (CmpOp::Gt, c) if c < 0 => (SymExpr::sub(initial.clone(), bound.clone()), -c),
            (CmpOp::Ge, c) if c < 0 => (
                SymExpr::add2(SymExpr::sub(initial.clone(), bound.clone()), SymExpr::constant(1)),
                -c,
            ),
            _ => return false,
        };
        // trip = max(0, ceil(distance / magnitude)), exact for distance >= 1
        // and clamped to zero with it.
        let trip_e = SymExpr::max2(
            SymExpr::div(
                SymExpr::add2(distance, SymExpr::constant(magnitude - 1)),
                SymExpr::constant(magnitude),
            ),
            SymExpr::constant(0),
        );
        if !self.params_dims_only(&trip_e) {
            return false;
        }

        // Budget condition, as for counted loops: the head must go false
        // within the unroll window. Evaluated with step locals advanced by
        // `limit` steps, which is what iterating to the window edge yields.
        if trip_e.as_const().map_or(true, |t| t > self.cfg.unroll_limit as i64) {
            let limit = self.cfg.unroll_limit as i64;
            let mut env_at_edge = st.env.clone();
            for l in &shape.step_locals {
                let init = st.env.get(&l.name).expect("step local defined before loop").clone();
                env_at_edge.insert(
                    l.name.clone(),
                    SymExpr::add2(init, SymExpr::constant(l.step.wrapping_mul(limit))),
                );
            }
            let exit = lower_bool(cond, &env_at_edge).negate();
            if exit.as_const() != Some(true) {
                let g = if self.params_dims_only_bool(&exit) {
                    exit
                } else {
                    SymBool::le(trip_e.clone(), SymExpr::constant(limit))
                };
                self.global.push(g);
            }
        }

        let mut mutated = BTreeSet::new();
        assigned_names(body, &mut mutated);
        for l in &shape.step_locals {
            mutated.remove(&l.name);
        }
        self.havoc(st, &mutated, loop_id);

        let entered = lower_bool(cond, &st.env);
        let mut restore: Vec<(String, Option<SymExpr>)> = Vec::new();
        for l in &shape.step_locals {
            let init = st.env.get(&l.name).expect("step local defined before loop").clone();
            let v = self.vars.intern(
                l.name.clone(),
                VarOrigin::Induction {
                    loop_stmt: loop_id,
                    initial: init.clone(),
                    step: l.step,
                    trip: Some(trip_e.clone()),
                },
            );
            self.induction.push(InductionInfo {
                loop_stmt: loop_id,
                name: l.name.clone(),
                var: v,
                initial: init.clone(),
                step: l.step,
                trip: Some(trip_e.clone()),
            });
            let fin =
                SymExpr::add2(init, SymExpr::mul2(SymExpr::constant(l.step), trip_e.clone()));
            restore.push((l.name.clone(), Some(fin)));
            st.env.insert(l.name.clone(), SymExpr::var(v));
        }
        let guard = lower_bool(cond, &st.env);
        for c in [entered, guard] {
            if c.as_const() != Some(true) {
                st.conds.push(c);
            }
        }
        let restore_ref: &[(String, Option<SymExpr>)] = &restore;
        self.run(
            st.clone(),
            &Cont::Seq {
                stmts: body,
                idx: 0,
                next: &Cont::Restore { actions: restore_ref, next },
            },
        );
        true
    }
}
