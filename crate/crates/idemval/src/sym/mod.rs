//! Symbolic layer: canonical expressions, the per-instance execution engine,
//! induction detection, and static kernel classification.

mod classify;
mod exec;
mod expr;
mod induction;
mod sexpr;
mod summary;
mod var;

pub use classify::{classify_kernel, KernelClass, NonIdemReason};
pub use exec::{preconditions_sym, seed_var_table, sym_execute};
pub(crate) use exec::sym_execute_template;
pub use expr::{BNode, EvalError, Node, SymBool, SymCmp, SymExpr};
pub use induction::{detect_induction, LoopShape, StepLocal, WhileCond};
pub(crate) use induction::StmtIds;
pub use sexpr::{bool_to_sexpr, expr_to_sexpr, parse_sexpr_bool, parse_sexpr_expr, var_display_name};
pub use summary::{
    AccessKind, AccessSite, AnalysisFailure, FailureKind, InductionInfo, SymbolicAccess,
    SymbolicSummary,
};
pub use var::{NonParamSource, SymVarId, VarInfo, VarOrigin, VarTable, BDIM, BID, GDIM, TID};


#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_kernel;
    use crate::AnalysisConfig;

    fn exec(src: &str) -> SymbolicSummary {
        let k = parse_kernel(src).unwrap();
        sym_execute(&k, &AnalysisConfig::default())
    }

    fn exec_template(src: &str) -> SymbolicSummary {
        let k = parse_kernel(src).unwrap();
        sym_execute_template(&k, &AnalysisConfig::default())
    }

    #[test]
    fn expressions_canonicalize() {
        let (a, b, c) = (SymExpr::var(BID), SymExpr::var(TID), SymExpr::var(BDIM));
        assert_eq!(SymExpr::add2(a.clone(), b.clone()), SymExpr::add2(b.clone(), a.clone()));
        assert_eq!(
            SymExpr::add2(SymExpr::add2(a.clone(), b.clone()), c.clone()),
            SymExpr::add2(a.clone(), SymExpr::add2(b.clone(), c.clone())),
        );
        assert_eq!(
            SymExpr::shl(a.clone(), SymExpr::constant(3)),
            SymExpr::mul2(SymExpr::constant(8), a.clone()),
        );
        assert_eq!(
            SymExpr::add2(SymExpr::constant(2), SymExpr::constant(3)).as_const(),
            Some(5),
        );
        assert_eq!(SymExpr::mul2(SymExpr::constant(0), b).as_const(), Some(0));
        // Division by zero must not fold away.
        let d = SymExpr::div(SymExpr::constant(4), SymExpr::constant(0));
        assert!(d.as_const().is_none());
        // min/max dedup and constant folding.
        assert_eq!(
            SymExpr::min(vec![a.clone(), a.clone(), SymExpr::constant(7), SymExpr::constant(3)]),
            SymExpr::min2(a.clone(), SymExpr::constant(3)),
        );
    }

    #[test]
    fn booleans_normalize_to_nnf() {
        let (n, t) = (SymExpr::var(GDIM), SymExpr::var(TID));
        let lt = SymBool::lt(t.clone(), n.clone());
        assert_eq!(lt.negate(), SymBool::le(n.clone(), t.clone()));
        assert_eq!(lt.negate().negate(), lt);
        let conj = SymBool::and2(lt.clone(), SymBool::tt());
        assert_eq!(conj, lt);
        assert_eq!(SymBool::and2(SymBool::ff(), lt.clone()).as_const(), Some(false));
        // Complement of a conjunction is a disjunction of complements.
        let both = SymBool::and2(lt.clone(), SymBool::eq(n.clone(), SymExpr::constant(4)));
        let split = both.negate();
        assert_eq!(split.negate(), both);
    }

    #[test]
    fn wrapping_semantics_in_eval() {
        let x = SymExpr::var(BID);
        let e = SymExpr::mul2(x.clone(), SymExpr::constant(2));
        let env = |_| Some(i64::MAX);
        assert_eq!(e.eval(&env).unwrap(), -2);
        let sh = SymExpr::shr(x.clone(), SymExpr::constant(1));
        let env2 = |_| Some(-8i64);
        assert_eq!(sh.eval(&env2).unwrap(), -4);
        let dv = SymExpr::div(x, SymExpr::var(TID));
        let env3 = |v: SymVarId| Some(if v == TID { 0 } else { 5 });
        assert_eq!(dv.eval(&env3), Err(EvalError::DivByZero));
    }

    #[test]
    fn sexpr_round_trips() {
        let src = "kernel f(a: buf, n: i64) {\n  store [a + 8*(bid*bdim + tid)] = n :8\n}";
        let s = exec(src);
        let addr = &s.accesses[0].address;
        let text = expr_to_sexpr(addr, &s.vars);
        let mut resolve = |name: &str| s.vars.find(name);
        let back = parse_sexpr_expr(&text, &mut resolve).unwrap();
        assert_eq!(&back, addr);

        let g = SymBool::le(SymExpr::var(s.vars.find("n").unwrap()), SymExpr::constant(32));
        let gtext = bool_to_sexpr(&g, &s.vars);
        let mut resolve2 = |name: &str| s.vars.find(name);
        assert_eq!(parse_sexpr_bool(&gtext, &mut resolve2).unwrap(), g);
    }

    #[test]
    fn straight_line_summary() {
        let s = exec(
            "kernel vadd(a: buf, b: buf, c: buf) {\n  let idx = bid*bdim + tid\n  let x = load [a + 8*idx] :8\n  let y = load [b + 8*idx] :8\n  store [c + 8*idx] = x + y :8\n}",
        );
        assert_eq!(s.accesses.len(), 3);
        assert_eq!(s.reads().count(), 2);
        assert_eq!(s.writes().count(), 1);
        assert!(s.global_condition.is_empty());
        assert_eq!(s.paths, 1);
        assert_eq!(classify_kernel(&s), KernelClass::CondIdempotent);
    }

    #[test]
    fn write_only_kernel_is_idempotent() {
        let s = exec("kernel set(a: buf, v: i64) {\n  store [a + 8*(bid*bdim + tid)] = v :8\n}");
        assert_eq!(classify_kernel(&s), KernelClass::Idempotent);
    }

    #[test]
    fn read_modify_write_is_structural_overlap() {
        let s = exec(
            "kernel inc(a: buf) {\n  let p = a + 8*(bid*bdim + tid)\n  let x = load [p] :8\n  store [p] = x + 1 :8\n}",
        );
        assert_eq!(
            classify_kernel(&s),
            KernelClass::NonIdempotent(NonIdemReason::StructuralOverlap)
        );
    }

    #[test]
    fn mutually_exclusive_paths_are_not_overlap() {
        // Read and write hit the same address only on complementary branches.
        let s = exec(
            "kernel split(a: buf, flag: i64) {\n  let p = a + 8*tid\n  if flag == 1 {\n    let x = load [p] :8\n    store [p + 8192] = x + 1 :8\n  } else {\n    store [p] = 7 :8\n  }\n}",
        );
        assert_eq!(classify_kernel(&s), KernelClass::CondIdempotent);
    }

    #[test]
    fn atomics_classify_as_non_idempotent() {
        let s = exec("kernel hist(h: buf) {\n  atomic_add [h + 8*(tid & 15)] += 1 :8\n}");
        assert_eq!(classify_kernel(&s), KernelClass::NonIdempotent(NonIdemReason::Atomic));
    }

    #[test]
    fn indirect_call_is_flagged() {
        let s = exec(
            "kernel jump(a: buf, n: i64) {\n  if n < 0 {\n    call_indirect n\n  }\n  store [a + 8*tid] = n :8\n}",
        );
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].kind, FailureKind::IndirectFlow);
        assert_eq!(classify_kernel(&s), KernelClass::NonIdempotent(NonIdemReason::IndirectFlow));
    }

    #[test]
    fn path_budget_trips_at_513_leaves() {
        let mut body = String::new();
        for i in 0..9 {
            body.push_str(&format!("  if p{i} == 1 {{\n    let t{i} = 1\n  }}\n"));
        }
        let params: Vec<String> = (0..9).map(|i| format!("p{i}: i64")).collect();
        let src = format!(
            "kernel wide(a: buf, {}) {{\n{}  store [a + 8*tid] = 0 :8\n}}",
            params.join(", "),
            body
        );
        let s = exec(&src);
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].kind, FailureKind::PathExplosion);

        // One branch fewer stays exactly at the 256-path budget.
        let mut body8 = String::new();
        for i in 0..8 {
            body8.push_str(&format!("  if p{i} == 1 {{\n    let t{i} = 1\n  }}\n"));
        }
        let params8: Vec<String> = (0..8).map(|i| format!("p{i}: i64")).collect();
        let src8 = format!(
            "kernel wide8(a: buf, {}) {{\n{}  store [a + 8*tid] = 0 :8\n}}",
            params8.join(", "),
            body8
        );
        let s8 = exec(&src8);
        assert!(s8.failures.is_empty());
        assert_eq!(s8.paths, 256);
    }

    #[test]
    fn repeated_branch_does_not_fork_twice() {
        let s = exec(
            "kernel twice(a: buf, c: i64) {\n  if c == 1 {\n    store [a + 8*tid] = 1 :8\n  }\n  if c == 1 {\n    store [a + 8*tid + 8192] = 2 :8\n  }\n}",
        );
        assert_eq!(s.paths, 2);
    }

    #[test]
    fn counted_loop_with_constant_bounds_unrolls_exactly() {
        let s = exec(
            "kernel fill(a: buf) {\n  for i in 0 .. 8 {\n    store [a + 4*i + 32*tid] = i :4\n  }\n}",
        );
        assert_eq!(s.writes().count(), 8);
        assert!(s.accesses.iter().all(|a| a.path_conditions.is_empty()));
        assert!(s.global_condition.is_empty());
        let sites: Vec<String> = s.accesses.iter().map(|a| a.site.to_string()).collect();
        assert!(sites[0].ends_with("[0]") && sites[7].ends_with("[7]"));
    }

    #[test]
    fn counted_loop_with_symbolic_bound_guards_and_conditions() {
        let s = exec(
            "kernel relu(a: buf, b: buf, n: i64) {\n  for i in 0 .. n {\n    let x = load [a + 4*i] :4\n    store [b + 4*i] = max(x, 0) :4\n  }\n}",
        );
        assert_eq!(s.reads().count(), 32);
        assert_eq!(s.writes().count(), 32);
        let n = SymExpr::var(s.vars.find("n").unwrap());
        for (k, r) in s.reads().enumerate() {
            assert_eq!(
                r.path_conditions,
                vec![SymBool::lt(SymExpr::constant(k as i64), n.clone())]
            );
        }
        assert_eq!(s.global_condition, vec![SymBool::le(n, SymExpr::constant(32))]);
    }

    #[test]
    fn template_mode_compacts_counted_loop() {
        let s = exec_template(
            "kernel relu(a: buf, b: buf, n: i64) {\n  for i in 0 .. n {\n    let x = load [a + 4*i] :4\n    store [b + 4*i] = max(x, 0) :4\n  }\n}",
        );
        assert_eq!(s.accesses.len(), 2);
        assert_eq!(s.induction.len(), 1);
        let info = &s.induction[0];
        assert_eq!(info.name, "i");
        assert_eq!(info.step, 1);
        assert_eq!(info.initial.as_const(), Some(0));
        let n = SymExpr::var(s.vars.find("n").unwrap());
        assert_eq!(info.trip, Some(SymExpr::max2(n.clone(), SymExpr::constant(0))));
        let read = s.reads().next().unwrap();
        let expected = SymExpr::add2(
            SymExpr::var(s.vars.find("a").unwrap()),
            SymExpr::mul2(SymExpr::constant(4), SymExpr::var(info.var)),
        );
        assert_eq!(read.address, expected);
        assert!(read.path_conditions.contains(&SymBool::lt(SymExpr::var(info.var), n.clone())));
        // Compaction keeps the unroll-budget condition; templating only
        // changes how the in-budget iterations are represented.
        assert_eq!(s.global_condition, vec![SymBool::le(n, SymExpr::constant(32))]);
    }

    #[test]
    fn while_loop_forks_per_iteration() {
        let s = exec(
            "kernel scan(a: buf, n: i64) {\n  let i = 0\n  while i < n {\n    store [a + 4*i] = i :4\n    i = i + 1\n  }\n}",
        );
        assert!(s.failures.is_empty());
        assert_eq!(s.writes().count(), 32);
        let n = SymExpr::var(s.vars.find("n").unwrap());
        assert_eq!(s.global_condition, vec![SymBool::le(n, SymExpr::constant(32))]);
        // Iteration k executes under the accumulated head conditions.
        let w1 = s.writes().nth(1).unwrap();
        assert_eq!(w1.path_conditions.len(), 2);
    }

    #[test]
    fn template_mode_summarizes_qualifying_while() {
        let s = exec_template(
            "kernel scan(a: buf, n: i64) {\n  let i = 0\n  while i < n {\n    store [a + 4*i] = i :4\n    i = i + 1\n  }\n}",
        );
        assert_eq!(s.accesses.len(), 1);
        assert_eq!(s.induction.len(), 1);
        let info = &s.induction[0];
        let n = SymExpr::var(s.vars.find("n").unwrap());
        assert_eq!(info.trip, Some(SymExpr::max2(n.clone(), SymExpr::constant(0))));
        let w = s.writes().next().unwrap();
        assert!(w.path_conditions.contains(&SymBool::lt(SymExpr::var(info.var), n.clone())));
        assert!(w.path_conditions.contains(&SymBool::lt(SymExpr::constant(0), n.clone())));
        // Head at the window edge is i = 32, so the budget condition matches
        // the iterated form's n <= 32.
        assert_eq!(s.global_condition, vec![SymBool::le(n, SymExpr::constant(32))]);
    }

    #[test]
    fn data_dependent_while_bound_is_path_explosion() {
        let s = exec(
            "kernel dyn(a: buf) {\n  let lim = load [a] :8\n  let i = 0\n  while i < lim {\n    store [a + 8 + 8*i] = i :8\n    i = i + 1\n  }\n}",
        );
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].kind, FailureKind::PathExplosion);
    }

    #[test]
    fn loads_are_not_forwarded() {
        let s = exec(
            "kernel fwd(a: buf) {\n  store [a + 8*tid] = 3 :8\n  let x = load [a + 8*tid] :8\n  store [a + 8*tid + 64] = x :8\n}",
        );
        // The load reads back what was just stored, but its value is still
        // opaque, and the read keeps the summary from being write-only.
        assert_eq!(
            classify_kernel(&s),
            KernelClass::NonIdempotent(NonIdemReason::StructuralOverlap)
        );
    }

    #[test]
    fn same_site_copies_merge_to_common_conditions() {
        let s = exec(
            "kernel merge(a: buf, c: i64) {\n  for i in 0 .. 2 {\n    if c == 1 {\n      let t = 1\n    }\n    store [a + 64*tid] = i :8\n  }\n}",
        );
        // Each unrolled copy of the store appears once per branch; the merged
        // copy keeps only conditions common to both, i.e. none.
        let writes: Vec<_> = s.writes().collect();
        assert_eq!(writes.len(), 2);
        assert!(writes.iter().all(|w| w.path_conditions.is_empty()));
    }

    #[test]
    fn nested_loops_template_together() {
        let s = exec_template(
            "kernel tile(a: buf, n: i64) {\n  for i in 0 .. n {\n    for j in 0 .. 4 {\n      store [a + 16*i + 4*j] = j :4\n    }\n  }\n}",
        );
        // Both levels collapse: one write over two induction variables.
        assert_eq!(s.writes().count(), 1);
        assert_eq!(s.induction.len(), 2);
        let w = s.writes().next().unwrap();
        for info in &s.induction {
            assert!(w.address.contains_var(info.var));
        }
    }

    #[test]
    fn for_loop_over_launch_dims_is_analyzable() {
        let s = exec(
            "kernel dims(a: buf) {\n  for i in 0 .. gdim {\n    store [a + 8*i + 8*gdim*tid] = i :8\n  }\n}",
        );
        assert!(s.failures.is_empty());
        let g = SymExpr::var(GDIM);
        assert_eq!(s.global_condition, vec![SymBool::le(g, SymExpr::constant(32))]);
    }

    #[test]
    fn step_local_in_counted_loop_gets_closed_form() {
        let s = exec_template(
            "kernel strider(a: buf, n: i64) {\n  let off = 0\n  for i in 0 .. n {\n    store [a + off] = i :8\n    off = off + 8\n  }\n  store [a + off] = 0 :8\n}",
        );
        assert_eq!(s.induction.len(), 2);
        // The final store sees off's closed form: 8 * max(n, 0).
        let n = SymExpr::var(s.vars.find("n").unwrap());
        let last = s.writes().last().unwrap();
        let expected = SymExpr::add2(
            SymExpr::var(s.vars.find("a").unwrap()),
            SymExpr::mul2(SymExpr::constant(8), SymExpr::max2(n, SymExpr::constant(0))),
        );
        assert_eq!(last.address, expected);
    }
}
