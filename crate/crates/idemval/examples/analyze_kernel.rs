//! Analyze a kernel from source and print what the validator will work
//! with: class, preconditions, global condition, and range descriptors.
//!
//! Run with a path to a `.gk` file, or with no arguments to analyze the
//! built-in demo kernel below.

use idemval::ir::parse_kernel;
use idemval::range::analyze_kernel;
use idemval::sym::{bool_to_sexpr, expr_to_sexpr};
use idemval::AnalysisConfig;

const DEMO: &str = "\
@require N >= 0
@require N <= 1024
kernel relu(A: buf, B: buf, N: i64) {
  for i in 0 .. N {
    let a = load [A + 4*((bid*bdim + tid)*N + i)] :4
    store [B + 4*((bid*bdim + tid)*N + i)] = max(a, 0) :4
  }
}
";

fn main() {
    let src = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("cannot read {path}: {e}")),
        None => DEMO.to_string(),
    };
    let kernel = parse_kernel(&src).unwrap_or_else(|e| panic!("parse error: {e}"));
    let analysis = analyze_kernel(&kernel, &AnalysisConfig::default(), true);
    let vars = &analysis.summary.vars;

    println!("kernel  {}", analysis.kernel());
    println!("class   {}", analysis.class);
    println!("paths   {}", analysis.summary.paths);
    for f in &analysis.summary.failures {
        println!("failure {} at {}", f.kind.code(), f.site);
    }
    println!("\npreconditions (checked first at launch time):");
    for p in &analysis.preconditions {
        println!("  {}", bool_to_sexpr(p, vars));
    }
    if !analysis.summary.global_condition.is_empty() {
        println!("\nglobal condition (analysis only valid when it holds):");
        for c in &analysis.summary.global_condition {
            println!("  {}", bool_to_sexpr(c, vars));
        }
    }
    println!("\nrange descriptors:");
    for d in &analysis.descriptors {
        let flags = match (d.opaque, d.nc) {
            (true, _) => " opaque",
            (false, true) => " nc",
            (false, false) => "",
        };
        println!("  {} :{} at {}{}", d.kind, d.width, d.provenance, flags);
        if d.opaque {
            println!("    extent unknown");
        } else {
            println!("    lb {}", expr_to_sexpr(&d.lb, vars));
            println!("    ub {}", expr_to_sexpr(&d.ub, vars));
        }
        for g in &d.guard {
            println!("    when {}", bool_to_sexpr(g, vars));
        }
    }
    if analysis.dropped_conditions > 0 {
        println!("\n{} guard(s) dropped (descriptors widened)", analysis.dropped_conditions);
    }
}
