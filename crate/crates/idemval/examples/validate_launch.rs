//! Compile a validation plan and decide a few launches against it,
//! printing verdict, cause, and decision latency.
//!
//! The same vector-add kernel goes from idempotent to non-idempotent
//! purely through its launch arguments: aliasing the output buffer onto
//! an input makes re-execution read already-clobbered data.

use idemval::ir::parse_kernel;
use idemval::range::analyze_kernel;
use idemval::validator::{compile_plan, validate, Cause, Decision, Instance};
use idemval::AnalysisConfig;

const SRC: &str = "\
kernel vadd(a: buf, b: buf, c: buf, n: i64) {
  if bid * bdim + tid < n {
    let x = load [a + 8*(bid*bdim + tid)] :8
    let y = load [b + 8*(bid*bdim + tid)] :8
    store [c + 8*(bid*bdim + tid)] = x + y :8
  }
}
";

fn main() {
    let kernel = parse_kernel(SRC).unwrap();
    let analysis = analyze_kernel(&kernel, &AnalysisConfig::default(), true);
    let plan = compile_plan(&analysis);
    println!("kernel {} compiles to a {}-instruction plan\n", plan.kernel(), plan.len());

    let a = 0x1000_0000i64;
    let b = 0x2000_0000i64;
    let c = 0x3000_0000i64;
    let launches = [
        ("distinct buffers", vec![a, b, c, 4096]),
        ("output aliases input", vec![a, b, a, 4096]),
        ("output overlaps input tail", vec![a, b, a + 8 * 2048, 4096]),
        ("unaligned output", vec![a, b, c + 3, 4096]),
    ];
    for (what, args) in launches {
        let inst = Instance { kernel: "vadd".into(), args, gdim: 16, bdim: 256 };
        let v = validate(&plan, &inst).unwrap();
        let verdict = match &v.decision {
            Decision::Idempotent => "idempotent".to_string(),
            Decision::NonIdempotent(cause) => match cause {
                Cause::Overlap { read, write, lo, hi, .. } => format!(
                    "non-idempotent: read {read} overlaps write {write} on bytes [{lo:#x}, {hi:#x}]"
                ),
                other => format!("non-idempotent: {other:?}"),
            },
        };
        println!("{what:28} -> {verdict}  ({} ns)", v.latency_ns);
    }
}
