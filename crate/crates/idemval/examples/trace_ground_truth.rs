//! Execute kernel instances for real and derive ground-truth idempotency
//! from the memory trace.
//!
//! Runs the increment/set/add trio, dumps the short traces as CSV, and shows
//! the clobber witness for the non-idempotent ones. Finishes with the
//! restart experiment: interrupt an idempotent launch after every possible
//! access and check that re-running from the partial memory always lands on
//! the same final state.

use idemval::ir::parse_kernel;
use idemval::oracle::{ground_truth, trace_instance, MemoryImage, OracleLimits};
use idemval::validator::Instance;

const A: i64 = 0x1000_0000;
const B: i64 = 0x1010_0000;

const KERNELS: &[&str] = &[
    "kernel vectorSet(A: buf) {\n  store [A + 8 * (bid * bdim + tid)] = 7 :8\n}",
    "kernel vectorInc(A: buf) {\n  let v = load [A + 8 * (bid * bdim + tid)] :8\n  store [A + 8 * (bid * bdim + tid)] = v + 1 :8\n}",
    "kernel vectorAdd(A: buf, B: buf, C: buf) {\n  let idx = bid * bdim + tid\n  let b = load [B + 4 * idx] :4\n  let c = load [C + 4 * idx] :4\n  store [A + 4 * idx] = b + c :4\n}",
];

fn main() {
    let limits = OracleLimits::default();

    for src in KERNELS {
        let k = parse_kernel(src).unwrap();
        let args: Vec<i64> = match k.params.len() {
            1 => vec![A],
            // Aliased launch: the output buffer is also the second input.
            _ => vec![A, B, A],
        };
        let inst = Instance { kernel: k.name.clone(), args, gdim: 1, bdim: 2 };

        let mut mem = MemoryImage::new();
        mem.fill_seeded(A as u64, 64, 1);
        mem.fill_seeded(B as u64, 64, 2);
        let trace = trace_instance(&k, &inst, &mut mem, &limits).unwrap();

        println!("== {} ==", k.name);
        print!("{}", trace.to_csv());
        let gt = ground_truth(&trace);
        match gt.witness {
            None => println!("ground truth: idempotent\n"),
            Some(w) => println!(
                "ground truth: non-idempotent (byte 0x{:x} read at serial {}, clobbered at serial {})\n",
                w.address, w.read_serial, w.write_serial
            ),
        }
    }

    // Restart experiment on a distinct-buffer vectorAdd.
    let k = parse_kernel(KERNELS[2]).unwrap();
    let inst = Instance {
        kernel: "vectorAdd".into(),
        args: vec![A, B, A + 0x20_0000],
        gdim: 2,
        bdim: 4,
    };
    let mut m0 = MemoryImage::new();
    m0.fill_seeded(B as u64, 64, 2);
    m0.fill_seeded((A + 0x20_0000) as u64, 64, 3);
    let mut clean = m0.clone();
    let full = trace_instance(&k, &inst, &mut clean, &limits).unwrap();
    let mut diverged = 0;
    for cut in 0..=full.len() as u64 {
        let mut m = m0.clone();
        let partial = OracleLimits { stop_after: Some(cut), ..limits };
        trace_instance(&k, &inst, &mut m, &partial).unwrap();
        trace_instance(&k, &inst, &mut m, &limits).unwrap();
        if m != clean {
            diverged += 1;
        }
    }
    println!(
        "restart experiment: vectorAdd interrupted at each of {} cut points, {} divergences",
        full.len() + 1,
        diverged
    );
}
