//! Concrete execution oracle: runs a kernel instance for real, byte by byte,
//! and derives ground-truth idempotency from the memory trace.
//!
//! Threads execute in canonical order (blocks ascending, threads ascending
//! within a block, program order within a thread) against one shared sparse
//! memory image. Idempotency of the trace is decided by a clobber scan: the
//! instance is non-idempotent iff some byte is read while still pristine and
//! written afterwards, because a re-execution would read the overwritten
//! value. A byte written before any read absorbs everything that follows.
//!
//! The oracle is the arbiter in accuracy comparisons: a launch the validator
//! accepts as idempotent must never show a clobber here.

mod accuracy;

pub use accuracy::{compare_corpus, fn_bucket, AccuracyReport, CorpusError, CorpusRun, FnBucket, KernelAccuracy};

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ir::{BinOp, BoolExpr, CmpOp, IntExpr, Kernel, ParamKind, Stmt};
use crate::sym::StmtIds;
use crate::validator::Instance;

/// Sparse byte-addressed memory, default value 0.
///
/// Zero bytes are never stored explicitly (writing 0 removes the entry), so
/// derived equality is semantic equality of the full address space and images
/// stay small no matter where a stray address lands.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryImage {
    bytes: HashMap<u64, u8>,
}

impl MemoryImage {
    pub fn new() -> MemoryImage {
        MemoryImage::default()
    }

    pub fn byte(&self, addr: u64) -> u8 {
        self.bytes.get(&addr).copied().unwrap_or(0)
    }

    pub fn set_byte(&mut self, addr: u64, v: u8) {
        if v == 0 {
            self.bytes.remove(&addr);
        } else {
            self.bytes.insert(addr, v);
        }
    }

    /// Little-endian load, sign-extended from `width` bytes so narrow cells
    /// behave like the machine integer they model.
    pub fn read(&self, addr: u64, width: u8) -> i64 {
        let mut v: u64 = 0;
        for i in 0..width {
            v |= (self.byte(addr.wrapping_add(i as u64)) as u64) << (8 * i as u32);
        }
        let unused = 64 - 8 * width as u32;
        ((v << unused) as i64) >> unused
    }

    /// Little-endian store of the low `width` bytes of `v`.
    pub fn write(&mut self, addr: u64, width: u8, v: i64) {
        for i in 0..width {
            self.set_byte(addr.wrapping_add(i as u64), (v >> (8 * i as u32)) as u8);
        }
    }

    /// Deterministic nonzero fill: `len` bytes at `base` drawn from a stream
    /// seeded with `seed`. Bytes are never 0 so seeded contents can't be
    /// mistaken for untouched memory.
    pub fn fill_seeded(&mut self, base: u64, len: u64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..len {
            let b = 1 + (rng.next_u32() % 255) as u8;
            self.set_byte(base.wrapping_add(i), b);
        }
    }

    /// Count of explicitly stored (nonzero) bytes.
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Read,
    Write,
    /// Atomic read-modify-write: one record, but the clobber scan treats it
    /// as a read followed by a write at the same serial.
    AtomicRmw,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Read => "read",
            TraceKind::Write => "write",
            TraceKind::AtomicRmw => "atomic",
        }
    }
}

/// One memory access in canonical execution order. `serial` equals the
/// record's index in the trace. `stmt` is the pre-order statement id of the
/// access site, used to match traced bytes against that site's descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub serial: u64,
    pub bid: u32,
    pub tid: u32,
    pub kind: TraceKind,
    pub address: u64,
    pub width: u8,
    pub stmt: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryTrace {
    pub records: Vec<TraceRecord>,
}

impl MemoryTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Dump as CSV with columns serial, bid, tid, kind, address (hex), width.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("serial,bid,tid,kind,address,width\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{},0x{:x},{}", r.serial, r.bid, r.tid, r.kind.as_str(), r.address, r.width)
                .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("division by zero at statement {site}")]
    DivisionByZero { site: u32 },
    #[error("step limit exceeded in thread (bid {bid}, tid {tid})")]
    StepLimitExceeded { bid: u32, tid: u32 },
    #[error("indirect call reached at statement {site}")]
    IndirectCallUnsupported { site: u32 },
    #[error("launch does not fit kernel: {0}")]
    Launch(String),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    /// Per-thread budget of executed statements (loop iterations included).
    pub max_steps: u64,
    /// Halt execution once this many trace records exist. The memory image
    /// then reflects exactly the completed accesses, which is what a preempted
    /// launch leaves behind.
    pub stop_after: Option<u64>,
}

impl Default for OracleLimits {
    fn default() -> OracleLimits {
        OracleLimits { max_steps: 1_000_000, stop_after: None }
    }
}

/// Why execution of one thread stopped early.
enum Halt {
    Fail(ExecError),
    /// `stop_after` budget reached; not an error.
    Budget,
}

struct Exec<'a> {
    mem: &'a mut MemoryImage,
    trace: Vec<TraceRecord>,
    stop_after: Option<u64>,
}

impl Exec<'_> {
    fn record(&mut self, kind: TraceKind, bid: u32, tid: u32, address: u64, width: u8, stmt: u32) {
        let serial = self.trace.len() as u64;
        self.trace.push(TraceRecord { serial, bid, tid, kind, address, width, stmt });
    }

    fn budget_hit(&self) -> bool {
        self.stop_after.is_some_and(|n| self.trace.len() as u64 >= n)
    }
}

struct ThreadCtx<'a> {
    ids: &'a StmtIds,
    locals: HashMap<String, i64>,
    bid: i64,
    tid: i64,
    bdim: i64,
    gdim: i64,
    steps_left: u64,
}

impl ThreadCtx<'_> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.steps_left == 0 {
            return Err(Halt::Fail(ExecError::StepLimitExceeded {
                bid: self.bid as u32,
                tid: self.tid as u32,
            }));
        }
        self.steps_left -= 1;
        Ok(())
    }

    fn eval(&self, e: &IntExpr, site: u32) -> Result<i64, Halt> {
        Ok(match e {
            IntExpr::Const(c) => *c,
            IntExpr::Ident(name) => *self
                .locals
                .get(name)
                .unwrap_or_else(|| panic!("unbound identifier `{name}`; kernel not validated")),
            IntExpr::Bid => self.bid,
            IntExpr::Tid => self.tid,
            IntExpr::Bdim => self.bdim,
            IntExpr::Gdim => self.gdim,
            IntExpr::Bin(op, a, b) => {
                let a = self.eval(a, site)?;
                let b = self.eval(b, site)?;
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div if b == 0 => return Err(Halt::Fail(ExecError::DivisionByZero { site })),
                    BinOp::Div => a.wrapping_div(b),
                    BinOp::Rem if b == 0 => return Err(Halt::Fail(ExecError::DivisionByZero { site })),
                    BinOp::Rem => a.wrapping_rem(b),
                    BinOp::And => a & b,
                    BinOp::Or => a | b,
                    BinOp::Xor => a ^ b,
                    BinOp::Shl => a.wrapping_shl(b as u32),
                    BinOp::Shr => a.wrapping_shr(b as u32),
                }
            }
            IntExpr::Neg(a) => self.eval(a, site)?.wrapping_neg(),
            IntExpr::Min(a, b) => self.eval(a, site)?.min(self.eval(b, site)?),
            IntExpr::Max(a, b) => self.eval(a, site)?.max(self.eval(b, site)?),
        })
    }

    fn eval_bool(&self, b: &BoolExpr, site: u32) -> Result<bool, Halt> {
        Ok(match b {
            BoolExpr::Cmp(op, l, r) => {
                let l = self.eval(l, site)?;
                let r = self.eval(r, site)?;
                match op {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                }
            }
            BoolExpr::And(l, r) => self.eval_bool(l, site)? && self.eval_bool(r, site)?,
            BoolExpr::Or(l, r) => self.eval_bool(l, site)? || self.eval_bool(r, site)?,
            BoolExpr::Not(inner) => !self.eval_bool(inner, site)?,
        })
    }

    fn run(&mut self, stmts: &[Stmt], ex: &mut Exec<'_>) -> Result<(), Halt> {
        for s in stmts {
            let site = self.ids.id(s);
            match s {
                Stmt::Let { dest, value } => {
                    self.tick()?;
                    let v = self.eval(value, site)?;
                    self.locals.insert(dest.clone(), v);
                }
                Stmt::Load { dest, addr, width } => {
                    if ex.budget_hit() {
                        return Err(Halt::Budget);
                    }
                    self.tick()?;
                    let a = self.eval(addr, site)? as u64;
                    ex.record(TraceKind::Read, self.bid as u32, self.tid as u32, a, width.bytes(), site);
                    let v = ex.mem.read(a, width.bytes());
                    self.locals.insert(dest.clone(), v);
                }
                Stmt::Store { addr, value, width } => {
                    if ex.budget_hit() {
                        return Err(Halt::Budget);
                    }
                    self.tick()?;
                    let a = self.eval(addr, site)? as u64;
                    let v = self.eval(value, site)?;
                    ex.record(TraceKind::Write, self.bid as u32, self.tid as u32, a, width.bytes(), site);
                    ex.mem.write(a, width.bytes(), v);
                }
                Stmt::AtomicAdd { addr, value, width } => {
                    if ex.budget_hit() {
                        return Err(Halt::Budget);
                    }
                    self.tick()?;
                    let a = self.eval(addr, site)? as u64;
                    let v = self.eval(value, site)?;
                    ex.record(TraceKind::AtomicRmw, self.bid as u32, self.tid as u32, a, width.bytes(), site);
                    let old = ex.mem.read(a, width.bytes());
                    ex.mem.write(a, width.bytes(), old.wrapping_add(v));
                }
                Stmt::If { cond, then_body, else_body } => {
                    self.tick()?;
                    if self.eval_bool(cond, site)? {
                        self.run(then_body, ex)?;
                    } else {
                        self.run(else_body, ex)?;
                    }
                }
                Stmt::ForCounted { counter, lo, hi, body } => {
                    self.tick()?;
                    let lo = self.eval(lo, site)?;
                    let hi = self.eval(hi, site)?;
                    let saved = self.locals.get(counter).copied();
                    let mut c = lo;
                    while c < hi {
                        self.tick()?;
                        self.locals.insert(counter.clone(), c);
                        self.run(body, ex)?;
                        c += 1;
                    }
                    match saved {
                        Some(v) => self.locals.insert(counter.clone(), v),
                        None => self.locals.remove(counter),
                    };
                }
                Stmt::While { cond, body } => loop {
                    self.tick()?;
                    if !self.eval_bool(cond, site)? {
                        break;
                    }
                    self.run(body, ex)?;
                },
                Stmt::CallIndirect { .. } => {
                    self.tick()?;
                    return Err(Halt::Fail(ExecError::IndirectCallUnsupported { site }));
                }
            }
        }
        Ok(())
    }
}

/// Execute every thread of `inst` in canonical order against `mem`, mutating
/// it in place, and return the ordered access trace.
///
/// Pre: `inst` names `k` and supplies one argument per parameter (checked,
/// reported as [`ExecError::Launch`]); the kernel passed structural
/// validation (unchecked).
pub fn trace_instance(
    k: &Kernel,
    inst: &Instance,
    mem: &mut MemoryImage,
    limits: &OracleLimits,
) -> Result<MemoryTrace, ExecError> {
    if inst.kernel != k.name {
        return Err(ExecError::Launch(format!(
            "instance is for `{}`, kernel is `{}`",
            inst.kernel, k.name
        )));
    }
    if inst.args.len() != k.params.len() {
        return Err(ExecError::Launch(format!(
            "kernel `{}` takes {} arguments, instance has {}",
            k.name,
            k.params.len(),
            inst.args.len()
        )));
    }

    let ids = StmtIds::build(k);
    let mut base_locals = HashMap::new();
    for (p, &a) in k.params.iter().zip(&inst.args) {
        let v = match p.kind {
            ParamKind::ScalarI32 => (a as i32) as i64,
            ParamKind::Buffer | ParamKind::ScalarI64 => a,
        };
        base_locals.insert(p.name.clone(), v);
    }

    let mut ex = Exec { mem, trace: Vec::new(), stop_after: limits.stop_after };
    'grid: for bid in 0..inst.gdim {
        for tid in 0..inst.bdim {
            let mut t = ThreadCtx {
                ids: &ids,
                locals: base_locals.clone(),
                bid: bid as i64,
                tid: tid as i64,
                bdim: inst.bdim as i64,
                gdim: inst.gdim as i64,
                steps_left: limits.max_steps,
            };
            match t.run(&k.body, &mut ex) {
                Ok(()) => {}
                Err(Halt::Budget) => break 'grid,
                Err(Halt::Fail(e)) => return Err(e),
            }
        }
    }
    Ok(MemoryTrace { records: ex.trace })
}

/// The first clobber anti-dependency in a trace: a byte read while pristine
/// and overwritten later. Serials index into the trace that produced it; for
/// an atomic the two serials coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClobberWitness {
    pub read_serial: u64,
    pub write_serial: u64,
    pub address: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub idempotent: bool,
    pub witness: Option<ClobberWitness>,
}

#[derive(Clone, Copy)]
enum ByteState {
    /// First touch was a read at this serial; a later write clobbers it.
    ReadFirst(u64),
    /// First touch was a write; everything after is absorbed.
    Written,
}

/// Decide idempotency of a trace by the per-byte clobber scan. Returns the
/// first witness in trace order (bytes of one record scanned ascending).
pub fn ground_truth(trace: &MemoryTrace) -> GroundTruth {
    let mut state: HashMap<u64, ByteState> = HashMap::new();
    for r in &trace.records {
        for i in 0..r.width {
            let b = r.address.wrapping_add(i as u64);
            let read = matches!(r.kind, TraceKind::Read | TraceKind::AtomicRmw);
            let write = matches!(r.kind, TraceKind::Write | TraceKind::AtomicRmw);
            if read {
                state.entry(b).or_insert(ByteState::ReadFirst(r.serial));
            }
            if write {
                match state.get(&b) {
                    Some(ByteState::ReadFirst(rs)) => {
                        return GroundTruth {
                            idempotent: false,
                            witness: Some(ClobberWitness {
                                read_serial: *rs,
                                write_serial: r.serial,
                                address: b,
                            }),
                        };
                    }
                    Some(ByteState::Written) => {}
                    None => {
                        state.insert(b, ByteState::Written);
                    }
                }
            }
        }
    }
    GroundTruth { idempotent: true, witness: None }
}

/// Check `exec(exec(M0)) == exec(M0)`: run the instance once from `m0`, then
/// again from the result, and compare images. Holds exactly when
/// [`ground_truth`] calls the instance idempotent.
pub fn reexecution_equivalent(
    k: &Kernel,
    inst: &Instance,
    m0: &MemoryImage,
    limits: &OracleLimits,
) -> Result<bool, ExecError> {
    let mut once = m0.clone();
    trace_instance(k, inst, &mut once, limits)?;
    let mut twice = once.clone();
    trace_instance(k, inst, &mut twice, limits)?;
    Ok(once == twice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_kernel;

    fn inst(kernel: &str, args: &[i64], gdim: u32, bdim: u32) -> Instance {
        Instance { kernel: kernel.into(), args: args.to_vec(), gdim, bdim }
    }

    const A: i64 = 0x1000_0000;
    const B: i64 = 0x1010_0000;
    const C: i64 = 0x1020_0000;

    const VADD: &str = "\
kernel vectorAdd(A: buf, B: buf, C: buf) {
  let idx = bid * bdim + tid
  let b = load [B + 4 * idx] :4
  let c = load [C + 4 * idx] :4
  store [A + 4 * idx] = b + c :4
}
";

    const VINC: &str = "\
kernel vectorInc(X: buf) {
  let v = load [X + 8 * (bid * bdim + tid)] :8
  store [X + 8 * (bid * bdim + tid)] = v + 1 :8
}
";

    #[test]
    fn image_round_trips_widths_with_sign_extension() {
        let mut m = MemoryImage::new();
        m.write(0x100, 4, -1);
        assert_eq!(m.read(0x100, 4), -1);
        assert_eq!(m.read(0x100, 2), -1);
        assert_eq!(m.read(0x100, 8), 0xffff_ffff);
        m.write(0x200, 8, 0x0102_0304_0506_0708);
        assert_eq!(m.read(0x200, 8), 0x0102_0304_0506_0708);
        assert_eq!(m.byte(0x200), 0x08);
        assert_eq!(m.read(0x204, 4), 0x0102_0304);
    }

    #[test]
    fn zero_writes_leave_no_residue() {
        let mut m = MemoryImage::new();
        m.write(0x40, 8, 0);
        assert_eq!(m, MemoryImage::new());
        m.write(0x40, 8, 77);
        m.write(0x40, 8, 0);
        assert!(m.is_empty());
    }

    #[test]
    fn seeded_fill_is_deterministic_and_nonzero() {
        let mut a = MemoryImage::new();
        let mut b = MemoryImage::new();
        a.fill_seeded(0x1000, 64, 7);
        b.fill_seeded(0x1000, 64, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        let mut c = MemoryImage::new();
        c.fill_seeded(0x1000, 64, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn vector_add_trace_counts_and_order() {
        let k = parse_kernel(VADD).unwrap();
        let mut m = MemoryImage::new();
        let tr = trace_instance(&k, &inst("vectorAdd", &[A, B, C], 2, 2), &mut m, &OracleLimits::default())
            .unwrap();
        let reads = tr.records.iter().filter(|r| r.kind == TraceKind::Read).count();
        let writes = tr.records.iter().filter(|r| r.kind == TraceKind::Write).count();
        assert_eq!((reads, writes), (8, 4));
        // Canonical order: serials equal indices, (bid, tid) non-decreasing.
        for (i, r) in tr.records.iter().enumerate() {
            assert_eq!(r.serial, i as u64);
        }
        let keys: Vec<(u32, u32)> = tr.records.iter().map(|r| (r.bid, r.tid)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(ground_truth(&tr).idempotent);
    }

    #[test]
    fn empty_kernel_traces_nothing() {
        let k = parse_kernel("kernel nop() {}").unwrap();
        let mut m = MemoryImage::new();
        let tr = trace_instance(&k, &inst("nop", &[], 4, 8), &mut m, &OracleLimits::default()).unwrap();
        assert!(tr.is_empty());
        assert!(m.is_empty());
    }

    #[test]
    fn increment_clobbers_its_own_read() {
        let k = parse_kernel(VINC).unwrap();
        let mut m = MemoryImage::new();
        m.fill_seeded(A as u64, 32, 1);
        let tr = trace_instance(&k, &inst("vectorInc", &[A], 1, 2), &mut m, &OracleLimits::default()).unwrap();
        let gt = ground_truth(&tr);
        assert!(!gt.idempotent);
        let w = gt.witness.unwrap();
        assert_eq!(w, ClobberWitness { read_serial: 0, write_serial: 1, address: A as u64 });
    }

    #[test]
    fn aliasing_flips_the_verdict() {
        let k = parse_kernel(VADD).unwrap();
        let mut m = MemoryImage::new();
        m.fill_seeded(B as u64, 64, 2);
        m.fill_seeded(C as u64, 64, 3);
        let tr =
            trace_instance(&k, &inst("vectorAdd", &[A, B, C], 1, 4), &mut m.clone(), &OracleLimits::default())
                .unwrap();
        assert!(ground_truth(&tr).idempotent);

        // C = A: thread 0 reads A[0] through C, then overwrites it.
        let mut m2 = MemoryImage::new();
        m2.fill_seeded(A as u64, 64, 4);
        m2.fill_seeded(B as u64, 64, 2);
        let tr2 = trace_instance(&k, &inst("vectorAdd", &[A, B, A], 1, 4), &mut m2, &OracleLimits::default())
            .unwrap();
        let gt = ground_truth(&tr2);
        assert!(!gt.idempotent);
        let w = gt.witness.unwrap();
        assert_eq!((w.read_serial, w.write_serial, w.address), (1, 2, A as u64));
    }

    #[test]
    fn store_then_load_is_idempotent() {
        let src = "kernel wr(X: buf) {\n  store [X + 8 * tid] = 7 :8\n  let v = load [X + 8 * tid] :8\n}";
        let k = parse_kernel(src).unwrap();
        let mut m = MemoryImage::new();
        let tr = trace_instance(&k, &inst("wr", &[A], 1, 4), &mut m, &OracleLimits::default()).unwrap();
        assert!(ground_truth(&tr).idempotent);
        assert!(reexecution_equivalent(&k, &inst("wr", &[A], 1, 4), &MemoryImage::new(), &OracleLimits::default())
            .unwrap());
    }

    #[test]
    fn atomic_clobbers_at_one_serial() {
        let src = "kernel hist(H: buf) {\n  atomic_add [H] += 1 :8\n}";
        let k = parse_kernel(src).unwrap();
        let mut m = MemoryImage::new();
        let tr = trace_instance(&k, &inst("hist", &[A], 1, 3), &mut m, &OracleLimits::default()).unwrap();
        assert_eq!(tr.len(), 3);
        assert!(tr.records.iter().all(|r| r.kind == TraceKind::AtomicRmw));
        let gt = ground_truth(&tr);
        let w = gt.witness.unwrap();
        assert!(!gt.idempotent);
        assert_eq!((w.read_serial, w.write_serial), (0, 0));
        // The count really accumulated across threads.
        assert_eq!(m.read(A as u64, 8), 3);
    }

    #[test]
    fn division_by_zero_reports_the_site() {
        let k = parse_kernel("kernel f(n: i64) {\n  let a = 1\n  let q = 1 / n\n}").unwrap();
        let mut m = MemoryImage::new();
        let err = trace_instance(&k, &inst("f", &[0], 1, 1), &mut m, &OracleLimits::default()).unwrap_err();
        assert_eq!(err, ExecError::DivisionByZero { site: 1 });
        m = MemoryImage::new();
        trace_instance(&k, &inst("f", &[3], 1, 1), &mut m, &OracleLimits::default()).unwrap();
    }

    #[test]
    fn runaway_loop_hits_step_limit() {
        let k = parse_kernel("kernel f() {\n  while 0 < 1 {\n  }\n}").unwrap();
        let mut m = MemoryImage::new();
        let limits = OracleLimits { max_steps: 1000, ..OracleLimits::default() };
        let err = trace_instance(&k, &inst("f", &[], 2, 2), &mut m, &limits).unwrap_err();
        assert_eq!(err, ExecError::StepLimitExceeded { bid: 0, tid: 0 });
    }

    #[test]
    fn indirect_call_fails_only_when_reached() {
        let src = "kernel f(n: i64) {\n  if n < 0 {\n    call_indirect n\n  }\n}";
        let k = parse_kernel(src).unwrap();
        let mut m = MemoryImage::new();
        trace_instance(&k, &inst("f", &[5], 1, 1), &mut m, &OracleLimits::default()).unwrap();
        let err = trace_instance(&k, &inst("f", &[-1], 1, 1), &mut m, &OracleLimits::default()).unwrap_err();
        assert_eq!(err, ExecError::IndirectCallUnsupported { site: 1 });
    }

    #[test]
    fn launch_mismatch_is_rejected() {
        let k = parse_kernel(VINC).unwrap();
        let mut m = MemoryImage::new();
        assert!(matches!(
            trace_instance(&k, &inst("other", &[A], 1, 1), &mut m, &OracleLimits::default()),
            Err(ExecError::Launch(_))
        ));
        assert!(matches!(
            trace_instance(&k, &inst("vectorInc", &[A, B], 1, 1), &mut m, &OracleLimits::default()),
            Err(ExecError::Launch(_))
        ));
    }

    #[test]
    fn narrow_params_truncate_like_the_validator() {
        let src = "kernel f(X: buf, n: i32) {\n  store [X] = n :8\n}";
        let k = parse_kernel(src).unwrap();
        let mut m = MemoryImage::new();
        trace_instance(&k, &inst("f", &[A, (1i64 << 40) | 5], 1, 1), &mut m, &OracleLimits::default()).unwrap();
        assert_eq!(m.read(A as u64, 8), 5);
    }

    #[test]
    fn reexecution_equivalence_matches_ground_truth() {
        let cases: &[(&str, Vec<i64>, u32, u32)] = &[
            (VADD, vec![A, B, C], 2, 4),
            (VADD, vec![A, B, A], 2, 4),
            (VINC, vec![A], 1, 4),
            ("kernel set(X: buf) {\n  store [X + 8 * tid] = 42 :8\n}", vec![A], 1, 4),
            ("kernel hist(H: buf) {\n  atomic_add [H + 8 * (tid % 2)] += 1 :8\n}", vec![A], 1, 4),
            (
                "kernel wr(X: buf) {\n  store [X + 8 * tid] = 7 :8\n  let v = load [X + 8 * tid] :8\n}",
                vec![A],
                1,
                4,
            ),
        ];
        for (src, args, gdim, bdim) in cases {
            let k = parse_kernel(src).unwrap();
            let launch = inst(&k.name, args, *gdim, *bdim);
            let mut m0 = MemoryImage::new();
            m0.fill_seeded(A as u64, 64, 11);
            m0.fill_seeded(B as u64, 64, 12);
            m0.fill_seeded(C as u64, 64, 13);
            let tr = trace_instance(&k, &launch, &mut m0.clone(), &OracleLimits::default()).unwrap();
            let gt = ground_truth(&tr);
            let eq = reexecution_equivalent(&k, &launch, &m0, &OracleLimits::default()).unwrap();
            assert_eq!(eq, gt.idempotent, "{}", k.name);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let k = parse_kernel(VADD).unwrap();
        let launch = inst("vectorAdd", &[A, B, C], 3, 5);
        let mut m0 = MemoryImage::new();
        m0.fill_seeded(B as u64, 128, 21);
        m0.fill_seeded(C as u64, 128, 22);
        let mut m1 = m0.clone();
        let mut m2 = m0.clone();
        let t1 = trace_instance(&k, &launch, &mut m1, &OracleLimits::default()).unwrap();
        let t2 = trace_instance(&k, &launch, &mut m2, &OracleLimits::default()).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn interrupted_idempotent_launch_restarts_cleanly() {
        // Cut execution after every possible number of accesses, restart from
        // the partial image, and demand the final memory match an undisturbed
        // run. This is the property that makes idempotent launches safe to
        // preempt without a checkpoint.
        let k = parse_kernel(VADD).unwrap();
        let launch = inst("vectorAdd", &[A, B, C], 1, 4);
        let mut m0 = MemoryImage::new();
        m0.fill_seeded(B as u64, 64, 31);
        m0.fill_seeded(C as u64, 64, 32);
        let mut clean = m0.clone();
        let full = trace_instance(&k, &launch, &mut clean, &OracleLimits::default()).unwrap();
        for cut in 0..=full.len() as u64 {
            let mut m = m0.clone();
            let limits = OracleLimits { stop_after: Some(cut), ..OracleLimits::default() };
            let partial = trace_instance(&k, &launch, &mut m, &limits).unwrap();
            assert_eq!(partial.len() as u64, cut.min(full.len() as u64));
            trace_instance(&k, &launch, &mut m, &OracleLimits::default()).unwrap();
            assert_eq!(m, clean, "restart after {cut} accesses diverged");
        }
    }

    #[test]
    fn csv_dump_format() {
        let k = parse_kernel("kernel f(X: buf) {\n  store [X] = 1 :4\n}").unwrap();
        let mut m = MemoryImage::new();
        let tr = trace_instance(&k, &inst("f", &[0x1000], 1, 1), &mut m, &OracleLimits::default()).unwrap();
        assert_eq!(tr.to_csv(), "serial,bid,tid,kind,address,width\n0,0,0,write,0x1000,4\n");
    }

    #[test]
    fn loop_counter_scope_restored_after_loop() {
        // A local named like a later counter must survive the loop.
        let src = "\
kernel f(X: buf, n: i64) {
  let acc = 0
  for i in 0 .. 3 {
    let acc = acc + i
  }
  store [X] = acc :8
}
";
        let k = parse_kernel(src).unwrap();
        let mut m = MemoryImage::new();
        trace_instance(&k, &inst("f", &[A, 0], 1, 1), &mut m, &OracleLimits::default()).unwrap();
        assert_eq!(m.read(A as u64, 8), 3);
    }
}
