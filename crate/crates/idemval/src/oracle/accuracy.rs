//! Validator-versus-execution accuracy accounting.
//!
//! "Positive" means the validator accepted a launch as idempotent. A false
//! positive (accepted, but execution clobbers a pristine read) is the one
//! unforgivable outcome; [`compare_corpus`] aborts with an error carrying the
//! concrete witness instead of tallying it. False negatives are safe but
//! cost performance, so they are book-kept by cause.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ir::Kernel;
use crate::sym::NonIdemReason;
use crate::validator::{validate, Cause, Decision, Instance, Plan, PlanError};

use super::{ground_truth, trace_instance, ExecError, MemoryImage, OracleLimits};

/// Why the validator rejected a launch that execution shows is idempotent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FnBucket {
    /// Indirect control flow made the kernel unanalyzable.
    IndirectFlow,
    /// The launch fell outside what the analysis enumerated: kernel-level
    /// path explosion, or a violated precondition or global condition.
    PathBudget,
    /// An address depended on loaded data; its descriptor is opaque.
    OpaqueAddr,
    /// The deciding overlap involved a condition on loaded data that the
    /// analysis had to assume true.
    AssumedCond,
    /// Disjoint accesses whose byte ranges overlap: interval
    /// over-approximation, strides and interleavings included.
    RangeOverApprox,
    /// Kernel-level structural rejection (store-then-load reuse, or an
    /// atomic) that concrete execution order turned out to forgive.
    MissedOrdering,
}

impl FnBucket {
    pub fn code(self) -> &'static str {
        match self {
            FnBucket::IndirectFlow => "IF",
            FnBucket::PathBudget => "PE",
            FnBucket::OpaqueAddr => "NA",
            FnBucket::AssumedCond => "NC",
            FnBucket::RangeOverApprox => "RO",
            FnBucket::MissedOrdering => "MO",
        }
    }

    pub const ALL: [FnBucket; 6] = [
        FnBucket::IndirectFlow,
        FnBucket::PathBudget,
        FnBucket::OpaqueAddr,
        FnBucket::AssumedCond,
        FnBucket::RangeOverApprox,
        FnBucket::MissedOrdering,
    ];
}

impl fmt::Display for FnBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Bucket for a rejection cause. Total: every cause a false negative can
/// carry maps somewhere.
pub fn fn_bucket(cause: &Cause) -> FnBucket {
    match cause {
        Cause::KernelLevel(NonIdemReason::IndirectFlow) => FnBucket::IndirectFlow,
        Cause::KernelLevel(NonIdemReason::PathExplosion) => FnBucket::PathBudget,
        Cause::KernelLevel(NonIdemReason::StructuralOverlap | NonIdemReason::Atomic) => {
            FnBucket::MissedOrdering
        }
        Cause::PreconditionViolated | Cause::GlobalConditionViolated => FnBucket::PathBudget,
        Cause::OpaqueAddress => FnBucket::OpaqueAddr,
        Cause::Overlap { assumed: true, .. } => FnBucket::AssumedCond,
        Cause::Overlap { assumed: false, .. } => FnBucket::RangeOverApprox,
        Cause::EnumeratedOverlap => FnBucket::RangeOverApprox,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelAccuracy {
    pub kernel: String,
    pub instances: u32,
    /// Validator idempotent, execution idempotent.
    pub true_pos: u32,
    /// Always 0 on a report that was actually returned; a detected false
    /// positive aborts the comparison instead.
    pub false_pos: u32,
    pub true_neg: u32,
    pub false_neg: u32,
    pub fn_buckets: BTreeMap<FnBucket, u32>,
}

impl KernelAccuracy {
    fn empty(kernel: String) -> KernelAccuracy {
        KernelAccuracy {
            kernel,
            instances: 0,
            true_pos: 0,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
            fn_buckets: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccuracyReport {
    pub kernels: Vec<KernelAccuracy>,
}

impl AccuracyReport {
    /// Aggregate row over all kernels.
    pub fn totals(&self) -> KernelAccuracy {
        let mut t = KernelAccuracy::empty("total".into());
        for k in &self.kernels {
            t.instances += k.instances;
            t.true_pos += k.true_pos;
            t.false_pos += k.false_pos;
            t.true_neg += k.true_neg;
            t.false_neg += k.false_neg;
            for (b, n) in &k.fn_buckets {
                *t.fn_buckets.entry(*b).or_insert(0) += n;
            }
        }
        t
    }

    pub fn bucket_total(&self, b: FnBucket) -> u32 {
        self.kernels.iter().filter_map(|k| k.fn_buckets.get(&b)).sum()
    }
}

/// One kernel's share of a corpus: the compiled plan to judge and the
/// launches (with their initial memory) to judge it on.
pub struct CorpusRun<'a> {
    pub kernel: &'a Kernel,
    pub plan: &'a Plan,
    pub instances: &'a [(Instance, MemoryImage)],
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(
        "false positive on `{kernel}`: validated idempotent, but execution clobbers byte 0x{address:x} (read serial {read_serial}, write serial {write_serial})"
    )]
    FalsePositive {
        kernel: String,
        instance: Instance,
        read_serial: u64,
        write_serial: u64,
        address: u64,
    },
    #[error("execution of `{kernel}` failed: {err}")]
    Exec {
        kernel: String,
        #[source]
        err: ExecError,
    },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Judge every instance of every run twice, by the validator and by concrete
/// execution, and tally agreement. Execution is the arbiter: a validator
/// "idempotent" contradicted by a clobber aborts with
/// [`CorpusError::FalsePositive`], so an `Ok` report proves the corpus ran
/// with zero false positives and zero execution exceptions.
pub fn compare_corpus(
    runs: &[CorpusRun<'_>],
    limits: &OracleLimits,
) -> Result<AccuracyReport, CorpusError> {
    let mut kernels = Vec::with_capacity(runs.len());
    for run in runs {
        let mut row = KernelAccuracy::empty(run.kernel.name.clone());
        for (inst, image) in run.instances {
            row.instances += 1;
            let verdict = validate(run.plan, inst)?;
            let mut mem = image.clone();
            let tr = trace_instance(run.kernel, inst, &mut mem, limits)
                .map_err(|err| CorpusError::Exec { kernel: run.kernel.name.clone(), err })?;
            let gt = ground_truth(&tr);
            match (&verdict.decision, gt.idempotent) {
                (Decision::Idempotent, true) => row.true_pos += 1,
                (Decision::Idempotent, false) => {
                    let w = gt.witness.expect("non-idempotent ground truth carries a witness");
                    return Err(CorpusError::FalsePositive {
                        kernel: run.kernel.name.clone(),
                        instance: inst.clone(),
                        read_serial: w.read_serial,
                        write_serial: w.write_serial,
                        address: w.address,
                    });
                }
                (Decision::NonIdempotent(_), false) => row.true_neg += 1,
                (Decision::NonIdempotent(cause), true) => {
                    row.false_neg += 1;
                    *row.fn_buckets.entry(fn_bucket(cause)).or_insert(0) += 1;
                }
            }
        }
        kernels.push(row);
    }
    Ok(AccuracyReport { kernels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_kernel;
    use crate::range::{analyze_kernel, KernelAnalysis};
    use crate::sym::KernelClass;
    use crate::validator::compile_plan;
    use crate::AnalysisConfig;

    const A: i64 = 0x1000_0000;
    const B: i64 = 0x1010_0000;
    const C: i64 = 0x1020_0000;

    fn inst(kernel: &str, args: &[i64], gdim: u32, bdim: u32) -> Instance {
        Instance { kernel: kernel.into(), args: args.to_vec(), gdim, bdim }
    }

    fn img(fills: &[(i64, u64, u64)]) -> MemoryImage {
        let mut m = MemoryImage::new();
        for &(base, len, seed) in fills {
            m.fill_seeded(base as u64, len, seed);
        }
        m
    }

    fn analyzed(src: &str) -> (Kernel, KernelAnalysis) {
        let k = parse_kernel(src).unwrap();
        let a = analyze_kernel(&k, &AnalysisConfig::default(), true);
        (k, a)
    }

    struct Prepared {
        kernel: Kernel,
        plan: Plan,
        instances: Vec<(Instance, MemoryImage)>,
    }

    fn prepare(src: &str, instances: Vec<(Instance, MemoryImage)>) -> Prepared {
        let (kernel, analysis) = analyzed(src);
        Prepared { kernel, plan: compile_plan(&analysis), instances }
    }

    /// One kernel per miss bucket, plus clean positives and negatives. This
    /// is the accuracy comparison in miniature: full corpora differ only in
    /// volume.
    fn mini_corpus() -> Vec<Prepared> {
        vec![
            prepare(
                "kernel vectorAdd(A: buf, B: buf, C: buf) {\n  let idx = bid * bdim + tid\n  let b = load [B + 4 * idx] :4\n  let c = load [C + 4 * idx] :4\n  store [A + 4 * idx] = b + c :4\n}",
                vec![
                    (inst("vectorAdd", &[A, B, C], 1, 4), img(&[(B, 64, 1), (C, 64, 2)])),
                    (inst("vectorAdd", &[A, B, A], 1, 4), img(&[(A, 64, 3), (B, 64, 1)])),
                ],
            ),
            prepare(
                "kernel elemwise_relu(A: buf, B: buf, N: i64) {\n  for i in 0 .. N {\n    let a = load [A + 4 * ((bid * bdim + tid) * N + i)] :4\n    store [B + 4 * ((bid * bdim + tid) * N + i)] = max(a, 0) :4\n  }\n}",
                vec![
                    (inst("elemwise_relu", &[A, B, 16], 1, 2), img(&[(A, 128, 4)])),
                    (inst("elemwise_relu", &[A, B, 64], 1, 2), img(&[(A, 512, 5)])),
                ],
            ),
            prepare(
                "kernel gather(Y: buf, X: buf, I: buf) {\n  let j = load [I + 8 * tid] :8\n  let v = load [X + 8 * j] :8\n  store [Y + 8 * tid] = v :8\n}",
                vec![(inst("gather", &[A, B, C], 1, 2), img(&[(C, 16, 6)]))],
            ),
            prepare(
                "kernel neighbor_mark(F: buf) {\n  let c = load [F + 8 * tid] :8\n  if c == 1 {\n    store [F + 8 * tid + 8] = c + 1 :8\n  }\n}",
                vec![(inst("neighbor_mark", &[A], 1, 4), img(&[(A, 64, 7)]))],
            ),
            prepare(
                "kernel stride_shift(X: buf) {\n  let v = load [X + 16 * tid] :8\n  store [X + 16 * tid + 8] = v + 1 :8\n}",
                vec![(inst("stride_shift", &[A], 1, 4), img(&[(A, 64, 8)]))],
            ),
            prepare(
                "kernel dead_indirect(X: buf, n: i64) {\n  store [X + 8 * tid] = n :8\n  if n < 0 {\n    call_indirect n\n  }\n}",
                vec![(inst("dead_indirect", &[A, 5], 1, 2), MemoryImage::new())],
            ),
            prepare(
                "kernel write_then_read(X: buf) {\n  store [X + 8 * tid] = 5 :8\n  let v = load [X + 8 * tid] :8\n}",
                vec![(inst("write_then_read", &[A], 1, 2), MemoryImage::new())],
            ),
            prepare(
                "kernel hist(H: buf) {\n  atomic_add [H + 8 * (tid % 2)] += 1 :8\n}",
                vec![(inst("hist", &[A], 1, 4), MemoryImage::new())],
            ),
        ]
    }

    fn runs(prepared: &[Prepared]) -> Vec<CorpusRun<'_>> {
        prepared
            .iter()
            .map(|p| CorpusRun { kernel: &p.kernel, plan: &p.plan, instances: &p.instances })
            .collect()
    }

    #[test]
    fn mini_corpus_populates_every_bucket_without_false_positives() {
        let prepared = mini_corpus();
        let report = compare_corpus(&runs(&prepared), &OracleLimits::default()).unwrap();

        let by_name: BTreeMap<&str, &KernelAccuracy> =
            report.kernels.iter().map(|k| (k.kernel.as_str(), k)).collect();
        let expect = [
            ("vectorAdd", 1, 1, 0, None),
            ("elemwise_relu", 1, 0, 1, Some(FnBucket::PathBudget)),
            ("gather", 0, 0, 1, Some(FnBucket::OpaqueAddr)),
            ("neighbor_mark", 0, 0, 1, Some(FnBucket::AssumedCond)),
            ("stride_shift", 0, 0, 1, Some(FnBucket::RangeOverApprox)),
            ("dead_indirect", 0, 0, 1, Some(FnBucket::IndirectFlow)),
            ("write_then_read", 0, 0, 1, Some(FnBucket::MissedOrdering)),
            ("hist", 0, 1, 0, None),
        ];
        for (name, tp, tn, fneg, bucket) in expect {
            let row = by_name[name];
            assert_eq!(
                (row.true_pos, row.true_neg, row.false_neg),
                (tp, tn, fneg),
                "tallies for {name}: {row:?}"
            );
            if let Some(b) = bucket {
                assert_eq!(row.fn_buckets.get(&b), Some(&1), "bucket for {name}");
            }
        }

        let totals = report.totals();
        assert_eq!(totals.false_pos, 0);
        assert_eq!(totals.instances, 10);
        for b in FnBucket::ALL {
            assert!(report.bucket_total(b) >= 1, "bucket {b} empty");
        }
    }

    #[test]
    fn forged_idempotent_class_is_caught_as_false_positive() {
        let (kernel, mut analysis) = analyzed(
            "kernel vectorInc(X: buf) {\n  let v = load [X + 8 * tid] :8\n  store [X + 8 * tid] = v + 1 :8\n}",
        );
        assert_eq!(analysis.class, KernelClass::NonIdempotent(NonIdemReason::StructuralOverlap));
        analysis.class = KernelClass::Idempotent;
        let plan = compile_plan(&analysis);
        let instances = vec![(inst("vectorInc", &[A], 1, 2), img(&[(A, 16, 9)]))];
        let run = CorpusRun { kernel: &kernel, plan: &plan, instances: &instances };
        match compare_corpus(&[run], &OracleLimits::default()) {
            Err(CorpusError::FalsePositive { kernel, read_serial, write_serial, address, .. }) => {
                assert_eq!(kernel, "vectorInc");
                assert_eq!((read_serial, write_serial, address), (0, 1, A as u64));
            }
            other => panic!("expected a false-positive report, got {other:?}"),
        }
    }

    #[test]
    fn execution_exceptions_surface_instead_of_counting() {
        let prepared = prepare(
            "kernel f(n: i64) {\n  let q = 1 / n\n}",
            vec![(inst("f", &[0], 1, 1), MemoryImage::new())],
        );
        let run = CorpusRun { kernel: &prepared.kernel, plan: &prepared.plan, instances: &prepared.instances };
        match compare_corpus(&[run], &OracleLimits::default()) {
            Err(CorpusError::Exec { kernel, err }) => {
                assert_eq!(kernel, "f");
                assert_eq!(err, ExecError::DivisionByZero { site: 0 });
            }
            other => panic!("expected an execution error, got {other:?}"),
        }
    }

    #[test]
    fn every_cause_maps_to_a_bucket() {
        use crate::sym::AccessSite;
        let site = AccessSite { stmt: 0, unroll: Vec::new() };
        let overlap = |assumed| Cause::Overlap {
            read: site.clone(),
            write: site.clone(),
            lo: 0,
            hi: 7,
            assumed,
        };
        let cases = [
            (Cause::KernelLevel(NonIdemReason::IndirectFlow), FnBucket::IndirectFlow),
            (Cause::KernelLevel(NonIdemReason::PathExplosion), FnBucket::PathBudget),
            (Cause::KernelLevel(NonIdemReason::StructuralOverlap), FnBucket::MissedOrdering),
            (Cause::KernelLevel(NonIdemReason::Atomic), FnBucket::MissedOrdering),
            (Cause::PreconditionViolated, FnBucket::PathBudget),
            (Cause::GlobalConditionViolated, FnBucket::PathBudget),
            (Cause::OpaqueAddress, FnBucket::OpaqueAddr),
            (overlap(true), FnBucket::AssumedCond),
            (overlap(false), FnBucket::RangeOverApprox),
            (Cause::EnumeratedOverlap, FnBucket::RangeOverApprox),
        ];
        for (cause, bucket) in cases {
            assert_eq!(fn_bucket(&cause), bucket, "{cause:?}");
        }
    }
}
