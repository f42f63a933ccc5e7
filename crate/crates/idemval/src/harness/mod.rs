//! Experiment harness: the kernel corpus, accuracy evaluation against the
//! concrete oracle, launch-latency benchmarking, and two scheduling case
//! studies (checkpoint elision, preemption latency) driven by validator
//! verdicts.
//!
//! Everything here is deterministic in the corpus seed except wall-clock
//! latency numbers; accuracy and case-study reports reproduce byte for byte.

pub mod bench;
pub mod casestudy;
pub mod corpus;

pub use bench::{run_benchmark, scaling_report, BenchMode, BenchReport, LatencyRow, ScalingReport};
pub use casestudy::{
    build_workload, simulate_checkpointing, simulate_preemption, CaseStudyConfig,
    CheckpointReport, PreemptionReport, WorkloadItem,
};
pub use corpus::{
    generate_corpus, load_corpus, write_corpus, Corpus, CorpusIoError, CorpusKernel, Fill,
    InstanceSpec, DEFAULT_CORPUS_SEED,
};

use crate::oracle::{
    compare_corpus, AccuracyReport, CorpusError, CorpusRun, FnBucket, MemoryImage, OracleLimits,
};
use crate::range::analyze_kernel;
use crate::validator::{compile_plan, Instance, Plan};
use crate::AnalysisConfig;

/// Analyze every corpus kernel (loop compaction on), validate every stored
/// instance, and certify the verdicts against concrete execution. Kernels
/// are processed in name order so the same corpus always yields the same
/// report. A false positive anywhere aborts with its clobber witness.
pub fn evaluate_corpus(
    corpus: &Corpus,
    cfg: &AnalysisConfig,
    limits: &OracleLimits,
) -> Result<AccuracyReport, CorpusError> {
    let mut order: Vec<&CorpusKernel> = corpus.kernels.iter().collect();
    order.sort_by(|a, b| a.kernel.name.cmp(&b.kernel.name));
    let plans: Vec<Plan> =
        order.iter().map(|k| compile_plan(&analyze_kernel(&k.kernel, cfg, true))).collect();
    let data: Vec<Vec<(Instance, MemoryImage)>> = order
        .iter()
        .map(|k| k.specs.iter().map(|s| (s.instance(&k.kernel.name), s.image())).collect())
        .collect();
    let runs: Vec<CorpusRun> = order
        .iter()
        .zip(&plans)
        .zip(&data)
        .map(|((k, plan), instances)| CorpusRun { kernel: &k.kernel, plan, instances })
        .collect();
    compare_corpus(&runs, limits)
}

/// Per-kernel confusion counts plus a trailing `total` row.
pub fn accuracy_csv(report: &AccuracyReport) -> String {
    let mut out = String::from("kernel,instances,true_pos,false_pos,true_neg,false_neg\n");
    let row = |out: &mut String, k: &crate::oracle::KernelAccuracy| {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k.kernel, k.instances, k.true_pos, k.false_pos, k.true_neg, k.false_neg
        ));
    };
    for k in &report.kernels {
        row(&mut out, k);
    }
    row(&mut out, &report.totals());
    out
}

/// Misses broken down by cause bucket, per kernel and in total.
pub fn taxonomy_csv(report: &AccuracyReport) -> String {
    let mut out = String::from("kernel");
    for b in FnBucket::ALL {
        out.push_str(&format!(",{b}"));
    }
    out.push('\n');
    for k in &report.kernels {
        out.push_str(&k.kernel);
        for b in FnBucket::ALL {
            out.push_str(&format!(",{}", k.fn_buckets.get(&b).copied().unwrap_or(0)));
        }
        out.push('\n');
    }
    out.push_str("total");
    for b in FnBucket::ALL {
        out.push_str(&format!(",{}", report.bucket_total(b)));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_report() -> AccuracyReport {
        let corpus = generate_corpus(DEFAULT_CORPUS_SEED);
        evaluate_corpus(&corpus, &AnalysisConfig::default(), &OracleLimits::default())
            .expect("corpus evaluates without false positives")
    }

    fn row<'a>(r: &'a AccuracyReport, kernel: &str) -> &'a crate::oracle::KernelAccuracy {
        r.kernels.iter().find(|k| k.kernel == kernel).unwrap()
    }

    #[test]
    fn corpus_evaluation_is_sound_and_covers_every_bucket() {
        let corpus = generate_corpus(DEFAULT_CORPUS_SEED);
        let report = default_report();
        let t = report.totals();
        assert_eq!(t.false_pos, 0);
        assert_eq!(t.instances as usize, corpus.total_instances());
        for b in FnBucket::ALL {
            assert!(report.bucket_total(b) >= 1, "bucket {b} empty");
        }
        // The mix leans idempotent; the case studies depend on that.
        assert!(
            t.true_pos as f64 >= 0.70 * t.instances as f64,
            "only {}/{} validated idempotent",
            t.true_pos,
            t.instances
        );
    }

    #[test]
    fn known_kernels_land_where_expected() {
        let report = default_report();
        let relu = row(&report, "elemwise_relu");
        assert!(relu.true_pos >= 1 && relu.false_neg >= 1 && relu.false_pos == 0);
        let vset = row(&report, "vectorSet");
        assert_eq!(vset.true_pos, vset.instances);
        let vinc = row(&report, "vectorInc");
        assert_eq!(vinc.true_neg, vinc.instances);
        let vadd = row(&report, "vectorAdd");
        assert!(vadd.true_pos > 0 && vadd.true_neg > 0 && vadd.false_pos == 0);
        let gather = row(&report, "gather");
        assert!(gather.false_neg >= 1, "gather misses should be conservative");
    }

    #[test]
    fn csv_reports_are_reproducible() {
        let a = default_report();
        let b = default_report();
        assert_eq!(accuracy_csv(&a), accuracy_csv(&b));
        assert_eq!(taxonomy_csv(&a), taxonomy_csv(&b));
        assert!(accuracy_csv(&a).starts_with("kernel,instances,true_pos"));
        assert!(accuracy_csv(&a).trim_end().lines().last().unwrap().starts_with("total,"));
        assert!(taxonomy_csv(&a).starts_with("kernel,IF,PE,NA,NC,RO,MO\n"));
    }
}
