//! Scheduling case studies: what validator verdicts buy a checkpointing
//! runtime and a preemptive scheduler.
//!
//! Both are analytic cost models over the corpus workload, not simulators.
//! Inputs are the per-instance verdict plus the synthetic workload numbers
//! stored with each instance (execution time, checkpointable input size,
//! preemption context size), so reports are deterministic in the corpus
//! seed. The validation charge is the configured worst-case budget per
//! launch, a deliberate overestimate; measured latencies are the
//! benchmark's business.

use super::corpus::Corpus;
use crate::range::analyze_kernel;
use crate::validator::{compile_plan, validate, PlanError};
use crate::AnalysisConfig;

/// Cost model parameters. Bandwidths are bytes per second and must be
/// positive. `kill_latency_ns` is the cost of dropping an idempotent
/// instance on preemption (it will simply be re-run); it should not exceed
/// any context save time, or preferring kills stops being profitable.
#[derive(Debug, Clone)]
pub struct CaseStudyConfig {
    /// Device-to-host bandwidth for checkpoint copies of input buffers.
    pub host_copy_bandwidth: u64,
    /// Bandwidth for saving execution contexts on preemption.
    pub context_save_bandwidth: u64,
    /// Preemption cost when the verdict lets the scheduler kill and replay.
    pub kill_latency_ns: u64,
    /// Per-launch validation charge: the worst-case latency budget.
    pub validation_cost_ns: u64,
}

impl Default for CaseStudyConfig {
    fn default() -> CaseStudyConfig {
        CaseStudyConfig {
            host_copy_bandwidth: 10_000_000_000,
            context_save_bandwidth: 100_000_000_000,
            kill_latency_ns: 1_000,
            validation_cost_ns: 5_000,
        }
    }
}

/// One launch as the schedulers see it: a verdict plus modeled costs.
#[derive(Debug, Clone)]
pub struct WorkloadItem {
    pub kernel: String,
    pub instance: usize,
    pub idempotent: bool,
    pub exec_time_ns: u64,
    pub input_bytes: u64,
    pub context_bytes: u64,
}

/// Validate every corpus instance under the full configuration and pair the
/// verdict with its stored workload model. Kernel order is name order, so
/// the workload (and everything derived from it) is reproducible.
pub fn build_workload(
    corpus: &Corpus,
    cfg: &AnalysisConfig,
) -> Result<Vec<WorkloadItem>, PlanError> {
    let mut order: Vec<_> = corpus.kernels.iter().collect();
    order.sort_by(|a, b| a.kernel.name.cmp(&b.kernel.name));
    let mut items = Vec::new();
    for k in order {
        let plan = compile_plan(&analyze_kernel(&k.kernel, cfg, true));
        for (i, spec) in k.specs.iter().enumerate() {
            let v = validate(&plan, &spec.instance(&k.kernel.name))?;
            items.push(WorkloadItem {
                kernel: k.kernel.name.clone(),
                instance: i,
                idempotent: v.is_idempotent(),
                exec_time_ns: spec.exec_time_ns,
                input_bytes: spec.input_bytes,
                context_bytes: spec.context_bytes,
            });
        }
    }
    Ok(items)
}

fn transfer_ns(bytes: u64, bandwidth: u64) -> u64 {
    (bytes as u128 * 1_000_000_000 / bandwidth.max(1) as u128) as u64
}

/// Checkpointing: a runtime that snapshots input buffers before every
/// launch, versus one that snapshots only when the verdict says the launch
/// could corrupt its inputs. Overheads are copy time over execution time.
#[derive(Debug, Clone)]
pub struct CheckpointReport {
    pub items: usize,
    pub idempotent_items: usize,
    pub exec_ns: u128,
    pub copy_ns_all: u128,
    pub copy_ns_nonidempotent: u128,
    pub validation_ns: u128,
    /// Checkpoint everything: `copy_all / exec`.
    pub overhead_without: f64,
    /// Checkpoint only non-idempotent launches, paying validation for all:
    /// `(copy_nonidem + validation) / exec`.
    pub overhead_with: f64,
}

pub fn simulate_checkpointing(
    items: &[WorkloadItem],
    cfg: &CaseStudyConfig,
) -> CheckpointReport {
    let mut exec: u128 = 0;
    let mut copy_all: u128 = 0;
    let mut copy_non: u128 = 0;
    let mut idem = 0;
    for it in items {
        exec += it.exec_time_ns as u128;
        let c = transfer_ns(it.input_bytes, cfg.host_copy_bandwidth) as u128;
        copy_all += c;
        if it.idempotent {
            idem += 1;
        } else {
            copy_non += c;
        }
    }
    let validation = items.len() as u128 * cfg.validation_cost_ns as u128;
    let over = |num: u128| num as f64 / exec.max(1) as f64;
    CheckpointReport {
        items: items.len(),
        idempotent_items: idem,
        exec_ns: exec,
        copy_ns_all: copy_all,
        copy_ns_nonidempotent: copy_non,
        validation_ns: validation,
        overhead_without: over(copy_all),
        overhead_with: over(copy_non + validation),
    }
}

pub fn checkpoint_csv(items: &[WorkloadItem], cfg: &CaseStudyConfig) -> String {
    let mut out = String::from("kernel,instance,idempotent,exec_time_ns,input_bytes,copy_ns\n");
    for it in items {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            it.kernel,
            it.instance,
            it.idempotent,
            it.exec_time_ns,
            it.input_bytes,
            transfer_ns(it.input_bytes, cfg.host_copy_bandwidth)
        ));
    }
    out
}

/// Preemption: evicting a running instance costs a context save, unless the
/// verdict says it can be killed and replayed, which costs only the kill.
#[derive(Debug, Clone)]
pub struct PreemptionReport {
    /// Per-instance eviction latencies when every instance saves context.
    pub without_ns: Vec<u64>,
    /// Latencies when idempotent instances are killed instead. Same order.
    pub with_ns: Vec<u64>,
    pub mean_without_ns: f64,
    pub mean_with_ns: f64,
}

impl PreemptionReport {
    pub fn mean_reduction(&self) -> f64 {
        1.0 - self.mean_with_ns / self.mean_without_ns.max(f64::MIN_POSITIVE)
    }

    /// Empirical CDFs of both policies.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("policy,fraction,latency_ns\n");
        for (name, lat) in [("without", &self.without_ns), ("with", &self.with_ns)] {
            let mut sorted = lat.clone();
            sorted.sort_unstable();
            let n = sorted.len();
            for (i, l) in sorted.iter().enumerate() {
                out.push_str(&format!("{},{:.6},{}\n", name, (i + 1) as f64 / n as f64, l));
            }
        }
        out
    }
}

pub fn simulate_preemption(items: &[WorkloadItem], cfg: &CaseStudyConfig) -> PreemptionReport {
    let mut without = Vec::with_capacity(items.len());
    let mut with = Vec::with_capacity(items.len());
    for it in items {
        let save = transfer_ns(it.context_bytes, cfg.context_save_bandwidth);
        without.push(save);
        with.push(if it.idempotent { cfg.kill_latency_ns } else { save });
    }
    let mean = |v: &[u64]| v.iter().map(|&x| x as u128).sum::<u128>() as f64 / v.len().max(1) as f64;
    PreemptionReport {
        mean_without_ns: mean(&without),
        mean_with_ns: mean(&with),
        without_ns: without,
        with_ns: with,
    }
}
