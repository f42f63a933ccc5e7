//! Launch-time idempotency validation for SPMD kernels.
//!
//! A kernel launch ("instance") is idempotent when re-executing it from any
//! interruption point reproduces the same final memory. This crate decides
//! that per launch, in microseconds, from the launch arguments alone:
//!
//! 1. [`ir`] defines the kernel language (`.gk` files).
//! 2. [`sym`] symbolically executes a kernel once, offline, into a summary of
//!    its memory accesses and classifies kernels whose answer is
//!    launch-independent.
//! 3. [`mono`] proves addresses monotone in thread ids and loop counters and
//!    rewrites the ones it cannot prove.
//! 4. [`range`] compacts unrolled loops and turns each access into an
//!    address-range descriptor parameterized by the launch arguments.
//! 5. [`validator`] compiles the descriptors into a flat validation plan and
//!    answers per launch: idempotent or not, with a reason.
//! 6. [`oracle`] executes instances concretely, byte by byte, and derives
//!    ground-truth idempotency from the trace; accuracy comparisons use it to
//!    certify the validator never accepts a non-idempotent launch.
//! 7. [`harness`] packages the experiments: a seeded kernel corpus, accuracy
//!    and latency reports over it, and two scheduling case studies built on
//!    validator verdicts.

use std::time::Duration;

pub mod harness;
pub mod ir;
pub mod mono;
pub mod oracle;
pub mod range;
pub mod sym;
pub mod validator;

/// Knobs of the offline analysis. The defaults are what every test and
/// benchmark in this repository uses; changing them trades analysis precision
/// against analysis time but never affects soundness.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Iterations a symbolically bounded loop is unrolled before the summary
    /// falls back to a global launch condition.
    pub unroll_limit: u32,
    /// Control-flow paths explored before giving up with a path-explosion
    /// failure.
    pub max_paths: u32,
    /// Wall-clock budget of the monotonicity prover, per analyzed address.
    pub prover_budget: Duration,
    /// Rewrite passes attempted when an address is not provably monotone.
    pub rewrite_max_iters: u32,
    /// Bits per variable in the prover's reduced-domain sampling check.
    pub sample_bits: u32,
    /// Seed of that sampling check; fixed so runs are reproducible.
    pub sample_seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> AnalysisConfig {
        AnalysisConfig {
            unroll_limit: 32,
            max_paths: 256,
            prover_budget: Duration::from_secs(2),
            rewrite_max_iters: 8,
            sample_bits: 12,
            sample_seed: 0x1d3_7a11,
        }
    }
}
