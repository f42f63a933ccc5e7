//! Static classification of a kernel from its access summary.

use std::fmt;

use serde::Serialize;

use super::expr::SymBool;
use super::summary::{AccessKind, FailureKind, SymbolicSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NonIdemReason {
    /// Analysis failed on indirect control flow.
    IndirectFlow,
    /// Analysis failed on branch/loop path explosion.
    PathExplosion,
    /// A read and a write share a structurally equal address on a
    /// compatible path.
    StructuralOverlap,
    /// Atomic read-modify-write present.
    Atomic,
}

impl NonIdemReason {
    pub fn code(self) -> &'static str {
        match self {
            NonIdemReason::IndirectFlow => "IF",
            NonIdemReason::PathExplosion => "PE",
            NonIdemReason::StructuralOverlap => "SO",
            NonIdemReason::Atomic => "atomic",
        }
    }
}

impl fmt::Display for NonIdemReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelClass {
    /// Idempotent for every launch: no reads, no atomics.
    Idempotent,
    /// Non-idempotent for every launch (or unanalyzable, treated as such).
    NonIdempotent(NonIdemReason),
    /// Idempotency depends on the launch arguments; decided per launch by
    /// the runtime validator.
    CondIdempotent,
}

impl fmt::Display for KernelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelClass::Idempotent => f.write_str("idempotent"),
            KernelClass::NonIdempotent(r) => write!(f, "non-idempotent({r})"),
            KernelClass::CondIdempotent => f.write_str("cond-idempotent"),
        }
    }
}

/// Two condition sets are incompatible when one contains the syntactic
/// complement of a condition in the other; only then can the accesses be
/// proven to lie on exclusive paths.
fn conds_compatible(a: &[SymBool], b: &[SymBool]) -> bool {
    !a.iter().any(|c| b.contains(&c.negate()))
}

pub fn classify_kernel(s: &SymbolicSummary) -> KernelClass {
    if let Some(f) = s.failures.first() {
        return KernelClass::NonIdempotent(match f.kind {
            FailureKind::IndirectFlow => NonIdemReason::IndirectFlow,
            FailureKind::PathExplosion => NonIdemReason::PathExplosion,
        });
    }
    if s.accesses.iter().any(|a| a.kind == AccessKind::Atomic) {
        return KernelClass::NonIdempotent(NonIdemReason::Atomic);
    }
    if s.accesses.iter().all(|a| a.kind == AccessKind::Write) {
        return KernelClass::Idempotent;
    }
    for r in s.reads() {
        for w in s.writes() {
            if r.address == w.address
                && conds_compatible(&r.path_conditions, &w.path_conditions)
            {
                // Same instance, same location, read and write: a clobber on
                // every launch that reaches both.
                return KernelClass::NonIdempotent(NonIdemReason::StructuralOverlap);
            }
        }
    }
    KernelClass::CondIdempotent
}
