//! Output shape of symbolic execution: the per-kernel access summary.

use std::fmt;

use serde::Serialize;

use crate::ir::Width;

use super::expr::{SymBool, SymExpr};
use super::var::{SymVarId, VarTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessKind {
    Read,
    Write,
    Atomic,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
            AccessKind::Atomic => "atomic",
        })
    }
}

/// Where an access came from: the statement id, plus the unroll indices of
/// each enclosing loop copy (empty for straight-line code and for loop-template
/// accesses produced by compaction).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AccessSite {
    pub stmt: u32,
    pub unroll: Vec<u32>,
}

impl fmt::Display for AccessSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.stmt)?;
        if !self.unroll.is_empty() {
            write!(f, "[")?;
            for (i, k) in self.unroll.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{k}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicAccess {
    pub kind: AccessKind,
    pub address: SymExpr,
    pub width: Width,
    /// Conjunction of branch conditions under which the access executes.
    pub path_conditions: Vec<SymBool>,
    pub site: AccessSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Indirect flow: a call target the analysis cannot resolve.
    IndirectFlow,
    /// Path explosion: branch or loop structure exceeded the path budget.
    PathExplosion,
}

impl FailureKind {
    pub fn code(self) -> &'static str {
        match self {
            FailureKind::IndirectFlow => "IF",
            FailureKind::PathExplosion => "PE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisFailure {
    pub kind: FailureKind,
    pub site: AccessSite,
}

/// One loop's induction bookkeeping, as recorded by the compacted run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductionInfo {
    pub loop_stmt: u32,
    pub name: String,
    pub var: SymVarId,
    pub initial: SymExpr,
    pub step: i64,
    /// Iteration count in launch arguments; `None` when inexpressible.
    pub trip: Option<SymExpr>,
}

#[derive(Debug, Clone)]
pub struct SymbolicSummary {
    pub kernel: String,
    pub vars: VarTable,
    pub accesses: Vec<SymbolicAccess>,
    /// Conjuncts that must hold for the summary to cover the launch
    /// (loop unrolling budgets contribute here).
    pub global_condition: Vec<SymBool>,
    pub induction: Vec<InductionInfo>,
    pub failures: Vec<AnalysisFailure>,
    /// Number of control-flow paths explored.
    pub paths: u32,
    /// True once loop compaction replaced unrolled copies with templates.
    pub compacted: bool,
}

impl SymbolicSummary {
    pub fn reads(&self) -> impl Iterator<Item = &SymbolicAccess> {
        self.accesses.iter().filter(|a| a.kind == AccessKind::Read)
    }

    pub fn writes(&self) -> impl Iterator<Item = &SymbolicAccess> {
        self.accesses.iter().filter(|a| a.kind == AccessKind::Write)
    }

    pub fn atomics(&self) -> impl Iterator<Item = &SymbolicAccess> {
        self.accesses.iter().filter(|a| a.kind == AccessKind::Atomic)
    }

    pub fn global_condition_expr(&self) -> SymBool {
        SymBool::all(self.global_condition.clone())
    }
}
