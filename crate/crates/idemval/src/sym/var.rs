//! Symbolic variables: the atoms address expressions are built from.

use crate::ir::ParamKind;

use super::expr::SymExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymVarId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NonParamSource {
    /// Value produced by a load; unconstrained.
    Load { stmt: u32 },
    /// Local whose loop-carried value could not be summarized.
    LoopEscape { stmt: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarOrigin {
    Param { index: usize, kind: ParamKind },
    Bid,
    Tid,
    Bdim,
    Gdim,
    /// Steps `initial, initial+step, ..` for `trip` iterations of one loop.
    /// `trip == None` marks a bound not expressible in launch arguments.
    Induction { loop_stmt: u32, initial: SymExpr, step: i64, trip: Option<SymExpr> },
    /// Unconstrained value (spans the full 64-bit space).
    NonParam(NonParamSource),
    /// Range-bounded replacement introduced by rewriting; `lo`/`hi` reference
    /// only params and dimensions.
    Fresh { lo: SymExpr, hi: SymExpr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub origin: VarOrigin,
}

/// Interned variable set of one analysis. Ids 0..=3 are always
/// `bid`/`tid`/`bdim`/`gdim`; params follow in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarTable {
    infos: Vec<VarInfo>,
}

pub const BID: SymVarId = SymVarId(0);
pub const TID: SymVarId = SymVarId(1);
pub const BDIM: SymVarId = SymVarId(2);
pub const GDIM: SymVarId = SymVarId(3);

impl VarTable {
    pub fn with_builtins() -> VarTable {
        let mut t = VarTable::default();
        t.intern("bid", VarOrigin::Bid);
        t.intern("tid", VarOrigin::Tid);
        t.intern("bdim", VarOrigin::Bdim);
        t.intern("gdim", VarOrigin::Gdim);
        t
    }

    pub fn intern(&mut self, name: impl Into<String>, origin: VarOrigin) -> SymVarId {
        let id = SymVarId(self.infos.len() as u32);
        self.infos.push(VarInfo { name: name.into(), origin });
        id
    }

    pub fn info(&self, id: SymVarId) -> &VarInfo {
        &self.infos[id.0 as usize]
    }

    pub fn name(&self, id: SymVarId) -> &str {
        &self.infos[id.0 as usize].name
    }

    pub fn origin(&self, id: SymVarId) -> &VarOrigin {
        &self.infos[id.0 as usize].origin
    }

    pub fn len(&self) -> usize {
        self.infos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infos.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SymVarId> {
        (0..self.infos.len() as u32).map(SymVarId)
    }

    pub fn find(&self, name: &str) -> Option<SymVarId> {
        self.infos.iter().position(|i| i.name == name).map(|i| SymVarId(i as u32))
    }

    pub fn is_non_param(&self, id: SymVarId) -> bool {
        matches!(self.origin(id), VarOrigin::NonParam(_))
    }

    /// Vars the runtime validator can evaluate directly from a launch.
    pub fn is_launch_arg(&self, id: SymVarId) -> bool {
        matches!(self.origin(id), VarOrigin::Param { .. } | VarOrigin::Bdim | VarOrigin::Gdim)
    }
}
