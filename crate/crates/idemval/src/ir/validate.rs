//! Structural validation for programmatically constructed kernels.
//!
//! `parse_kernel` output always validates; this re-check matters for kernels
//! built directly from AST nodes. Checks are pure and idempotent.

use std::collections::HashSet;

use super::ast::*;
use super::error::IrError;
use super::parser::RESERVED_NAMES;

#[derive(Clone, Copy, PartialEq)]
enum Binding {
    /// Value derives only from params, builtins, and counters.
    ParamDerived,
    /// Value (transitively) depends on loaded data.
    LoadTainted,
    Counter,
}

struct Ctx<'a> {
    kernel: &'a str,
    scopes: Vec<Vec<(String, Binding)>>,
}

impl<'a> Ctx<'a> {
    fn err(&self, msg: impl Into<String>) -> IrError {
        IrError::InvariantViolation { kernel: self.kernel.to_string(), msg: msg.into() }
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        for scope in self.scopes.iter().rev() {
            if let Some((_, b)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Some(*b);
            }
        }
        None
    }

    fn define(&mut self, name: &str, b: Binding) {
        self.scopes.last_mut().expect("scope stack").push((name.to_string(), b));
    }

    /// Returns the strongest taint of any identifier in `e`.
    fn check_int(&self, e: &IntExpr) -> Result<Binding, IrError> {
        Ok(match e {
            IntExpr::Const(_) | IntExpr::Bid | IntExpr::Tid | IntExpr::Bdim | IntExpr::Gdim => Binding::ParamDerived,
            IntExpr::Ident(name) => match self.lookup(name) {
                Some(Binding::LoadTainted) => Binding::LoadTainted,
                Some(_) => Binding::ParamDerived,
                None => return Err(self.err(format!("undefined identifier `{name}`"))),
            },
            IntExpr::Bin(_, a, b) | IntExpr::Min(a, b) | IntExpr::Max(a, b) => {
                let ta = self.check_int(a)?;
                let tb = self.check_int(b)?;
                if ta == Binding::LoadTainted || tb == Binding::LoadTainted {
                    Binding::LoadTainted
                } else {
                    Binding::ParamDerived
                }
            }
            IntExpr::Neg(a) => self.check_int(a)?,
        })
    }

    fn check_bool(&self, e: &BoolExpr) -> Result<(), IrError> {
        match e {
            BoolExpr::Cmp(_, a, b) => {
                self.check_int(a)?;
                self.check_int(b)?;
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                self.check_bool(a)?;
                self.check_bool(b)?;
            }
            BoolExpr::Not(a) => self.check_bool(a)?,
        }
        Ok(())
    }

    fn check_def_name(&self, name: &str) -> Result<(), IrError> {
        if RESERVED_NAMES.contains(&name) {
            return Err(self.err(format!("`{name}` is a reserved builtin name")));
        }
        Ok(())
    }

    fn check_body(&mut self, body: &[Stmt]) -> Result<(), IrError> {
        self.scopes.push(Vec::new());
        let result = self.check_body_inner(body);
        self.scopes.pop();
        result
    }

    fn check_body_inner(&mut self, body: &[Stmt]) -> Result<(), IrError> {
        for stmt in body {
            match stmt {
                Stmt::Let { dest, value } => {
                    self.check_def_name(dest)?;
                    let taint = self.check_int(value)?;
                    match self.lookup(dest) {
                        Some(Binding::Counter) => {
                            return Err(self.err(format!("cannot assign loop counter `{dest}`")));
                        }
                        Some(_) | None => {
                            // Re-binding a visible name assigns; taint may rise.
                            self.define(dest, taint);
                        }
                    }
                }
                Stmt::Load { dest, addr, .. } => {
                    self.check_def_name(dest)?;
                    self.check_int(addr)?;
                    if self.lookup(dest) == Some(Binding::Counter) {
                        return Err(self.err(format!("cannot assign loop counter `{dest}`")));
                    }
                    self.define(dest, Binding::LoadTainted);
                }
                Stmt::Store { addr, value, .. } | Stmt::AtomicAdd { addr, value, .. } => {
                    self.check_int(addr)?;
                    self.check_int(value)?;
                }
                Stmt::If { cond, then_body, else_body } => {
                    self.check_bool(cond)?;
                    self.check_body(then_body)?;
                    self.check_body(else_body)?;
                }
                Stmt::ForCounted { counter, lo, hi, body } => {
                    self.check_def_name(counter)?;
                    if self.lookup(counter).is_some() {
                        return Err(self.err(format!("loop counter `{counter}` shadows an existing binding")));
                    }
                    for bound in [lo, hi] {
                        if self.check_int(bound)? == Binding::LoadTainted {
                            return Err(self.err(format!(
                                "loop bounds of counter `{counter}` must not depend on loaded data"
                            )));
                        }
                    }
                    self.scopes.push(vec![(counter.clone(), Binding::Counter)]);
                    let r = self.check_body_inner(body);
                    self.scopes.pop();
                    r?;
                }
                Stmt::While { cond, body } => {
                    self.check_bool(cond)?;
                    self.check_body(body)?;
                }
                Stmt::CallIndirect { target } => {
                    self.check_int(target)?;
                }
            }
        }
        Ok(())
    }
}

/// Check every structural invariant: unique non-reserved params, preconditions
/// over params and dimensions only, identifiers defined before use, counters
/// fresh and immutable, loop bounds independent of loaded data.
pub fn validate_kernel(k: &Kernel) -> Result<(), IrError> {
    let mut ctx = Ctx { kernel: &k.name, scopes: Vec::new() };
    if k.name.is_empty() {
        return Err(ctx.err("kernel name must be non-empty"));
    }
    let mut seen = HashSet::new();
    for p in &k.params {
        ctx.check_def_name(&p.name)?;
        if !seen.insert(p.name.as_str()) {
            return Err(IrError::DuplicateParam { name: p.name.clone() });
        }
    }
    ctx.scopes.push(k.params.iter().map(|p| (p.name.clone(), Binding::ParamDerived)).collect());

    for pre in &k.preconditions {
        check_precondition(&ctx, pre)?;
    }
    ctx.check_body(&k.body)
}

fn check_precondition(ctx: &Ctx<'_>, e: &BoolExpr) -> Result<(), IrError> {
    fn check_int(ctx: &Ctx<'_>, e: &IntExpr) -> Result<(), IrError> {
        match e {
            IntExpr::Const(_) | IntExpr::Bdim | IntExpr::Gdim => Ok(()),
            IntExpr::Bid | IntExpr::Tid => {
                Err(ctx.err("preconditions must not reference bid or tid"))
            }
            IntExpr::Ident(name) => match ctx.lookup(name) {
                Some(_) => Ok(()),
                None => Err(ctx.err(format!("undefined identifier `{name}` in precondition"))),
            },
            IntExpr::Bin(_, a, b) | IntExpr::Min(a, b) | IntExpr::Max(a, b) => {
                check_int(ctx, a)?;
                check_int(ctx, b)
            }
            IntExpr::Neg(a) => check_int(ctx, a),
        }
    }
    match e {
        BoolExpr::Cmp(_, a, b) => {
            check_int(ctx, a)?;
            check_int(ctx, b)
        }
        BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
            check_precondition(ctx, a)?;
            check_precondition(ctx, b)
        }
        BoolExpr::Not(a) => check_precondition(ctx, a),
    }
}
