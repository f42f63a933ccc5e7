//! Analysis artifacts on disk: one JSON document per kernel.
//!
//! Expressions serialize as prefix s-expression strings over the variable
//! table, which is stored in interning order so ids survive the round
//! trip. The document carries everything both validators need: class,
//! preconditions, global condition, and descriptors for the plan;
//! the raw access summary for the enumeration baseline.

use serde::{Deserialize, Serialize};

use crate::ir::{ParamKind, Width};
use crate::range::{KernelAnalysis, RangeDescriptor};
use crate::sym::{
    bool_to_sexpr, expr_to_sexpr, parse_sexpr_bool, parse_sexpr_expr, var_display_name,
    AccessKind, AccessSite, AnalysisFailure, FailureKind, InductionInfo, KernelClass,
    NonIdemReason, NonParamSource, SymBool, SymExpr, SymVarId, SymbolicAccess, SymbolicSummary,
    VarOrigin, VarTable,
};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad expression `{src}`: {msg}")]
    Expr { src: String, msg: String },
    #[error("{0}")]
    Malformed(String),
}

fn bad(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::Malformed(msg.into())
}

#[derive(Serialize, Deserialize)]
struct Doc {
    kernel: String,
    class: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    reason: Option<String>,
    preconditions: Vec<String>,
    global_condition: Vec<String>,
    descriptors: Vec<DescDoc>,
    induction_info: Vec<InductionDoc>,
    failures: Vec<FailureDoc>,
    vars: Vec<VarDoc>,
    accesses: Vec<AccessDoc>,
    #[serde(default)]
    dropped_conditions: u32,
    #[serde(default)]
    paths: u32,
    #[serde(default)]
    compacted: bool,
}

#[derive(Serialize, Deserialize)]
struct DescDoc {
    kind: String,
    width: u8,
    guard: Vec<String>,
    lb: String,
    ub: String,
    opaque: bool,
    nc: bool,
    provenance: SiteDoc,
}

#[derive(Serialize, Deserialize)]
struct SiteDoc {
    stmt: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    unroll: Vec<u32>,
}

impl From<&AccessSite> for SiteDoc {
    fn from(s: &AccessSite) -> SiteDoc {
        SiteDoc { stmt: s.stmt, unroll: s.unroll.clone() }
    }
}

impl From<SiteDoc> for AccessSite {
    fn from(s: SiteDoc) -> AccessSite {
        AccessSite { stmt: s.stmt, unroll: s.unroll }
    }
}

#[derive(Serialize, Deserialize)]
struct InductionDoc {
    loop_stmt: u32,
    name: String,
    var: String,
    initial: String,
    step: i64,
    trip: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct FailureDoc {
    kind: String,
    site: SiteDoc,
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    name: String,
    #[serde(flatten)]
    origin: OriginDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OriginDoc {
    Param { index: usize, ty: String },
    Bid,
    Tid,
    Bdim,
    Gdim,
    Induction { loop_stmt: u32, initial: String, step: i64, trip: Option<String> },
    NonParam { source: String, stmt: u32 },
    Fresh { lo: String, hi: String },
}

#[derive(Serialize, Deserialize)]
struct AccessDoc {
    kind: String,
    width: u8,
    address: String,
    conds: Vec<String>,
    site: SiteDoc,
}

fn kind_str(k: AccessKind) -> &'static str {
    match k {
        AccessKind::Read => "read",
        AccessKind::Write => "write",
        AccessKind::Atomic => "atomic",
    }
}

fn kind_of(s: &str) -> Result<AccessKind, ArtifactError> {
    match s {
        "read" => Ok(AccessKind::Read),
        "write" => Ok(AccessKind::Write),
        "atomic" => Ok(AccessKind::Atomic),
        other => Err(bad(format!("unknown access kind `{other}`"))),
    }
}

pub fn write_artifact(analysis: &KernelAnalysis) -> String {
    let s = &analysis.summary;
    let vars = &s.vars;
    let e = |x: &SymExpr| expr_to_sexpr(x, vars);
    let b = |x: &SymBool| bool_to_sexpr(x, vars);

    let (class, reason) = match analysis.class {
        KernelClass::Idempotent => ("idempotent", None),
        KernelClass::CondIdempotent => ("cond-idempotent", None),
        KernelClass::NonIdempotent(r) => ("non-idempotent", Some(r.code().to_string())),
    };

    let doc = Doc {
        kernel: s.kernel.clone(),
        class: class.to_string(),
        reason,
        preconditions: analysis.preconditions.iter().map(b).collect(),
        global_condition: s.global_condition.iter().map(b).collect(),
        descriptors: analysis
            .descriptors
            .iter()
            .map(|d| DescDoc {
                kind: kind_str(d.kind).to_string(),
                width: d.width,
                guard: d.guard.iter().map(b).collect(),
                lb: e(&d.lb),
                ub: e(&d.ub),
                opaque: d.opaque,
                nc: d.nc,
                provenance: (&d.provenance).into(),
            })
            .collect(),
        induction_info: s
            .induction
            .iter()
            .map(|i| InductionDoc {
                loop_stmt: i.loop_stmt,
                name: i.name.clone(),
                var: var_display_name(vars, i.var),
                initial: e(&i.initial),
                step: i.step,
                trip: i.trip.as_ref().map(e),
            })
            .collect(),
        failures: s
            .failures
            .iter()
            .map(|f| FailureDoc { kind: f.kind.code().to_string(), site: (&f.site).into() })
            .collect(),
        vars: vars
            .ids()
            .map(|v| {
                let info = vars.info(v);
                let origin = match &info.origin {
                    VarOrigin::Param { index, kind } => OriginDoc::Param {
                        index: *index,
                        ty: match kind {
                            ParamKind::Buffer => "buf",
                            ParamKind::ScalarI64 => "i64",
                            ParamKind::ScalarI32 => "i32",
                        }
                        .to_string(),
                    },
                    VarOrigin::Bid => OriginDoc::Bid,
                    VarOrigin::Tid => OriginDoc::Tid,
                    VarOrigin::Bdim => OriginDoc::Bdim,
                    VarOrigin::Gdim => OriginDoc::Gdim,
                    VarOrigin::Induction { loop_stmt, initial, step, trip } => {
                        OriginDoc::Induction {
                            loop_stmt: *loop_stmt,
                            initial: e(initial),
                            step: *step,
                            trip: trip.as_ref().map(e),
                        }
                    }
                    VarOrigin::NonParam(src) => {
                        let (source, stmt) = match src {
                            NonParamSource::Load { stmt } => ("load", *stmt),
                            NonParamSource::LoopEscape { stmt } => ("loop_escape", *stmt),
                        };
                        OriginDoc::NonParam { source: source.to_string(), stmt }
                    }
                    VarOrigin::Fresh { lo, hi } => OriginDoc::Fresh { lo: e(lo), hi: e(hi) },
                };
                VarDoc { name: info.name.clone(), origin }
            })
            .collect(),
        accesses: s
            .accesses
            .iter()
            .map(|a| AccessDoc {
                kind: kind_str(a.kind).to_string(),
                width: a.width.bytes(),
                address: e(&a.address),
                conds: a.path_conditions.iter().map(b).collect(),
                site: (&a.site).into(),
            })
            .collect(),
        dropped_conditions: analysis.dropped_conditions,
        paths: s.paths,
        compacted: s.compacted,
    };
    serde_json::to_string_pretty(&doc).expect("artifact structs serialize infallibly")
}

pub fn read_artifact(json: &str) -> Result<KernelAnalysis, ArtifactError> {
    let doc: Doc = serde_json::from_str(json)?;

    // Rebuild the variable table in interning order. Expressions inside an
    // origin only reference earlier variables, so one pass resolves all.
    let mut vars = VarTable::default();
    let mut names: Vec<String> = Vec::new();
    for vd in &doc.vars {
        let origin = match &vd.origin {
            OriginDoc::Param { index, ty } => VarOrigin::Param {
                index: *index,
                kind: match ty.as_str() {
                    "buf" => ParamKind::Buffer,
                    "i64" => ParamKind::ScalarI64,
                    "i32" => ParamKind::ScalarI32,
                    other => return Err(bad(format!("unknown param type `{other}`"))),
                },
            },
            OriginDoc::Bid => VarOrigin::Bid,
            OriginDoc::Tid => VarOrigin::Tid,
            OriginDoc::Bdim => VarOrigin::Bdim,
            OriginDoc::Gdim => VarOrigin::Gdim,
            OriginDoc::Induction { loop_stmt, initial, step, trip } => VarOrigin::Induction {
                loop_stmt: *loop_stmt,
                initial: parse_expr(initial, &names)?,
                step: *step,
                trip: trip.as_ref().map(|t| parse_expr(t, &names)).transpose()?,
            },
            OriginDoc::NonParam { source, stmt } => VarOrigin::NonParam(match source.as_str() {
                "load" => NonParamSource::Load { stmt: *stmt },
                "loop_escape" => NonParamSource::LoopEscape { stmt: *stmt },
                other => return Err(bad(format!("unknown non-param source `{other}`"))),
            }),
            OriginDoc::Fresh { lo, hi } => VarOrigin::Fresh {
                lo: parse_expr(lo, &names)?,
                hi: parse_expr(hi, &names)?,
            },
        };
        let id = vars.intern(vd.name.clone(), origin);
        names.push(var_display_name(&vars, id));
    }

    let class = match (doc.class.as_str(), doc.reason.as_deref()) {
        ("idempotent", _) => KernelClass::Idempotent,
        ("cond-idempotent", _) => KernelClass::CondIdempotent,
        ("non-idempotent", Some("atomic")) => KernelClass::NonIdempotent(NonIdemReason::Atomic),
        ("non-idempotent", Some("IF")) => {
            KernelClass::NonIdempotent(NonIdemReason::IndirectFlow)
        }
        ("non-idempotent", Some("PE")) => {
            KernelClass::NonIdempotent(NonIdemReason::PathExplosion)
        }
        ("non-idempotent", Some("SO")) => {
            KernelClass::NonIdempotent(NonIdemReason::StructuralOverlap)
        }
        (c, r) => return Err(bad(format!("unknown class `{c}` / reason {r:?}"))),
    };

    let preconditions = doc
        .preconditions
        .iter()
        .map(|p| parse_bool(p, &names))
        .collect::<Result<Vec<_>, _>>()?;
    let global_condition = doc
        .global_condition
        .iter()
        .map(|g| parse_bool(g, &names))
        .collect::<Result<Vec<_>, _>>()?;

    let descriptors = doc
        .descriptors
        .into_iter()
        .map(|d| {
            Ok(RangeDescriptor {
                kind: kind_of(&d.kind)?,
                width: d.width,
                lb: parse_expr(&d.lb, &names)?,
                ub: parse_expr(&d.ub, &names)?,
                guard: d.guard.iter().map(|g| parse_bool(g, &names)).collect::<Result<_, _>>()?,
                opaque: d.opaque,
                nc: d.nc,
                provenance: d.provenance.into(),
            })
        })
        .collect::<Result<Vec<_>, ArtifactError>>()?;

    let accesses = doc
        .accesses
        .into_iter()
        .map(|a| {
            Ok(SymbolicAccess {
                kind: kind_of(&a.kind)?,
                address: parse_expr(&a.address, &names)?,
                width: Width::new(a.width)
                    .ok_or_else(|| bad(format!("bad access width {}", a.width)))?,
                path_conditions: a
                    .conds
                    .iter()
                    .map(|c| parse_bool(c, &names))
                    .collect::<Result<_, _>>()?,
                site: a.site.into(),
            })
        })
        .collect::<Result<Vec<_>, ArtifactError>>()?;

    let induction = doc
        .induction_info
        .into_iter()
        .map(|i| {
            let var = names
                .iter()
                .position(|n| *n == i.var)
                .map(|p| SymVarId(p as u32))
                .ok_or_else(|| bad(format!("induction references unknown var `{}`", i.var)))?;
            Ok(InductionInfo {
                loop_stmt: i.loop_stmt,
                name: i.name,
                var,
                initial: parse_expr(&i.initial, &names)?,
                step: i.step,
                trip: i.trip.as_ref().map(|t| parse_expr(t, &names)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>, ArtifactError>>()?;

    let failures = doc
        .failures
        .into_iter()
        .map(|f| {
            let kind = match f.kind.as_str() {
                "IF" => FailureKind::IndirectFlow,
                "PE" => FailureKind::PathExplosion,
                other => return Err(bad(format!("unknown failure kind `{other}`"))),
            };
            Ok(AnalysisFailure { kind, site: f.site.into() })
        })
        .collect::<Result<Vec<_>, ArtifactError>>()?;

    Ok(KernelAnalysis {
        class,
        summary: SymbolicSummary {
            kernel: doc.kernel,
            vars,
            accesses,
            global_condition,
            induction,
            failures,
            paths: doc.paths,
            compacted: doc.compacted,
        },
        descriptors,
        preconditions,
        dropped_conditions: doc.dropped_conditions,
    })
}

fn parse_expr(src: &str, names: &[String]) -> Result<SymExpr, ArtifactError> {
    parse_sexpr_expr(src, &mut |n| {
        names.iter().position(|x| x == n).map(|p| SymVarId(p as u32))
    })
    .map_err(|msg| ArtifactError::Expr { src: src.to_string(), msg })
}

fn parse_bool(src: &str, names: &[String]) -> Result<SymBool, ArtifactError> {
    parse_sexpr_bool(src, &mut |n| {
        names.iter().position(|x| x == n).map(|p| SymVarId(p as u32))
    })
    .map_err(|msg| ArtifactError::Expr { src: src.to_string(), msg })
}
