//! Kernel definition language: AST, `.gk` parser, canonical printer, and
//! structural validation.

mod ast;
mod error;
mod parser;
mod pretty;
mod validate;

pub use ast::{number_statements, BinOp, BoolExpr, CmpOp, IntExpr, Kernel, Param, ParamKind, Stmt, Width};
pub use error::{IrError, Loc};
pub use parser::parse_kernel;
pub use pretty::pretty_print;
pub use validate::validate_kernel;
