use thiserror::Error;

/// Source location, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("syntax error at {loc}: {msg}")]
    SyntaxError { loc: Loc, msg: String },
    #[error("undefined identifier `{name}` at {loc}")]
    UndefinedIdentifier { name: String, loc: Loc },
    #[error("duplicate parameter `{name}`")]
    DuplicateParam { name: String },
    #[error("invariant violation in kernel `{kernel}`: {msg}")]
    InvariantViolation { kernel: String, msg: String },
}

impl IrError {
    pub fn syntax(loc: Loc, msg: impl Into<String>) -> IrError {
        IrError::SyntaxError { loc, msg: msg.into() }
    }
}
