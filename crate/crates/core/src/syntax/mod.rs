//! Concrete grammar, parser, printer and static checks for HCSP.

mod ast;
mod lexer;
mod model;
mod parser;
mod pretty;
mod validate;

use thiserror::Error;

pub use ast::*;
pub use lexer::is_keyword;
pub use model::{looks_like_model, parse_model, Model, EQUILIBRIUM_TOL};
pub use parser::{parse, parse_bool, parse_expr, parse_in_scope, Scope};
pub use pretty::{format_num, pretty};
pub use validate::{
    channel_ends, channels, ode_vars, open_channels, validate, vars, written_vars, Diagnostic, DiagnosticKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError { line, col, message: message.into() }
    }
}
