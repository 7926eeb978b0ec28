//! The unsafe component language: syntax, well-formedness and semantics.

mod ast;
mod check;
mod eval;
mod lexer;
mod link;
mod parser;
mod printer;

use std::fmt;

pub use ast::{Expr, SourceComponent, SourceProgram};
pub use check::{check_source, WellFormednessError};
pub use eval::{env_answer, initial_memory, run_source, run_source_detailed, SourceRun};
pub use link::{link_source, LinkError};
pub use parser::{parse_source, parse_unit, SourceUnit};
pub use printer::{print_expr, print_source};

/// A syntax error with its 1-based position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn at(tok: &lexer::Token, message: impl Into<String>) -> Self {
        Self::new(tok.line, tok.col, message)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[cfg(test)]
mod tests;
