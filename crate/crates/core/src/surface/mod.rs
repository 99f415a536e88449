//! Concrete syntax for expressions, types and schemes.

mod lexer;
mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

pub use lexer::{lex, Tok, Token};
pub use parser::{parse_expr, parse_expr_debug, parse_expr_with, parse_scheme, parse_type, ParseOptions, Parsed};
pub use printer::{print_effect, print_expr, print_scheme, print_type, print_typing, Namer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl SourceSpan {
    pub fn join(self, other: SourceSpan) -> SourceSpan {
        if other.end >= self.end {
            SourceSpan { end: other.end, ..self }
        } else {
            self
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(message: impl Into<String>, span: SourceSpan, expected: Vec<String>) -> ParseError {
        ParseError { message: message.into(), span, expected }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}
