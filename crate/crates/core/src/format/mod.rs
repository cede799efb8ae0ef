//! The attribute-format mini-language of the schema's `!Format` column and
//! the reaction-equation cell grammar.

mod attribute;
mod equation;
mod lexer;

use std::fmt;

pub(crate) use attribute::quote;
pub use attribute::{parse_attribute_format, print_attribute_format};
pub use equation::{
    parse_chemical_equation, print_chemical_equation, ChemicalEquation, Participant,
};
pub(crate) use lexer::{is_double_quote, is_single_quote, scan_string};
pub use lexer::{tokenize, FormatToken, TokenKind};

/// A syntax error with a character offset into the parsed text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}
