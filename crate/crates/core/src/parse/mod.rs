//! Parsers and canonical serializers for the two semantic-parse dialects.

mod keys;
mod logic;
mod sql;

use std::fmt;

use thiserror::Error;

use crate::ast::{Dialect, SemanticParse};

pub use keys::{extract_key_tokens, KeyToken, KeyTokenSet};
pub use logic::{parse_logic, parse_logic_with, ArgRole, FunctionInventory};
pub use sql::{parse_sql, AGGREGATES};
pub(crate) use sql::COMPARISONS;

/// Out-of-grammar input, located by byte offset into the source.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
    /// What the parser would have accepted at `offset`.
    pub expected: Option<String>,
}

impl SyntaxError {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
            expected: None,
        }
    }

    pub(crate) fn expected(offset: usize, expected: impl Into<String>, found: &str) -> Self {
        let expected = expected.into();
        Self {
            offset,
            message: format!("expected {expected}, found {found}"),
            expected: Some(expected),
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at byte {}: {}", self.offset, self.message)
    }
}

/// Dialect-dispatching parser carrying the logic-form function inventory.
#[derive(Debug, Clone, Default)]
pub struct Parser {
    pub inventory: FunctionInventory,
}

impl Parser {
    pub fn new(inventory: FunctionInventory) -> Self {
        Self { inventory }
    }

    pub fn parse(&self, dialect: Dialect, source: &str) -> Result<SemanticParse, SyntaxError> {
        match dialect {
            Dialect::Sql => parse_sql(source),
            Dialect::Logic => parse_logic_with(source, &self.inventory),
        }
    }
}

/// Parses `source` with the default grammar for `dialect`.
pub fn parse(dialect: Dialect, source: &str) -> Result<SemanticParse, SyntaxError> {
    Parser::default().parse(dialect, source)
}

/// Canonical formal string for a valid parse.
pub fn serialize(parse: &SemanticParse) -> String {
    match parse.dialect {
        Dialect::Sql => sql::serialize(&parse.root),
        Dialect::Logic => logic::serialize(&parse.root),
    }
}
