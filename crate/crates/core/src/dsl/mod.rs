//! The `.rbac` policy text format.
//!
//! Line-oriented: one declaration per line, `#` starts a comment, blank
//! lines are ignored. The first statement must be the policy header.
//!
//! ```text
//! policy <id> mode (bound|rule4) [single-active-role]
//! user <id>
//! object <id>
//! transaction <id> proc <id> [binds <obj>:<mode>[,<mode>]* ...]
//! role <id> [allocates <t>,..] [contains <r>,..] [members <u>,..]
//! static-sod <id> roles <r1>,<r2>,.. max <k>
//! dynamic-sod <id> transactions <t1>,<t2>,.. [since <ordinal>]
//! restrict <user> to [<t>,..]
//! access <role> <tran> <object> <mode>
//! ```
//!
//! Parsing is total — no input panics — and recovers at line boundaries,
//! so one pass reports every detectable error with a line/column span.
//! A successful parse guarantees a well-formed policy: every reference
//! resolves, containment is acyclic, restrictions stay inside their
//! ceiling, declared static constraints hold, and (in `bound` mode) every
//! transaction binds at least one object.
//!
//! [`serialize_policy`] emits the canonical form: fixed section order,
//! lexicographic sorting, one blank line between sections. Canonical
//! output is a fixed point — parsing and re-serializing it is the
//! identity on bytes.

mod emit;
mod parse;

pub use emit::{serialize_policy, SerializeError};
pub use parse::{parse_policy, parse_policy_bytes};

use std::fmt;

use serde::Serialize;

/// A half-open source location: 1-based line and column, length in
/// characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    pub(crate) fn new(line: usize, column: usize, length: usize) -> SourceSpan {
        SourceSpan {
            line,
            column,
            length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseErrorCode {
    /// A character or token outside the lexical grammar, including
    /// malformed identifiers and invalid UTF-8.
    Lex,
    /// A structurally malformed statement.
    Syntax,
    /// The same identifier declared twice in one namespace.
    DuplicateDecl,
    /// A reference to something never declared.
    UnknownRef,
    /// A containment edge closing a cycle.
    Cycle,
    /// A construct only meaningful in the other policy mode.
    ModeConflict,
    /// A restriction listing transactions outside the user's reach.
    RestrictionWidens,
    /// Declared memberships already violate a declared static constraint.
    StaticSod,
    /// A bound-mode transaction with no object bindings.
    EmptyBinding,
}

impl ParseErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorCode::Lex => "LEX",
            ParseErrorCode::Syntax => "SYNTAX",
            ParseErrorCode::DuplicateDecl => "DUPLICATE_DECL",
            ParseErrorCode::UnknownRef => "UNKNOWN_REF",
            ParseErrorCode::Cycle => "CYCLE",
            ParseErrorCode::ModeConflict => "MODE_CONFLICT",
            ParseErrorCode::RestrictionWidens => "RESTRICTION_WIDENS",
            ParseErrorCode::StaticSod => "STATIC_SOD",
            ParseErrorCode::EmptyBinding => "EMPTY_BINDING",
        }
    }
}

impl fmt::Display for ParseErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One diagnostic. Errors compare by position, so a sorted list reads in
/// file order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ParseError {
    pub span: SourceSpan,
    pub code: ParseErrorCode,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}:{}: {}: {}",
            self.span.line, self.span.column, self.code, self.message
        )
    }
}

impl std::error::Error for ParseError {}
