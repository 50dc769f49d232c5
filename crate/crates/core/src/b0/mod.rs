//! The B0 control language: a fixed read-compute-write loop over typed
//! inputs, outputs and internal variables.

pub mod ast;
pub mod interp;
mod lexer;
mod parser;
pub mod pretty;
mod snapshot;
pub mod typed;

use thiserror::Error;

pub use ast::{B0Type, Expr, Model, Pos};
pub use interp::{eval_invariant, interpret_cycle, interpret_init, MachineState, Value};
pub use lexer::is_keyword;
pub use parser::{parse, parse_expr};
pub use pretty::{expr_to_string, model_to_string};
pub use snapshot::canonical_snapshot;
pub use typed::{typecheck, TypedModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: found {found}{}", expected_list(.expected))]
    Syntax { pos: Pos, found: String, expected: Vec<String> },
    #[error("{pos}: duplicate declaration of `{name}`")]
    Duplicate { name: String, pos: Pos },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::Duplicate { pos, .. } => *pos,
        }
    }
}

fn expected_list(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(", expected one of: {}", expected.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("{pos}: type mismatch: expected {expected}, found {found}")]
    Mismatch { pos: Pos, expected: String, found: String },
    #[error("{pos}: `{name}` is not declared")]
    Undeclared { name: String, pos: Pos },
    #[error("{pos}: assignment to input `{name}`")]
    AssignToInput { name: String, pos: Pos },
    #[error("{pos}: assignment to loop counter `{name}`")]
    AssignToLoopCounter { name: String, pos: Pos },
    #[error("{pos}: loop counter `{name}` shadows another name")]
    Shadowing { name: String, pos: Pos },
    #[error("{pos}: input `{name}` read during INIT")]
    InputInInit { name: String, pos: Pos },
    #[error("invariant refers to input `{name}`")]
    InputInInvariant { name: String },
    #[error("{pos}: `{name}` read before INIT assigns it")]
    UseBeforeInit { name: String, pos: Pos },
    #[error("{pos}: INIT does not assign every cell of `{name}`")]
    NotInitialised { name: String, pos: Pos },
    #[error("{pos}: FOR bound `{bound}` is not an integer literal")]
    NonLiteralBound { bound: String, pos: Pos },
    #[error("{pos}: index {index} outside 0..{len}")]
    IndexOutOfRange { index: i64, len: u32, pos: Pos },
    #[error("{pos}: bad type for `{name}`: {reason}")]
    BadType { name: String, pos: Pos, reason: String },
}

/// Conditions a fully proved model can never reach.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("{pos}: value {value} assigned to `{name}` outside {lo}..{hi}")]
    Range { name: String, value: i64, lo: i64, hi: i64, pos: Pos },
    #[error("{pos}: index {index} of `{name}` outside 0..{len}")]
    Index { name: String, index: i64, len: u32, pos: Pos },
    #[error("{pos}: division by zero")]
    DivByZero { pos: Pos },
    #[error("{pos}: arithmetic overflow")]
    Overflow { pos: Pos },
    #[error("bad input: {reason}")]
    BadInput { reason: String },
}

#[cfg(test)]
mod tests;
