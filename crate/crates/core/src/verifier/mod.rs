//! Proof obligations for B0 models: generation, automatic discharge and
//! XML export.

mod eval;
mod generate;
mod interval;
mod prove;
mod xml;

use std::fmt;

use thiserror::Error;

use crate::b0::ast::{B0Type, Expr, Pos};
use crate::b0::Value;

pub use eval::{eval_pred, Valuation};
pub use generate::{generate_pos, typing_hyps, wp_stmts};
pub use interval::{interval_truth, Truth};
pub use prove::{prove, prove_all, DEFAULT_BUDGET};
pub use xml::export_pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoKind {
    InitEstablishes,
    CyclePreserves,
    WdRange,
    WdIndex,
    WdDiv,
}

impl PoKind {
    pub fn name(self) -> &'static str {
        match self {
            PoKind::InitEstablishes => "INIT_ESTABLISHES",
            PoKind::CyclePreserves => "CYCLE_PRESERVES",
            PoKind::WdRange => "WD_RANGE",
            PoKind::WdIndex => "WD_INDEX",
            PoKind::WdDiv => "WD_DIV",
        }
    }
}

impl fmt::Display for PoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofObligation {
    pub id: u32,
    pub kind: PoKind,
    pub loc: Pos,
    pub hypotheses: Vec<Expr>,
    pub goal: Expr,
    /// Universally quantified names and their domains.
    pub domains: Vec<(String, B0Type)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofStatus {
    ProvedInterval,
    ProvedEnum,
    Unproven,
    /// A valuation of the goal's free names satisfying every hypothesis
    /// but not the goal.
    Counterexample(Vec<(String, Value)>),
}

impl ProofStatus {
    pub fn is_proved(&self) -> bool {
        matches!(self, ProofStatus::ProvedInterval | ProofStatus::ProvedEnum)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProofStatus::ProvedInterval => "PROVED_INTERVAL",
            ProofStatus::ProvedEnum => "PROVED_ENUM",
            ProofStatus::Unproven => "UNPROVEN",
            ProofStatus::Counterexample(_) => "COUNTEREXAMPLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofResult {
    pub po_id: u32,
    pub status: ProofStatus,
}

/// `a=1,b=true,buf(0)=3,buf(1)=0`.
pub fn witness_text(w: &[(String, Value)]) -> String {
    let mut parts = vec![];
    for (name, v) in w {
        match v {
            Value::Array(vs) => {
                parts.extend(vs.iter().enumerate().map(|(i, c)| format!("{name}({i})={c}")));
            }
            v => parts.push(format!("{name}={v}")),
        }
    }
    parts.join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("proof results do not match obligations: missing {missing:?}, unexpected {unexpected:?}")]
    MismatchedIds { missing: Vec<u32>, unexpected: Vec<u32> },
}

#[cfg(test)]
mod tests;
