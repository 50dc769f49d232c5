//! Static worst-case cost bound for the CYCLE entry of a bytecode image.
//!
//! The compiler only emits forward jumps, except for the `LOOPBACK` closing
//! each `FOR`, and every such loop has a loop-table entry with its trip
//! count. Collapsing each loop into one node therefore leaves a DAG, and the
//! bound is its longest path: sequences add, a `JZ` takes the dearer of its
//! two successors, and a loop costs `trips * (body + overhead)`. Setup
//! instructions before the loop head are ordinary sequence members.

use std::collections::HashMap;

use thiserror::Error;

use crate::backend::stack::{InsnB, OpB};
use crate::backend::{CostTable, ExecFault, ImageB, LoopEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WcetError {
    #[error(transparent)]
    Decode(#[from] ExecFault),
    #[error("backward jump at {0:#06x} has no loop-table entry")]
    UnboundedLoop(usize),
    #[error("control leaves its enclosing region at {0:#06x}")]
    Unstructured(usize),
}

struct Analysis<'a> {
    code: &'a [u8],
    loops: &'a [LoopEntry],
    costs: &'a CostTable,
    memo: HashMap<(usize, usize), u64>,
}

impl Analysis<'_> {
    /// Worst cost from `pc` until control reaches `stop` or returns.
    fn from(&mut self, pc: usize, stop: usize) -> Result<u64, WcetError> {
        if pc == stop {
            return Ok(0);
        }
        if pc > stop {
            return Err(WcetError::Unstructured(pc));
        }
        if let Some(&c) = self.memo.get(&(pc, stop)) {
            return Ok(c);
        }
        let c = match self.loops.iter().find(|l| l.start as usize == pc) {
            Some(l) => {
                let end = l.end as usize;
                if end > stop {
                    return Err(WcetError::Unstructured(pc));
                }
                let body = self.step(pc, end)?;
                body.saturating_mul(l.trips as u64).saturating_add(self.from(end, stop)?)
            }
            None => self.step(pc, stop)?,
        };
        self.memo.insert((pc, stop), c);
        Ok(c)
    }

    /// Like [`Self::from`] but never collapses a loop headed at `pc`.
    fn step(&mut self, pc: usize, stop: usize) -> Result<u64, WcetError> {
        let (insn, len) = InsnB::decode(self.code, pc)?;
        let own = self.costs.cost(insn.op().mnemonic());
        let next = pc + len;
        let rest = match insn {
            InsnB::Simple(OpB::Ret) => 0,
            InsnB::Goto(t) => self.forward(pc, t as usize, stop)?,
            InsnB::Jz(t) => self.forward(pc, t as usize, stop)?.max(self.from(next, stop)?),
            InsnB::LoopBack(t) => {
                let closes = self.loops.iter().any(|l| l.start == t && l.end as usize == next);
                if !closes {
                    return Err(WcetError::UnboundedLoop(pc));
                }
                self.from(next, stop)?
            }
            _ => self.from(next, stop)?,
        };
        Ok(own.saturating_add(rest))
    }

    fn forward(&mut self, pc: usize, target: usize, stop: usize) -> Result<u64, WcetError> {
        if target <= pc {
            return Err(WcetError::UnboundedLoop(pc));
        }
        self.from(target, stop)
    }
}

/// Cost bound for one CYCLE call of `img` under `costs`.
pub fn analyze(img: &ImageB, costs: &CostTable) -> Result<u64, WcetError> {
    let entry = img.cycle_entry()?;
    let mut a = Analysis { code: &img.code, loops: &img.loop_table, costs, memo: HashMap::new() };
    a.from(entry, img.code.len())
}

#[cfg(test)]
mod tests;
