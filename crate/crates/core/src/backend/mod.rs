//! Two unrelated compilation chains for B0 models and the virtual machines
//! that run them.
//!
//! Chain A targets a sixteen-register machine with 32-bit variable slots in
//! region `VAR_A`; chain B targets a stack machine with 64-bit slots in
//! region `VAR_B`, laid out in a different order. The opcode sets are
//! disjoint (`0x10..=0x4F` against `0x80..=0xBF`). Both images carry an INIT
//! and a CYCLE entry point; [`VmMemory`] records which one runs next.
//!
//! Encodings are documented on [`reg::OpA`] and [`stack::OpB`].

mod cost;
mod disasm;
mod mem;
pub mod reg;
pub mod stack;

use thiserror::Error;

use crate::b0::ast::B0Type;
use crate::b0::typed::{StateKind, TypedModel};
use crate::b0::{MachineState, Value};

pub use cost::{CostTable, CostTableError, DEFAULT_COSTS};
pub use disasm::{disasm_a, disasm_b};
pub use mem::{ExecMode, VmMemory};
pub use reg::{compile_a, exec_a, exec_a_with, ImageA};
pub use stack::{compile_b, exec_b, exec_b_with, ImageB, LoopEntry};

pub const VAR_A_BASE: u32 = 0x8000;
pub const VAR_A_END: u32 = 0xC000;
pub const VAR_B_BASE: u32 = 0xC000;
pub const VAR_B_END: u32 = 0x1_0000;

/// Instruction budget per entry-point call.
pub const FUEL: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Var,
    Output,
    Input,
}

impl VarKind {
    pub fn code(self) -> u8 {
        match self {
            VarKind::Var => 0,
            VarKind::Output => 1,
            VarKind::Input => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [VarKind::Var, VarKind::Output, VarKind::Input].into_iter().find(|k| k.code() == c)
    }
}

/// One declared name and the address of its first cell. Array cells are
/// consecutive slots in index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarEntry {
    pub name: String,
    pub kind: VarKind,
    pub ty: B0Type,
    pub addr: u32,
}

/// Placement of every state and input name in one image's memory.
///
/// Entries are in canonical order (state first, inputs after) whatever the
/// physical layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarMap {
    pub base: u32,
    /// Bytes per slot.
    pub width: u32,
    /// Slots the image uses in total, scratch included.
    pub slots: u32,
    pub entries: Vec<VarEntry>,
}

impl VarMap {
    pub fn state(&self) -> impl Iterator<Item = &VarEntry> {
        self.entries.iter().filter(|e| e.kind != VarKind::Input)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VarEntry> {
        self.entries.iter().filter(|e| e.kind == VarKind::Input)
    }

    /// Address of every state cell, canonical order, arrays flattened.
    pub fn state_cells(&self) -> Vec<u32> {
        self.state().flat_map(|e| (0..e.ty.scalar_count() as u32).map(move |k| e.addr + k * self.width)).collect()
    }

    pub fn end(&self) -> u32 {
        self.base + self.slots * self.width
    }

    /// Reads the machine state back out of memory. Fails with the index of
    /// the first state cell holding a value outside its domain.
    pub fn read_state(&self, mem: &VmMemory) -> Result<MachineState, usize> {
        let mut values = vec![];
        let mut cell = 0;
        for e in self.state() {
            let read = |k: u32, cell: usize| -> Result<Value, usize> {
                let raw = mem.load(e.addr + k * self.width).map_err(|_| cell)?;
                Value::cell_from_raw(raw, e.ty.cell_type()).ok_or(cell)
            };
            match &e.ty {
                B0Type::Array { len, .. } => {
                    let mut vs = vec![];
                    for k in 0..*len {
                        vs.push(read(k, cell)?);
                        cell += 1;
                    }
                    values.push(Value::Array(vs));
                }
                _ => {
                    values.push(read(0, cell)?);
                    cell += 1;
                }
            }
        }
        Ok(MachineState { values })
    }

    /// Output values in output declaration order.
    pub fn read_outputs(&self, mem: &VmMemory) -> Result<Vec<Value>, usize> {
        let state = self.read_state(mem)?;
        Ok(self.state().zip(state.values).filter(|(e, _)| e.kind == VarKind::Output).map(|(_, v)| v).collect())
    }

    /// Output names in declaration order.
    pub fn output_names(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| e.kind == VarKind::Output).map(|e| e.name.as_str()).collect()
    }

    /// Places a machine state into memory, cell by cell.
    pub fn write_state(&self, mem: &mut VmMemory, state: &MachineState) -> Result<(), ExecFault> {
        for (e, v) in self.state().zip(&state.values) {
            match v {
                Value::Array(cells) => {
                    for (k, c) in cells.iter().enumerate() {
                        mem.store(e.addr + k as u32 * self.width, c.as_i64())?;
                    }
                }
                v => mem.store(e.addr, v.as_i64())?,
            }
        }
        Ok(())
    }

    fn write_inputs(&self, mem: &mut VmMemory, inputs: &[Value]) -> Result<(), ExecFault> {
        let decls: Vec<&VarEntry> = self.inputs().collect();
        if decls.len() != inputs.len() {
            return Err(ExecFault::BadInput(format!("expected {} inputs, got {}", decls.len(), inputs.len())));
        }
        for (e, v) in decls.into_iter().zip(inputs) {
            if !v.in_domain(&e.ty) {
                return Err(ExecFault::BadInput(format!("input `{}` = {v} outside {}", e.name, e.ty)));
            }
            match v {
                Value::Array(cells) => {
                    for (k, c) in cells.iter().enumerate() {
                        mem.store(e.addr + k as u32 * self.width, c.as_i64())?;
                    }
                }
                v => mem.store(e.addr, v.as_i64())?,
            }
        }
        Ok(())
    }
}

/// Canonical-order entries for a model, before addresses are assigned.
fn declared(tm: &TypedModel) -> Vec<VarEntry> {
    let state = tm.state.iter().map(|s| VarEntry {
        name: s.name.clone(),
        kind: match s.kind {
            StateKind::Var => VarKind::Var,
            StateKind::Output => VarKind::Output,
        },
        ty: s.ty.clone(),
        addr: 0,
    });
    let inputs =
        tm.inputs.iter().map(|i| VarEntry { name: i.name.clone(), kind: VarKind::Input, ty: i.ty.clone(), addr: 0 });
    state.chain(inputs).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("model needs {needed} variable slots, region holds {capacity}")]
    Capacity { needed: u32, capacity: u32 },
    #[error("expression too deep for the register file")]
    RegisterPressure,
    #[error("integer literal {0} does not fit an immediate operand")]
    Immediate(i64),
    #[error("code exceeds 64 KiB")]
    CodeSize,
}

/// Anything that stops an image mid-cycle. All of them are detectable by
/// the platform; none corrupt memory silently.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecFault {
    #[error("decode fault at code offset {0:#06x}")]
    Decode(usize),
    #[error("access to {0:#06x} outside the image's variable region")]
    Region(u32),
    #[error("value {value} outside {lo}..{hi} at code offset {offset:#06x}")]
    Range { offset: usize, value: i64, lo: i64, hi: i64 },
    #[error("index {index} outside 0..{len} at code offset {offset:#06x}")]
    Index { offset: usize, index: i64, len: u16 },
    #[error("division by zero at code offset {0:#06x}")]
    DivByZero(usize),
    #[error("arithmetic overflow at code offset {0:#06x}")]
    Overflow(usize),
    #[error("operand stack overflow at code offset {0:#06x}")]
    StackOverflow(usize),
    #[error("operand stack underflow at code offset {0:#06x}")]
    StackUnderflow(usize),
    #[error("operand stack not empty at return")]
    StackNotEmpty,
    #[error("instruction budget exhausted")]
    Watchdog,
    #[error("bad input: {0}")]
    BadInput(String),
}
