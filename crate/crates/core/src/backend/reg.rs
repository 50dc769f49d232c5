//! Chain A: a register machine.
//!
//! Sixteen 64-bit registers, variables in 32-bit slots from `VAR_A_BASE`
//! (state cells in canonical order, then inputs, then loop counters).
//! The image starts with a four-byte header, `u16 init_entry, u16
//! cycle_entry`, followed by the instructions. Each instruction is one
//! opcode byte and little-endian operands; register operands are one byte
//! each and must be below 16.

use crate::b0::ast::{ArithOp, B0Type, RelOp};
use crate::b0::typed::{TExpr, TExprKind, TStmt, TStmtKind, TTarget, TypedModel};
use crate::b0::Value;
use crate::crc::crc32;

use super::{declared, CompileError, CostTable, ExecFault, ExecMode, VarKind, VarMap, VmMemory, FUEL, VAR_A_BASE, VAR_A_END};

const REGS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum OpA {
    /// `LDI rd, i32`
    Ldi = 0x10,
    /// `LD rd, addr16`
    Ld = 0x11,
    /// `ST rs, addr16`
    St = 0x12,
    /// `LDX rd, ri, base16, len16`: bounds-checked indexed load.
    Ldx = 0x13,
    /// `STX rs, ri, base16, len16`
    Stx = 0x14,
    /// `ADD rd, ra, rb` and the other three-register forms below.
    Add = 0x20,
    Sub = 0x21,
    Mul = 0x22,
    Div = 0x23,
    Mod = 0x24,
    /// `NEG rd, ra`
    Neg = 0x25,
    Ceq = 0x28,
    Cne = 0x29,
    Clt = 0x2A,
    Cle = 0x2B,
    Cgt = 0x2C,
    Cge = 0x2D,
    And = 0x30,
    Or = 0x31,
    /// `NOT rd, ra`
    Not = 0x32,
    /// `RCHK ra, lo i32, hi i32`: range fault unless `lo <= ra <= hi`.
    Rchk = 0x38,
    /// `BZ ra, target16`: absolute code offset.
    Bz = 0x40,
    Bnz = 0x41,
    /// `JMP target16`
    Jmp = 0x42,
    Halt = 0x4F,
}

impl OpA {
    pub const ALL: [OpA; 25] = [
        OpA::Ldi,
        OpA::Ld,
        OpA::St,
        OpA::Ldx,
        OpA::Stx,
        OpA::Add,
        OpA::Sub,
        OpA::Mul,
        OpA::Div,
        OpA::Mod,
        OpA::Neg,
        OpA::Ceq,
        OpA::Cne,
        OpA::Clt,
        OpA::Cle,
        OpA::Cgt,
        OpA::Cge,
        OpA::And,
        OpA::Or,
        OpA::Not,
        OpA::Rchk,
        OpA::Bz,
        OpA::Bnz,
        OpA::Jmp,
        OpA::Halt,
    ];

    pub fn from_byte(b: u8) -> Option<OpA> {
        OpA::ALL.iter().copied().find(|o| *o as u8 == b)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpA::Ldi => "LDI",
            OpA::Ld => "LD",
            OpA::St => "ST",
            OpA::Ldx => "LDX",
            OpA::Stx => "STX",
            OpA::Add => "ADD",
            OpA::Sub => "SUB",
            OpA::Mul => "MUL",
            OpA::Div => "DIV",
            OpA::Mod => "MOD",
            OpA::Neg => "NEG",
            OpA::Ceq => "CEQ",
            OpA::Cne => "CNE",
            OpA::Clt => "CLT",
            OpA::Cle => "CLE",
            OpA::Cgt => "CGT",
            OpA::Cge => "CGE",
            OpA::And => "AND",
            OpA::Or => "OR",
            OpA::Not => "NOT",
            OpA::Rchk => "RCHK",
            OpA::Bz => "BZ",
            OpA::Bnz => "BNZ",
            OpA::Jmp => "JMP",
            OpA::Halt => "HALT",
        }
    }

    fn arith(op: ArithOp) -> OpA {
        match op {
            ArithOp::Add => OpA::Add,
            ArithOp::Sub => OpA::Sub,
            ArithOp::Mul => OpA::Mul,
            ArithOp::Div => OpA::Div,
            ArithOp::Mod => OpA::Mod,
        }
    }

    fn rel(op: RelOp) -> OpA {
        match op {
            RelOp::Eq => OpA::Ceq,
            RelOp::Ne => OpA::Cne,
            RelOp::Lt => OpA::Clt,
            RelOp::Le => OpA::Cle,
            RelOp::Gt => OpA::Cgt,
            RelOp::Ge => OpA::Cge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsnA {
    Ldi { rd: u8, imm: i32 },
    Ld { rd: u8, addr: u16 },
    St { rs: u8, addr: u16 },
    Ldx { rd: u8, ri: u8, base: u16, len: u16 },
    Stx { rs: u8, ri: u8, base: u16, len: u16 },
    /// Arithmetic, comparison and logical three-register forms.
    Bin { op: OpA, rd: u8, ra: u8, rb: u8 },
    Neg { rd: u8, ra: u8 },
    Not { rd: u8, ra: u8 },
    Rchk { ra: u8, lo: i32, hi: i32 },
    Bz { ra: u8, target: u16 },
    Bnz { ra: u8, target: u16 },
    Jmp { target: u16 },
    Halt,
}

impl InsnA {
    pub fn op(&self) -> OpA {
        match self {
            InsnA::Ldi { .. } => OpA::Ldi,
            InsnA::Ld { .. } => OpA::Ld,
            InsnA::St { .. } => OpA::St,
            InsnA::Ldx { .. } => OpA::Ldx,
            InsnA::Stx { .. } => OpA::Stx,
            InsnA::Bin { op, .. } => *op,
            InsnA::Neg { .. } => OpA::Neg,
            InsnA::Not { .. } => OpA::Not,
            InsnA::Rchk { .. } => OpA::Rchk,
            InsnA::Bz { .. } => OpA::Bz,
            InsnA::Bnz { .. } => OpA::Bnz,
            InsnA::Jmp { .. } => OpA::Jmp,
            InsnA::Halt => OpA::Halt,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.op() as u8);
        match *self {
            InsnA::Ldi { rd, imm } => {
                out.push(rd);
                out.extend(imm.to_le_bytes());
            }
            InsnA::Ld { rd: r, addr } | InsnA::St { rs: r, addr } => {
                out.push(r);
                out.extend(addr.to_le_bytes());
            }
            InsnA::Ldx { rd: r, ri, base, len } | InsnA::Stx { rs: r, ri, base, len } => {
                out.extend([r, ri]);
                out.extend(base.to_le_bytes());
                out.extend(len.to_le_bytes());
            }
            InsnA::Bin { rd, ra, rb, .. } => out.extend([rd, ra, rb]),
            InsnA::Neg { rd, ra } | InsnA::Not { rd, ra } => out.extend([rd, ra]),
            InsnA::Rchk { ra, lo, hi } => {
                out.push(ra);
                out.extend(lo.to_le_bytes());
                out.extend(hi.to_le_bytes());
            }
            InsnA::Bz { ra, target } | InsnA::Bnz { ra, target } => {
                out.push(ra);
                out.extend(target.to_le_bytes());
            }
            InsnA::Jmp { target } => out.extend(target.to_le_bytes()),
            InsnA::Halt => {}
        }
    }

    /// Decodes the instruction at `at`, returning it and its length.
    pub fn decode(code: &[u8], at: usize) -> Result<(InsnA, usize), ExecFault> {
        let fault = ExecFault::Decode(at);
        let op = OpA::from_byte(*code.get(at).ok_or(fault.clone())?).ok_or(fault.clone())?;
        let len = match op {
            OpA::Ldi => 6,
            OpA::Ld | OpA::St | OpA::Bz | OpA::Bnz => 4,
            OpA::Ldx | OpA::Stx => 7,
            OpA::Neg | OpA::Not => 3,
            OpA::Rchk => 10,
            OpA::Jmp => 3,
            OpA::Halt => 1,
            _ => 4,
        };
        let b = code.get(at + 1..at + len).ok_or(fault.clone())?;
        let reg = |i: usize| if (b[i] as usize) < REGS { Ok(b[i]) } else { Err(fault.clone()) };
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let i32_at = |i: usize| i32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let insn = match op {
            OpA::Ldi => InsnA::Ldi { rd: reg(0)?, imm: i32_at(1) },
            OpA::Ld => InsnA::Ld { rd: reg(0)?, addr: u16_at(1) },
            OpA::St => InsnA::St { rs: reg(0)?, addr: u16_at(1) },
            OpA::Ldx => InsnA::Ldx { rd: reg(0)?, ri: reg(1)?, base: u16_at(2), len: u16_at(4) },
            OpA::Stx => InsnA::Stx { rs: reg(0)?, ri: reg(1)?, base: u16_at(2), len: u16_at(4) },
            OpA::Neg => InsnA::Neg { rd: reg(0)?, ra: reg(1)? },
            OpA::Not => InsnA::Not { rd: reg(0)?, ra: reg(1)? },
            OpA::Rchk => InsnA::Rchk { ra: reg(0)?, lo: i32_at(1), hi: i32_at(5) },
            OpA::Bz => InsnA::Bz { ra: reg(0)?, target: u16_at(1) },
            OpA::Bnz => InsnA::Bnz { ra: reg(0)?, target: u16_at(1) },
            OpA::Jmp => InsnA::Jmp { target: u16_at(0) },
            OpA::Halt => InsnA::Halt,
            op => InsnA::Bin { op, rd: reg(0)?, ra: reg(1)?, rb: reg(2)? },
        };
        Ok((insn, len))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageA {
    /// Header and instructions.
    pub code: Vec<u8>,
    pub vars: VarMap,
    pub code_crc: u32,
}

impl ImageA {
    pub fn new(code: Vec<u8>, vars: VarMap) -> Self {
        let code_crc = crc32(&code);
        ImageA { code, vars, code_crc }
    }

    pub fn init_entry(&self) -> Result<usize, ExecFault> {
        header(&self.code, 0)
    }

    pub fn cycle_entry(&self) -> Result<usize, ExecFault> {
        header(&self.code, 2)
    }

    pub fn new_memory(&self) -> VmMemory {
        VmMemory::for_map(&self.vars)
    }
}

fn header(code: &[u8], at: usize) -> Result<usize, ExecFault> {
    code.get(at..at + 2).map(|b| u16::from_le_bytes([b[0], b[1]]) as usize).ok_or(ExecFault::Decode(at))
}

struct Layout {
    state: Vec<u32>,
    inputs: Vec<u32>,
    loops: Vec<u32>,
    map: VarMap,
}

fn layout(tm: &TypedModel) -> Result<Layout, CompileError> {
    const W: u32 = 4;
    let mut entries = declared(tm);
    let mut next = VAR_A_BASE;
    for e in &mut entries {
        e.addr = next;
        next += e.ty.scalar_count() as u32 * W;
    }
    let loops: Vec<u32> = (0..tm.loop_slots as u32).map(|k| next + k * W).collect();
    let slots = (next - VAR_A_BASE) / W + tm.loop_slots as u32;
    let capacity = (VAR_A_END - VAR_A_BASE) / W;
    if slots > capacity {
        return Err(CompileError::Capacity { needed: slots, capacity });
    }
    let addr_of = |kind_input: bool| -> Vec<u32> {
        entries.iter().filter(|e| (e.kind == VarKind::Input) == kind_input).map(|e| e.addr).collect()
    };
    Ok(Layout {
        state: addr_of(false),
        inputs: addr_of(true),
        loops,
        map: VarMap { base: VAR_A_BASE, width: W, slots, entries },
    })
}

pub fn compile_a(tm: &TypedModel) -> Result<ImageA, CompileError> {
    let lay = layout(tm)?;
    let mut g = Gen { tm, lay: &lay, code: vec![0; 4] };
    let init = g.here()?;
    g.stmts(&tm.init)?;
    g.emit(InsnA::Halt);
    let cycle = g.here()?;
    g.stmts(&tm.cycle)?;
    g.emit(InsnA::Halt);
    g.here()?;
    g.code[0..2].copy_from_slice(&init.to_le_bytes());
    g.code[2..4].copy_from_slice(&cycle.to_le_bytes());
    Ok(ImageA::new(g.code, lay.map.clone()))
}

struct Gen<'a> {
    tm: &'a TypedModel,
    lay: &'a Layout,
    code: Vec<u8>,
}

impl Gen<'_> {
    fn here(&self) -> Result<u16, CompileError> {
        u16::try_from(self.code.len()).map_err(|_| CompileError::CodeSize)
    }

    fn emit(&mut self, i: InsnA) {
        i.encode(&mut self.code);
    }

    /// Emits a branch with a placeholder target; returns where to patch.
    fn branch(&mut self, i: InsnA) -> usize {
        self.emit(i);
        self.code.len() - 2
    }

    fn patch(&mut self, at: usize, target: u16) {
        self.code[at..at + 2].copy_from_slice(&target.to_le_bytes());
    }

    fn stmts(&mut self, stmts: &[TStmt]) -> Result<(), CompileError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &TStmt) -> Result<(), CompileError> {
        match &s.kind {
            TStmtKind::Assign { target, value, .. } => {
                self.expr(value, 0)?;
                match target {
                    TTarget::State(i) => {
                        self.range_check(&self.tm.state[*i].ty);
                        self.emit(InsnA::St { rs: 0, addr: self.lay.state[*i] as u16 });
                    }
                    TTarget::Elem(i, idx) => {
                        self.expr(idx, 1)?;
                        let ty = &self.tm.state[*i].ty;
                        self.range_check(ty.cell_type());
                        let len = ty.scalar_count() as u16;
                        self.emit(InsnA::Stx { rs: 0, ri: 1, base: self.lay.state[*i] as u16, len });
                    }
                }
            }
            TStmtKind::If { arms, els } => {
                let mut exits = vec![];
                for (guard, body) in arms {
                    self.expr(guard, 0)?;
                    let skip = self.branch(InsnA::Bz { ra: 0, target: 0 });
                    self.stmts(body)?;
                    exits.push(self.branch(InsnA::Jmp { target: 0 }));
                    let next = self.here()?;
                    self.patch(skip, next);
                }
                self.stmts(els)?;
                let end = self.here()?;
                for e in exits {
                    self.patch(e, end);
                }
            }
            TStmtKind::For { slot, from, to, body } => {
                if from > to {
                    return Ok(());
                }
                let k = self.lay.loops[*slot] as u16;
                self.emit(InsnA::Ldi { rd: 0, imm: imm(*from)? });
                self.emit(InsnA::St { rs: 0, addr: k });
                let top = self.here()?;
                self.stmts(body)?;
                self.emit(InsnA::Ld { rd: 0, addr: k });
                self.emit(InsnA::Ldi { rd: 1, imm: 1 });
                self.emit(InsnA::Bin { op: OpA::Add, rd: 0, ra: 0, rb: 1 });
                self.emit(InsnA::St { rs: 0, addr: k });
                self.emit(InsnA::Ldi { rd: 1, imm: imm(*to)? });
                self.emit(InsnA::Bin { op: OpA::Cle, rd: 2, ra: 0, rb: 1 });
                self.emit(InsnA::Bnz { ra: 2, target: top });
            }
        }
        Ok(())
    }

    fn range_check(&mut self, ty: &B0Type) {
        if let B0Type::Int { lo, hi } = ty {
            self.emit(InsnA::Rchk { ra: 0, lo: *lo as i32, hi: *hi as i32 });
        }
    }

    /// Evaluates `e` into register `r`, using registers above `r` as
    /// temporaries.
    fn expr(&mut self, e: &TExpr, r: u8) -> Result<(), CompileError> {
        if r as usize >= REGS {
            return Err(CompileError::RegisterPressure);
        }
        match &e.kind {
            TExprKind::Bool(b) => self.emit(InsnA::Ldi { rd: r, imm: *b as i32 }),
            TExprKind::Int(v) => self.emit(InsnA::Ldi { rd: r, imm: imm(*v)? }),
            TExprKind::Input(i) => self.emit(InsnA::Ld { rd: r, addr: self.lay.inputs[*i] as u16 }),
            TExprKind::State(i) => self.emit(InsnA::Ld { rd: r, addr: self.lay.state[*i] as u16 }),
            TExprKind::Loop(d) => self.emit(InsnA::Ld { rd: r, addr: self.lay.loops[*d] as u16 }),
            TExprKind::InputElem(i, idx) => {
                self.expr(idx, r)?;
                let len = self.tm.inputs[*i].ty.scalar_count() as u16;
                self.emit(InsnA::Ldx { rd: r, ri: r, base: self.lay.inputs[*i] as u16, len });
            }
            TExprKind::StateElem(i, idx) => {
                self.expr(idx, r)?;
                let len = self.tm.state[*i].ty.scalar_count() as u16;
                self.emit(InsnA::Ldx { rd: r, ri: r, base: self.lay.state[*i] as u16, len });
            }
            TExprKind::Neg(x) => {
                self.expr(x, r)?;
                self.emit(InsnA::Neg { rd: r, ra: r });
            }
            TExprKind::Not(x) => {
                self.expr(x, r)?;
                self.emit(InsnA::Not { rd: r, ra: r });
            }
            TExprKind::Arith(op, x, y) => self.binary(OpA::arith(*op), x, y, r)?,
            TExprKind::Rel(op, x, y) => self.binary(OpA::rel(*op), x, y, r)?,
            TExprKind::And(x, y) => self.binary(OpA::And, x, y, r)?,
            TExprKind::Or(x, y) => self.binary(OpA::Or, x, y, r)?,
        }
        Ok(())
    }

    fn binary(&mut self, op: OpA, x: &TExpr, y: &TExpr, r: u8) -> Result<(), CompileError> {
        self.expr(x, r)?;
        self.expr(y, r + 1)?;
        self.emit(InsnA::Bin { op, rd: r, ra: r, rb: r + 1 });
        Ok(())
    }
}

fn imm(v: i64) -> Result<i32, CompileError> {
    i32::try_from(v).map_err(|_| CompileError::Immediate(v))
}

pub fn exec_a(img: &ImageA, mem: &mut VmMemory, inputs: &[Value]) -> Result<u64, ExecFault> {
    exec_a_with(img, mem, inputs, &CostTable::default())
}

/// Runs the entry point selected by `mem.mode` (INIT first, then CYCLE
/// on every later call). Returns the summed instruction cost.
pub fn exec_a_with(img: &ImageA, mem: &mut VmMemory, inputs: &[Value], costs: &CostTable) -> Result<u64, ExecFault> {
    let mut pc = match mem.mode {
        ExecMode::Init => img.init_entry()?,
        ExecMode::Cycle => {
            img.vars.write_inputs(mem, inputs)?;
            img.cycle_entry()?
        }
    };
    let code = &img.code;
    let mut reg = [0i64; REGS];
    let mut cost = 0;
    for _ in 0..FUEL {
        let at = pc;
        let (insn, len) = InsnA::decode(code, at)?;
        cost += costs.cost(insn.op().mnemonic());
        pc += len;
        match insn {
            InsnA::Ldi { rd, imm } => reg[rd as usize] = imm as i64,
            InsnA::Ld { rd, addr } => reg[rd as usize] = mem.load(addr as u32)?,
            InsnA::St { rs, addr } => mem.store(addr as u32, reg[rs as usize])?,
            InsnA::Ldx { rd, ri, base, len } => {
                let a = indexed(reg[ri as usize], base, len, mem.width(), at)?;
                reg[rd as usize] = mem.load(a)?;
            }
            InsnA::Stx { rs, ri, base, len } => {
                let a = indexed(reg[ri as usize], base, len, mem.width(), at)?;
                mem.store(a, reg[rs as usize])?;
            }
            InsnA::Bin { op, rd, ra, rb } => {
                reg[rd as usize] = binary(op, reg[ra as usize], reg[rb as usize], at)?;
            }
            InsnA::Neg { rd, ra } => reg[rd as usize] = reg[ra as usize].checked_neg().ok_or(ExecFault::Overflow(at))?,
            InsnA::Not { rd, ra } => reg[rd as usize] = (reg[ra as usize] == 0) as i64,
            InsnA::Rchk { ra, lo, hi } => {
                let v = reg[ra as usize];
                if v < lo as i64 || v > hi as i64 {
                    return Err(ExecFault::Range { offset: at, value: v, lo: lo as i64, hi: hi as i64 });
                }
            }
            InsnA::Bz { ra, target } => {
                if reg[ra as usize] == 0 {
                    pc = target as usize;
                }
            }
            InsnA::Bnz { ra, target } => {
                if reg[ra as usize] != 0 {
                    pc = target as usize;
                }
            }
            InsnA::Jmp { target } => pc = target as usize,
            InsnA::Halt => {
                mem.mode = ExecMode::Cycle;
                return Ok(cost);
            }
        }
    }
    Err(ExecFault::Watchdog)
}

pub(super) fn indexed(k: i64, base: u16, len: u16, width: u32, at: usize) -> Result<u32, ExecFault> {
    if k < 0 || k >= len as i64 {
        return Err(ExecFault::Index { offset: at, index: k, len });
    }
    Ok(base as u32 + k as u32 * width)
}

fn binary(op: OpA, a: i64, b: i64, at: usize) -> Result<i64, ExecFault> {
    let arith = |op: ArithOp| {
        if b == 0 && matches!(op, ArithOp::Div | ArithOp::Mod) {
            return Err(ExecFault::DivByZero(at));
        }
        op.apply(a, b).ok_or(ExecFault::Overflow(at))
    };
    let rel = |op: RelOp| Ok(op.holds(a, b) as i64);
    match op {
        OpA::Add => arith(ArithOp::Add),
        OpA::Sub => arith(ArithOp::Sub),
        OpA::Mul => arith(ArithOp::Mul),
        OpA::Div => arith(ArithOp::Div),
        OpA::Mod => arith(ArithOp::Mod),
        OpA::Ceq => rel(RelOp::Eq),
        OpA::Cne => rel(RelOp::Ne),
        OpA::Clt => rel(RelOp::Lt),
        OpA::Cle => rel(RelOp::Le),
        OpA::Cgt => rel(RelOp::Gt),
        OpA::Cge => rel(RelOp::Ge),
        OpA::And => Ok((a != 0 && b != 0) as i64),
        OpA::Or => Ok((a != 0 || b != 0) as i64),
        _ => unreachable!("not a three-register opcode"),
    }
}
