//! Chain B: a stack machine.
//!
//! Variables sit in 64-bit slots from `VAR_B_BASE`: inputs first, then the
//! state in reverse canonical order (array cells ascending), then loop
//! counters. The header is `u16 cycle_entry, u16 init_entry`. The operand
//! stack holds at most 64 values and must be empty at `RET`.
//!
//! Every `FOR` compiles to a bottom-tested loop closed by `LOOPBACK`, and
//! gets a [`LoopEntry`] so the WCET analysis can bound it.

use crate::b0::ast::{ArithOp, B0Type, RelOp};
use crate::b0::typed::{TExpr, TExprKind, TStmt, TStmtKind, TTarget, TypedModel};
use crate::b0::Value;
use crate::crc::crc32;

use super::reg::indexed;
use super::{declared, CompileError, CostTable, ExecFault, ExecMode, VarKind, VarMap, VmMemory, FUEL, VAR_B_BASE, VAR_B_END};

pub const STACK_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum OpB {
    /// `PUSH i32`
    Push = 0x80,
    /// `LOAD addr16`
    Load = 0x81,
    /// `STORE addr16`: pops.
    Store = 0x82,
    /// `LOADX base16, len16`: pops an index, pushes the cell.
    LoadX = 0x83,
    /// `STOREX base16, len16`: pops an index, then the value.
    StoreX = 0x84,
    IAdd = 0x90,
    ISub = 0x91,
    IMul = 0x92,
    IDiv = 0x93,
    IMod = 0x94,
    INeg = 0x95,
    Eq = 0x98,
    Ne = 0x99,
    Lt = 0x9A,
    Le = 0x9B,
    Gt = 0x9C,
    Ge = 0x9D,
    LAnd = 0xA0,
    LOr = 0xA1,
    LNot = 0xA2,
    /// `CHK lo i32, hi i32`: range fault unless the top lies in `lo..=hi`.
    Chk = 0xA8,
    /// `JZ target16`: pops; jumps on zero.
    Jz = 0xB0,
    /// `GOTO target16`
    Goto = 0xB1,
    /// `LOOPBACK target16`: pops; jumps back on nonzero.
    LoopBack = 0xB2,
    Ret = 0xBF,
}

impl OpB {
    pub const ALL: [OpB; 25] = [
        OpB::Push,
        OpB::Load,
        OpB::Store,
        OpB::LoadX,
        OpB::StoreX,
        OpB::IAdd,
        OpB::ISub,
        OpB::IMul,
        OpB::IDiv,
        OpB::IMod,
        OpB::INeg,
        OpB::Eq,
        OpB::Ne,
        OpB::Lt,
        OpB::Le,
        OpB::Gt,
        OpB::Ge,
        OpB::LAnd,
        OpB::LOr,
        OpB::LNot,
        OpB::Chk,
        OpB::Jz,
        OpB::Goto,
        OpB::LoopBack,
        OpB::Ret,
    ];

    pub fn from_byte(b: u8) -> Option<OpB> {
        OpB::ALL.iter().copied().find(|o| *o as u8 == b)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpB::Push => "PUSH",
            OpB::Load => "LOAD",
            OpB::Store => "STORE",
            OpB::LoadX => "LOADX",
            OpB::StoreX => "STOREX",
            OpB::IAdd => "IADD",
            OpB::ISub => "ISUB",
            OpB::IMul => "IMUL",
            OpB::IDiv => "IDIV",
            OpB::IMod => "IMOD",
            OpB::INeg => "INEG",
            OpB::Eq => "EQ",
            OpB::Ne => "NE",
            OpB::Lt => "LT",
            OpB::Le => "LE",
            OpB::Gt => "GT",
            OpB::Ge => "GE",
            OpB::LAnd => "LAND",
            OpB::LOr => "LOR",
            OpB::LNot => "LNOT",
            OpB::Chk => "CHK",
            OpB::Jz => "JZ",
            OpB::Goto => "GOTO",
            OpB::LoopBack => "LOOPBACK",
            OpB::Ret => "RET",
        }
    }

    fn arith(op: ArithOp) -> OpB {
        match op {
            ArithOp::Add => OpB::IAdd,
            ArithOp::Sub => OpB::ISub,
            ArithOp::Mul => OpB::IMul,
            ArithOp::Div => OpB::IDiv,
            ArithOp::Mod => OpB::IMod,
        }
    }

    fn rel(op: RelOp) -> OpB {
        match op {
            RelOp::Eq => OpB::Eq,
            RelOp::Ne => OpB::Ne,
            RelOp::Lt => OpB::Lt,
            RelOp::Le => OpB::Le,
            RelOp::Gt => OpB::Gt,
            RelOp::Ge => OpB::Ge,
        }
    }

    /// Values popped and pushed.
    pub fn stack_effect(self) -> (usize, usize) {
        match self {
            OpB::Push | OpB::Load => (0, 1),
            OpB::Store | OpB::Jz | OpB::LoopBack => (1, 0),
            OpB::LoadX | OpB::INeg | OpB::LNot | OpB::Chk => (1, 1),
            OpB::StoreX => (2, 0),
            OpB::Goto | OpB::Ret => (0, 0),
            _ => (2, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsnB {
    Push(i32),
    Load(u16),
    Store(u16),
    LoadX { base: u16, len: u16 },
    StoreX { base: u16, len: u16 },
    /// Operand-only instructions.
    Simple(OpB),
    Chk { lo: i32, hi: i32 },
    Jz(u16),
    Goto(u16),
    LoopBack(u16),
}

impl InsnB {
    pub fn op(&self) -> OpB {
        match self {
            InsnB::Push(_) => OpB::Push,
            InsnB::Load(_) => OpB::Load,
            InsnB::Store(_) => OpB::Store,
            InsnB::LoadX { .. } => OpB::LoadX,
            InsnB::StoreX { .. } => OpB::StoreX,
            InsnB::Simple(op) => *op,
            InsnB::Chk { .. } => OpB::Chk,
            InsnB::Jz(_) => OpB::Jz,
            InsnB::Goto(_) => OpB::Goto,
            InsnB::LoopBack(_) => OpB::LoopBack,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.op() as u8);
        match *self {
            InsnB::Push(v) => out.extend(v.to_le_bytes()),
            InsnB::Load(a) | InsnB::Store(a) | InsnB::Jz(a) | InsnB::Goto(a) | InsnB::LoopBack(a) => {
                out.extend(a.to_le_bytes())
            }
            InsnB::LoadX { base, len } | InsnB::StoreX { base, len } => {
                out.extend(base.to_le_bytes());
                out.extend(len.to_le_bytes());
            }
            InsnB::Chk { lo, hi } => {
                out.extend(lo.to_le_bytes());
                out.extend(hi.to_le_bytes());
            }
            InsnB::Simple(_) => {}
        }
    }

    pub fn decode(code: &[u8], at: usize) -> Result<(InsnB, usize), ExecFault> {
        let fault = ExecFault::Decode(at);
        let op = OpB::from_byte(*code.get(at).ok_or(fault.clone())?).ok_or(fault.clone())?;
        let len = match op {
            OpB::Push | OpB::LoadX | OpB::StoreX => 5,
            OpB::Load | OpB::Store | OpB::Jz | OpB::Goto | OpB::LoopBack => 3,
            OpB::Chk => 9,
            _ => 1,
        };
        let b = code.get(at + 1..at + len).ok_or(fault)?;
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let i32_at = |i: usize| i32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let insn = match op {
            OpB::Push => InsnB::Push(i32_at(0)),
            OpB::Load => InsnB::Load(u16_at(0)),
            OpB::Store => InsnB::Store(u16_at(0)),
            OpB::LoadX => InsnB::LoadX { base: u16_at(0), len: u16_at(2) },
            OpB::StoreX => InsnB::StoreX { base: u16_at(0), len: u16_at(2) },
            OpB::Chk => InsnB::Chk { lo: i32_at(0), hi: i32_at(4) },
            OpB::Jz => InsnB::Jz(u16_at(0)),
            OpB::Goto => InsnB::Goto(u16_at(0)),
            OpB::LoopBack => InsnB::LoopBack(u16_at(0)),
            op => InsnB::Simple(op),
        };
        Ok((insn, len))
    }
}

/// A counted loop: body starts at `start`, the closing `LOOPBACK` ends
/// just before `end`, and the body runs exactly `trips` times per entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoopEntry {
    pub start: u16,
    pub end: u16,
    pub trips: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageB {
    pub code: Vec<u8>,
    pub vars: VarMap,
    /// Sorted by start offset.
    pub loop_table: Vec<LoopEntry>,
    pub code_crc: u32,
}

impl ImageB {
    pub fn new(code: Vec<u8>, vars: VarMap, loop_table: Vec<LoopEntry>) -> Self {
        let code_crc = crc32(&code);
        ImageB { code, vars, loop_table, code_crc }
    }

    pub fn cycle_entry(&self) -> Result<usize, ExecFault> {
        header(&self.code, 0)
    }

    pub fn init_entry(&self) -> Result<usize, ExecFault> {
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
    const W: u32 = 8;
    let mut entries = declared(tm);
    let mut next = VAR_B_BASE;
    let n_state = tm.state.len();
    let order = (n_state..entries.len()).chain((0..n_state).rev());
    for i in order {
        entries[i].addr = next;
        next += entries[i].ty.scalar_count() as u32 * W;
    }
    let loops: Vec<u32> = (0..tm.loop_slots as u32).map(|k| next + k * W).collect();
    let slots = (next - VAR_B_BASE) / W + tm.loop_slots as u32;
    let capacity = (VAR_B_END - VAR_B_BASE) / W;
    if slots > capacity {
        return Err(CompileError::Capacity { needed: slots, capacity });
    }
    let addr_of = |input: bool| -> Vec<u32> {
        entries.iter().filter(|e| (e.kind == VarKind::Input) == input).map(|e| e.addr).collect()
    };
    Ok(Layout {
        state: addr_of(false),
        inputs: addr_of(true),
        loops,
        map: VarMap { base: VAR_B_BASE, width: W, slots, entries },
    })
}

pub fn compile_b(tm: &TypedModel) -> Result<ImageB, CompileError> {
    let lay = layout(tm)?;
    let mut g = Gen { tm, lay: &lay, code: vec![0; 4], loops: vec![] };
    let cycle = g.here()?;
    g.stmts(&tm.cycle)?;
    g.emit(InsnB::Simple(OpB::Ret));
    let init = g.here()?;
    g.stmts(&tm.init)?;
    g.emit(InsnB::Simple(OpB::Ret));
    g.here()?;
    g.code[0..2].copy_from_slice(&cycle.to_le_bytes());
    g.code[2..4].copy_from_slice(&init.to_le_bytes());
    let mut loops = g.loops;
    loops.sort_by_key(|l| l.start);
    Ok(ImageB::new(g.code, lay.map.clone(), loops))
}

struct Gen<'a> {
    tm: &'a TypedModel,
    lay: &'a Layout,
    code: Vec<u8>,
    loops: Vec<LoopEntry>,
}

impl Gen<'_> {
    fn here(&self) -> Result<u16, CompileError> {
        u16::try_from(self.code.len()).map_err(|_| CompileError::CodeSize)
    }

    fn emit(&mut self, i: InsnB) {
        i.encode(&mut self.code);
    }

    fn branch(&mut self, i: InsnB) -> usize {
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
                self.expr(value)?;
                match target {
                    TTarget::State(i) => {
                        self.range_check(&self.tm.state[*i].ty);
                        self.emit(InsnB::Store(self.lay.state[*i] as u16));
                    }
                    TTarget::Elem(i, idx) => {
                        let ty = &self.tm.state[*i].ty;
                        self.range_check(ty.cell_type());
                        self.expr(idx)?;
                        let len = ty.scalar_count() as u16;
                        self.emit(InsnB::StoreX { base: self.lay.state[*i] as u16, len });
                    }
                }
            }
            TStmtKind::If { arms, els } => {
                let mut exits = vec![];
                for (guard, body) in arms {
                    self.expr(guard)?;
                    let skip = self.branch(InsnB::Jz(0));
                    self.stmts(body)?;
                    exits.push(self.branch(InsnB::Goto(0)));
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
                self.emit(InsnB::Push(imm(*from)?));
                self.emit(InsnB::Store(k));
                let start = self.here()?;
                self.stmts(body)?;
                self.emit(InsnB::Load(k));
                self.emit(InsnB::Push(1));
                self.emit(InsnB::Simple(OpB::IAdd));
                self.emit(InsnB::Store(k));
                self.emit(InsnB::Load(k));
                self.emit(InsnB::Push(imm(*to)?));
                self.emit(InsnB::Simple(OpB::Le));
                self.emit(InsnB::LoopBack(start));
                let end = self.here()?;
                let trips = (to - from + 1) as u32;
                self.loops.push(LoopEntry { start, end, trips });
            }
        }
        Ok(())
    }

    fn range_check(&mut self, ty: &B0Type) {
        if let B0Type::Int { lo, hi } = ty {
            self.emit(InsnB::Chk { lo: *lo as i32, hi: *hi as i32 });
        }
    }

    fn expr(&mut self, e: &TExpr) -> Result<(), CompileError> {
        match &e.kind {
            TExprKind::Bool(b) => self.emit(InsnB::Push(*b as i32)),
            TExprKind::Int(v) => self.emit(InsnB::Push(imm(*v)?)),
            TExprKind::Input(i) => self.emit(InsnB::Load(self.lay.inputs[*i] as u16)),
            TExprKind::State(i) => self.emit(InsnB::Load(self.lay.state[*i] as u16)),
            TExprKind::Loop(d) => self.emit(InsnB::Load(self.lay.loops[*d] as u16)),
            TExprKind::InputElem(i, idx) => {
                self.expr(idx)?;
                let len = self.tm.inputs[*i].ty.scalar_count() as u16;
                self.emit(InsnB::LoadX { base: self.lay.inputs[*i] as u16, len });
            }
            TExprKind::StateElem(i, idx) => {
                self.expr(idx)?;
                let len = self.tm.state[*i].ty.scalar_count() as u16;
                self.emit(InsnB::LoadX { base: self.lay.state[*i] as u16, len });
            }
            TExprKind::Neg(x) => {
                self.expr(x)?;
                self.emit(InsnB::Simple(OpB::INeg));
            }
            TExprKind::Not(x) => {
                self.expr(x)?;
                self.emit(InsnB::Simple(OpB::LNot));
            }
            TExprKind::Arith(op, x, y) => self.binary(OpB::arith(*op), x, y)?,
            TExprKind::Rel(op, x, y) => self.binary(OpB::rel(*op), x, y)?,
            TExprKind::And(x, y) => self.binary(OpB::LAnd, x, y)?,
            TExprKind::Or(x, y) => self.binary(OpB::LOr, x, y)?,
        }
        Ok(())
    }

    fn binary(&mut self, op: OpB, x: &TExpr, y: &TExpr) -> Result<(), CompileError> {
        self.expr(x)?;
        self.expr(y)?;
        self.emit(InsnB::Simple(op));
        Ok(())
    }
}

fn imm(v: i64) -> Result<i32, CompileError> {
    i32::try_from(v).map_err(|_| CompileError::Immediate(v))
}

pub fn exec_b(img: &ImageB, mem: &mut VmMemory, inputs: &[Value]) -> Result<u64, ExecFault> {
    exec_b_with(img, mem, inputs, &CostTable::default())
}

/// Stack-machine counterpart of [`super::exec_a_with`].
pub fn exec_b_with(img: &ImageB, mem: &mut VmMemory, inputs: &[Value], costs: &CostTable) -> Result<u64, ExecFault> {
    let mut pc = match mem.mode {
        ExecMode::Init => img.init_entry()?,
        ExecMode::Cycle => {
            img.vars.write_inputs(mem, inputs)?;
            img.cycle_entry()?
        }
    };
    let code = &img.code;
    let mut stack: Vec<i64> = Vec::with_capacity(STACK_CAP);
    let mut cost = 0;
    for _ in 0..FUEL {
        let at = pc;
        let (insn, len) = InsnB::decode(code, at)?;
        cost += costs.cost(insn.op().mnemonic());
        pc += len;
        let (pops, pushes) = insn.op().stack_effect();
        if stack.len() < pops {
            return Err(ExecFault::StackUnderflow(at));
        }
        if stack.len() - pops + pushes > STACK_CAP {
            return Err(ExecFault::StackOverflow(at));
        }
        let mut pop = || stack.pop().expect("depth checked above");
        match insn {
            InsnB::Push(v) => stack.push(v as i64),
            InsnB::Load(a) => stack.push(mem.load(a as u32)?),
            InsnB::Store(a) => {
                let v = pop();
                mem.store(a as u32, v)?;
            }
            InsnB::LoadX { base, len } => {
                let k = pop();
                let a = indexed(k, base, len, mem.width(), at)?;
                stack.push(mem.load(a)?);
            }
            InsnB::StoreX { base, len } => {
                let k = pop();
                let v = pop();
                mem.store(indexed(k, base, len, mem.width(), at)?, v)?;
            }
            InsnB::Chk { lo, hi } => {
                let v = *stack.last().expect("depth checked above");
                if v < lo as i64 || v > hi as i64 {
                    return Err(ExecFault::Range { offset: at, value: v, lo: lo as i64, hi: hi as i64 });
                }
            }
            InsnB::Jz(t) => {
                if pop() == 0 {
                    pc = t as usize;
                }
            }
            InsnB::Goto(t) => pc = t as usize,
            InsnB::LoopBack(t) => {
                if pop() != 0 {
                    pc = t as usize;
                }
            }
            InsnB::Simple(OpB::Ret) => {
                if !stack.is_empty() {
                    return Err(ExecFault::StackNotEmpty);
                }
                mem.mode = ExecMode::Cycle;
                return Ok(cost);
            }
            InsnB::Simple(OpB::INeg) => {
                let v = pop().checked_neg().ok_or(ExecFault::Overflow(at))?;
                stack.push(v);
            }
            InsnB::Simple(OpB::LNot) => {
                let v = (pop() == 0) as i64;
                stack.push(v);
            }
            InsnB::Simple(op) => {
                let b = pop();
                let a = pop();
                stack.push(binary(op, a, b, at)?);
            }
        }
    }
    Err(ExecFault::Watchdog)
}

fn binary(op: OpB, a: i64, b: i64, at: usize) -> Result<i64, ExecFault> {
    let arith = |op: ArithOp| {
        if b == 0 && matches!(op, ArithOp::Div | ArithOp::Mod) {
            return Err(ExecFault::DivByZero(at));
        }
        op.apply(a, b).ok_or(ExecFault::Overflow(at))
    };
    let rel = |op: RelOp| Ok(op.holds(a, b) as i64);
    match op {
        OpB::IAdd => arith(ArithOp::Add),
        OpB::ISub => arith(ArithOp::Sub),
        OpB::IMul => arith(ArithOp::Mul),
        OpB::IDiv => arith(ArithOp::Div),
        OpB::IMod => arith(ArithOp::Mod),
        OpB::Eq => rel(RelOp::Eq),
        OpB::Ne => rel(RelOp::Ne),
        OpB::Lt => rel(RelOp::Lt),
        OpB::Le => rel(RelOp::Le),
        OpB::Gt => rel(RelOp::Gt),
        OpB::Ge => rel(RelOp::Ge),
        OpB::LAnd => Ok((a != 0 && b != 0) as i64),
        OpB::LOr => Ok((a != 0 || b != 0) as i64),
        _ => unreachable!("not a binary opcode"),
    }
}
