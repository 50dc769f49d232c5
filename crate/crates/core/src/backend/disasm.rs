use std::fmt::Write;

use super::reg::{ImageA, InsnA};
use super::stack::{ImageB, InsnB};
use super::{ExecFault, VarMap};

/// Name of the variable cell at `addr`, if any.
fn cell_name(map: &VarMap, addr: u32) -> Option<String> {
    map.entries.iter().find_map(|e| {
        let cells = e.ty.scalar_count() as u32;
        let k = addr.checked_sub(e.addr)? / map.width;
        if addr < e.addr + cells * map.width && (addr - e.addr).is_multiple_of(map.width) {
            Some(if e.ty.is_scalar() { e.name.clone() } else { format!("{}({k})", e.name) })
        } else {
            None
        }
    })
}

fn annotate(map: &VarMap, addr: u16) -> String {
    match cell_name(map, addr as u32) {
        Some(n) => format!("  ; {n}"),
        None if (addr as u32) >= map.base && (addr as u32) < map.end() => "  ; loop counter".into(),
        None => String::new(),
    }
}

fn array_note(map: &VarMap, base: u16) -> String {
    match map.entries.iter().find(|e| e.addr == base as u32) {
        Some(e) => format!("  ; {}", e.name),
        None => String::new(),
    }
}

/// One instruction per line, prefixed with its code offset.
pub fn disasm_a(img: &ImageA) -> Result<String, ExecFault> {
    let mut out = String::new();
    let _ = writeln!(out, "; image A: register machine, {} bytes, crc {:#010x}", img.code.len(), img.code_crc);
    let _ = writeln!(out, "; init entry {:#06x}, cycle entry {:#06x}", img.init_entry()?, img.cycle_entry()?);
    let mut at = 4;
    while at < img.code.len() {
        let (insn, len) = InsnA::decode(&img.code, at)?;
        let m = insn.op().mnemonic();
        let text = match insn {
            InsnA::Ldi { rd, imm } => format!("{m:<6}r{rd}, {imm}"),
            InsnA::Ld { rd, addr } => format!("{m:<6}r{rd}, {addr:#06x}{}", annotate(&img.vars, addr)),
            InsnA::St { rs, addr } => format!("{m:<6}r{rs}, {addr:#06x}{}", annotate(&img.vars, addr)),
            InsnA::Ldx { rd, ri, base, len } | InsnA::Stx { rs: rd, ri, base, len } => {
                format!("{m:<6}r{rd}, {base:#06x}[r{ri}], {len}{}", array_note(&img.vars, base))
            }
            InsnA::Bin { rd, ra, rb, .. } => format!("{m:<6}r{rd}, r{ra}, r{rb}"),
            InsnA::Neg { rd, ra } | InsnA::Not { rd, ra } => format!("{m:<6}r{rd}, r{ra}"),
            InsnA::Rchk { ra, lo, hi } => format!("{m:<6}r{ra}, {lo}, {hi}"),
            InsnA::Bz { ra, target } | InsnA::Bnz { ra, target } => format!("{m:<6}r{ra}, {target:#06x}"),
            InsnA::Jmp { target } => format!("{m:<6}{target:#06x}"),
            InsnA::Halt => m.to_string(),
        };
        let _ = writeln!(out, "{at:04x}  {}", text.trim_end());
        at += len;
    }
    Ok(out)
}

pub fn disasm_b(img: &ImageB) -> Result<String, ExecFault> {
    let mut out = String::new();
    let _ = writeln!(out, "; image B: stack machine, {} bytes, crc {:#010x}", img.code.len(), img.code_crc);
    let _ = writeln!(out, "; cycle entry {:#06x}, init entry {:#06x}", img.cycle_entry()?, img.init_entry()?);
    for l in &img.loop_table {
        let _ = writeln!(out, "; loop {:#06x}..{:#06x} x{}", l.start, l.end, l.trips);
    }
    let mut at = 4;
    while at < img.code.len() {
        let (insn, len) = InsnB::decode(&img.code, at)?;
        let m = insn.op().mnemonic();
        let text = match insn {
            InsnB::Push(v) => format!("{m:<9}{v}"),
            InsnB::Load(a) | InsnB::Store(a) => format!("{m:<9}{a:#06x}{}", annotate(&img.vars, a)),
            InsnB::LoadX { base, len } | InsnB::StoreX { base, len } => {
                format!("{m:<9}{base:#06x}, {len}{}", array_note(&img.vars, base))
            }
            InsnB::Chk { lo, hi } => format!("{m:<9}{lo}, {hi}"),
            InsnB::Jz(t) | InsnB::Goto(t) | InsnB::LoopBack(t) => format!("{m:<9}{t:#06x}"),
            InsnB::Simple(_) => m.to_string(),
        };
        let _ = writeln!(out, "{at:04x}  {}", text.trim_end());
        at += len;
    }
    Ok(out)
}
