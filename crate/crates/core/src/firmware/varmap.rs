//! Byte encoding of a [`VarMap`]:
//! `u32 base, u8 width, u32 slots, u16 count`, then per entry
//! `u8 name_len, name, u8 kind, type, u32 addr`. Types are `0` (BOOL),
//! `1 i64 lo i64 hi` (INT) or `2 u32 len type` (ARRAY).

use crate::b0::ast::B0Type;
use crate::backend::{VarEntry, VarKind, VarMap};

pub(super) fn encode(map: &VarMap) -> Vec<u8> {
    let mut out = map.base.to_le_bytes().to_vec();
    out.push(map.width as u8);
    out.extend(map.slots.to_le_bytes());
    out.extend((map.entries.len() as u16).to_le_bytes());
    for e in &map.entries {
        out.push(e.name.len() as u8);
        out.extend(e.name.as_bytes());
        out.push(e.kind.code());
        ty(&e.ty, &mut out);
        out.extend(e.addr.to_le_bytes());
    }
    out
}

fn ty(t: &B0Type, out: &mut Vec<u8>) {
    match t {
        B0Type::Bool => out.push(0),
        B0Type::Int { lo, hi } => {
            out.push(1);
            out.extend(lo.to_le_bytes());
            out.extend(hi.to_le_bytes());
        }
        B0Type::Array { len, elem } => {
            out.push(2);
            out.extend(len.to_le_bytes());
            ty(elem, out);
        }
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.b.get(self.at..self.at.checked_add(n)?)?;
        self.at += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u16(&mut self) -> Option<u16> {
        Some(u16::from_le_bytes(self.take(2)?.try_into().ok()?))
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn i64(&mut self) -> Option<i64> {
        Some(i64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn ty(&mut self, nested: bool) -> Option<B0Type> {
        match self.u8()? {
            0 => Some(B0Type::Bool),
            1 => {
                let (lo, hi) = (self.i64()?, self.i64()?);
                (lo <= hi).then_some(B0Type::Int { lo, hi })
            }
            2 if !nested => {
                let len = self.u32()?;
                let elem = self.ty(true)?;
                (len > 0).then(|| B0Type::array(len, elem))
            }
            _ => None,
        }
    }
}

pub(super) fn decode(b: &[u8]) -> Option<VarMap> {
    let mut r = Reader { b, at: 0 };
    let base = r.u32()?;
    let width = r.u8()? as u32;
    if width != 4 && width != 8 {
        return None;
    }
    let slots = r.u32()?;
    let n = r.u16()?;
    let mut entries = vec![];
    for _ in 0..n {
        let len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(len)?).ok()?.to_string();
        let kind = VarKind::from_code(r.u8()?)?;
        let ty = r.ty(false)?;
        let addr = r.u32()?;
        entries.push(VarEntry { name, kind, ty, addr });
    }
    (r.at == b.len()).then_some(VarMap { base, width, slots, entries })
}
