//! Firmware bundle: both images, their variable maps and the sequencer
//! configuration in one CRC-protected container, plus the bootloader check
//! that guards every load.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CSP1" u16 version=1 u16 section_count=5
//! 5 x { u8 kind, u8 pad=0, u32 offset, u32 length, u32 crc32 }
//! payloads, in kind order
//! u32 crc32 of every preceding byte
//! ```
//!
//! The IMAGE_B payload carries the loop table ahead of the code:
//! `u16 count, count x { u16 start, u16 end, u32 trips }`, then code bytes.

mod seq;
mod varmap;

use thiserror::Error;

use crate::b0::ast::B0Type;
use crate::backend::{ImageA, ImageB, LoopEntry, VarKind, VarMap, VAR_A_BASE, VAR_A_END, VAR_B_BASE, VAR_B_END};
pub use crate::crc::{crc32, Crc32};
pub use seq::{SeqConfig, SeqConfigError, MAX_INTER_MCU_MS};

pub const MAGIC: &[u8; 4] = b"CSP1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 8;
const ENTRY_LEN: usize = 14;
const TABLE_END: usize = HEADER_LEN + 5 * ENTRY_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SectionKind {
    ImageA = 1,
    ImageB = 2,
    VarMapA = 3,
    VarMapB = 4,
    SeqCfg = 5,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] =
        [SectionKind::ImageA, SectionKind::ImageB, SectionKind::VarMapA, SectionKind::VarMapB, SectionKind::SeqCfg];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == b)
    }
}

impl std::fmt::Display for SectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SectionKind::ImageA => "IMAGE_A",
            SectionKind::ImageB => "IMAGE_B",
            SectionKind::VarMapA => "VARMAP_A",
            SectionKind::VarMapB => "VARMAP_B",
            SectionKind::SeqCfg => "SEQCFG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("variable map of image {image} leaves its region {lo:#06x}..{hi:#06x}")]
    Region { image: char, lo: u32, hi: u32 },
    #[error("images declare different variables ({a} against {b})")]
    MismatchedVars { a: usize, b: usize },
    #[error("platform {0} `{1}` is not BOOL")]
    PlatformIo(&'static str, String),
    #[error("image exceeds the bundle's 32-bit offsets")]
    TooLarge,
    #[error(transparent)]
    Config(#[from] SeqConfigError),
}

/// Why the bootloader refused a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    BadVersion(u16),
    #[error("bundle truncated")]
    Truncated,
    #[error("bad CRC in section {0}")]
    BadSectionCrc(SectionKind),
    #[error("bad global CRC")]
    BadGlobalCrc,
    #[error("variable regions overlap or leave their memory space")]
    RegionOverlap,
    #[error("malformed bundle: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Config(#[from] SeqConfigError),
}

/// Scalar type of every platform input and output must be BOOL.
fn check_platform_io(map: &VarMap) -> Result<(), LinkError> {
    for e in &map.entries {
        let what = match e.kind {
            VarKind::Input => "input",
            VarKind::Output => "output",
            VarKind::Var => continue,
        };
        if e.ty != B0Type::Bool {
            return Err(LinkError::PlatformIo(what, e.name.clone()));
        }
    }
    Ok(())
}

fn within(map: &VarMap, lo: u32, hi: u32) -> bool {
    let (w, base) = (map.width as u64, map.base as u64);
    let end = base + map.slots as u64 * w;
    base >= lo as u64
        && end <= hi as u64
        && map.entries.iter().all(|e| e.addr as u64 >= base && e.addr as u64 + e.ty.scalar_count() as u64 * w <= end)
}

fn same_vars(a: &VarMap, b: &VarMap) -> bool {
    a.entries.len() == b.entries.len()
        && a.entries.iter().zip(&b.entries).all(|(x, y)| x.name == y.name && x.kind == y.kind && x.ty == y.ty)
}

/// Links two images of one model with a sequencer configuration.
pub fn link(a: &ImageA, b: &ImageB, cfg: &SeqConfig) -> Result<Vec<u8>, LinkError> {
    cfg.validate()?;
    if !within(&a.vars, VAR_A_BASE, VAR_A_END) {
        return Err(LinkError::Region { image: 'A', lo: VAR_A_BASE, hi: VAR_A_END });
    }
    if !within(&b.vars, VAR_B_BASE, VAR_B_END) {
        return Err(LinkError::Region { image: 'B', lo: VAR_B_BASE, hi: VAR_B_END });
    }
    if !same_vars(&a.vars, &b.vars) {
        return Err(LinkError::MismatchedVars { a: a.vars.entries.len(), b: b.vars.entries.len() });
    }
    check_platform_io(&a.vars)?;

    let mut image_b = (b.loop_table.len() as u16).to_le_bytes().to_vec();
    for l in &b.loop_table {
        image_b.extend(l.start.to_le_bytes());
        image_b.extend(l.end.to_le_bytes());
        image_b.extend(l.trips.to_le_bytes());
    }
    image_b.extend(&b.code);
    let payloads =
        [a.code.clone(), image_b, varmap::encode(&a.vars), varmap::encode(&b.vars), cfg.encode()];

    let mut out = Vec::with_capacity(TABLE_END + payloads.iter().map(Vec::len).sum::<usize>() + 4);
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend(5u16.to_le_bytes());
    let mut offset = TABLE_END;
    for (kind, p) in SectionKind::ALL.iter().zip(&payloads) {
        out.push(*kind as u8);
        out.push(0);
        out.extend(u32::try_from(offset).map_err(|_| LinkError::TooLarge)?.to_le_bytes());
        out.extend(u32::try_from(p.len()).map_err(|_| LinkError::TooLarge)?.to_le_bytes());
        out.extend(crc32(p).to_le_bytes());
        offset += p.len();
    }
    for p in &payloads {
        out.extend(p);
    }
    let total = crc32(&out);
    out.extend(total.to_le_bytes());
    Ok(out)
}

/// An integrity-checked firmware. Only [`bootload`] constructs one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedFirmware {
    image_a: ImageA,
    image_b: ImageB,
    seq: SeqConfig,
    bundle_crc: u32,
}

impl LoadedFirmware {
    pub fn image_a(&self) -> &ImageA {
        &self.image_a
    }

    pub fn image_b(&self) -> &ImageB {
        &self.image_b
    }

    pub fn seq(&self) -> &SeqConfig {
        &self.seq
    }

    /// Reference CRCs of the two code sections, for the deferred sweep.
    pub fn reference_crcs(&self) -> (u32, u32) {
        (self.image_a.code_crc, self.image_b.code_crc)
    }

    /// The trailing global CRC of the bundle this was loaded from.
    pub fn bundle_crc(&self) -> u32 {
        self.bundle_crc
    }

    /// Same firmware under another sequencer configuration.
    pub fn with_seq(&self, seq: SeqConfig) -> Result<Self, SeqConfigError> {
        seq.validate()?;
        Ok(LoadedFirmware { seq, ..self.clone() })
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Verifies a bundle and decodes it.
///
/// Structure is checked first (magic, version, table, bounds), then every
/// section CRC, then the global CRC, then the memory regions and the
/// sequencer configuration.
pub fn bootload(bundle: &[u8]) -> Result<LoadedFirmware, IntegrityError> {
    if bundle.len() < HEADER_LEN {
        return Err(if bundle.starts_with(&MAGIC[..bundle.len().min(4)]) {
            IntegrityError::Truncated
        } else {
            IntegrityError::BadMagic
        });
    }
    if &bundle[..4] != MAGIC {
        return Err(IntegrityError::BadMagic);
    }
    let version = u16_at(bundle, 4);
    if version != VERSION {
        return Err(IntegrityError::BadVersion(version));
    }
    if u16_at(bundle, 6) != 5 {
        return Err(IntegrityError::Malformed("section count must be 5"));
    }
    if bundle.len() < TABLE_END + 4 {
        return Err(IntegrityError::Truncated);
    }
    let body_end = bundle.len() - 4;

    let mut sections: [Option<&[u8]>; 5] = [None; 5];
    let mut spans = vec![];
    for i in 0..5 {
        let e = HEADER_LEN + i * ENTRY_LEN;
        let kind = SectionKind::from_byte(bundle[e]).ok_or(IntegrityError::Malformed("unknown section kind"))?;
        if bundle[e + 1] != 0 {
            return Err(IntegrityError::Malformed("nonzero padding"));
        }
        let (off, len) = (u32_at(bundle, e + 2) as usize, u32_at(bundle, e + 6) as usize);
        if off < TABLE_END {
            return Err(IntegrityError::Malformed("section overlaps the header"));
        }
        let end = off.checked_add(len).ok_or(IntegrityError::Truncated)?;
        if end > body_end {
            return Err(IntegrityError::Truncated);
        }
        let slot = &mut sections[kind as usize - 1];
        if slot.is_some() {
            return Err(IntegrityError::Malformed("duplicate section"));
        }
        let payload = &bundle[off..end];
        if crc32(payload) != u32_at(bundle, e + 10) {
            return Err(IntegrityError::BadSectionCrc(kind));
        }
        *slot = Some(payload);
        spans.push((off, end));
    }
    spans.sort();
    if spans.windows(2).any(|w| w[0].1 > w[1].0) {
        return Err(IntegrityError::Malformed("sections overlap"));
    }
    let bundle_crc = u32_at(bundle, body_end);
    if crc32(&bundle[..body_end]) != bundle_crc {
        return Err(IntegrityError::BadGlobalCrc);
    }

    let [Some(code_a), Some(image_b), Some(map_a), Some(map_b), Some(cfg)] = sections else {
        unreachable!("five distinct kinds fill all five slots")
    };
    let map_a = varmap::decode(map_a).ok_or(IntegrityError::Malformed("VARMAP_A"))?;
    let map_b = varmap::decode(map_b).ok_or(IntegrityError::Malformed("VARMAP_B"))?;
    if !within(&map_a, VAR_A_BASE, VAR_A_END) || !within(&map_b, VAR_B_BASE, VAR_B_END) {
        return Err(IntegrityError::RegionOverlap);
    }
    if !same_vars(&map_a, &map_b) {
        return Err(IntegrityError::Malformed("variable maps disagree"));
    }
    let (loops, code_b) = decode_loops(image_b).ok_or(IntegrityError::Malformed("IMAGE_B loop table"))?;
    let seq = SeqConfig::decode(cfg).ok_or(IntegrityError::Malformed("SEQCFG"))?;
    seq.validate()?;
    Ok(LoadedFirmware {
        image_a: ImageA::new(code_a.to_vec(), map_a),
        image_b: ImageB::new(code_b.to_vec(), map_b, loops),
        seq,
        bundle_crc,
    })
}

fn decode_loops(p: &[u8]) -> Option<(Vec<LoopEntry>, &[u8])> {
    let n = u16::from_le_bytes(p.get(..2)?.try_into().ok()?) as usize;
    let table = p.get(2..2 + n * 8)?;
    let loops = table
        .chunks_exact(8)
        .map(|c| LoopEntry { start: u16_at(c, 0), end: u16_at(c, 2), trips: u32_at(c, 4) })
        .collect();
    Some((loops, &p[2 + n * 8..]))
}
