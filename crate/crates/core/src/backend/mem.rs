use super::{ExecFault, VarMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecMode {
    Init,
    Cycle,
}

/// Variable memory of one image instance: a flat little-endian byte array
/// covering `[base, base + len)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VmMemory {
    base: u32,
    width: u32,
    bytes: Vec<u8>,
    pub mode: ExecMode,
}

impl VmMemory {
    pub fn new(base: u32, width: u32, slots: u32) -> Self {
        assert!(width == 4 || width == 8, "slot width must be 4 or 8 bytes");
        VmMemory { base, width, bytes: vec![0; (slots * width) as usize], mode: ExecMode::Init }
    }

    /// Zeroed memory sized for an image's variable map.
    pub fn for_map(map: &VarMap) -> Self {
        VmMemory::new(map.base, map.width, map.slots)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn offset(&self, addr: u32) -> Result<usize, ExecFault> {
        let off = addr.checked_sub(self.base).ok_or(ExecFault::Region(addr))?;
        if off % self.width != 0 || off + self.width > self.bytes.len() as u32 {
            return Err(ExecFault::Region(addr));
        }
        Ok(off as usize)
    }

    /// Sign-extended slot value.
    pub fn load(&self, addr: u32) -> Result<i64, ExecFault> {
        let off = self.offset(addr)?;
        let b = &self.bytes[off..off + self.width as usize];
        Ok(match self.width {
            4 => i32::from_le_bytes(b.try_into().unwrap()) as i64,
            _ => i64::from_le_bytes(b.try_into().unwrap()),
        })
    }

    /// Values not representable in the slot width are a region fault.
    pub fn store(&mut self, addr: u32, v: i64) -> Result<(), ExecFault> {
        let off = self.offset(addr)?;
        match self.width {
            4 => {
                let v = i32::try_from(v).map_err(|_| ExecFault::Region(addr))?;
                self.bytes[off..off + 4].copy_from_slice(&v.to_le_bytes());
            }
            _ => self.bytes[off..off + 8].copy_from_slice(&v.to_le_bytes()),
        }
        Ok(())
    }

    /// Inverts one bit of a slot; `bit` counts from the least significant.
    pub fn flip_bit(&mut self, addr: u32, bit: u32) -> Result<(), ExecFault> {
        let off = self.offset(addr)?;
        if bit >= self.width * 8 {
            return Err(ExecFault::Region(addr));
        }
        self.bytes[off + (bit / 8) as usize] ^= 1 << (bit % 8);
        Ok(())
    }
}
