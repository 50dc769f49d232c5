use thiserror::Error;

/// Sequencer timing. Cadences are in cycles of `cycle_period_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeqConfig {
    pub cycle_period_ms: u32,
    pub inter_mcu_interval_cycles: u32,
    /// Program bytes CRC-checked per image per cycle.
    pub deferred_bytes_per_cycle: u32,
    pub readback_interval_cycles: u32,
}

/// Longest tolerated gap between two inter-MCU comparisons.
pub const MAX_INTER_MCU_MS: u32 = 50;

impl Default for SeqConfig {
    fn default() -> Self {
        SeqConfig {
            cycle_period_ms: 10,
            inter_mcu_interval_cycles: 4,
            deferred_bytes_per_cycle: 64,
            readback_interval_cycles: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeqConfigError {
    #[error("`{0}` must be positive")]
    Zero(&'static str),
    #[error("inter-MCU comparison every {0} ms exceeds the 50 ms limit")]
    InterMcuTooSlow(u64),
    #[error("unknown sequencer key `{0}`")]
    UnknownKey(String),
    #[error("bad sequencer setting `{0}`, expected key=value")]
    Syntax(String),
}

pub(crate) const ENCODED_LEN: usize = 16;

impl SeqConfig {
    pub const KEYS: [&'static str; 4] =
        ["cycle_period_ms", "inter_mcu_interval_cycles", "deferred_bytes_per_cycle", "readback_interval_cycles"];

    fn fields(&self) -> [u32; 4] {
        [self.cycle_period_ms, self.inter_mcu_interval_cycles, self.deferred_bytes_per_cycle, self.readback_interval_cycles]
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut u32> {
        Some(match key {
            "cycle_period_ms" => &mut self.cycle_period_ms,
            "inter_mcu_interval_cycles" => &mut self.inter_mcu_interval_cycles,
            "deferred_bytes_per_cycle" | "k" | "K" => &mut self.deferred_bytes_per_cycle,
            "readback_interval_cycles" => &mut self.readback_interval_cycles,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), SeqConfigError> {
        for (k, v) in Self::KEYS.iter().zip(self.fields()) {
            if v == 0 {
                return Err(SeqConfigError::Zero(k));
            }
        }
        let gap = self.inter_mcu_interval_cycles as u64 * self.cycle_period_ms as u64;
        if gap > MAX_INTER_MCU_MS as u64 {
            return Err(SeqConfigError::InterMcuTooSlow(gap));
        }
        Ok(())
    }

    /// Applies one `key=value` override. The result is not validated.
    pub fn set(&mut self, assignment: &str) -> Result<(), SeqConfigError> {
        let syntax = || SeqConfigError::Syntax(assignment.to_string());
        let (k, v) = assignment.split_once('=').ok_or_else(syntax)?;
        let v: u32 = v.trim().parse().map_err(|_| syntax())?;
        *self.field_mut(k.trim()).ok_or_else(|| SeqConfigError::UnknownKey(k.trim().to_string()))? = v;
        Ok(())
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        self.fields().iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub(crate) fn decode(b: &[u8]) -> Option<Self> {
        if b.len() != ENCODED_LEN {
            return None;
        }
        let w = |i: usize| u32::from_le_bytes(b[i * 4..i * 4 + 4].try_into().unwrap());
        Some(SeqConfig {
            cycle_period_ms: w(0),
            inter_mcu_interval_cycles: w(1),
            deferred_bytes_per_cycle: w(2),
            readback_interval_cycles: w(3),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SeqConfig::default();
        c.validate().unwrap();
        assert_eq!(c.inter_mcu_interval_cycles * c.cycle_period_ms, 40);
        assert_eq!(SeqConfig::decode(&c.encode()), Some(c));
    }

    #[test]
    fn fifty_ms_limit() {
        let mut c = SeqConfig::default();
        c.set("inter_mcu_interval_cycles=5").unwrap();
        c.validate().unwrap();
        c.set("cycle_period_ms=11").unwrap();
        assert_eq!(c.validate(), Err(SeqConfigError::InterMcuTooSlow(55)));
        c.set("K=0").unwrap();
        c.set("cycle_period_ms=1").unwrap();
        assert_eq!(c.validate(), Err(SeqConfigError::Zero("deferred_bytes_per_cycle")));
    }

    #[test]
    fn bad_overrides() {
        let mut c = SeqConfig::default();
        assert!(matches!(c.set("speed=3"), Err(SeqConfigError::UnknownKey(_))));
        assert!(matches!(c.set("cycle_period_ms"), Err(SeqConfigError::Syntax(_))));
        assert!(matches!(c.set("cycle_period_ms=-1"), Err(SeqConfigError::Syntax(_))));
        assert_eq!(c, SeqConfig::default());
    }
}
