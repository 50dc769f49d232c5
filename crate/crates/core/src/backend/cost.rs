use std::collections::BTreeMap;

use thiserror::Error;

/// The shipped cost table, in the text format accepted by
/// [`CostTable::parse`].
pub const DEFAULT_COSTS: &str = include_str!("../../costs/default.cost");

/// Cost units per instruction, keyed by mnemonic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    costs: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostTableError {
    #[error("line {line}: expected `MNEMONIC = cost`")]
    Syntax { line: usize },
    #[error("line {line}: unknown mnemonic `{name}`")]
    Unknown { line: usize, name: String },
    #[error("no cost for `{0}`")]
    Missing(String),
}

impl CostTable {
    /// `MNEMONIC = integer` per line; `#` starts a comment. Every mnemonic
    /// of both instruction sets must be given.
    pub fn parse(text: &str) -> Result<Self, CostTableError> {
        let mut costs = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or(CostTableError::Syntax { line: i + 1 })?;
            let name = name.trim().to_ascii_uppercase();
            let value: u64 = value.trim().parse().map_err(|_| CostTableError::Syntax { line: i + 1 })?;
            if !all_mnemonics().any(|m| m == name) {
                return Err(CostTableError::Unknown { line: i + 1, name });
            }
            costs.insert(name, value);
        }
        if let Some(m) = all_mnemonics().find(|m| !costs.contains_key(*m)) {
            return Err(CostTableError::Missing(m.to_string()));
        }
        Ok(CostTable { costs })
    }

    pub fn cost(&self, mnemonic: &str) -> u64 {
        self.costs.get(mnemonic).copied().unwrap_or_else(|| panic!("cost table lacks `{mnemonic}`"))
    }

    /// Every cost multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        CostTable { costs: self.costs.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    /// Every instruction costs `c`.
    pub fn uniform(c: u64) -> Self {
        CostTable { costs: all_mnemonics().map(|m| (m.to_string(), c)).collect() }
    }

    pub fn with(&self, mnemonic: &str, cost: u64) -> Self {
        let mut t = self.clone();
        t.costs.insert(mnemonic.to_string(), cost);
        t
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.costs.iter().map(|(m, c)| (m.as_str(), *c))
    }
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable::parse(DEFAULT_COSTS).expect("shipped cost table is valid")
    }
}

fn all_mnemonics() -> impl Iterator<Item = &'static str> {
    super::reg::OpA::ALL.iter().map(|o| o.mnemonic()).chain(super::stack::OpB::ALL.iter().map(|o| o.mnemonic()))
}
