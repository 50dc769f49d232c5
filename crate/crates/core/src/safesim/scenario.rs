use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CycleReport, FaultError, ImageId, InputFrame, InputSample, McuId, PanicReason, Platform, Status};
use crate::firmware::LoadedFirmware;

fn full_mask() -> u8 {
    0xFF
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Fault {
    /// Upset of one bit of one canonical state cell.
    VarBitFlip { mcu: McuId, image: ImageId, slot: usize, bit: u32 },
    /// XOR of one program byte with `mask`.
    ProgramByteFlip {
        mcu: McuId,
        image: ImageId,
        offset: usize,
        #[serde(default = "full_mask")]
        mask: u8,
    },
    StuckOutput { output: String, level: u8 },
    HaltMcu { mcu: McuId },
    DropInterMcu { count: u32 },
    FreezePulse { input: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultEvent {
    pub cycle: u64,
    #[serde(flatten)]
    pub fault: Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub level: u8,
    /// Omitted: advance by one if the level is high, hold otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputEntry {
    pub cycle: u64,
    pub values: BTreeMap<String, SampleSpec>,
}

/// Inputs and faults over a fixed number of cycles.
///
/// An input keeps its last level until a later entry changes it. While high
/// and not given an explicit count, its pulse counter advances by one per
/// cycle, so a plain `{"level": 1}` is a healthy dynamic signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub horizon: u64,
    #[serde(default)]
    pub inputs: Vec<InputEntry>,
    #[serde(default)]
    pub faults: Vec<FaultEvent>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cycle {cycle} beyond horizon {horizon}")]
    Horizon { cycle: u64, horizon: u64 },
    #[error("no input `{0}` on this firmware")]
    UnknownInput(String),
    #[error("input `{name}` level {level} is neither 0 nor 1")]
    Level { name: String, level: u8 },
    #[error("fault at cycle {cycle}: {err}")]
    Fault { cycle: u64, err: FaultError },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// One frame per cycle for a platform with inputs `names`.
    pub fn frames(&self, names: &[String]) -> Result<Vec<InputFrame>, ScenarioError> {
        let mut by_cycle: BTreeMap<u64, Vec<(usize, SampleSpec)>> = BTreeMap::new();
        for e in &self.inputs {
            if e.cycle >= self.horizon {
                return Err(ScenarioError::Horizon { cycle: e.cycle, horizon: self.horizon });
            }
            for (name, spec) in &e.values {
                let i = names.iter().position(|n| n == name).ok_or_else(|| ScenarioError::UnknownInput(name.clone()))?;
                if spec.level > 1 {
                    return Err(ScenarioError::Level { name: name.clone(), level: spec.level });
                }
                by_cycle.entry(e.cycle).or_default().push((i, *spec));
            }
        }
        let mut cur = vec![InputSample::default(); names.len()];
        let mut frames = Vec::with_capacity(self.horizon as usize);
        for c in 0..self.horizon {
            let given = by_cycle.get(&c).map(Vec::as_slice).unwrap_or(&[]);
            for (i, s) in cur.iter_mut().enumerate() {
                match given.iter().rev().find(|(j, _)| *j == i) {
                    Some((_, spec)) => {
                        s.level = spec.level;
                        s.pulse = spec.pulse.unwrap_or(s.pulse + spec.level as u64);
                    }
                    None => s.pulse += s.level as u64,
                }
            }
            frames.push(InputFrame { samples: cur.clone() });
        }
        Ok(frames)
    }
}

/// Cycle reports up to the horizon or the panicking cycle, whichever is
/// first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub reports: Vec<CycleReport>,
    pub status: Status,
}

impl Trace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&serde_json::to_string(r).expect("report serialises"));
            out.push('\n');
        }
        out
    }

    pub fn panic(&self) -> Option<(u64, &PanicReason)> {
        match &self.status {
            Status::Panic { reason, cycle } => Some((*cycle, reason)),
            Status::Running => None,
        }
    }
}

/// Simulates `sc` on a freshly booted platform.
pub fn run_scenario(fw: &LoadedFirmware, sc: &Scenario) -> Result<Trace, ScenarioError> {
    let mut p = Platform::new(fw.clone());
    let frames = sc.frames(p.input_names())?;
    let mut probe = p.clone();
    for f in &sc.faults {
        if f.cycle >= sc.horizon {
            return Err(ScenarioError::Horizon { cycle: f.cycle, horizon: sc.horizon });
        }
        probe.inject(&f.fault).map_err(|err| ScenarioError::Fault { cycle: f.cycle, err })?;
    }

    let mut reports = vec![];
    if p.status().is_panic() {
        reports.push(CycleReport {
            cycle: 0,
            time_ms: 0,
            inputs: vec![],
            snapshots: p.snapshots(),
            checks: vec![],
            outputs: p.outputs().to_vec(),
            status: p.status().clone(),
            led: true,
        });
    }
    for (c, frame) in frames.iter().enumerate() {
        if p.status().is_panic() {
            break;
        }
        for f in sc.faults.iter().filter(|f| f.cycle == c as u64) {
            p.inject(&f.fault).expect("fault validated above");
        }
        reports.push(p.step(frame).expect("frames match the platform and it is running"));
    }
    Ok(Trace { reports, status: p.status().clone() })
}
