//! Deterministic simulation of the two-microcontroller board.
//!
//! Each MCU holds its own copy of both images and both variable memories.
//! One call to [`Platform::step`] is one sequencer cycle:
//!
//! 1. input dynamism is validated (a high level is trusted only while its
//!    pulse counter advances);
//! 2. on every live MCU, image A runs, then image B;
//! 3. pending variable upsets are applied to the memories;
//! 4. the safety library checks, in this order: intra-MCU comparison of the
//!    two variable memories, one deferred slice of the program CRC sweep per
//!    image, the running inter-MCU digest when due, then the output stage
//!    and its readback when due.
//!
//! Any failed check latches [`Status::Panic`]: every command and energy bit
//! drops to 0 and only [`Platform::reset`] leaves the state.

mod scenario;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::b0::{canonical_snapshot, MachineState, Value};
use crate::backend::{exec_a, exec_b, ExecFault, ImageA, ImageB, VmMemory};
use crate::crc::{crc32, Crc32};
use crate::firmware::{LoadedFirmware, SeqConfig};

pub use scenario::{run_scenario, Fault, FaultEvent, InputEntry, SampleSpec, Scenario, ScenarioError, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum McuId {
    Mcu1,
    Mcu2,
}

impl McuId {
    pub const BOTH: [McuId; 2] = [McuId::Mcu1, McuId::Mcu2];

    fn index(self) -> usize {
        self as usize
    }
}

impl From<McuId> for u8 {
    fn from(m: McuId) -> u8 {
        m as u8 + 1
    }
}

impl TryFrom<u8> for McuId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(McuId::Mcu1),
            2 => Ok(McuId::Mcu2),
            _ => Err(format!("no MCU {v}, expected 1 or 2")),
        }
    }
}

impl std::fmt::Display for McuId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MCU{}", u8::from(*self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImageId {
    A,
    B,
}

/// One physical input as sampled this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct InputSample {
    /// 0 or 1.
    pub level: u8,
    pub pulse: u64,
}

/// Samples in input declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct InputFrame {
    pub samples: Vec<InputSample>,
}

/// Restrictive reading of a frame: a high level whose pulse counter has not
/// advanced since `prev` reads as 0 and is flagged.
pub fn validate_input(frame: &InputFrame, prev: &InputFrame) -> Vec<(u8, bool)> {
    frame
        .samples
        .iter()
        .zip(&prev.samples)
        .map(|(s, p)| match s.level {
            1 if s.pulse > p.pulse => (1, false),
            1 => (0, true),
            _ => (0, false),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PanicReason {
    InitFault { mcu: McuId, image: ImageId, fault: String },
    ExecFault { mcu: McuId, image: ImageId, fault: String },
    IntraMismatch { mcu: McuId, slot: usize },
    ProgramCorruption { mcu: McuId, image: ImageId, offset: usize },
    InterMcuDivergence,
    InterMcuTimeout { mcu: McuId },
    OutputFault { output: String },
}

impl std::fmt::Display for PanicReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PanicReason::InitFault { mcu, image, fault } => write!(f, "{mcu} image {image:?} INIT: {fault}"),
            PanicReason::ExecFault { mcu, image, fault } => write!(f, "{mcu} image {image:?}: {fault}"),
            PanicReason::IntraMismatch { mcu, slot } => write!(f, "{mcu} variable mismatch at slot {slot}"),
            PanicReason::ProgramCorruption { mcu, image, offset } => {
                write!(f, "{mcu} image {image:?} program corrupt in slice at {offset:#06x}")
            }
            PanicReason::InterMcuDivergence => f.write_str("inter-MCU digests differ"),
            PanicReason::InterMcuTimeout { mcu } => write!(f, "no inter-MCU response from {mcu}"),
            PanicReason::OutputFault { output } => write!(f, "readback mismatch on output `{output}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Running,
    Panic { reason: PanicReason, cycle: u64 },
}

impl Status {
    pub fn is_panic(&self) -> bool {
        matches!(self, Status::Panic { .. })
    }
}

/// One entry of a cycle report, in the order performed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckRecord {
    Exec {
        mcu: McuId,
        image: ImageId,
        ok: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        fault: Option<String>,
    },
    /// Energy or command bits dropped because an MCU stopped.
    Gate { mcu: McuId },
    Intra {
        mcu: McuId,
        ok: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        slot: Option<usize>,
    },
    Deferred { mcu: McuId, image: ImageId, offset: usize, len: usize, ok: bool },
    Inter { ok: bool, digests: [Option<u32>; 2] },
    Readback { output: String, ok: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct InputReport {
    pub name: String,
    pub level: u8,
    pub pulse: u64,
    pub effective: u8,
    pub non_dynamic: bool,
}

/// Command from MCU1, energy from MCU2; the driver is energised only when
/// both are 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PhysicalOutput {
    pub name: String,
    pub command: u8,
    pub energy: u8,
    pub driven: u8,
    pub readback: u8,
    #[serde(skip)]
    pub stuck: Option<u8>,
}

impl PhysicalOutput {
    fn set(&mut self, command: u8, energy: u8) {
        self.command = command;
        self.energy = energy;
        self.driven = command & energy;
        self.readback = self.stuck.unwrap_or(self.driven);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CycleReport {
    pub cycle: u64,
    pub time_ms: u64,
    pub inputs: Vec<InputReport>,
    /// CRC of each instance's canonical snapshot: MCU1 A, MCU1 B, MCU2 A,
    /// MCU2 B. `None` for a halted MCU or an undecodable memory.
    pub snapshots: [Option<u32>; 4],
    pub checks: Vec<CheckRecord>,
    pub outputs: Vec<PhysicalOutput>,
    pub status: Status,
    /// Status LED flashing.
    pub led: bool,
}

/// One microcontroller: private copies of both programs and memories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McuState {
    pub id: McuId,
    pub image_a: ImageA,
    pub image_b: ImageB,
    pub mem_a: VmMemory,
    pub mem_b: VmMemory,
    /// Next slice index of the deferred sweep, per image.
    pub cursor: [usize; 2],
    pub alive: bool,
    /// Running CRC over every cycle's snapshot.
    pub digest: u32,
}

impl McuState {
    fn snapshot(&self, image: ImageId) -> Result<MachineState, usize> {
        match image {
            ImageId::A => self.image_a.vars.read_state(&self.mem_a),
            ImageId::B => self.image_b.vars.read_state(&self.mem_b),
        }
    }

    fn code(&self, image: ImageId) -> &[u8] {
        match image {
            ImageId::A => &self.image_a.code,
            ImageId::B => &self.image_b.code,
        }
    }

    /// Output bits as computed by image A, or 0 everywhere if unreadable.
    fn output_bits(&self, n: usize) -> Vec<u8> {
        match self.image_a.vars.read_outputs(&self.mem_a) {
            Ok(vs) => vs.iter().map(|v| v.as_bool() as u8).collect(),
            Err(_) => vec![0; n],
        }
    }
}

/// Compares the two variable memories of one MCU. Fails with the first
/// canonical state cell that differs or does not decode.
pub fn check_intra(mcu: &McuState) -> Result<(), usize> {
    let a = mcu.snapshot(ImageId::A);
    let b = mcu.snapshot(ImageId::B);
    match (a, b) {
        (Ok(a), Ok(b)) if a == b => Ok(()),
        (Ok(a), Ok(b)) => Err(a.cells().iter().zip(b.cells()).position(|(x, y)| *x != y).unwrap_or(0)),
        (Err(i), Ok(_)) | (Ok(_), Err(i)) => Err(i),
        (Err(i), Err(j)) => Err(i.min(j)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("platform is in panic mode since cycle {0}")]
    Panicked(u64),
    #[error("frame has {got} samples, platform has {want} inputs")]
    FrameSize { got: usize, want: usize },
    #[error("input level {0} is neither 0 nor 1")]
    Level(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("no state slot {slot} (image has {count})")]
    Slot { slot: usize, count: usize },
    #[error("bit {bit} beyond the {width}-bit slot")]
    Bit { bit: u32, width: u32 },
    #[error("program offset {offset} beyond image length {len}")]
    Offset { offset: usize, len: usize },
    #[error("no output `{0}`")]
    Output(String),
    #[error("no input `{0}`")]
    Input(String),
    #[error("stuck level {0} is neither 0 nor 1")]
    Level(u8),
}

/// The whole board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Platform {
    fw: LoadedFirmware,
    mcus: [McuState; 2],
    outputs: Vec<PhysicalOutput>,
    input_names: Vec<String>,
    cycle: u64,
    status: Status,
    prev: InputFrame,
    frozen: Vec<bool>,
    pending_flips: Vec<(McuId, ImageId, u32, u32)>,
    dropped_exchanges: u32,
    /// Reference CRC of every deferred slice, per image.
    slices: [Vec<u32>; 2],
}

fn slice_crcs(code: &[u8], k: usize) -> Vec<u32> {
    code.chunks(k).map(crc32).collect()
}

fn fold(digest: u32, snap: &[u8]) -> u32 {
    Crc32::new().update(&digest.to_le_bytes()).update(snap).finish()
}

/// Boots both MCUs from verified firmware and runs their INIT entries.
pub fn new_platform(fw: LoadedFirmware) -> Platform {
    Platform::new(fw)
}

impl Platform {
    pub fn new(fw: LoadedFirmware) -> Self {
        let a = fw.image_a().clone();
        let b = fw.image_b().clone();
        let mcu = |id| McuState {
            id,
            mem_a: a.new_memory(),
            mem_b: b.new_memory(),
            image_a: a.clone(),
            image_b: b.clone(),
            cursor: [0, 0],
            alive: true,
            digest: 0,
        };
        let k = fw.seq().deferred_bytes_per_cycle as usize;
        let output_names: Vec<String> = a.vars.output_names().into_iter().map(String::from).collect();
        let input_names: Vec<String> = a.vars.inputs().map(|e| e.name.clone()).collect();
        let n_in = input_names.len();
        let mut p = Platform {
            mcus: [mcu(McuId::Mcu1), mcu(McuId::Mcu2)],
            outputs: output_names
                .into_iter()
                .map(|name| PhysicalOutput { name, command: 0, energy: 0, driven: 0, readback: 0, stuck: None })
                .collect(),
            input_names,
            cycle: 0,
            status: Status::Running,
            prev: InputFrame { samples: vec![InputSample::default(); n_in] },
            frozen: vec![false; n_in],
            pending_flips: vec![],
            dropped_exchanges: 0,
            slices: [slice_crcs(&a.code, k), slice_crcs(&b.code, k)],
            fw,
        };
        for i in 0..2 {
            let m = &mut p.mcus[i];
            let fault = exec_a(&m.image_a, &mut m.mem_a, &[])
                .map_err(|f| (ImageId::A, f))
                .and_then(|_| exec_b(&m.image_b, &mut m.mem_b, &[]).map_err(|f| (ImageId::B, f)));
            if let Err((image, f)) = fault {
                let mcu = m.id;
                p.panic(PanicReason::InitFault { mcu, image, fault: f.to_string() });
                return p;
            }
            m.digest = match m.snapshot(ImageId::A) {
                Ok(s) => fold(0, &canonical_snapshot(&s)),
                Err(_) => 0,
            };
        }
        p
    }

    pub fn firmware(&self) -> &LoadedFirmware {
        &self.fw
    }

    pub fn seq(&self) -> &SeqConfig {
        self.fw.seq()
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    /// Index of the next cycle to run.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn mcu(&self, id: McuId) -> &McuState {
        &self.mcus[id.index()]
    }

    pub fn outputs(&self) -> &[PhysicalOutput] {
        &self.outputs
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Number of canonical state cells; the range of `VarBitFlip` slots.
    pub fn state_slots(&self) -> usize {
        self.fw.image_a().vars.state_cells().len()
    }

    /// Snapshot CRCs of the four instances, MCU1 A first.
    pub fn snapshots(&self) -> [Option<u32>; 4] {
        let mut out = [None; 4];
        for (i, m) in self.mcus.iter().enumerate() {
            for (j, img) in [ImageId::A, ImageId::B].into_iter().enumerate() {
                if m.alive {
                    out[2 * i + j] = m.snapshot(img).ok().map(|s| crc32(&canonical_snapshot(&s)));
                }
            }
        }
        out
    }

    /// Hard reset: a fresh platform from the retained firmware.
    pub fn reset(&mut self) {
        *self = Platform::new(self.fw.clone());
    }

    fn panic(&mut self, reason: PanicReason) {
        if self.status.is_panic() {
            return;
        }
        self.status = Status::Panic { reason, cycle: self.cycle };
        for o in &mut self.outputs {
            o.set(0, 0);
        }
    }

    fn gate(&mut self) {
        let bits: Vec<[u8; 2]> = (0..self.outputs.len())
            .map(|k| {
                let [m1, m2] = &self.mcus;
                let on = |m: &McuState| m.alive && m.output_bits(self.outputs.len())[k] == 1;
                [on(m1) as u8, on(m2) as u8]
            })
            .collect();
        for (o, [c, e]) in self.outputs.iter_mut().zip(bits) {
            o.set(c, e);
        }
    }

    /// Applies a fault. Variable upsets take effect after this cycle's
    /// executions; everything else immediately.
    pub fn inject(&mut self, fault: &Fault) -> Result<(), FaultError> {
        match fault {
            Fault::VarBitFlip { mcu, image, slot, bit } => {
                let count = self.state_slots();
                if *slot >= count {
                    return Err(FaultError::Slot { slot: *slot, count });
                }
                let width = match image {
                    ImageId::A => self.fw.image_a().vars.width,
                    ImageId::B => self.fw.image_b().vars.width,
                } * 8;
                if *bit >= width {
                    return Err(FaultError::Bit { bit: *bit, width });
                }
                self.pending_flips.push((*mcu, *image, *slot as u32, *bit));
            }
            Fault::ProgramByteFlip { mcu, image, offset, mask } => {
                let m = &mut self.mcus[mcu.index()];
                let code = match image {
                    ImageId::A => &mut m.image_a.code,
                    ImageId::B => &mut m.image_b.code,
                };
                let len = code.len();
                *code.get_mut(*offset).ok_or(FaultError::Offset { offset: *offset, len })? ^= mask;
            }
            Fault::StuckOutput { output, level } => {
                if *level > 1 {
                    return Err(FaultError::Level(*level));
                }
                let o = self.outputs.iter_mut().find(|o| o.name == *output);
                let o = o.ok_or_else(|| FaultError::Output(output.clone()))?;
                o.stuck = Some(*level);
                o.readback = *level;
            }
            Fault::HaltMcu { mcu } => {
                let m = &mut self.mcus[mcu.index()];
                if m.alive {
                    m.alive = false;
                    // The dead MCU's lines fall at once; no check is needed.
                    self.gate();
                }
            }
            Fault::DropInterMcu { count } => self.dropped_exchanges += count,
            Fault::FreezePulse { input } => {
                let i = self.input_names.iter().position(|n| n == input);
                self.frozen[i.ok_or_else(|| FaultError::Input(input.clone()))?] = true;
            }
        }
        Ok(())
    }

    /// Runs one sequencer cycle. Refused in panic mode.
    pub fn step(&mut self, frame: &InputFrame) -> Result<CycleReport, StepError> {
        if let Status::Panic { cycle, .. } = self.status {
            return Err(StepError::Panicked(cycle));
        }
        if frame.samples.len() != self.input_names.len() {
            return Err(StepError::FrameSize { got: frame.samples.len(), want: self.input_names.len() });
        }
        if let Some(s) = frame.samples.iter().find(|s| s.level > 1) {
            return Err(StepError::Level(s.level));
        }
        let mut checks = vec![];
        let halted_before: Vec<McuId> = self.mcus.iter().filter(|m| !m.alive).map(|m| m.id).collect();
        for id in &halted_before {
            checks.push(CheckRecord::Gate { mcu: *id });
        }

        // A frozen pulse generator keeps presenting its last count.
        let observed = InputFrame {
            samples: frame
                .samples
                .iter()
                .zip(&self.prev.samples)
                .zip(&self.frozen)
                .map(|((s, p), &f)| if f { InputSample { level: s.level, pulse: p.pulse } } else { *s })
                .collect(),
        };
        let effective = validate_input(&observed, &self.prev);
        let inputs: Vec<InputReport> = self
            .input_names
            .iter()
            .zip(&observed.samples)
            .zip(&effective)
            .map(|((name, s), (e, flag))| InputReport {
                name: name.clone(),
                level: s.level,
                pulse: s.pulse,
                effective: *e,
                non_dynamic: *flag,
            })
            .collect();
        self.prev = observed;
        let values: Vec<Value> = effective.iter().map(|(e, _)| Value::Bool(*e == 1)).collect();

        self.run_cycle(&values, &mut checks);

        let report = CycleReport {
            cycle: self.cycle,
            time_ms: self.cycle * self.seq().cycle_period_ms as u64,
            inputs,
            snapshots: self.snapshots(),
            checks,
            outputs: self.outputs.clone(),
            led: self.status.is_panic(),
            status: self.status.clone(),
        };
        self.cycle += 1;
        Ok(report)
    }

    fn run_cycle(&mut self, values: &[Value], checks: &mut Vec<CheckRecord>) {
        for i in 0..2 {
            let m = &mut self.mcus[i];
            if !m.alive {
                continue;
            }
            for image in [ImageId::A, ImageId::B] {
                let r = match image {
                    ImageId::A => exec_a(&m.image_a, &mut m.mem_a, values),
                    ImageId::B => exec_b(&m.image_b, &mut m.mem_b, values),
                };
                let fault = r.err().map(|f: ExecFault| f.to_string());
                checks.push(CheckRecord::Exec { mcu: m.id, image, ok: fault.is_none(), fault: fault.clone() });
                if let Some(fault) = fault {
                    let mcu = m.id;
                    self.panic(PanicReason::ExecFault { mcu, image, fault });
                    return;
                }
            }
        }

        for (mcu, image, slot, bit) in std::mem::take(&mut self.pending_flips) {
            let m = &mut self.mcus[mcu.index()];
            if !m.alive {
                continue;
            }
            let (vars, mem) = match image {
                ImageId::A => (&m.image_a.vars, &mut m.mem_a),
                ImageId::B => (&m.image_b.vars, &mut m.mem_b),
            };
            let addr = vars.state_cells()[slot as usize];
            mem.flip_bit(addr, bit).expect("state cell lies in the image's region");
        }

        for i in 0..2 {
            let m = &self.mcus[i];
            if !m.alive {
                continue;
            }
            let r = check_intra(m);
            checks.push(CheckRecord::Intra { mcu: m.id, ok: r.is_ok(), slot: r.err() });
            if let Err(slot) = r {
                let mcu = m.id;
                self.panic(PanicReason::IntraMismatch { mcu, slot });
                return;
            }
        }

        let k = self.seq().deferred_bytes_per_cycle as usize;
        for i in 0..2 {
            if !self.mcus[i].alive {
                continue;
            }
            for (j, image) in [ImageId::A, ImageId::B].into_iter().enumerate() {
                let m = &mut self.mcus[i];
                let n = self.slices[j].len();
                let idx = m.cursor[j];
                m.cursor[j] = (idx + 1) % n;
                let code = m.code(image);
                let (offset, end) = (idx * k, ((idx + 1) * k).min(code.len()));
                let ok = crc32(&code[offset..end]) == self.slices[j][idx];
                let mcu = m.id;
                checks.push(CheckRecord::Deferred { mcu, image, offset, len: end - offset, ok });
                if !ok {
                    self.panic(PanicReason::ProgramCorruption { mcu, image, offset });
                    return;
                }
            }
        }

        for m in self.mcus.iter_mut().filter(|m| m.alive) {
            let snap = canonical_snapshot(&m.snapshot(ImageId::A).expect("intra check passed"));
            m.digest = fold(m.digest, &snap);
        }

        let seq = *self.seq();
        if (self.cycle + 1).is_multiple_of(seq.inter_mcu_interval_cycles as u64) {
            let digests = self.mcus.each_ref().map(|m| m.alive.then_some(m.digest));
            let silent = self.mcus.iter().find(|m| !m.alive).map(|m| m.id);
            let dropped = self.dropped_exchanges > 0;
            self.dropped_exchanges = self.dropped_exchanges.saturating_sub(1);
            let ok = silent.is_none() && !dropped && digests[0] == digests[1];
            checks.push(CheckRecord::Inter { ok, digests });
            if !ok {
                self.panic(match silent {
                    Some(mcu) => PanicReason::InterMcuTimeout { mcu },
                    None if dropped => PanicReason::InterMcuTimeout { mcu: McuId::Mcu2 },
                    None => PanicReason::InterMcuDivergence,
                });
                return;
            }
        }

        self.gate();
        if (self.cycle + 1).is_multiple_of(seq.readback_interval_cycles as u64) {
            let mut fault = None;
            for o in &self.outputs {
                let ok = o.readback == o.driven;
                checks.push(CheckRecord::Readback { output: o.name.clone(), ok });
                if !ok && fault.is_none() {
                    fault = Some(o.name.clone());
                }
            }
            if let Some(output) = fault {
                self.panic(PanicReason::OutputFault { output });
            }
        }
    }
}

#[cfg(test)]
mod tests;
