use super::*;
use crate::b0::{interpret_cycle, interpret_init, parse, typecheck};
use crate::backend::{compile_a, compile_b};
use crate::firmware::{bootload, link};

const BLINKER: &str = include_str!("../../corpus/blinker.b0");

fn firmware(src: &str, seq: SeqConfig) -> LoadedFirmware {
    let tm = typecheck(&parse(src).unwrap()).unwrap();
    let bundle = link(&compile_a(&tm).unwrap(), &compile_b(&tm).unwrap(), &seq).unwrap();
    bootload(&bundle).unwrap()
}

fn blinker() -> Platform {
    Platform::new(firmware(BLINKER, SeqConfig::default()))
}

fn high(pulse: u64) -> InputFrame {
    InputFrame { samples: vec![InputSample { level: 1, pulse }] }
}

fn low() -> InputFrame {
    InputFrame { samples: vec![InputSample { level: 0, pulse: 0 }] }
}

fn run_until_panic(p: &mut Platform, limit: u64) -> Option<u64> {
    for _ in 0..limit {
        let r = p.step(&low()).unwrap();
        if let Status::Panic { cycle, .. } = r.status {
            return Some(cycle);
        }
    }
    None
}

#[test]
fn boots_with_four_equal_instances() {
    let p = blinker();
    assert_eq!(p.status(), &Status::Running);
    assert_eq!(p.cycle(), 0);
    let s = p.snapshots();
    assert!(s.iter().all(|c| c.is_some() && *c == s[0]));
    assert_eq!(blinker(), p);
    assert_eq!(p.state_slots(), 2);
}

#[test]
fn init_trap_panics_at_cycle_zero() {
    let p = Platform::new(firmware(include_str!("../../corpus/seeded/bug_init.b0"), SeqConfig::default()));
    match p.status() {
        Status::Panic { reason: PanicReason::InitFault { mcu: McuId::Mcu1, image: ImageId::A, .. }, cycle: 0 } => {}
        other => panic!("{other:?}"),
    }
    assert!(p.outputs().iter().all(|o| o.driven == 0));
}

#[test]
fn held_button_follows_the_reference_interpreter() {
    let tm = typecheck(&parse(BLINKER).unwrap()).unwrap();
    let mut s = interpret_init(&tm).unwrap();
    let mut p = blinker();
    for c in 0..4u64 {
        let (next, outs) = interpret_cycle(&tm, &s, &[Value::Bool(true)]).unwrap();
        s = next;
        let r = p.step(&high(c + 1)).unwrap();
        assert_eq!(r.inputs[0].effective, 1);
        let lamp = r.outputs[0].driven;
        assert_eq!(lamp == 1, outs[0] == Value::Bool(true), "cycle {c}");
        // cnt reaches 2 on the second press and wraps to 0 on the fourth.
        assert_eq!(lamp == 1, c == 1 || c == 2);
    }
}

#[test]
fn thousand_quiet_cycles() {
    let mut p = blinker();
    for c in 0..1000u64 {
        let frame = if c % 7 < 3 { high(c + 1) } else { low() };
        let r = p.step(&frame).unwrap();
        assert_eq!(r.status, Status::Running, "cycle {c}");
        assert!(r.checks.iter().all(|k| !matches!(k, CheckRecord::Intra { ok: false, .. })));
    }
}

#[test]
fn panic_latches_until_reset() {
    let mut p = blinker();
    p.step(&high(1)).unwrap();
    p.inject(&Fault::VarBitFlip { mcu: McuId::Mcu2, image: ImageId::B, slot: 0, bit: 5 }).unwrap();
    let r = p.step(&high(2)).unwrap();
    let first = r.status.clone();
    assert_eq!(first, Status::Panic { reason: PanicReason::IntraMismatch { mcu: McuId::Mcu2, slot: 0 }, cycle: 1 });
    assert!(r.led);
    for k in 0..100 {
        assert_eq!(p.step(&high(3 + k)), Err(StepError::Panicked(1)));
        assert!(p.outputs().iter().all(|o| o.command == 0 && o.energy == 0 && o.driven == 0));
    }
    assert_eq!(p.status(), &first);
    p.reset();
    assert_eq!(p, blinker());
}

#[test]
fn single_image_flip_is_caught_in_the_same_cycle() {
    let mut p = blinker();
    p.inject(&Fault::VarBitFlip { mcu: McuId::Mcu1, image: ImageId::A, slot: 0, bit: 0 }).unwrap();
    let r = p.step(&low()).unwrap();
    assert_eq!(r.status, Status::Panic { reason: PanicReason::IntraMismatch { mcu: McuId::Mcu1, slot: 0 }, cycle: 0 });
}

#[test]
fn identical_flip_on_one_mcu_is_caught_by_the_other() {
    let mut p = blinker();
    for image in [ImageId::A, ImageId::B] {
        p.inject(&Fault::VarBitFlip { mcu: McuId::Mcu1, image, slot: 1, bit: 0 }).unwrap();
    }
    let r = p.step(&low()).unwrap();
    assert!(r.checks.contains(&CheckRecord::Intra { mcu: McuId::Mcu1, ok: true, slot: None }));
    assert_ne!(r.snapshots[0], r.snapshots[2]);
    // The lamp flip is overwritten next cycle, but the running digest keeps it.
    let r = p.step(&low()).unwrap();
    assert_eq!(r.snapshots[0], r.snapshots[2]);
    assert_eq!(run_until_panic(&mut p, 10), Some(3));
    assert!(matches!(p.status(), Status::Panic { reason: PanicReason::InterMcuDivergence, .. }));
}

#[test]
fn whole_program_in_one_slice_is_checked_every_cycle() {
    let seq = SeqConfig { deferred_bytes_per_cycle: 4096, ..SeqConfig::default() };
    let mut p = Platform::new(firmware(BLINKER, seq));
    // Byte 1 of the INIT entry pointer: never executed again after boot.
    p.inject(&Fault::ProgramByteFlip { mcu: McuId::Mcu2, image: ImageId::A, offset: 1, mask: 0x80 }).unwrap();
    let r = p.step(&low()).unwrap();
    assert_eq!(
        r.status,
        Status::Panic { reason: PanicReason::ProgramCorruption { mcu: McuId::Mcu2, image: ImageId::A, offset: 0 }, cycle: 0 }
    );
}

#[test]
fn sweep_reaches_every_slice() {
    let seq = SeqConfig { deferred_bytes_per_cycle: 8, ..SeqConfig::default() };
    let fw = firmware(BLINKER, seq);
    let len = fw.image_b().code.len();
    let period = len.div_ceil(8) as u64;
    let mut p = Platform::new(fw);
    p.step(&low()).unwrap();
    p.inject(&Fault::ProgramByteFlip { mcu: McuId::Mcu1, image: ImageId::B, offset: 3, mask: 1 }).unwrap();
    let at = run_until_panic(&mut p, 100).unwrap();
    assert!(at - 1 < period, "caught after {} cycles, sweep period {period}", at);
}

#[test]
fn halted_mcu_drops_energy_at_once_and_panics_at_the_exchange() {
    let mut p = blinker();
    for c in 0..3 {
        p.step(&high(c + 1)).unwrap();
    }
    assert_eq!(p.outputs()[0].driven, 1);
    p.inject(&Fault::HaltMcu { mcu: McuId::Mcu2 }).unwrap();
    assert_eq!(p.outputs()[0].driven, 0);
    assert_eq!(p.status(), &Status::Running);
    let r = p.step(&high(4)).unwrap();
    assert_eq!(r.status, Status::Panic { reason: PanicReason::InterMcuTimeout { mcu: McuId::Mcu2 }, cycle: 3 });
    assert!(matches!(r.checks[0], CheckRecord::Gate { mcu: McuId::Mcu2 }));
}

#[test]
fn dropped_exchange_is_a_failure() {
    let mut p = blinker();
    p.inject(&Fault::DropInterMcu { count: 1 }).unwrap();
    assert_eq!(run_until_panic(&mut p, 10), Some(3));
    assert!(matches!(p.status(), Status::Panic { reason: PanicReason::InterMcuTimeout { .. }, .. }));
}

#[test]
fn stuck_output_is_seen_by_readback() {
    let mut p = blinker();
    p.inject(&Fault::StuckOutput { output: "lamp".into(), level: 0 }).unwrap();
    let r = p.step(&high(1)).unwrap();
    assert_eq!(r.status, Status::Running, "stuck at the commanded level is invisible");
    let r = p.step(&high(2)).unwrap();
    assert_eq!(r.status, Status::Panic { reason: PanicReason::OutputFault { output: "lamp".into() }, cycle: 1 });

    let mut p = blinker();
    p.inject(&Fault::StuckOutput { output: "lamp".into(), level: 1 }).unwrap();
    assert_eq!(run_until_panic(&mut p, 1), Some(0));
}

#[test]
fn dynamism_rules() {
    let prev = InputFrame { samples: vec![InputSample { level: 1, pulse: 4 }; 3] };
    let frame = InputFrame {
        samples: vec![
            InputSample { level: 1, pulse: 5 },
            InputSample { level: 1, pulse: 4 },
            InputSample { level: 0, pulse: 9 },
        ],
    };
    assert_eq!(validate_input(&frame, &prev), [(1, false), (0, true), (0, false)]);
}

#[test]
fn frozen_pulse_reads_low() {
    let mut p = blinker();
    p.step(&high(1)).unwrap();
    p.inject(&Fault::FreezePulse { input: "btn".into() }).unwrap();
    for c in 2..12 {
        let r = p.step(&high(c)).unwrap();
        assert_eq!((r.inputs[0].effective, r.inputs[0].non_dynamic), (0, true));
        assert_eq!(r.inputs[0].pulse, 1);
    }
}

#[test]
fn bad_faults_and_frames() {
    let mut p = blinker();
    let flip = |slot, bit| Fault::VarBitFlip { mcu: McuId::Mcu1, image: ImageId::A, slot, bit };
    assert_eq!(p.inject(&flip(2, 0)), Err(FaultError::Slot { slot: 2, count: 2 }));
    assert_eq!(p.inject(&flip(0, 32)), Err(FaultError::Bit { bit: 32, width: 32 }));
    assert!(p.inject(&Fault::VarBitFlip { mcu: McuId::Mcu1, image: ImageId::B, slot: 0, bit: 63 }).is_ok());
    assert!(matches!(p.inject(&Fault::FreezePulse { input: "nope".into() }), Err(FaultError::Input(_))));
    assert_eq!(p.step(&InputFrame::default()), Err(StepError::FrameSize { got: 0, want: 1 }));
    assert_eq!(p.step(&InputFrame { samples: vec![InputSample { level: 2, pulse: 1 }] }), Err(StepError::Level(2)));
}

#[test]
fn scenario_json() {
    let sc = Scenario::from_json(
        r#"{"horizon": 6,
            "inputs": [{"cycle": 0, "values": {"btn": {"level": 1}}},
                       {"cycle": 3, "values": {"btn": {"level": 1, "pulse": 2}}},
                       {"cycle": 5, "values": {"btn": {"level": 0}}}],
            "faults": [{"cycle": 4, "kind": "ProgramByteFlip", "mcu": 2, "image": "B", "offset": 7},
                       {"cycle": 5, "kind": "HaltMcu", "mcu": 1}]}"#,
    )
    .unwrap();
    assert_eq!(sc.faults[0].fault, Fault::ProgramByteFlip { mcu: McuId::Mcu2, image: ImageId::B, offset: 7, mask: 0xFF });
    let frames = sc.frames(&["btn".to_string()]).unwrap();
    let pulses: Vec<(u8, u64)> = frames.iter().map(|f| (f.samples[0].level, f.samples[0].pulse)).collect();
    assert_eq!(pulses, [(1, 1), (1, 2), (1, 3), (1, 2), (1, 3), (0, 3)]);
    assert_eq!(Scenario::from_json(&sc.to_json()).unwrap(), sc);

    assert!(Scenario::from_json(r#"{"horizon": 1, "faults": [{"cycle": 0, "kind": "HaltMcu", "mcu": 3}]}"#).is_err());
    let fw = firmware(BLINKER, SeqConfig::default());
    let late = Scenario::from_json(r#"{"horizon": 1, "faults": [{"cycle": 1, "kind": "HaltMcu", "mcu": 1}]}"#).unwrap();
    assert!(matches!(run_scenario(&fw, &late), Err(ScenarioError::Horizon { cycle: 1, horizon: 1 })));
    let unknown = Scenario::from_json(r#"{"horizon": 1, "inputs": [{"cycle": 0, "values": {"x": {"level": 1}}}]}"#).unwrap();
    assert!(matches!(run_scenario(&fw, &unknown), Err(ScenarioError::UnknownInput(_))));
}

#[test]
fn scenario_traces() {
    let fw = firmware(BLINKER, SeqConfig::default());
    let quiet = Scenario::from_json(r#"{"horizon": 20, "inputs": [{"cycle": 2, "values": {"btn": {"level": 1}}}]}"#)
        .unwrap();
    let t = run_scenario(&fw, &quiet).unwrap();
    assert_eq!(t.reports.len(), 20);
    assert_eq!(t.status, Status::Running);
    assert_eq!(t.to_jsonl().lines().count(), 20);
    assert_eq!(run_scenario(&fw, &quiet).unwrap().to_jsonl(), t.to_jsonl());

    let mut flip = quiet.clone();
    flip.faults.push(FaultEvent {
        cycle: 9,
        fault: Fault::VarBitFlip { mcu: McuId::Mcu2, image: ImageId::A, slot: 1, bit: 3 },
    });
    let t = run_scenario(&fw, &flip).unwrap();
    assert_eq!(t.reports.len(), 10);
    assert_eq!(t.panic().map(|(c, _)| c), Some(9));
    let last: serde_json::Value = serde_json::from_str(t.to_jsonl().lines().last().unwrap()).unwrap();
    assert_eq!(last["status"]["state"], "PANIC");
    assert_eq!(last["status"]["cycle"], 9);
    assert_eq!(last["status"]["reason"]["kind"], "intra_mismatch");
    assert_eq!(last["led"], true);
}
