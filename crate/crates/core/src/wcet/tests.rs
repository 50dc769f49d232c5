use super::*;
use crate::b0::{interpret_init, parse, typecheck, MachineState, TypedModel, Value};
use crate::backend::{compile_b, exec_b_with, ExecMode};

fn checked(src: &str) -> TypedModel {
    typecheck(&parse(src).unwrap()).unwrap()
}

fn measure(img: &ImageB, s: &MachineState, inputs: &[Value], costs: &CostTable) -> u64 {
    let mut m = img.new_memory();
    img.vars.write_state(&mut m, s).unwrap();
    m.mode = ExecMode::Cycle;
    exec_b_with(img, &mut m, inputs, costs).unwrap()
}

#[test]
fn blinker_bound_is_sound_and_reached() {
    let tm = checked(include_str!("../../corpus/blinker.b0"));
    let img = compile_b(&tm).unwrap();
    let costs = CostTable::default();
    let bound = analyze(&img, &costs).unwrap();
    let mut worst = 0;
    for cnt in 0..4 {
        for btn in [false, true] {
            let s = MachineState { values: vec![Value::Int(cnt), Value::Bool(false)] };
            let c = measure(&img, &s, &[Value::Bool(btn)], &costs);
            assert!(c <= bound);
            worst = worst.max(c);
        }
    }
    assert_eq!(worst, bound);
}

#[test]
fn straight_line_unit_costs_count_instructions() {
    let tm = checked(
        "MACHINE M INPUTS a: BOOL, b: BOOL OUTPUTS y: BOOL, z: BOOL INVARIANT true \
         INIT y := false; z := false CYCLE y := a & not b; z := y or b END",
    );
    let img = compile_b(&tm).unwrap();
    let unit = CostTable::uniform(1);
    // LOAD a, LOAD b, LNOT, LAND, STORE y, LOAD y, LOAD b, LOR, STORE z, RET
    assert_eq!(analyze(&img, &unit).unwrap(), 10);
    let s = interpret_init(&tm).unwrap();
    assert_eq!(measure(&img, &s, &[Value::Bool(true), Value::Bool(false)], &unit), 10);
}

#[test]
fn loop_rule() {
    let tm = checked(
        "MACHINE M OUTPUTS n: INT(0..8) INVARIANT true INIT n := 0 \
         CYCLE n := 0; FOR k := 0 TO 3 DO n := n + 2 END END",
    );
    let img = compile_b(&tm).unwrap();
    let unit = CostTable::uniform(1);
    // n := 0 is PUSH CHK STORE; setup PUSH STORE; body LOAD PUSH IADD CHK STORE;
    // overhead LOAD PUSH IADD STORE LOAD PUSH LE LOOPBACK; RET.
    assert_eq!(analyze(&img, &unit).unwrap(), 3 + 2 + 4 * (5 + 8) + 1);
    let s = interpret_init(&tm).unwrap();
    assert_eq!(measure(&img, &s, &[], &unit), 3 + 2 + 4 * 13 + 1);
}

#[test]
fn missing_loop_entry_is_an_error() {
    let tm = checked(include_str!("../../corpus/shift.b0"));
    let mut img = compile_b(&tm).unwrap();
    img.loop_table.clear();
    assert!(matches!(analyze(&img, &CostTable::default()), Err(WcetError::UnboundedLoop(_))));
}

#[test]
fn branch_free_bound_is_linear_in_costs() {
    let tm = checked(include_str!("../../corpus/shift.b0"));
    let img = compile_b(&tm).unwrap();
    let base = analyze(&img, &CostTable::default()).unwrap();
    assert_eq!(analyze(&img, &CostTable::default().scaled(2)).unwrap(), 2 * base);
}

#[test]
fn raising_any_cost_never_lowers_the_bound() {
    let tm = checked(include_str!("../../corpus/traffic.b0"));
    let img = compile_b(&tm).unwrap();
    let base = CostTable::default();
    let b0 = analyze(&img, &base).unwrap();
    for (m, c) in base.iter() {
        assert!(analyze(&img, &base.with(m, c + 5)).unwrap() >= b0, "{m}");
    }
}

#[test]
fn corrupt_code_is_a_decode_error() {
    let tm = checked(include_str!("../../corpus/blinker.b0"));
    let mut img = compile_b(&tm).unwrap();
    let e = img.cycle_entry().unwrap();
    img.code[e] = 0x01;
    assert_eq!(analyze(&img, &CostTable::default()), Err(WcetError::Decode(ExecFault::Decode(e))));
}
