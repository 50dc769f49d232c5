use std::collections::BTreeMap;

use super::*;
use crate::b0::{interpret_cycle, parse, typecheck, MachineState, Value};

const NETS: &[&str] = &[
    include_str!("../../corpus/relay/lamp.rly"),
    include_str!("../../corpus/relay/crossing.rly"),
    include_str!("../../corpus/relay/motor.rly"),
    include_str!("../../corpus/relay/interlock.rly"),
    include_str!("../../corpus/relay/signal.rly"),
    include_str!("../../corpus/relay/vote.rly"),
];

/// Direct reading of the net: each coil is evaluated on demand, a latch's
/// own contacts see its held state.
fn evaluate(net: &RelayNet, held: &BTreeMap<String, bool>, inputs: &BTreeMap<String, bool>) -> BTreeMap<String, bool> {
    fn contact(
        net: &RelayNet,
        e: &CExpr,
        held: &BTreeMap<String, bool>,
        inputs: &BTreeMap<String, bool>,
        me: &str,
        done: &mut BTreeMap<String, bool>,
    ) -> bool {
        match e {
            CExpr::No(n) => signal(net, n, held, inputs, me, done),
            CExpr::Nc(n) => !signal(net, n, held, inputs, me, done),
            CExpr::And(a, b) => {
                contact(net, a, held, inputs, me, done) & contact(net, b, held, inputs, me, done)
            }
            CExpr::Or(a, b) => contact(net, a, held, inputs, me, done) | contact(net, b, held, inputs, me, done),
        }
    }
    fn signal(
        net: &RelayNet,
        n: &str,
        held: &BTreeMap<String, bool>,
        inputs: &BTreeMap<String, bool>,
        me: &str,
        done: &mut BTreeMap<String, bool>,
    ) -> bool {
        if let Some(v) = inputs.get(n) {
            return *v;
        }
        if n == me {
            return held[n];
        }
        if let Some(v) = done.get(n) {
            return *v;
        }
        let coil = net.coil(n).unwrap();
        let v = match &coil.drive {
            Drive::Rung(e) => contact(net, e, held, inputs, n, done),
            Drive::Latch { set, reset } => {
                let s = contact(net, set, held, inputs, n, done);
                let r = contact(net, reset, held, inputs, n, done);
                (held[n] || s) && !r
            }
        };
        done.insert(n.to_string(), v);
        v
    }
    let mut done = BTreeMap::new();
    for c in net.relays.iter().chain(&net.outputs) {
        signal(net, c, held, inputs, "", &mut done);
    }
    done
}

fn bits(names: &[String], k: u32) -> BTreeMap<String, bool> {
    names.iter().enumerate().map(|(i, n)| (n.clone(), k >> i & 1 == 1)).collect()
}

#[test]
fn translated_nets_match_direct_evaluation() {
    for src in NETS {
        let net = parse_relay(src).unwrap();
        assert!(net.signal_count() <= 12);
        let tm = typecheck(&parse(&translate(&net)).unwrap()).unwrap();
        // Canonical state order is VARS (relays) then OUTPUTS.
        let state: Vec<String> = net.relays.iter().chain(&net.outputs).cloned().collect();
        for k in 0..1u32 << state.len() {
            let held = bits(&state, k);
            let s = MachineState { values: state.iter().map(|n| Value::Bool(held[n])).collect() };
            for j in 0..1u32 << net.inputs.len() {
                let inp = bits(&net.inputs, j);
                let values: Vec<Value> = net.inputs.iter().map(|n| Value::Bool(inp[n])).collect();
                let (next, _) = interpret_cycle(&tm, &s, &values).unwrap();
                let want = evaluate(&net, &held, &inp);
                let got: BTreeMap<String, bool> =
                    state.iter().zip(&next.values).map(|(n, v)| (n.clone(), v.as_bool())).collect();
                assert_eq!(got, want, "{} held {k:b} inputs {j:b}", net.name);
            }
        }
    }
}

#[test]
fn one_rung() {
    let net = parse_relay(NETS[0]).unwrap();
    assert_eq!(net.coils.len(), 1);
    let b0 = translate(&net);
    assert!(b0.contains("  lamp := btn\n"), "{b0}");
    assert!(b0.contains("INVARIANT true\n"));
}

#[test]
fn series_and_parallel() {
    let net = parse_relay("RELAYNET N\nINPUT a b c\nOUTPUT out\nout := NO(a) AND NC(b) OR NO(c)").unwrap();
    assert!(translate(&net).contains("out := a & not b or c"), "{}", translate(&net));
    let net = parse_relay("RELAYNET N\nINPUT a b c\nOUTPUT out\nout := NO(a) AND (NC(b) OR NO(c))").unwrap();
    assert!(translate(&net).contains("out := a & (not b or c)"), "{}", translate(&net));
}

#[test]
fn reset_dominant_latch_table() {
    let net = parse_relay("RELAYNET L\nINPUT s t\nRELAY r\nOUTPUT q\nLATCH r SET NO(s) RESET NO(t)\nq := NO(r)").unwrap();
    let tm = typecheck(&parse(&translate(&net)).unwrap()).unwrap();
    for k in 0..8u32 {
        let (r, s, t) = (k & 1 == 1, k & 2 == 2, k & 4 == 4);
        let state = MachineState { values: vec![Value::Bool(r), Value::Bool(false)] };
        let (next, _) = interpret_cycle(&tm, &state, &[Value::Bool(s), Value::Bool(t)]).unwrap();
        let want = if t { false } else { r || s };
        assert_eq!(next.values[0], Value::Bool(want), "r={r} s={s} t={t}");
    }
}

#[test]
fn coils_are_ordered_by_dependency() {
    let net = parse_relay("RELAYNET N\nINPUT a\nRELAY x y\nOUTPUT z\nz := NO(y)\ny := NO(x)\nx := NO(a)").unwrap();
    let order: Vec<&str> = net.coils.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(order, ["x", "y", "z"]);
}

#[test]
fn errors() {
    let cyc = parse_relay("RELAYNET N\nRELAY a b\na := NO(b)\nb := NO(a)");
    assert!(matches!(cyc, Err(RelayError::Cycle(p)) if p.len() == 3));
    assert!(matches!(parse_relay("RELAYNET N\nRELAY a\na := NO(a)"), Err(RelayError::Cycle(_))));
    assert_eq!(
        parse_relay("RELAYNET N\nOUTPUT lamp\nlamp := NO(x)"),
        Err(RelayError::Undeclared { line: 3, name: "x".into() })
    );
    assert!(matches!(parse_relay("RELAYNET N\nINPUT a\nOUTPUT b\na := NO(b)\nb := NO(a)"), Err(RelayError::DrivesInput { .. })));
    assert_eq!(parse_relay("RELAYNET N\nOUTPUT b"), Err(RelayError::Undriven("b".into())));
    assert!(matches!(parse_relay("RELAYNET N\nINPUT a a"), Err(RelayError::Duplicate { .. })));
    assert!(matches!(parse_relay("RELAYNET N\nINPUT a\nOUTPUT b\nb := NO(a) AND"), Err(RelayError::Syntax { line: 4, .. })));
    assert!(matches!(parse_relay("RELAYNET N\nINPUT mod"), Err(RelayError::Reserved { .. })));
    assert_eq!(parse_relay("INPUT a"), Err(RelayError::NoHeader));
    assert!(matches!(parse_relay("RELAYNET N\nINPUT a\nOUTPUT b\nb := NO(a)\nb := NC(a)"), Err(RelayError::DrivenTwice { .. })));
}

#[test]
fn renaming_gives_an_alpha_equivalent_model() {
    let src = NETS[2];
    let renamed = src.replace("tripped", "thermal").replace("run", "going");
    let a = translate(&parse_relay(src).unwrap());
    let b = translate(&parse_relay(&renamed).unwrap());
    assert_eq!(a.replace("tripped", "thermal").replace("run", "going"), b);
}

#[test]
fn user_invariant_is_kept() {
    let net = parse_relay("RELAYNET N\nINPUT a\nRELAY x y\nOUTPUT z\nINVARIANT not (x & y)\nx := NO(a)\ny := NC(a)\nz := NO(x)").unwrap();
    let b0 = translate(&net);
    assert!(b0.contains("INVARIANT not (x & y)\n"));
    typecheck(&parse(&b0).unwrap()).unwrap();
}
