use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;

use super::*;
use crate::b0::ast::{ArithOp, RelOp};
use crate::b0::{expr_to_string, interpret_cycle, interpret_init, parse, parse_expr, typecheck, MachineState, TypedModel};

const GOOD: &[(&str, &str)] = &[
    ("accum", include_str!("../../corpus/accum.b0")),
    ("blinker", include_str!("../../corpus/blinker.b0")),
    ("door", include_str!("../../corpus/door.b0")),
    ("idle", include_str!("../../corpus/idle.b0")),
    ("shift", include_str!("../../corpus/shift.b0")),
    ("traffic", include_str!("../../corpus/traffic.b0")),
    ("updown", include_str!("../../corpus/updown.b0")),
    ("window", include_str!("../../corpus/window.b0")),
];

const SEEDED: &[(&str, &str)] = &[
    ("bug_div", include_str!("../../corpus/seeded/bug_div.b0")),
    ("bug_index", include_str!("../../corpus/seeded/bug_index.b0")),
    ("bug_init", include_str!("../../corpus/seeded/bug_init.b0")),
    ("bug_invariant", include_str!("../../corpus/seeded/bug_invariant.b0")),
    ("bug_range", include_str!("../../corpus/seeded/bug_range.b0")),
    ("bug_wide", include_str!("../../corpus/seeded/bug_wide.b0")),
];

fn checked(src: &str) -> TypedModel {
    typecheck(&parse(src).unwrap()).unwrap()
}

fn po(hyps: &[&str], goal: &str, domains: &[(&str, B0Type)]) -> ProofObligation {
    ProofObligation {
        id: 1,
        kind: PoKind::WdDiv,
        loc: Pos::new(1, 1),
        hypotheses: hyps.iter().map(|h| parse_expr(h).unwrap()).collect(),
        goal: parse_expr(goal).unwrap(),
        domains: domains.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
    }
}

fn all_inputs(tm: &TypedModel) -> Vec<Vec<Value>> {
    let mut out = vec![vec![]];
    for i in &tm.inputs {
        let vals = Value::enumerate(&i.ty);
        out = out
            .into_iter()
            .flat_map(|p: Vec<Value>| {
                vals.iter().map(move |v| {
                    let mut p = p.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Breadth-first reachability with the reference interpreter. Returns the
/// first runtime error or invariant violation met, if any.
fn explore(tm: &TypedModel) -> Result<usize, String> {
    let s0 = interpret_init(tm).map_err(|e| e.to_string())?;
    let inputs = all_inputs(tm);
    let mut seen = BTreeSet::from([s0.clone()]);
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        if !crate::b0::eval_invariant(tm, &s).map_err(|e| e.to_string())? {
            return Err(format!("invariant false in {:?}", s.values));
        }
        for inp in &inputs {
            let (next, _) = interpret_cycle(tm, &s, inp).map_err(|e| e.to_string())?;
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
        assert!(seen.len() <= 1 << 20, "state space too large for exhaustive exploration");
    }
    Ok(seen.len())
}

#[test]
fn blinker_has_three_proved_obligations() {
    let tm = checked(GOOD[1].1);
    let pos = generate_pos(&tm);
    let kinds: Vec<_> = pos.iter().map(|p| p.kind).collect();
    assert_eq!(kinds, [PoKind::InitEstablishes, PoKind::CyclePreserves, PoKind::WdRange]);
    assert_eq!(pos.iter().map(|p| p.id).collect::<Vec<_>>(), [1, 2, 3]);

    let wd = &pos[2];
    assert_eq!(expr_to_string(&wd.goal), "not btn or 0 <= (cnt + 1) mod 4 & (cnt + 1) mod 4 <= 3");
    assert_eq!(prove(wd, DEFAULT_BUDGET).status, ProofStatus::ProvedInterval);
    for r in prove_all(&pos, DEFAULT_BUDGET) {
        assert!(r.status.is_proved(), "{r:?}");
    }
}

#[test]
fn empty_cycle_with_true_invariant_has_trivial_goal() {
    let tm = checked("MACHINE M VARS x: BOOL INVARIANT true INIT x := true CYCLE END");
    let pos = generate_pos(&tm);
    assert_eq!(pos.len(), 2);
    assert_eq!(pos[1].goal, Expr::Bool(true));
    assert_eq!(prove(&pos[1], 1).status, ProofStatus::ProvedInterval);
}

#[test]
fn division_by_variable_yields_wd_div() {
    let src = "MACHINE M INPUTS y: INT(0..5) OUTPUTS q: INT(0..10) INVARIANT true \
               INIT q := 0 CYCLE q := 10 div y END";
    let pos = generate_pos(&checked(src));
    let wd: Vec<_> = pos.iter().filter(|p| p.kind == PoKind::WdDiv).collect();
    assert_eq!(wd.len(), 1);
    assert_eq!(expr_to_string(&wd[0].goal), "y /= 0");
    assert_eq!(interval_truth(wd[0]), Truth::Unknown);
    assert_eq!(
        prove(wd[0], DEFAULT_BUDGET).status,
        ProofStatus::Counterexample(vec![("y".into(), Value::Int(0))])
    );
}

#[test]
fn nonzero_divisor_needs_enumeration_or_counterexample() {
    let p = po(&["0 <= y & y <= 5"], "y /= 0", &[("y", B0Type::int(0, 5))]);
    assert_eq!(interval_truth(&p), Truth::Unknown);
    assert_eq!(prove(&p, 6).status, ProofStatus::Counterexample(vec![("y".into(), Value::Int(0))]));
    assert_eq!(prove(&p, 5).status, ProofStatus::Unproven);

    let p = po(&["y >= 1"], "y /= 0", &[("y", B0Type::int(0, 5))]);
    assert_eq!(prove(&p, 1).status, ProofStatus::ProvedInterval);
}

#[test]
fn true_goal_is_proved_by_intervals() {
    assert_eq!(prove(&po(&[], "true", &[]), 1).status, ProofStatus::ProvedInterval);
}

#[test]
fn interval_rules() {
    let x = || ("x".to_string(), B0Type::int(0, 9));
    let truth = |goal: &str| interval_truth(&po(&[], goal, &[(x().0.as_str(), x().1)]));
    assert_eq!(truth("x mod 4 <= 3"), Truth::True);
    assert_eq!(truth("x mod 4 >= 0"), Truth::True);
    assert_eq!(truth("x div 3 <= 3"), Truth::True);
    assert_eq!(truth("(x + 1) * 2 <= 20"), Truth::True);
    assert_eq!(truth("x - 10 < 0"), Truth::True);
    assert_eq!(truth("x > 9"), Truth::False);
    assert_eq!(truth("x div (x - 3) = 0"), Truth::Unknown);
    assert_eq!(truth("x * 2147483647 * 2147483647 * 2 >= 0"), Truth::Unknown);
    // One period of the modulus keeps the exact range.
    let p = po(&["x >= 4", "x <= 7"], "x mod 4 = x - 4", &[("x", B0Type::int(0, 9))]);
    assert_eq!(interval_truth(&p), Truth::Unknown);
    let p = po(&["x >= 4", "x <= 6"], "x mod 4 >= 0 & x mod 4 <= 2", &[("x", B0Type::int(0, 9))]);
    assert_eq!(interval_truth(&p), Truth::True);
}

#[test]
fn corpus_models_are_fully_proved_and_sound() {
    for (name, src) in GOOD {
        let tm = checked(src);
        let pos = generate_pos(&tm);
        for (po, r) in pos.iter().zip(prove_all(&pos, DEFAULT_BUDGET)) {
            assert!(r.status.is_proved(), "{name}: PO {} {} {:?}", po.id, po.kind, r.status);
        }
        explore(&tm).unwrap_or_else(|e| panic!("{name}: proved but {e}"));
    }
}

#[test]
fn seeded_defects_are_never_proved() {
    for (name, src) in SEEDED {
        let tm = checked(src);
        let pos = generate_pos(&tm);
        let results = prove_all(&pos, DEFAULT_BUDGET);
        assert!(results.iter().any(|r| !r.status.is_proved()), "{name}: every PO proved");
        if *name == "bug_wide" {
            assert!(results.iter().any(|r| r.status == ProofStatus::Unproven));
        } else {
            assert!(results.iter().any(|r| matches!(r.status, ProofStatus::Counterexample(_))), "{name}");
            assert!(explore(&tm).is_err(), "{name}: defect not reachable");
        }
    }
}

/// Re-checks a witness against the obligation, then replays it through the
/// reference interpreter, which must trap or break the invariant.
fn assert_genuine(tm: &TypedModel, po: &ProofObligation, w: &[(String, Value)]) {
    let env: Valuation = w.iter().cloned().collect();
    // Names left out of a witness only occur in their own typing
    // hypotheses, which any domain value satisfies.
    for h in &po.hypotheses {
        let mut names = vec![];
        h.free_vars(&mut names);
        if names.iter().all(|n| env.contains_key(n)) {
            assert_eq!(eval_pred(h, &env), Some(true), "hypothesis {}", expr_to_string(h));
        } else {
            let (n, ty) = po.domains.iter().find(|(n, _)| names == [n.clone()]).expect("typing hypothesis");
            assert!(typing_hyps(n, ty).contains(h));
        }
    }
    assert_ne!(eval_pred(&po.goal, &env), Some(true));

    let outcome = if matches!(po.kind, PoKind::InitEstablishes) || po.hypotheses.is_empty() {
        interpret_init(tm).map_err(|_| ()).and_then(|s| match crate::b0::eval_invariant(tm, &s) {
            Ok(true) => Ok(()),
            _ => Err(()),
        })
    } else {
        let state = MachineState {
            values: tm.state.iter().map(|s| env.get(&s.name).cloned().unwrap_or_else(|| Value::zero(&s.ty))).collect(),
        };
        let inputs: Vec<Value> =
            tm.inputs.iter().map(|i| env.get(&i.name).cloned().unwrap_or_else(|| Value::zero(&i.ty))).collect();
        interpret_cycle(tm, &state, &inputs).map_err(|_| ()).and_then(|(s, _)| {
            match crate::b0::eval_invariant(tm, &s) {
                Ok(true) => Ok(()),
                _ => Err(()),
            }
        })
    };
    assert!(outcome.is_err(), "PO {} {}: witness {} runs cleanly", po.id, po.kind, witness_text(w));
}

#[test]
fn counterexamples_are_genuine() {
    let mut seen = 0;
    for (_, src) in SEEDED {
        let tm = checked(src);
        let pos = generate_pos(&tm);
        for (po, r) in pos.iter().zip(prove_all(&pos, DEFAULT_BUDGET)) {
            if let ProofStatus::Counterexample(w) = &r.status {
                assert_genuine(&tm, po, w);
                seen += 1;
            }
        }
    }
    assert!(seen >= 5);
}

#[test]
fn larger_budget_never_loses_a_proof() {
    for (name, src) in GOOD.iter().chain(SEEDED) {
        let pos = generate_pos(&checked(src));
        for po in &pos {
            let mut was_proved = false;
            for budget in [1, 2, 16, 1 << 10, 1 << 16, 1 << 20, 1 << 24] {
                let proved = prove(po, budget).status.is_proved();
                assert!(proved || !was_proved, "{name}: PO {} lost at budget {budget}", po.id);
                was_proved = proved;
            }
        }
    }
}

#[test]
fn loop_sites_conjoin_iterations() {
    let src = "MACHINE M INPUTS i: INT(0..3) VARS a: ARRAY 4 OF INT(0..9) INVARIANT true \
               INIT FOR k := 0 TO 3 DO a(k) := k END \
               CYCLE FOR k := 0 TO 2 DO a(k + i) := a(k) END END";
    let pos = generate_pos(&checked(src));
    // One site in INIT, the written and the read element in CYCLE.
    let idx: Vec<_> = pos.iter().filter(|p| p.kind == PoKind::WdIndex).collect();
    assert_eq!(idx.len(), 3);
    let idx = &idx[1..];
    assert_eq!(
        expr_to_string(&idx[0].goal),
        "0 <= 0 + i & 0 + i < 4 & (0 <= 1 + i & 1 + i < 4) & (0 <= 2 + i & 2 + i < 4)"
    );
    let r = prove(idx[0], DEFAULT_BUDGET);
    assert_eq!(r.status, ProofStatus::Counterexample(vec![("i".into(), Value::Int(2))]));
}

#[test]
fn array_update_is_printed_as_override() {
    let src = "MACHINE M VARS a: ARRAY 2 OF INT(0..3), s: INT(0..3) INVARIANT a(0) <= 3 \
               INIT a(0) := 1; a(1) := 2; s := 0 CYCLE a(s mod 2) := 3 END";
    let pos = generate_pos(&checked(src));
    assert_eq!(expr_to_string(&pos[1].goal), "(a <+ {s mod 2 |-> 3})(0) <= 3");
    assert!(prove(&pos[1], DEFAULT_BUDGET).status.is_proved());
}

#[test]
fn xml_export() {
    let empty = export_pos("M", &[], &[]).unwrap();
    assert_eq!(empty, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pos model=\"M\"/>\n");

    let tm = checked(GOOD[1].1);
    let pos = generate_pos(&tm);
    let results = prove_all(&pos, DEFAULT_BUDGET);
    let doc = export_pos("Blinker", &pos, &results).unwrap();
    assert_eq!(doc.matches("<po ").count(), 3);
    assert_eq!(doc.matches("status=\"proved\"").count(), 3);
    assert!(doc.contains("<po id=\"3\" kind=\"WD_RANGE\" loc=\"12:15\" status=\"proved\">"), "{doc}");
    assert!(doc.contains("<hyp>0 &lt;= cnt &amp; cnt &lt;= 3</hyp>"), "{doc}");
    assert_eq!(doc, export_pos("Blinker", &pos, &results).unwrap());

    let p = po(&["y >= 0"], "y /= 0", &[("y", B0Type::int(0, 70000))]);
    let r = prove(&p, 10);
    assert_eq!(r.status, ProofStatus::Unproven);
    let doc = export_pos("M", std::slice::from_ref(&p), std::slice::from_ref(&r)).unwrap();
    assert!(doc.contains("status=\"unproved\""));
    assert!(doc.contains("<hyp>y &gt;= 0</hyp>\n    <goal>y /= 0</goal>"));

    let r = prove(&p, DEFAULT_BUDGET);
    let doc = export_pos("M", std::slice::from_ref(&p), std::slice::from_ref(&r)).unwrap();
    assert!(doc.contains("status=\"counterexample\"") && doc.contains("<witness>y=0</witness>"));

    let err = export_pos("M", &pos, &results[..2]).unwrap_err();
    assert_eq!(err, ExportError::MismatchedIds { missing: vec![3], unexpected: vec![] });
}

#[test]
fn witness_text_flattens_arrays() {
    let w = vec![("a".into(), Value::Array(vec![Value::Int(1), Value::Int(0)])), ("b".into(), Value::Bool(true))];
    assert_eq!(witness_text(&w), "a(0)=1,a(1)=0,b=true");
}

fn arb_int_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(-6i64..7).prop_map(Expr::Int), Just(Expr::var("x")), Just(Expr::var("y"))];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let op = prop_oneof![
            Just(ArithOp::Add),
            Just(ArithOp::Sub),
            Just(ArithOp::Mul),
            Just(ArithOp::Div),
            Just(ArithOp::Mod)
        ];
        prop_oneof![
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::arith(o, a, b)),
            inner.prop_map(|e| Expr::Neg(Box::new(e))),
        ]
    })
}

fn arb_pred() -> impl Strategy<Value = Expr> {
    let rel = prop_oneof![
        Just(RelOp::Eq),
        Just(RelOp::Ne),
        Just(RelOp::Lt),
        Just(RelOp::Le),
        Just(RelOp::Gt),
        Just(RelOp::Ge)
    ];
    let atom = (rel, arb_int_expr(), arb_int_expr()).prop_map(|(r, a, b)| Expr::rel(r, a, b));
    atom.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::or(a, b)),
            inner.prop_map(Expr::not),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Brute force over the whole domain is the oracle for both provers.
    #[test]
    fn provers_agree_with_brute_force(goal in arb_pred(), lo in -4i64..2, w in 0i64..6) {
        let doms = vec![("x".to_string(), B0Type::int(lo, lo + w)), ("y".to_string(), B0Type::int(-2, 3))];
        let p = ProofObligation { id: 1, kind: PoKind::WdRange, loc: Pos::default(), hypotheses: vec![], goal: goal.clone(), domains: doms };
        let mut valid = true;
        for x in lo..=lo + w {
            for y in -2..=3 {
                let env: Valuation = [("x".to_string(), Value::Int(x)), ("y".to_string(), Value::Int(y))].into();
                valid &= eval_pred(&goal, &env) == Some(true);
            }
        }
        match interval_truth(&p) {
            Truth::True => prop_assert!(valid),
            Truth::False => prop_assert!(!valid),
            Truth::Unknown => {}
        }
        match prove(&p, DEFAULT_BUDGET).status {
            ProofStatus::ProvedInterval | ProofStatus::ProvedEnum => prop_assert!(valid),
            ProofStatus::Counterexample(w) => {
                prop_assert!(!valid);
                let env: Valuation = w.into_iter().collect();
                prop_assert_ne!(eval_pred(&goal, &env), Some(true));
            }
            ProofStatus::Unproven => prop_assert!(false, "small domain left unproven"),
        }
    }
}
