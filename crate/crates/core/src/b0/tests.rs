use proptest::prelude::*;

use super::ast::*;
use super::*;

const BLINKER: &str = include_str!("../../corpus/blinker.b0");

fn checked(src: &str) -> TypedModel {
    typecheck(&parse(src).unwrap()).unwrap()
}

fn blinker_state(tm: &TypedModel, cnt: i64, lamp: bool) -> MachineState {
    let mut s = MachineState::zeroed(tm);
    s.values[tm.state_index("cnt").unwrap()] = Value::Int(cnt);
    s.values[tm.state_index("lamp").unwrap()] = Value::Bool(lamp);
    s
}

#[test]
fn parses_blinker() {
    let m = parse(BLINKER).unwrap();
    assert_eq!(m.name, "Blinker");
    assert_eq!((m.inputs.len(), m.outputs.len(), m.vars.len()), (1, 1, 1));
    assert_eq!(m.vars[0].ty, B0Type::int(0, 3));
    assert_eq!(m.cycle.len(), 2);
}

#[test]
fn empty_source_is_a_syntax_error_at_origin() {
    let err = parse("").unwrap_err();
    assert_eq!(err.pos(), Pos::new(1, 1));
    assert!(matches!(err, ParseError::Syntax { ref expected, .. } if expected == &["MACHINE"]));
}

#[test]
fn duplicate_declaration_is_rejected() {
    let src = "MACHINE M VARS x: BOOL, x: BOOL INVARIANT true INIT x := true CYCLE END";
    assert!(matches!(parse(src), Err(ParseError::Duplicate { ref name, .. }) if name == "x"));
    let across = "MACHINE M INPUTS x: BOOL VARS x: BOOL INVARIANT true INIT x := true CYCLE END";
    assert!(matches!(parse(across), Err(ParseError::Duplicate { .. })));
}

#[test]
fn syntax_error_reports_position_and_expectations() {
    let err = parse("MACHINE M\nVARS x: BOOL\nINVARIANT true\nINIT x := \nCYCLE END").unwrap_err();
    assert_eq!(err.pos(), Pos::new(5, 1));
    let err = parse("MACHINE M INVARIANT true INIT CYCLE x := 1 y := 2 END").unwrap_err();
    match err {
        ParseError::Syntax { expected, .. } => assert!(expected.contains(&";".to_string())),
        other => panic!("{other:?}"),
    }
}

#[test]
fn canonical_order_is_vars_then_outputs() {
    let tm = checked(BLINKER);
    assert_eq!(tm.state_index("cnt"), Some(0));
    assert_eq!(tm.state_index("lamp"), Some(1));
}

#[test]
fn type_mismatch_bool_into_int() {
    let src = "MACHINE M VARS x: INT(0..3) INVARIANT true INIT x := 0 CYCLE x := true END";
    assert!(matches!(typecheck(&parse(src).unwrap()), Err(TypeError::Mismatch { .. })));
}

#[test]
fn non_literal_loop_bound() {
    let src = "MACHINE M VARS n: INT(0..3), a: ARRAY 4 OF BOOL INVARIANT true \
               INIT n := 0; FOR i := 0 TO 3 DO a(i) := false END \
               CYCLE FOR k := 0 TO n DO a(k) := true END END";
    assert!(matches!(typecheck(&parse(src).unwrap()), Err(TypeError::NonLiteralBound { .. })));
}

#[test]
fn assignment_to_input_rejected() {
    let src = "MACHINE M INPUTS b: BOOL INVARIANT true INIT CYCLE b := true END";
    assert!(matches!(typecheck(&parse(src).unwrap()), Err(TypeError::AssignToInput { .. })));
}

#[test]
fn use_before_init_rejected() {
    let src = "MACHINE M VARS x: INT(0..3), y: INT(0..3) INVARIANT true INIT y := x; x := 0 CYCLE END";
    assert!(matches!(typecheck(&parse(src).unwrap()), Err(TypeError::UseBeforeInit { .. })));
    let missing = "MACHINE M VARS x: INT(0..3) INVARIANT true INIT CYCLE END";
    assert!(matches!(typecheck(&parse(missing).unwrap()), Err(TypeError::NotInitialised { .. })));
    let partial = "MACHINE M VARS a: ARRAY 3 OF BOOL INVARIANT true INIT FOR k := 0 TO 1 DO a(k) := true END CYCLE END";
    assert!(matches!(typecheck(&parse(partial).unwrap()), Err(TypeError::NotInitialised { .. })));
    let conditional = "MACHINE M INPUTS b: BOOL VARS x: BOOL INVARIANT true INIT IF x THEN x := true END CYCLE END";
    assert!(typecheck(&parse(conditional).unwrap()).is_err());
}

#[test]
fn init_through_both_branches_counts() {
    let src = "MACHINE M VARS x: BOOL, y: BOOL INVARIANT true \
               INIT y := false; IF y THEN x := true ELSE x := false END CYCLE END";
    assert!(typecheck(&parse(src).unwrap()).is_ok());
}

#[test]
fn blinker_cycle_examples() {
    let tm = checked(BLINKER);
    let (s, out) = interpret_cycle(&tm, &blinker_state(&tm, 1, false), &[Value::Bool(true)]).unwrap();
    assert_eq!(s, blinker_state(&tm, 2, true));
    assert_eq!(out, vec![Value::Bool(true)]);

    let (s, out) = interpret_cycle(&tm, &blinker_state(&tm, 0, false), &[Value::Bool(false)]).unwrap();
    assert_eq!(s, blinker_state(&tm, 0, false));
    assert_eq!(out, vec![Value::Bool(false)]);
}

#[test]
fn blinker_init() {
    let tm = checked(BLINKER);
    assert_eq!(interpret_init(&tm).unwrap(), blinker_state(&tm, 0, false));
}

#[test]
fn empty_cycle_is_identity() {
    let src = "MACHINE M VARS x: INT(0..9), f: BOOL INVARIANT true INIT x := 3; f := true CYCLE END";
    let tm = checked(src);
    let s = MachineState { values: vec![Value::Int(7), Value::Bool(false)] };
    assert_eq!(interpret_cycle(&tm, &s, &[]).unwrap().0, s);
}

#[test]
fn runtime_errors_carry_locations() {
    let src = "MACHINE M INPUTS d: INT(0..2) OUTPUTS q: INT(0..9) INVARIANT true INIT q := 0\nCYCLE\n  q := 9 div d\nEND";
    let tm = checked(src);
    let s = interpret_init(&tm).unwrap();
    assert_eq!(interpret_cycle(&tm, &s, &[Value::Int(0)]), Err(RuntimeError::DivByZero { pos: Pos::new(3, 3) }));

    let src = "MACHINE M INPUTS i: INT(0..4) VARS a: ARRAY 4 OF INT(0..1) INVARIANT true \
               INIT FOR k := 0 TO 3 DO a(k) := 0 END CYCLE a(i) := 1 END";
    let tm = checked(src);
    let s = interpret_init(&tm).unwrap();
    assert!(matches!(interpret_cycle(&tm, &s, &[Value::Int(4)]), Err(RuntimeError::Index { index: 4, .. })));

    let src = "MACHINE M VARS x: INT(0..3) INVARIANT true INIT x := 0 CYCLE x := x + 1 END";
    let tm = checked(src);
    let s = MachineState { values: vec![Value::Int(3)] };
    assert!(matches!(interpret_cycle(&tm, &s, &[]), Err(RuntimeError::Range { value: 4, .. })));
}

#[test]
fn euclidean_division() {
    let src = "MACHINE M INPUTS a: INT(-9..9) OUTPUTS q: INT(-9..9), r: INT(0..2) INVARIANT true \
               INIT q := 0; r := 0 CYCLE q := a div 3; r := a mod 3 END";
    let tm = checked(src);
    let s = interpret_init(&tm).unwrap();
    let (_, out) = interpret_cycle(&tm, &s, &[Value::Int(-7)]).unwrap();
    assert_eq!(out, vec![Value::Int(-3), Value::Int(2)]);
}

#[test]
fn snapshot_examples() {
    let tm = checked(BLINKER);
    assert_eq!(canonical_snapshot(&blinker_state(&tm, 2, true)), vec![0x02, 0x00, 0x00, 0x00, 0x01]);
    assert_eq!(canonical_snapshot(&MachineState { values: vec![] }), Vec::<u8>::new());

    let a = canonical_snapshot(&blinker_state(&tm, 3, true));
    let b = canonical_snapshot(&blinker_state(&tm, 3, false));
    let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    assert_eq!(diff, vec![a.len() - 1]);
}

#[test]
fn snapshot_is_injective_on_small_models() {
    let src = "MACHINE M OUTPUTS o: BOOL VARS x: INT(-2..2), a: ARRAY 2 OF INT(0..2), b: BOOL \
               INVARIANT true INIT x := 0; a(0) := 0; a(1) := 0; b := false; o := false CYCLE END";
    let tm = checked(src);
    let domains: Vec<Vec<Value>> = tm.state.iter().map(|s| Value::enumerate(&s.ty)).collect();
    let mut states = vec![MachineState { values: vec![] }];
    for d in &domains {
        states = states
            .into_iter()
            .flat_map(|s| {
                d.iter().map(move |v| {
                    let mut s = s.clone();
                    s.values.push(v.clone());
                    s
                })
            })
            .collect();
    }
    assert_eq!(states.len(), 5 * 9 * 2 * 2);
    let mut seen = std::collections::HashMap::new();
    for s in &states {
        if let Some(prev) = seen.insert(canonical_snapshot(s), s.clone()) {
            panic!("{prev:?} and {s:?} share a snapshot");
        }
    }
}

#[test]
fn frame_property_and_determinism() {
    let src = include_str!("../../corpus/traffic.b0");
    let tm = checked(src);
    let s = interpret_init(&tm).unwrap();
    for request in [false, true] {
        let a = interpret_cycle(&tm, &s, &[Value::Bool(request)]).unwrap();
        let b = interpret_cycle(&tm, &s, &[Value::Bool(request)]).unwrap();
        assert_eq!(a, b);
    }
    // `x` is never assigned in the cycle, so it must survive unchanged.
    let src = "MACHINE M INPUTS i: BOOL OUTPUTS o: BOOL VARS x: INT(0..5) INVARIANT true \
               INIT x := 4; o := false CYCLE o := i END";
    let tm = checked(src);
    for x in 0..=5 {
        let s = MachineState { values: vec![Value::Int(x), Value::Bool(true)] };
        let (post, _) = interpret_cycle(&tm, &s, &[Value::Bool(false)]).unwrap();
        assert_eq!(post.values[0], Value::Int(x));
    }
}

#[test]
fn pretty_prints_overrides_for_obligations() {
    let e = Expr::index(
        Expr::Store(Box::new(Expr::var("a")), Box::new(Expr::var("i")), Box::new(Expr::Int(1))),
        Expr::Int(0),
    );
    assert_eq!(expr_to_string(&e), "(a <+ {i |-> 1})(0)");
}

#[test]
fn corpus_round_trips() {
    for src in [BLINKER, include_str!("../../corpus/shift.b0"), include_str!("../../corpus/traffic.b0")] {
        let m = parse(src).unwrap();
        let again = parse(&model_to_string(&m)).unwrap();
        assert_eq!(again.without_positions(), m.without_positions());
    }
}

fn arb_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "cnt", "x_1", "lamp", "q"]).prop_map(str::to_string)
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Expr::Bool),
        (-50i64..50).prop_map(Expr::Int),
        arb_name().prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (arb_name(), inner.clone()).prop_map(|(n, i)| Expr::index(Expr::Var(n), i)),
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Mod]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::arith(op, a, b)),
            (
                prop::sample::select(vec![RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::rel(op, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::or(a, b)),
            inner.prop_map(Expr::not),
        ]
    })
}

fn arb_type() -> impl Strategy<Value = B0Type> {
    let scalar = prop_oneof![Just(B0Type::Bool), (-5i64..5, 0i64..10).prop_map(|(lo, w)| B0Type::int(lo, lo + w))];
    prop_oneof![scalar.clone(), (1u32..6, scalar).prop_map(|(n, t)| B0Type::array(n, t))]
}

fn arb_stmt() -> impl Strategy<Value = Stmt> {
    let assign = (arb_name(), prop::option::of(arb_expr()), arb_expr()).prop_map(|(n, idx, e)| Stmt {
        kind: StmtKind::Assign(
            match idx {
                Some(i) => Target::Elem(n, i),
                None => Target::Var(n),
            },
            e,
        ),
        pos: Pos::default(),
    });
    assign.prop_recursive(3, 16, 3, |inner| {
        let block = prop::collection::vec(inner, 0..3);
        prop_oneof![
            (prop::collection::vec((arb_expr(), block.clone()), 1..3), prop::option::of(block.clone())).prop_map(
                |(arms, els)| Stmt { kind: StmtKind::If(arms, els), pos: Pos::default() }
            ),
            (arb_name(), -3i64..3, 0i64..5, block).prop_map(|(var, from, to, body)| Stmt {
                kind: StmtKind::For { var, from: Expr::Int(from), to: Expr::Int(to), body },
                pos: Pos::default(),
            }),
        ]
    })
}

fn arb_model() -> impl Strategy<Value = Model> {
    let decls = |prefix: &'static str| {
        prop::collection::vec(arb_type(), 0..3).prop_map(move |tys| {
            tys.into_iter()
                .enumerate()
                .map(|(i, ty)| Decl { name: format!("{prefix}{i}"), ty, pos: Pos::default() })
                .collect::<Vec<_>>()
        })
    };
    (
        decls("in"),
        decls("out"),
        decls("v"),
        arb_expr(),
        prop::collection::vec(arb_stmt(), 0..3),
        prop::collection::vec(arb_stmt(), 0..4),
    )
        .prop_map(|(inputs, outputs, vars, invariant, init, cycle)| Model {
            name: "Gen".into(),
            inputs,
            outputs,
            vars,
            invariant,
            init,
            cycle,
            init_pos: Pos::default(),
            cycle_pos: Pos::default(),
        })
}

proptest! {
    #[test]
    fn grammar_round_trip(m in arb_model()) {
        let text = model_to_string(&m);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.without_positions(), m);
    }

    #[test]
    fn expression_round_trip(e in arb_expr()) {
        let text = expr_to_string(&e);
        prop_assert_eq!(parse_expr(&text).unwrap(), e);
    }
}
