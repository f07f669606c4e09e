use std::collections::BTreeSet;

use hcsp::syntax::*;
use proptest::prelude::*;

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn watertank() -> Model {
    parse_model(hcsp::models::WATERTANK).unwrap()
}

fn def<'a>(m: &'a Model, name: &str) -> &'a ProcessTerm {
    &m.defs.iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn parse_examples() {
    assert_eq!(parse("skip").unwrap(), ProcessTerm::Skip);
    assert_eq!(
        parse("v := 1; d := 4.5").unwrap(),
        ProcessTerm::seq(ProcessTerm::assign("v", Expr::Num(1.0)), ProcessTerm::assign("d", Expr::Num(4.5)))
    );
    let m = watertank();
    let ProcessTerm::Parallel(l, r) = &m.system else { panic!("system is not parallel") };
    assert_eq!(**l, *def(&m, "Watertank"));
    assert_eq!(**r, *def(&m, "Controller"));
    assert_eq!(m.bounds["horizon"], 40);
    assert_eq!(m.bounds["periods"], 80);
    assert_eq!(m.system_names.as_deref(), Some(&["Watertank".to_string(), "Controller".to_string()][..]));
}

#[test]
fn repeat_bounds_come_from_header() {
    let mut m = watertank();
    m.set_bound("horizon", 3);
    let mut counts = Vec::new();
    fn walk(p: &ProcessTerm, out: &mut Vec<(Option<String>, u32)>) {
        match p {
            ProcessTerm::Repeat(body, b) => {
                out.push((b.name.clone(), b.count));
                walk(body, out);
            }
            ProcessTerm::Seq(a, b) | ProcessTerm::Parallel(a, b) | ProcessTerm::IntChoice(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            ProcessTerm::Guard(_, p) => walk(p, out),
            _ => {}
        }
    }
    walk(&m.system, &mut counts);
    assert_eq!(counts, vec![(Some("horizon".into()), 3), (Some("periods".into()), 80)]);
}

#[test]
fn parse_errors_carry_position() {
    let err = parse("x := 1;\n  y := )").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(err.col > 1);
    assert!(parse("(skip").is_err());
    assert!(parse("skip*{0").is_err());
}

#[test]
fn unknown_declaration_is_rejected() {
    let text = "#vars x=1, y=undefined_thing\nP ::= x := 2\nsystem ::= P\n";
    assert!(parse_model(text).is_err());
}

#[test]
fn ode_domain_made_strict() {
    let (p, warnings) = parse_in_scope("<x_dot = -x & x >= 1>", &Scope::default()).unwrap();
    assert_eq!(p, parse("<x_dot = -x & x > 1>").unwrap());
    assert_eq!(warnings.len(), 1);
}

#[test]
fn vars_examples() {
    assert!(vars(&ProcessTerm::Skip).is_empty());
    assert_eq!(vars(&parse("x := y + 1").unwrap()), set(&["x", "y"]));
    let m = watertank();
    assert_eq!(vars(def(&m, "Watertank")), set(&["v", "d"]));
    assert_eq!(vars(def(&m, "Controller")), set(&["x", "y"]));
}

#[test]
fn channels_examples() {
    assert!(channels(&ProcessTerm::Skip).is_empty());
    assert_eq!(channels(&parse("wl?x").unwrap()), set(&["wl"]));
    assert_eq!(channels(&watertank().system), set(&["wl", "cv"]));
    assert!(open_channels(&watertank().system).is_empty());
}

#[test]
fn validate_examples() {
    let d = validate(&parse("x := 1 || x := 2").unwrap());
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].kind, DiagnosticKind::SharedVariable { var: "x".into() });
    assert!(validate(&watertank().system).is_empty());
    let d = validate(&parse("c!1 || c!2").unwrap());
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].kind, DiagnosticKind::SharedChannelEnd { chan: "c".into(), dir: Dir::Output });
}

#[test]
fn validate_reports_paths() {
    let d = validate(&parse("x := 1; (y := 2 || z := 3)").unwrap());
    assert!(d.iter().any(|d| d.kind == DiagnosticKind::NestedParallel && !d.path.is_empty()), "{d:?}");
    let d = validate(&parse("<x_dot = 1, x_dot = 2 & true>").unwrap());
    assert!(d.iter().any(|d| d.kind == DiagnosticKind::DuplicateOdeVariable { var: "x".into() }));
}

#[test]
fn model_printout_reparses() {
    let m = watertank();
    let again = parse_model(&m.to_hcsp()).unwrap();
    assert_eq!(again.system, m.system);
    assert_eq!(again.init, m.init);
    assert_eq!(again.bounds, m.bounds);
    assert_eq!(again.to_hcsp(), m.to_hcsp());
}

#[test]
fn example_round_trips() {
    for text in [
        "x := 0.0125 * -x",
        "x := --x",
        "x := 2 - (3 - 4)",
        "x := 2 ^ 3 ^ 2",
        "x := (2 ^ 3) ^ 2",
        "x := 1 / (2 * 3)",
        "x := -(2)",
        "x := -2 ^ 2",
        "x := (-2) ^ 2",
        "[c?x -> skip [] d!1 -> x := 1]",
        "<x_dot = -x & x > 0> |> [c?x -> skip]",
        "skip |~| stop",
        "(skip; skip)*{3}",
        "not (x > 1 and y < 2) or c? -> skip",
        "(x, y) := (y, x)",
        "<f: x_dot = y, y_dot = -x & x < 1 or y > 2>",
    ] {
        let p = parse(text).unwrap();
        assert_eq!(parse(&p.to_string()).unwrap(), p, "{text}");
    }
}

// Structural fuzzer over the printable fragment of the grammar.

fn var_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "y", "z", "d", "v"]).prop_map(String::from)
}

fn chan_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["c", "wl", "cv"]).prop_map(String::from)
}

fn literal() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..100).prop_map(f64::from),
        (0u32..10_000).prop_map(|k| f64::from(k) / 1000.0),
        0.0..1e6f64,
        1e-12..1e-3f64,
        -1e3..0.0f64,
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![literal().prop_map(Expr::Num), var_name().prop_map(Expr::Var)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Sqrt(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
        ]
    })
}

fn cmp(ops: Vec<CmpOp>) -> impl Strategy<Value = BoolExpr> {
    (prop::sample::select(ops), expr(), expr()).prop_map(|(op, a, b)| BoolExpr::cmp(op, a, b))
}

fn bool_expr() -> impl Strategy<Value = BoolExpr> {
    let all = vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];
    let leaf = prop_oneof![
        Just(BoolExpr::True),
        Just(BoolExpr::False),
        cmp(all),
        (chan_name(), prop::bool::ANY)
            .prop_map(|(c, inp)| BoolExpr::Flag(format!("{c}{}", if inp { '?' } else { '!' }))),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| BoolExpr::Not(Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| BoolExpr::or(a, b)),
        ]
    })
}

/// ODE domains: open sets, so strict atoms only.
fn domain() -> impl Strategy<Value = BoolExpr> {
    let leaf = prop_oneof![Just(BoolExpr::True), cmp(vec![CmpOp::Lt, CmpOp::Gt])];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| BoolExpr::or(a, b)),
        ]
    })
}

fn ode() -> impl Strategy<Value = OdeSpec> {
    (
        prop::sample::subsequence(vec!["x", "y", "z"], 1..=3),
        prop::collection::vec(expr(), 3),
        prop::option::of("[fg][0-9]"),
    )
        .prop_map(|(vs, es, name)| {
            let mut spec = OdeSpec::new(vs.into_iter().map(String::from).zip(es).collect());
            spec.name = name;
            spec
        })
}

fn event() -> impl Strategy<Value = CommEvent> {
    prop_oneof![
        (chan_name(), var_name()).prop_map(|(chan, var)| CommEvent::Input { chan, var }),
        (chan_name(), expr()).prop_map(|(chan, expr)| CommEvent::Output { chan, expr }),
    ]
}

fn sequential() -> impl Strategy<Value = ProcessTerm> {
    let leaf = prop_oneof![
        Just(ProcessTerm::Skip),
        Just(ProcessTerm::Stop),
        (var_name(), expr()).prop_map(|(v, e)| ProcessTerm::Assign(v, e)),
        prop::collection::vec((var_name(), expr()), 2..4).prop_map(ProcessTerm::VecAssign),
        expr().prop_map(ProcessTerm::Wait),
        event().prop_map(|ev| ev.as_process()),
        (ode(), domain()).prop_map(|(s, b)| ProcessTerm::Ode(s, b)),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let branches = prop::collection::vec((event(), inner.clone()), 1..4).boxed();
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ProcessTerm::seq(a, b)),
            (bool_expr(), inner.clone()).prop_map(|(b, p)| ProcessTerm::guard(b, p)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ProcessTerm::int_choice(a, b)),
            (inner.clone(), 1u32..50).prop_map(|(p, n)| ProcessTerm::repeat(p, n)),
            branches.clone().prop_map(ProcessTerm::ExtChoice),
            (ode(), domain(), branches).prop_map(|(s, b, br)| ProcessTerm::OdeInterrupt(s, b, br)),
        ]
    })
}

fn process() -> impl Strategy<Value = ProcessTerm> {
    prop_oneof![
        2 => sequential(),
        1 => (sequential(), sequential()).prop_map(|(a, b)| ProcessTerm::parallel(a, b)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn print_then_parse_is_identity(p in process()) {
        let text = p.to_string();
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, p, "{}", text);
    }

    #[test]
    fn indented_print_reparses(p in process()) {
        let text = pretty(&p, 0);
        prop_assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn validate_is_pure(p in process()) {
        prop_assert_eq!(validate(&p), validate(&p.clone()));
    }

    #[test]
    fn parallel_vars_split(a in sequential(), b in sequential()) {
        let par = ProcessTerm::parallel(a.clone(), b.clone());
        let plain = |p: &ProcessTerm| vars(p).into_iter().filter(|v| !is_readiness_var(v)).collect::<BTreeSet<_>>();
        let (va, vb) = (plain(&a), plain(&b));
        if validate(&par).is_empty() {
            prop_assert!(va.is_disjoint(&vb));
            prop_assert_eq!(plain(&par), va.union(&vb).cloned().collect::<BTreeSet<_>>());
        }
    }
}
