mod common;

use common::*;
use futurestep::executor::{explore, parse_trace, render_trace, replay_trace, ExploreOptions, ReplayOptions};
use futurestep::futures::collapse_labels;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn graph_invariants_hold(prog in gen_program()) {
        let p = prepare_generated(&prog);
        let ex = explore(&p, p.initial_futures(), &ExploreOptions::default()).unwrap();
        let v = space_violations(&p, &ex.space);
        prop_assert!(v.is_empty(), "{:?}\n{}", v.first(), render_program(&prog));
    }

    #[test]
    fn witnesses_replay(prog in gen_program()) {
        let p = prepare_generated(&prog);
        let ex = explore(&p, p.initial_futures(), &ExploreOptions::default()).unwrap();
        for (_, trace) in ex.terminals().take(8) {
            let text = render_trace(&trace);
            let back = parse_trace(&text).unwrap();
            prop_assert_eq!(&back, &trace);
            for strict in [false, true] {
                let v = replay_trace(&p, p.initial_futures(), &back, &ReplayOptions { strict, ..Default::default() }).unwrap();
                prop_assert!(v.is_allowed(), "{}\n{}\n{}", v, text, render_program(&prog));
            }
        }
    }

    #[test]
    fn future_representations_agree(prog in gen_program()) {
        let p = prepare_generated(&prog);
        let tf = p.initial_futures();
        let a = explore(&p, tf.clone(), &ExploreOptions::default()).unwrap();
        let b = explore(&p, tf.flatten(), &ExploreOptions::default()).unwrap();
        prop_assert_eq!(&a.report.outcomes, &b.report.outcomes);
        if let Ok(lf) = collapse_labels(&tf.flatten()) {
            let c = explore(&p, lf, &ExploreOptions::default()).unwrap();
            prop_assert_eq!(a.register_outcomes(), c.register_outcomes());
        }
    }

    #[test]
    fn parallel_matches_sequential(prog in gen_program()) {
        let p = prepare_generated(&prog);
        let a = explore(&p, p.initial_futures(), &ExploreOptions::default()).unwrap();
        let b = explore(&p, p.initial_futures(), &ExploreOptions { jobs: 3, ..Default::default() }).unwrap();
        prop_assert_eq!(a.report, b.report);
    }
}

#[test]
fn oracle_matches_explorer_on_straight_line_programs() {
    // r1 := [x]; [y] := 1 ||| r2 := [y]; [x] := r2
    let oracle: std::collections::BTreeSet<_> = oracle_outcomes(
        &[("x", 0), ("y", 0)],
        &[
            vec![OStmt::Load("r1", "x"), OStmt::Store("y", OExpr::Const(1))],
            vec![OStmt::Load("r2", "y"), OStmt::Store("x", OExpr::Reg("r2"))],
        ],
    )
    .into_iter()
    .map(|m| (m["r1"], m["r2"]))
    .collect();
    let p = futurestep::executor::prepare(
        &futurestep::lang::parse_program(
            "init: x = 0, y = 0\n1: r1 := [x]; 2: [y] := 1 ||| 3: r2 := [y]; 4: [x] := r2",
        )
        .unwrap(),
        &Default::default(),
    )
    .unwrap();
    let ex = explore(&p, p.initial_futures(), &ExploreOptions::default()).unwrap();
    let got: std::collections::BTreeSet<_> = ex
        .register_outcomes()
        .into_iter()
        .map(|r| (r[&1].get(&"r1".into()), r[&2].get(&"r2".into())))
        .collect();
    assert_eq!(got, oracle);
    assert!(got.contains(&(1, 1)));
}
