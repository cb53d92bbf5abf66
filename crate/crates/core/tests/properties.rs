mod common;

use common::*;
use dgoim::baselines::cbn_run;
use dgoim::check::{check_run, CheckOptions};
use dgoim::corpus::TermGen;
use dgoim::machine::{run, Outcome};
use dgoim::submachine::{evaluate, evaluate_with, replay_counts, EnrichedTerm, StepOutcome};
use dgoim::term::{alpha_eq, free_vars, parse, render, Name, Strategy};
use dgoim::translate::translate_term;
use proptest::prelude::*;

fn strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(Strategy::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>(), s in strategy(), size in 1usize..40) {
        let mut g = TermGen::new(seed, s);
        let t = g.term_of_size(size, &[Name::new("free")]);
        let back = parse(&render(&t), s).unwrap();
        prop_assert!(alpha_eq(&back, &t), "{}", render(&t));
    }

    #[test]
    fn free_variables_of_plugged_terms(seed in any::<u64>(), s in strategy(), k in 0usize..4) {
        let (e, t) = context_and_term(seed, s);
        prop_assert!(fv_plug_equation(&e, &t));
        prop_assert!(fv_sum_equation(&e, &free_vars(&t), &fresh_multiset(k)));
    }

    #[test]
    fn answer_context_decomposition(seed in any::<u64>(), s in strategy(), size in 1usize..12) {
        let mut g = TermGen::new(seed, s);
        let a = answer_context(&mut g, &[Name::new("y")]);
        let mut scope = vec![Name::new("y")];
        scope.extend(hole_binders(&a));
        let t = g.term_of_size(size, &scope);
        prop_assert!(decomposition_answer(&a, &t), "{}", render(&a.plug(t.clone())));
    }

    #[test]
    fn nested_context_decomposition(seed in any::<u64>(), s in strategy()) {
        let (e, t) = context_and_term(seed, s);
        let (e2, _) = context_and_term(seed ^ 0x9e37_79b9, s);
        prop_assert!(decomposition_nested(&e, &e2, &free_vars(&t)));
    }

    #[test]
    fn uncaptured_variables_pass_through(seed in any::<u64>(), s in strategy(), k in 1usize..4) {
        let (e, t) = context_and_term(seed, s);
        prop_assert!(decomposition_uncaptured(&e, &free_vars(&t), &fresh_multiset(k)));
    }

    #[test]
    fn empty_context_is_a_unit(seed in any::<u64>(), s in strategy()) {
        let (_, t) = context_and_term(seed, s);
        prop_assert!(decomposition_unit(&t));
    }

    #[test]
    fn one_contraction_per_binder(seed in any::<u64>(), s in strategy(), size in 3usize..50) {
        let t = TermGen::new(seed, s).term_of_size(size, &[]);
        prop_assert!(one_con_per_binder(&t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_window_stays_in_an_evaluation_context(seed in any::<u64>(), s in strategy()) {
        let t = TermGen::new(seed, s).closed_term(25);
        let mut m = EnrichedTerm::inject(&t).unwrap();
        for _ in 0..2000 {
            prop_assert!(m.outer.is_evaluation_context());
            let rules = m.applicable_rules();
            if m.is_answer() {
                prop_assert!(rules.is_empty());
                break;
            }
            prop_assert_eq!(rules.len(), 1);
            prop_assert!(matches!(m.step(), StepOutcome::Next(_)));
        }
    }

    #[test]
    fn trace_replay_recovers_counts(seed in any::<u64>(), s in strategy()) {
        let t = TermGen::new(seed, s).closed_term(25);
        if let Ok(rep) = evaluate_with(&t, 5000, true) {
            let trace = rep.trace.unwrap();
            prop_assert_eq!(trace.len() as u64, rep.steps);
            prop_assert_eq!(replay_counts(&trace), rep.counts);
        }
    }

    #[test]
    fn machine_runs_keep_invariants(seed in any::<u64>(), s in strategy()) {
        let t = TermGen::new(seed, s).closed_term(20);
        let rep = check_run(translate_term(&t).graph, &CheckOptions { fuel: 5000, ..CheckOptions::default() }).unwrap();
        prop_assert!(rep.ok(), "{}: {:?}", render(&t), rep.violations);
    }

    #[test]
    fn machine_beta_count_matches_oracle(seed in any::<u64>(), s in strategy()) {
        let t = TermGen::new(seed, s).closed_term(20);
        if let Ok(eval) = evaluate(&t, 5000) {
            let exec = run(translate_term(&t).graph, 100_000).unwrap();
            prop_assert_eq!(exec.outcome, Outcome::Final);
            prop_assert_eq!(exec.counters.beta(), eval.counts.beta);
        }
    }

    #[test]
    fn passes_only_leaves_graph_alone(seed in any::<u64>()) {
        let t = TermGen::new(seed, Strategy::Need).closed_term(20);
        let g = translate_term(&t).graph;
        let rep = cbn_run(&g, 20_000).unwrap();
        prop_assert!(rep.graph_unchanged);
        prop_assert!(rep.max_cell_growth <= 3);
    }
}
