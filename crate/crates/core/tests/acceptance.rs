//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use dgoim::baselines::{cbn_run, jump_run};
use dgoim::bench::{bench_row, ratio_checks, BenchMachine, Family};
use dgoim::check::{check_run, CheckOptions};
use dgoim::corpus::{gen_corpus, TermGen};
use dgoim::cosim::{check_final, cosimulate, CoSimOptions, CoSimOutcome};
use dgoim::machine::{run, Outcome};
use dgoim::submachine::evaluate;
use dgoim::term::{free_vars, render, Name, Strategy, Term};
use dgoim::translate::translate_term;

const SEED: u64 = 1;
const CORPUS: usize = 1000;
const MAX_SIZE: usize = 50;
const FUEL: u64 = 100_000;
const CRITERION_1_LIMIT: Duration = Duration::from_secs(120);
const DECOMPOSITION_PAIRS: u64 = 500;
const FV_PAIRS: u64 = 1000;

struct Corpus {
    strategy: Strategy,
    terms: Vec<Term>,
}

fn corpora() -> Vec<Corpus> {
    Strategy::ALL.into_iter().map(|s| Corpus { strategy: s, terms: gen_corpus(SEED, CORPUS, MAX_SIZE, s) }).collect()
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn first<T: std::fmt::Display>(v: &[T]) -> String {
    v.first().map_or(String::new(), |x| format!("; first: {x}"))
}

#[derive(Default)]
struct RunStats {
    terminating: u64,
    equivalence_failures: Vec<String>,
    beta_mismatches: Vec<String>,
    growth_failures: Vec<String>,
    worst_growth: f64,
    terminating_terms: Vec<(Strategy, Term)>,
}

fn oracle_and_machine(corpora: &[Corpus]) -> (RunStats, Duration) {
    let mut st = RunStats::default();
    let started = Instant::now();
    for c in corpora {
        for t in &c.terms {
            let eval = evaluate(t, FUEL);
            let g = translate_term(t).graph;
            let g0 = g.size() as u64;
            let exec = run(g, FUEL).expect("closed term");
            let fin = exec.outcome == Outcome::Final;
            let sigma = exec.counters.sigma();
            let growth = (exec.max_graph_size as u64).saturating_sub(g0);
            if growth > sigma * g0 + g0 {
                st.growth_failures.push(render(t));
            }
            st.worst_growth = st.worst_growth.max(growth as f64 / ((sigma + 1) * g0) as f64);
            match (eval, fin) {
                (Ok(e), true) => {
                    st.terminating += 1;
                    let check = check_final(&e.answer, &exec.state.graph);
                    if !(check.isomorphic && check.readback_equivalent) {
                        st.equivalence_failures.push(format!("{} {} {check:?}", c.strategy, render(t)));
                    }
                    if e.counts.beta != exec.counters.beta() {
                        st.beta_mismatches.push(format!(
                            "{} {} eval {} exec {}",
                            c.strategy,
                            render(t),
                            e.counts.beta,
                            exec.counters.beta()
                        ));
                    }
                    st.terminating_terms.push((c.strategy, t.clone()));
                }
                (Err(_), false) => {}
                (e, _) => st.equivalence_failures.push(format!(
                    "{} {} oracle {} machine {:?}",
                    c.strategy,
                    render(t),
                    if e.is_ok() { "answer" } else { "no answer" },
                    exec.outcome
                )),
            }
        }
    }
    (st, started.elapsed())
}

fn criterion_3(r: &mut Report, terms: &[(Strategy, Term)]) {
    let mut failures = Vec::new();
    let mut max_n = 0;
    let mut hist = [0u64; 4];
    for (s, t) in terms {
        let rep = cosimulate(t, &CoSimOptions { fuel: FUEL, ..CoSimOptions::default() }).expect("closed term");
        max_n = max_n.max(rep.max_n);
        for (h, x) in hist.iter_mut().zip(rep.n_histogram) {
            *h += x;
        }
        let bound = rep.machine_steps <= 4 * rep.oracle_steps + 1;
        if rep.outcome != CoSimOutcome::Aligned || rep.max_n > 3 || !bound {
            failures.push(format!("{s} {} {:?}", render(t), rep.outcome));
        }
    }
    r.line(
        3,
        "weak simulation",
        failures.is_empty() && max_n <= 3,
        format!("{} runs, max n = {max_n}, n histogram {hist:?}, {} failures{}", terms.len(), failures.len(), first(&failures)),
    );
}

/// Criteria 4 and 7 share one checked run per term; the second result is printed later.
fn criteria_4_and_7(r: &mut Report, corpora: &[Corpus]) -> (bool, String) {
    let mut structural = Vec::new();
    let mut boxes = Vec::new();
    let (mut transitions, mut checked, mut worst) = (0u64, 0u64, 0.0f64);
    for c in corpora {
        for t in &c.terms {
            let rep = check_run(translate_term(t).graph, &CheckOptions { fuel: FUEL, ..CheckOptions::default() })
                .expect("closed term");
            transitions += rep.transitions;
            checked += rep.boxes_checked;
            worst = worst.max(rep.max_box_size as f64 / rep.initial_max_box_size.max(1) as f64);
            for v in &rep.violations {
                let msg = format!("{} {} step {} {:?}", c.strategy, render(t), v.step, v.kind);
                match v.kind {
                    dgoim::check::InvariantKind::BoxNotInInitialGraph(_) | dgoim::check::InvariantKind::BoxTooLarge { .. } => {
                        boxes.push(msg)
                    }
                    _ => structural.push(msg),
                }
            }
        }
    }
    r.line(
        4,
        "sub-graph property",
        boxes.is_empty(),
        format!("{checked} box samples, max box size / initial max = {worst:.2}, {} violations{}", boxes.len(), first(&boxes)),
    );
    (structural.is_empty(), format!("{transitions} transitions checked, {} violations{}", structural.len(), first(&structural)))
}

fn criterion_5(r: &mut Report) {
    let mut failures = Vec::new();
    let mut worst = f64::MIN;
    for s in Strategy::ALL {
        for f in [Family::ChurchExp, Family::IteratedApp] {
            let rows: Result<Vec<_>, _> = (1..=10).map(|k| bench_row(f, k, s, BenchMachine::RewritesFirst, 10_000_000)).collect();
            match rows {
                Ok(rows) => {
                    for c in ratio_checks(&rows) {
                        worst = worst.max(c.slope / c.mean.abs().max(f64::MIN_POSITIVE));
                        if !c.ok {
                            failures.push(format!("{s} {f} {} slope {:.4} mean {:.4}", c.name, c.slope, c.mean));
                        }
                    }
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
    }
    r.line(
        5,
        "bound ratios",
        failures.is_empty(),
        format!("24 fits, largest slope/mean = {worst:.4} (tolerance 0.05), {} failures{}", failures.len(), first(&failures)),
    );
}

fn criterion_6(r: &mut Report, corpora: &[Corpus], st: &RunStats) {
    let mut failures = st.growth_failures.iter().map(|t| format!("rewrites-first growth {t}")).collect::<Vec<_>>();
    let linear = |cells: u128, steps: u64| cells <= 4 + 3 * steps as u128;
    let need = corpora.iter().find(|c| c.strategy == Strategy::Need).expect("need corpus");
    for t in &need.terms {
        let g = translate_term(t).graph;
        let c = cbn_run(&g, FUEL).expect("need graph");
        let j = jump_run(&g, FUEL).expect("need graph");
        if !c.graph_unchanged || !j.graph_unchanged {
            failures.push(format!("graph changed {}", render(t)));
        }
        if !linear(c.max_token_cells, c.transitions) {
            failures.push(format!("passes-only cells {} after {} steps {}", c.max_token_cells, c.transitions, render(t)));
        }
    }
    let mut jump_cells = Vec::new();
    for k in 1..=8usize {
        let g = translate_term(&Family::EtaDepth.term(k, Strategy::Need)).graph;
        let c = cbn_run(&g, FUEL).expect("need graph");
        let j = jump_run(&g, FUEL).expect("need graph");
        jump_cells.push(j.max_token_cells);
        if j.value().is_none() || c.value().is_none() {
            failures.push(format!("eta-depth {k} did not reach a value"));
        }
        if !c.graph_unchanged || !j.graph_unchanged {
            failures.push(format!("eta-depth {k} graph changed"));
        }
        if j.max_token_cells < (1u128 << k) - 1 {
            failures.push(format!("eta-depth {k} jumping cells {} < {}", j.max_token_cells, (1u128 << k) - 1));
        }
        if !linear(c.max_token_cells, c.transitions) {
            failures.push(format!("eta-depth {k} passes-only cells {}", c.max_token_cells));
        }
    }
    r.line(
        6,
        "space",
        failures.is_empty(),
        format!(
            "max growth / ((σ+1)|G0|) = {:.2}, eta-depth jumping cells k=1..8 {jump_cells:?}, {} failures{}",
            st.worst_growth,
            failures.len(),
            first(&failures)
        ),
    );
}

fn criterion_8(r: &mut Report, corpora: &[Corpus]) {
    let mut failures = Vec::new();
    for i in 0..DECOMPOSITION_PAIRS {
        let s = Strategy::ALL[i as usize % 3];
        let seed = 1000 + i;
        let (e, t) = context_and_term(seed, s);
        let (e2, _) = context_and_term(seed ^ 0x5555, s);
        let mut g = TermGen::new(seed, s);
        let a = answer_context(&mut g, &[Name::new("y")]);
        let mut scope = vec![Name::new("y")];
        scope.extend(hole_binders(&a));
        let u = g.term_of_size(1 + i as usize % 10, &scope);
        let m = free_vars(&t);
        let checks = [
            ("answer", decomposition_answer(&a, &u)),
            ("nested", decomposition_nested(&e, &e2, &m)),
            ("uncaptured", decomposition_uncaptured(&e, &m, &fresh_multiset(1 + i as usize % 3))),
            ("unit", decomposition_unit(&t)),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("{name} decomposition, seed {seed} {s}"));
            }
        }
    }
    let mut translations = 0;
    for c in corpora {
        for t in &c.terms {
            translations += 1;
            if !one_con_per_binder(t) {
                failures.push(format!("contraction count {}", render(t)));
            }
        }
    }
    for i in 0..FV_PAIRS {
        let s = Strategy::ALL[i as usize % 3];
        let (e, t) = context_and_term(50_000 + i, s);
        if !fv_plug_equation(&e, &t) || !fv_sum_equation(&e, &free_vars(&t), &fresh_multiset(1 + i as usize % 3)) {
            failures.push(format!("FV equation, seed {}", 50_000 + i));
        }
    }
    r.line(
        8,
        "translation properties",
        failures.is_empty(),
        format!(
            "{DECOMPOSITION_PAIRS} decomposition pairs, {translations} translations, {FV_PAIRS} FV pairs, {} failures{}",
            failures.len(),
            first(&failures)
        ),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    let corpora = corpora();
    let (st, elapsed) = oracle_and_machine(&corpora);
    let total: usize = corpora.iter().map(|c| c.terms.len()).sum();
    let fails = &st.equivalence_failures;
    r.line(
        1,
        "oracle equivalence",
        fails.is_empty() && elapsed < CRITERION_1_LIMIT,
        format!(
            "{total} terms, {} terminating, {} failures, {:.1}s (limit {}s){}",
            st.terminating,
            fails.len(),
            elapsed.as_secs_f64(),
            CRITERION_1_LIMIT.as_secs(),
            first(fails)
        ),
    );
    r.line(
        2,
        "exact beta count",
        st.beta_mismatches.is_empty(),
        format!("{} terminating runs, {} mismatches{}", st.terminating, st.beta_mismatches.len(), first(&st.beta_mismatches)),
    );
    criterion_3(&mut r, &st.terminating_terms);
    let (ok7, detail7) = criteria_4_and_7(&mut r, &corpora);
    criterion_5(&mut r);
    criterion_6(&mut r, &corpora, &st);
    r.line(7, "structural invariants", ok7, detail7);
    criterion_8(&mut r, &corpora);
    if r.failed > 0 {
        println!("{} criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
