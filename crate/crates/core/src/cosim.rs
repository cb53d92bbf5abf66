//! Lockstep co-simulation of the reference semantics and the graph machine,
//! and the end-of-run checks relating their results.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::iso::isomorphic;
use crate::machine::{BoxElem, CompElem, Counters, Direction, Fault, MachineState, RewriteFlag, StepResult};
use crate::submachine::{check_program, EnrichedTerm, InjectError, LabelCounts, RedLabel, StepOutcome};
use crate::graph::NodeLabel;
use crate::term::{free_vars, split_esubs, ContextPath, Frame, Name, Strategy, Term};
use crate::translate::{readback, translate_plugged, translate_term};

/// Stacks a machine state must carry when related to `E[⟨t⟩]`.
pub fn expected_stacks(e: &ContextPath) -> (Vec<CompElem>, Vec<BoxElem>) {
    fn go(frames: &[Frame], s: &mut Vec<CompElem>, b: &mut Vec<BoxElem>) {
        for f in frames {
            match f {
                Frame::ESubBody { .. } => {}
                Frame::ESubBound { body, .. } => {
                    go(&body.0, s, b);
                    b.push(BoxElem::Link(crate::graph::LinkId(u32::MAX)));
                }
                Frame::AppFun { strategy, .. } => {
                    s.push(match strategy {
                        Strategy::LeftToRightValue => CompElem::Star,
                        _ => CompElem::At,
                    });
                    b.push(BoxElem::Diamond);
                }
                Frame::AppArgWithAnswer { .. } | Frame::AppArg { .. } => b.push(BoxElem::Star),
            }
        }
    }
    let mut s = Vec::new();
    let mut b = vec![BoxElem::Star];
    go(&e.0, &mut s, &mut b);
    (s, b)
}

fn head_matches(m: &MachineState, focus: &Term) -> bool {
    let Some((n, _)) = m.graph.target(m.pos) else { return false };
    let label = m.graph.label(n);
    match focus {
        Term::Abs(..) => label == NodeLabel::Bang,
        Term::App(s, ..) => label.strategy() == Some(*s),
        Term::Var(_) => matches!(label, NodeLabel::Con(_)),
        Term::ESub(..) => false,
    }
}

/// Whether the machine state is related to the enriched term, judged by
/// token shape, stacks and the node at the position.
pub fn related(m: &MachineState, s: &EnrichedTerm) -> bool {
    if m.token.dir != Direction::Up || m.token.flag != RewriteFlag::None {
        return false;
    }
    let (es, eb) = expected_stacks(&s.outer);
    m.token.comp == es
        && m.token.boxes.len() == eb.len()
        && m.token.boxes.iter().zip(eb.iter()).all(|(x, y)| x.same_kind(*y))
        && head_matches(m, &s.focus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CoSimOutcome {
    /// Both reached their final states in lockstep.
    Aligned,
    /// The oracle ran out of fuel; the machine kept pace up to that point.
    FuelExhausted,
    Misalignment { step: u64, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct CoSimOptions {
    pub fuel: u64,
    /// Also compare the machine graph with `E‡ ∘ t†` after every reduction.
    pub strict_graphs: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
pub struct CoSimReport {
    pub outcome: CoSimOutcome,
    /// Largest number of ε-transitions before the matching transition.
    pub max_n: usize,
    /// Histogram of segment lengths `n`.
    pub n_histogram: [u64; 4],
    pub oracle: LabelCounts,
    pub machine: Counters,
    pub oracle_steps: u64,
    pub machine_steps: u64,
    pub answer: Option<EnrichedTerm>,
    pub final_state: Option<MachineState>,
}

/// Runs the oracle and the machine side by side: every oracle reduction
/// labelled χ must be matched by at most three ε-transitions followed by one
/// χ-transition, and the oracle's answer by exactly one final ε-transition.
pub fn cosimulate(t: &Term, opts: &CoSimOptions) -> Result<CoSimReport, InjectError> {
    check_program(t)?;
    let mut s = EnrichedTerm::inject(t)?;
    let graph = translate_term(&crate::term::distinct_binders(t)).graph;
    let mut m = MachineState::init(graph).expect("closed term translates to G(1,0)").with_fault(opts.fault);
    let mut rep = CoSimReport {
        outcome: CoSimOutcome::Aligned,
        max_n: 0,
        n_histogram: [0; 4],
        oracle: LabelCounts::default(),
        machine: Counters::default(),
        oracle_steps: 0,
        machine_steps: 0,
        answer: None,
        final_state: None,
    };
    let fail = |rep: &mut CoSimReport, reason: String| {
        rep.outcome = CoSimOutcome::Misalignment { step: rep.oracle_steps, reason };
    };
    loop {
        if rep.oracle_steps >= opts.fuel {
            rep.outcome = CoSimOutcome::FuelExhausted;
            return Ok(rep);
        }
        let red = match s.step() {
            StepOutcome::Next(r) => r,
            StepOutcome::Answer => break,
            StepOutcome::Stuck => {
                fail(&mut rep, "oracle stuck".into());
                return Ok(rep);
            }
        };
        rep.oracle.record(red.label);
        rep.oracle_steps += 1;
        let mut n = 0usize;
        loop {
            let t = match m.step() {
                StepResult::Next(t) => t,
                StepResult::Final => {
                    fail(&mut rep, format!("machine final while oracle applied rule {}", red.rule));
                    return Ok(rep);
                }
                StepResult::NoRedexMatch(msg) => {
                    fail(&mut rep, format!("no redex match: {msg}"));
                    return Ok(rep);
                }
            };
            rep.machine.record(&t);
            rep.machine_steps += 1;
            if t.label != RedLabel::Eps && t.label != red.label {
                fail(&mut rep, format!("machine {} while oracle {} (rule {})", t.label, red.label, red.rule));
                return Ok(rep);
            }
            if t.label == red.label && related(&m, &s) {
                break;
            }
            if t.label != RedLabel::Eps {
                fail(&mut rep, format!("state after {} not related (rule {})", t.label, red.rule));
                return Ok(rep);
            }
            n += 1;
            if n > 3 {
                fail(&mut rep, format!("more than three ε-transitions for rule {}", red.rule));
                return Ok(rep);
            }
        }
        rep.max_n = rep.max_n.max(n);
        rep.n_histogram[n] += 1;
        if opts.strict_graphs {
            match translate_plugged(&s.outer, &s.focus) {
                Ok(expected) if isomorphic(&expected.graph, &m.graph) => {}
                Ok(_) => {
                    fail(&mut rep, format!("graph differs from E‡ ∘ t† after rule {}", red.rule));
                    return Ok(rep);
                }
                Err(e) => {
                    fail(&mut rep, format!("context translation failed: {e}"));
                    return Ok(rep);
                }
            }
        }
    }
    match m.step() {
        StepResult::Next(t) if t.label == RedLabel::Eps && m.is_final() => {
            rep.machine.record(&t);
            rep.machine_steps += 1;
        }
        other => {
            fail(&mut rep, format!("answer not followed by a single final ε-transition: {other:?}"));
            return Ok(rep);
        }
    }
    rep.answer = Some(s);
    rep.final_state = Some(m);
    Ok(rep)
}

/// Relation between a finished machine run and the oracle answer `A[⟨v⟩]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinalCheck {
    pub isomorphic: bool,
    pub readback_equivalent: bool,
}

pub fn check_final(answer: &EnrichedTerm, final_graph: &crate::graph::Graph) -> FinalCheck {
    let isomorphic = match translate_plugged(&answer.outer, &answer.focus) {
        Ok(expected) => crate::iso::isomorphic(&expected.graph, final_graph),
        Err(_) => false,
    };
    let readback_equivalent = match readback(final_graph) {
        Ok(t) => alpha_eq_answers(&t, &answer.to_term()),
        Err(_) => false,
    };
    FinalCheck { isomorphic, readback_equivalent }
}

/// Substitutions of an answer, nested ones hoisted, with the core value.
fn flatten(t: &Term) -> (Vec<(Name, Term)>, Term) {
    let (subs, v) = split_esubs(t);
    let mut out = Vec::new();
    for (x, u) in subs {
        let (inner, core) = flatten(&u);
        out.push((x, core));
        out.extend(inner);
    }
    (out, v.clone())
}

/// Structural hash of every substitution, with references to other
/// substitutions replaced by their hashes. Equal answers have equal hashes
/// for corresponding substitutions.
fn shape_hashes(subs: &HashMap<&Name, &Term>) -> HashMap<Name, u64> {
    fn term(t: &Term, env: &mut Vec<Name>, subs: &HashMap<&Name, &Term>, memo: &mut HashMap<Name, u64>, h: &mut DefaultHasher) {
        match t {
            Term::Var(x) => match env.iter().rposition(|y| y == x) {
                Some(i) => (0u8, env.len() - i).hash(h),
                None if subs.contains_key(x) => (1u8, sub(x, subs, memo)).hash(h),
                None => (2u8, x).hash(h),
            },
            Term::Abs(x, b) => {
                3u8.hash(h);
                env.push(x.clone());
                term(b, env, subs, memo, h);
                env.pop();
            }
            Term::App(st, f, a) => {
                (4u8, st).hash(h);
                term(f, env, subs, memo, h);
                term(a, env, subs, memo, h);
            }
            Term::ESub(b, x, u) => {
                5u8.hash(h);
                term(u, env, subs, memo, h);
                env.push(x.clone());
                term(b, env, subs, memo, h);
                env.pop();
            }
        }
    }
    fn sub(x: &Name, subs: &HashMap<&Name, &Term>, memo: &mut HashMap<Name, u64>) -> u64 {
        if let Some(&v) = memo.get(x) {
            return v;
        }
        let mut h = DefaultHasher::new();
        term(subs[x], &mut Vec::new(), subs, memo, &mut h);
        let v = h.finish();
        memo.insert(x.clone(), v);
        v
    }
    let mut memo = HashMap::new();
    for x in subs.keys() {
        sub(x, subs, &mut memo);
    }
    memo
}

struct Matcher<'a> {
    a: HashMap<&'a Name, &'a Term>,
    b: HashMap<&'a Name, &'a Term>,
    ha: HashMap<Name, u64>,
    hb: HashMap<Name, u64>,
    fwd: HashMap<Name, Name>,
    bwd: HashMap<Name, Name>,
    queue: Vec<(Name, Name)>,
}

impl<'a> Matcher<'a> {
    fn var(&mut self, x: &Name, y: &Name) -> bool {
        let xa = self.a.contains_key(x);
        let yb = self.b.contains_key(y);
        if !xa || !yb {
            return !xa && !yb && x == y;
        }
        if self.ha[x] != self.hb[y] {
            return false;
        }
        match (self.fwd.get(x), self.bwd.get(y)) {
            (Some(y2), _) => y2 == y,
            (None, Some(_)) => false,
            (None, None) => {
                self.fwd.insert(x.clone(), y.clone());
                self.bwd.insert(y.clone(), x.clone());
                self.queue.push((x.clone(), y.clone()));
                true
            }
        }
    }

    fn term(&mut self, s: &Term, t: &Term, env: &mut Vec<(Name, Name)>) -> bool {
        match (s, t) {
            (Term::Var(x), Term::Var(y)) => {
                let bx = env.iter().rposition(|(p, _)| p == x);
                let by = env.iter().rposition(|(_, q)| q == y);
                match (bx, by) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => self.var(x, y),
                    _ => false,
                }
            }
            (Term::Abs(x, b1), Term::Abs(y, b2)) => {
                env.push((x.clone(), y.clone()));
                let r = self.term(b1, b2, env);
                env.pop();
                r
            }
            (Term::App(s1, f1, a1), Term::App(s2, f2, a2)) => {
                s1 == s2 && self.term(f1, f2, env) && self.term(a1, a2, env)
            }
            (Term::ESub(b1, x, u1), Term::ESub(b2, y, u2)) => {
                if !self.term(u1, u2, env) {
                    return false;
                }
                env.push((x.clone(), y.clone()));
                let r = self.term(b1, b2, env);
                env.pop();
                r
            }
            _ => false,
        }
    }

    fn drain(&mut self) -> bool {
        while let Some((x, y)) = self.queue.pop() {
            let (u, w) = (self.a[&x], self.b[&y]);
            if !self.term(u, w, &mut Vec::new()) {
                return false;
            }
        }
        true
    }

    fn snapshot(&self) -> (HashMap<Name, Name>, HashMap<Name, Name>) {
        (self.fwd.clone(), self.bwd.clone())
    }

    fn restore(&mut self, s: (HashMap<Name, Name>, HashMap<Name, Name>)) {
        self.fwd = s.0;
        self.bwd = s.1;
        self.queue.clear();
    }

    /// Pairs substitutions unreachable from the value, by backtracking.
    fn leftovers(&mut self, budget: &mut u32) -> bool {
        let open: Vec<&Name> = self.a.keys().filter(|x| !self.fwd.contains_key(**x)).copied().collect();
        if open.is_empty() {
            return true;
        }
        // Start from a substitution no other unmatched one refers to.
        let referenced: std::collections::HashSet<Name> =
            open.iter().flat_map(|x| free_vars(self.a[*x]).names().cloned().collect::<Vec<_>>()).collect();
        let x = open.iter().filter(|x| !referenced.contains(**x)).min().map(|x| (*x).clone()).expect("non-empty");
        let open_b: Vec<&Name> = self.b.keys().filter(|y| !self.bwd.contains_key(**y)).copied().collect();
        let referenced_b: std::collections::HashSet<Name> =
            open_b.iter().flat_map(|y| free_vars(self.b[*y]).names().cloned().collect::<Vec<_>>()).collect();
        let mut cands: Vec<Name> = open_b.into_iter().filter(|y| !referenced_b.contains(*y)).cloned().collect();
        cands.sort();
        for y in cands {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            let snap = self.snapshot();
            if self.var(&x, &y) && self.drain() && self.leftovers(budget) {
                return true;
            }
            self.restore(snap);
        }
        false
    }
}

/// Alpha-equivalence of answers `A[v]` up to the order and nesting of their
/// explicit substitutions.
pub fn alpha_eq_answers(s: &Term, t: &Term) -> bool {
    let (sa, va) = flatten(s);
    let (sb, vb) = flatten(t);
    if sa.len() != sb.len() {
        return false;
    }
    let a: HashMap<&Name, &Term> = sa.iter().map(|(x, u)| (x, u)).collect();
    let b: HashMap<&Name, &Term> = sb.iter().map(|(x, u)| (x, u)).collect();
    let (ha, hb) = (shape_hashes(&a), shape_hashes(&b));
    let mut m = Matcher {
        a,
        b,
        ha,
        hb,
        fwd: HashMap::new(),
        bwd: HashMap::new(),
        queue: Vec::new(),
    };
    if m.a.len() != sa.len() || m.b.len() != sb.len() {
        return false;
    }
    if !m.term(&va, &vb, &mut Vec::new()) || !m.drain() {
        return false;
    }
    let mut budget = 10_000;
    m.leftovers(&mut budget)
}
