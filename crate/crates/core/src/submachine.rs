//! Reference small-step semantics: a window `⟨·⟩` moves through the term,
//! beta-reduction delays substitution, and substitution happens one occurrence
//! at a time. Enriched terms are kept as a zipper (context frames plus the
//! focused sub-term), so window moves are frame pushes and pops.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::term::{
    fresh_copy, plug_frame, render, split_esubs, ContextPath, Frame, Name, NameSupply, Strategy, Term,
};

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RedLabel {
    Beta,
    Sigma,
    Eps,
}

impl RedLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RedLabel::Beta => "beta",
            RedLabel::Sigma => "sigma",
            RedLabel::Eps => "eps",
        }
    }
}

impl fmt::Display for RedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `E[⟨t⟩]`
#[derive(Debug, Clone)]
pub struct EnrichedTerm {
    pub outer: ContextPath,
    pub focus: Term,
    supply: NameSupply,
}

impl PartialEq for EnrichedTerm {
    fn eq(&self, other: &Self) -> bool {
        self.outer == other.outer && self.focus == other.focus
    }
}

/// A basic rule firing: its number (1..=10) and label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reduction {
    pub rule: u8,
    pub label: RedLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Next(Reduction),
    Answer,
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("term is not closed (free: {0})")]
    NotClosed(String),
    #[error("term contains explicit substitutions")]
    NotPure,
    #[error("term mixes application strategies")]
    MixedStrategies,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("state is not an answer")]
pub struct NotAnAnswer;

/// Checks the preconditions shared by every evaluator: pure, closed, single strategy.
pub fn check_program(t: &Term) -> Result<(), InjectError> {
    if !t.is_pure() {
        return Err(InjectError::NotPure);
    }
    let fv = crate::term::free_vars(t);
    if !fv.is_empty() {
        return Err(InjectError::NotClosed(fv.to_string()));
    }
    if t.strategies().len() > 1 {
        return Err(InjectError::MixedStrategies);
    }
    Ok(())
}

impl EnrichedTerm {
    /// `⟨t⟩` for a pure closed term.
    pub fn inject(t: &Term) -> Result<Self, InjectError> {
        check_program(t)?;
        let t = crate::term::distinct_binders(t);
        Ok(EnrichedTerm { outer: ContextPath::empty(), supply: NameSupply::above(&t), focus: t })
    }

    /// Builds an enriched term from parts without any checks.
    pub fn from_parts(outer: ContextPath, focus: Term) -> Self {
        let supply = NameSupply::above(&outer.plug(focus.clone()));
        EnrichedTerm { outer, focus, supply }
    }

    /// Forgets the window.
    pub fn to_term(&self) -> Term {
        self.outer.plug(self.focus.clone())
    }

    pub fn is_answer(&self) -> bool {
        self.focus.is_value() && self.outer.is_answer_context()
    }

    /// Applies the unique applicable basic rule in place.
    pub fn step(&mut self) -> StepOutcome {
        let frames = &mut self.outer.0;
        let focus = std::mem::replace(&mut self.focus, Term::Var(Name::new("")));
        let (next, outcome) = match focus {
            Term::App(Strategy::Need, f, a) => {
                // (1) ⟨t @ u⟩ ↦ ⟨t⟩ @ u
                frames.push(Frame::AppFun { strategy: Strategy::Need, arg: *a });
                (*f, StepOutcome::Next(Reduction { rule: 1, label: RedLabel::Eps }))
            }
            Term::App(Strategy::LeftToRightValue, f, a) => {
                // (3)
                frames.push(Frame::AppFun { strategy: Strategy::LeftToRightValue, arg: *a });
                (*f, StepOutcome::Next(Reduction { rule: 3, label: RedLabel::Eps }))
            }
            Term::App(Strategy::RightToLeftValue, f, a) => {
                // (6) ⟨t @ u⟩ ↦ t @ ⟨u⟩
                frames.push(Frame::AppArg { strategy: Strategy::RightToLeftValue, function: *f });
                (*a, StepOutcome::Next(Reduction { rule: 6, label: RedLabel::Eps }))
            }
            Term::Var(x) => {
                // (9) E[⟨x⟩][x <- A[u]] ↦ E[x][x <- A[⟨u⟩]]
                let pos = frames
                    .iter()
                    .rposition(|f| matches!(f, Frame::ESubBody { binder, .. } if *binder == x));
                match pos {
                    None => (Term::Var(x), StepOutcome::Stuck),
                    Some(i) => {
                        let inner = frames.split_off(i + 1);
                        let bound = match frames.pop() {
                            Some(Frame::ESubBody { bound, .. }) => bound,
                            _ => unreachable!(),
                        };
                        frames.push(Frame::ESubBound { binder: x, body: ContextPath(inner) });
                        let u = push_answer_context(frames, bound);
                        (u, StepOutcome::Next(Reduction { rule: 9, label: RedLabel::Eps }))
                    }
                }
            }
            Term::Abs(x, body) => {
                let split = frames
                    .iter()
                    .rposition(|f| !matches!(f, Frame::ESubBody { .. }));
                match split {
                    None => (Term::Abs(x, body), StepOutcome::Answer),
                    Some(j) => {
                        let answer_ctx = frames.split_off(j + 1);
                        let frame = frames.pop().expect("frame at split point");
                        let v = Term::Abs(x, body);
                        self::fire_on_value(frames, frame, answer_ctx, v, &mut self.supply)
                    }
                }
            }
            Term::ESub(..) => (focus, StepOutcome::Stuck),
        };
        self.focus = next;
        outcome
    }

    /// Rule numbers whose left-hand side matches this state. Used to check
    /// determinism independently of [`EnrichedTerm::step`].
    pub fn applicable_rules(&self) -> Vec<u8> {
        let mut rules = Vec::new();
        let frames = &self.outer.0;
        match &self.focus {
            Term::App(Strategy::Need, ..) => rules.push(1),
            Term::App(Strategy::LeftToRightValue, ..) => rules.push(3),
            Term::App(Strategy::RightToLeftValue, ..) => rules.push(6),
            _ => {}
        }
        if let Term::Var(x) = &self.focus {
            if frames.iter().any(|f| matches!(f, Frame::ESubBody { binder, .. } if binder == x)) {
                rules.push(9);
            }
        }
        if self.focus.is_value() {
            let below = frames.iter().rposition(|f| !matches!(f, Frame::ESubBody { .. }));
            if let Some(j) = below {
                match &frames[j] {
                    Frame::AppFun { strategy: Strategy::Need, .. } => rules.push(2),
                    Frame::AppFun { strategy: Strategy::LeftToRightValue, .. } => rules.push(4),
                    Frame::AppArgWithAnswer { strategy: Strategy::LeftToRightValue, function } => {
                        if crate::term::is_answer(function) {
                            rules.push(5)
                        }
                    }
                    Frame::AppArg { strategy: Strategy::RightToLeftValue, .. } => rules.push(7),
                    Frame::AppFun { strategy: Strategy::RightToLeftValue, arg } => {
                        if crate::term::is_answer(arg) {
                            rules.push(8)
                        }
                    }
                    Frame::ESubBound { .. } => rules.push(10),
                    _ => {}
                }
            }
        }
        rules
    }

    /// Renders the enriched term with the window drawn as `⟨…⟩`.
    pub fn render(&self) -> String {
        let marker = Term::Var(Name(format!("⟨{}⟩", render(&self.focus))));
        render(&self.outer.plug(marker))
    }

    /// Frame kinds from the root to the window.
    pub fn focus_path(&self) -> Vec<&'static str> {
        self.outer
            .0
            .iter()
            .map(|f| match f {
                Frame::ESubBody { .. } => "esub-body",
                Frame::ESubBound { .. } => "esub-bound",
                Frame::AppFun { .. } => "app-fun",
                Frame::AppArgWithAnswer { .. } => "app-arg-answer",
                Frame::AppArg { .. } => "app-arg",
            })
            .collect()
    }
}

/// Pushes the answer context of `t = A[u]` as `ESubBody` frames and returns `u`.
fn push_answer_context(frames: &mut Vec<Frame>, t: Term) -> Term {
    let mut cur = t;
    loop {
        match cur {
            Term::ESub(b, x, u) => {
                frames.push(Frame::ESubBody { binder: x, bound: *u });
                cur = *b;
            }
            other => return other,
        }
    }
}

fn fire_on_value(
    frames: &mut Vec<Frame>,
    frame: Frame,
    answer_ctx: Vec<Frame>,
    v: Term,
    supply: &mut NameSupply,
) -> (Term, StepOutcome) {
    let beta = |rule| StepOutcome::Next(Reduction { rule, label: RedLabel::Beta });
    let eps = |rule| StepOutcome::Next(Reduction { rule, label: RedLabel::Eps });
    match frame {
        Frame::AppFun { strategy: Strategy::Need, arg } => {
            // (2) A[⟨λx.t⟩] @ u ↦ A[⟨t⟩[x <- u]]
            let (x, t) = unwrap_abs(v);
            frames.extend(answer_ctx);
            frames.push(Frame::ESubBody { binder: x, bound: arg });
            (t, beta(2))
        }
        Frame::AppFun { strategy: Strategy::LeftToRightValue, arg } => {
            // (4) A[⟨λx.t⟩] @ u ↦ A[λx.t] @ ⟨u⟩
            let function = plug_all(&answer_ctx, v);
            frames.push(Frame::AppArgWithAnswer { strategy: Strategy::LeftToRightValue, function });
            (arg, eps(4))
        }
        Frame::AppArgWithAnswer { strategy: Strategy::LeftToRightValue, function } => {
            // (5) A[λx.t] @ A'[⟨v⟩] ↦ A[⟨t⟩[x <- A'[v]]]
            let bound = plug_all(&answer_ctx, v);
            let lam = push_answer_context(frames, function);
            let (x, t) = unwrap_abs(lam);
            frames.push(Frame::ESubBody { binder: x, bound });
            (t, beta(5))
        }
        Frame::AppArg { strategy: Strategy::RightToLeftValue, function } => {
            // (7) t @ A[⟨v⟩] ↦ ⟨t⟩ @ A[v]
            let arg = plug_all(&answer_ctx, v);
            frames.push(Frame::AppFun { strategy: Strategy::RightToLeftValue, arg });
            (function, eps(7))
        }
        Frame::AppFun { strategy: Strategy::RightToLeftValue, arg } => {
            // (8) A[⟨λx.t⟩] @ A'[v] ↦ A[⟨t⟩[x <- A'[v]]]
            let (x, t) = unwrap_abs(v);
            frames.extend(answer_ctx);
            frames.push(Frame::ESubBody { binder: x, bound: arg });
            (t, beta(8))
        }
        Frame::ESubBound { binder, body } => {
            // (10) E[x][x <- A[⟨v⟩]] ↦ A[E[⟨v⟩][x <- v]]
            // The answer context A is spliced out of the bound position and
            // placed above the substitution; E is re-entered below it with a
            // fresh copy of v in the window.
            frames.extend(answer_ctx);
            let copy = fresh_copy(&v, supply);
            frames.push(Frame::ESubBody { binder, bound: v });
            frames.extend(body.0);
            (copy, StepOutcome::Next(Reduction { rule: 10, label: RedLabel::Sigma }))
        }
        other => {
            frames.push(other);
            frames.extend(answer_ctx);
            (v, StepOutcome::Stuck)
        }
    }
}

fn unwrap_abs(t: Term) -> (Name, Term) {
    match t {
        Term::Abs(x, b) => (x, *b),
        _ => unreachable!("value is an abstraction"),
    }
}

fn plug_all(frames: &[Frame], t: Term) -> Term {
    frames.iter().rev().fold(t, |acc, f| plug_frame(f, acc))
}

/// `(A, v)` for an answer state `A[⟨v⟩]`.
pub fn split_answer(s: &EnrichedTerm) -> Result<(ContextPath, Term), NotAnAnswer> {
    if s.is_answer() {
        Ok((s.outer.clone(), s.focus.clone()))
    } else {
        Err(NotAnAnswer)
    }
}

/// Splits an answer term `A[v]` (no window) into its substitutions and value.
pub fn split_answer_term(t: &Term) -> Result<(ContextPath, Term), NotAnAnswer> {
    let (subs, v) = split_esubs(t);
    if !v.is_value() {
        return Err(NotAnAnswer);
    }
    let frames = subs
        .into_iter()
        .rev()
        .map(|(binder, bound)| Frame::ESubBody { binder, bound })
        .collect();
    Ok((ContextPath(frames), v.clone()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub beta: u64,
    pub sigma: u64,
    pub eps: u64,
}

impl LabelCounts {
    pub fn record(&mut self, l: RedLabel) {
        match l {
            RedLabel::Beta => self.beta += 1,
            RedLabel::Sigma => self.sigma += 1,
            RedLabel::Eps => self.eps += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.beta + self.sigma + self.eps
    }

    pub fn as_map(&self) -> BTreeMap<RedLabel, u64> {
        [(RedLabel::Beta, self.beta), (RedLabel::Sigma, self.sigma), (RedLabel::Eps, self.eps)]
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub step: u64,
    pub rule: u8,
    pub label: RedLabel,
    pub state: String,
    #[serde(rename = "focusPath")]
    pub focus_path: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub answer: EnrichedTerm,
    pub counts: LabelCounts,
    pub steps: u64,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error("fuel exhausted after {} steps", .counts.total())]
    FuelExhausted { counts: LabelCounts, state: Box<EnrichedTerm> },
    #[error("evaluation stuck at step {step}: {state}")]
    Stuck { step: u64, state: String },
}

/// Iterates [`EnrichedTerm::step`] from `⟨t⟩` until an answer or `fuel` steps.
pub fn evaluate(t: &Term, fuel: u64) -> Result<EvalReport, EvalError> {
    evaluate_with(t, fuel, false)
}

pub fn evaluate_with(t: &Term, fuel: u64, trace: bool) -> Result<EvalReport, EvalError> {
    let mut s = EnrichedTerm::inject(t)?;
    let mut counts = LabelCounts::default();
    let mut entries = trace.then(Vec::new);
    loop {
        let n = counts.total();
        if n >= fuel {
            if s.is_answer() {
                break;
            }
            return Err(EvalError::FuelExhausted { counts, state: Box::new(s) });
        }
        match s.step() {
            StepOutcome::Next(r) => {
                counts.record(r.label);
                if let Some(es) = entries.as_mut() {
                    es.push(TraceEntry {
                        step: n + 1,
                        rule: r.rule,
                        label: r.label,
                        state: s.render(),
                        focus_path: s.focus_path(),
                    });
                }
            }
            StepOutcome::Answer => break,
            StepOutcome::Stuck => return Err(EvalError::Stuck { step: n, state: s.render() }),
        }
    }
    Ok(EvalReport { steps: counts.total(), answer: s, counts, trace: entries })
}

/// Re-tallies labels from a recorded trace.
pub fn replay_counts(trace: &[TraceEntry]) -> LabelCounts {
    let mut c = LabelCounts::default();
    for e in trace {
        c.record(e.label);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_eq, parse};

    fn need(s: &str) -> Term {
        parse(s, Strategy::Need).unwrap()
    }

    #[test]
    fn inject_places_window_at_root() {
        let t = need(r"\x. x");
        let s = EnrichedTerm::inject(&t).unwrap();
        assert!(s.outer.is_empty());
        assert_eq!(s.focus, t);
        let t = need(r"(\x. x) (\y. y)");
        assert_eq!(EnrichedTerm::inject(&t).unwrap().focus, t);
        assert!(matches!(EnrichedTerm::inject(&need(r"\x. y")), Err(InjectError::NotClosed(_))));
        assert!(matches!(
            EnrichedTerm::inject(&need(r"x [x <- \y. y]")),
            Err(InjectError::NotPure)
        ));
    }

    #[test]
    fn rule_one_moves_window_to_function() {
        let mut s = EnrichedTerm::inject(&need(r"(\x. x) (\y. y)")).unwrap();
        assert_eq!(s.step(), StepOutcome::Next(Reduction { rule: 1, label: RedLabel::Eps }));
        assert_eq!(s.focus, need(r"\x. x"));
        assert_eq!(s.render(), r"⟨\x. x⟩ (\y. y)");
        assert_eq!(s.step(), StepOutcome::Next(Reduction { rule: 2, label: RedLabel::Beta }));
        assert_eq!(s.render(), r"⟨x⟩ [x <- \y. y]");
    }

    #[test]
    fn value_in_empty_context_is_answer() {
        let mut s = EnrichedTerm::inject(&need(r"\y. y")).unwrap();
        assert_eq!(s.step(), StepOutcome::Answer);
    }

    #[test]
    fn identity_applied_to_identity() {
        let r = evaluate(&need(r"(\x. x) (\y. y)"), 100).unwrap();
        assert_eq!(r.counts, LabelCounts { beta: 1, sigma: 1, eps: 2 });
        let (a, v) = split_answer(&r.answer).unwrap();
        assert!(alpha_eq(&a.plug(v), &need(r"(\y. y) [x <- \y. y]")));
    }

    #[test]
    fn rule_order_for_identity() {
        let r = evaluate_with(&need(r"(\x. x) (\y. y)"), 100, true).unwrap();
        let rules: Vec<u8> = r.trace.unwrap().iter().map(|e| e.rule).collect();
        assert_eq!(rules, vec![1, 2, 9, 10]);
    }

    #[test]
    fn omega_exhausts_fuel() {
        let t = need(r"(\x. x x) (\x. x x)");
        assert!(matches!(evaluate(&t, 50), Err(EvalError::FuelExhausted { .. })));
    }

    #[test]
    fn split_answer_shapes() {
        let s = EnrichedTerm::from_parts(
            ContextPath(vec![Frame::ESubBody { binder: "x".into(), bound: need(r"\z. z") }]),
            need(r"\y. y"),
        );
        let (a, v) = split_answer(&s).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(v, need(r"\y. y"));
        let s = EnrichedTerm::from_parts(ContextPath::empty(), need(r"\y. y"));
        assert!(split_answer(&s).unwrap().0.is_empty());
        let s = EnrichedTerm::from_parts(ContextPath::empty(), need(r"(\y. y) (\z. z)"));
        assert_eq!(split_answer(&s), Err(NotAnAnswer));
    }
}
