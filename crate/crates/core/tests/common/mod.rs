#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use dgoim::corpus::TermGen;
use dgoim::graph::{Graph, LinkId, NodeLabel};
use dgoim::iso::isomorphic_annotated;
use dgoim::term::{free_vars, free_vars_ctx, ContextPath, Frame, Name, Strategy, Term, VarMultiset};
use dgoim::translate::{
    compose, compose_contexts, translate_actx, translate_ectx, translate_term, ContextTranslation, TranslationResult,
};

fn tag(kind: &str, x: &Name) -> u64 {
    let mut h = DefaultHasher::new();
    (kind, x.as_str()).hash(&mut h);
    h.finish() | 1 << 63
}

pub fn term_annotation(t: &TranslationResult) -> HashMap<LinkId, u64> {
    let mut ann: HashMap<LinkId, u64> = t.occurrences.iter().map(|(x, l)| (*l, tag("out", x))).collect();
    ann.insert(t.root, 1);
    ann
}

pub fn ctx_annotation(c: &ContextTranslation) -> HashMap<LinkId, u64> {
    let mut ann = HashMap::new();
    ann.insert(c.root, 1);
    for (x, l) in &c.hole_vars {
        ann.insert(*l, tag("in", x));
    }
    ann.entry(c.hole).or_insert(2);
    for (x, l) in &c.occurrences {
        ann.entry(*l).or_insert(tag("out", x));
    }
    ann
}

fn same_term(a: &TranslationResult, b: &TranslationResult) -> bool {
    isomorphic_annotated(&a.graph, &term_annotation(a), &b.graph, &term_annotation(b))
}

fn same_ctx(a: &ContextTranslation, b: &ContextTranslation) -> bool {
    isomorphic_annotated(&a.graph, &ctx_annotation(a), &b.graph, &ctx_annotation(b))
}

/// Binders of `e` whose scope contains the hole.
pub fn hole_binders(e: &ContextPath) -> Vec<Name> {
    e.frames()
        .iter()
        .filter_map(|f| match f {
            Frame::ESubBody { binder, .. } => Some(binder.clone()),
            _ => None,
        })
        .collect()
}

pub fn answer_context(g: &mut TermGen, scope: &[Name]) -> ContextPath {
    use rand::Rng;
    let n = g.rng().gen_range(0..=3);
    let mut scope = scope.to_vec();
    let mut frames = Vec::new();
    for i in 0..n {
        let size = g.rng().gen_range(2..=8);
        let bound = g.term_of_size(size, &scope);
        let binder = Name::new(format!("a{i}"));
        scope.push(binder.clone());
        frames.push(Frame::ESubBody { binder, bound });
    }
    ContextPath(frames)
}

/// A random evaluation context and a term whose free names may be captured
/// by the context.
pub fn context_and_term(seed: u64, s: Strategy) -> (ContextPath, Term) {
    use rand::Rng;
    let mut g = TermGen::new(seed, s);
    let outer = [Name::new("y")];
    let e = g.eval_context(4, &outer, true);
    let mut scope = outer.to_vec();
    scope.extend(hole_binders(&e));
    let size = g.rng().gen_range(1..=10);
    let t = g.term_of_size(size, &scope);
    (e, t)
}

/// `A[t]† = A‡_FV(t) ∘ t†`
pub fn decomposition_answer(a: &ContextPath, t: &Term) -> bool {
    let direct = translate_term(&a.plug(t.clone()));
    let ctx = translate_actx(a, &free_vars(t)).expect("answer context");
    compose(&ctx, &translate_term(t)).is_ok_and(|c| same_term(&direct, &c))
}

/// `(E[E'])‡_M = E‡_FV_M(E') ∘ E'‡_M`
pub fn decomposition_nested(e: &ContextPath, e2: &ContextPath, m: &VarMultiset) -> bool {
    let whole = ContextPath(e.frames().iter().chain(e2.frames()).cloned().collect());
    let direct = translate_ectx(&whole, m).expect("context");
    let outer = translate_ectx(e, &free_vars_ctx(e2, m)).expect("context");
    let inner = translate_ectx(e2, m).expect("context");
    compose_contexts(&outer, &inner).is_ok_and(|c| same_ctx(&direct, &c))
}

/// `E‡_(M+M')` is `E‡_M` beside bare wires for `M'`, when `E` does not capture `M'`.
pub fn decomposition_uncaptured(e: &ContextPath, m: &VarMultiset, extra: &VarMultiset) -> bool {
    let direct = translate_ectx(e, &m.clone().sum(extra)).expect("context");
    let mut side = translate_ectx(e, m).expect("context");
    let g: &mut Graph = &mut side.graph;
    for (x, k) in extra.iter() {
        for _ in 0..k {
            let l = g.add_link(None);
            side.hole_vars.push((x.clone(), l));
            side.occurrences.push((x.clone(), l));
        }
    }
    g.inputs = std::iter::once(side.root).chain(side.hole_vars.iter().map(|p| p.1)).collect();
    g.outputs = std::iter::once(side.hole).chain(side.occurrences.iter().map(|p| p.1)).collect();
    same_ctx(&direct, &side)
}

/// `⟨·⟩‡_FV(t) ∘ t† = t†`
pub fn decomposition_unit(t: &Term) -> bool {
    let ctx = translate_ectx(&ContextPath::empty(), &free_vars(t)).expect("context");
    compose(&ctx, &translate_term(t)).is_ok_and(|c| same_term(&translate_term(t), &c))
}

pub fn fv_plug_equation(e: &ContextPath, t: &Term) -> bool {
    free_vars(&e.plug(t.clone())) == free_vars_ctx(e, &free_vars(t))
}

pub fn fv_sum_equation(e: &ContextPath, m: &VarMultiset, extra: &VarMultiset) -> bool {
    free_vars_ctx(e, &m.clone().sum(extra)) == free_vars_ctx(e, m).sum(extra)
}

pub fn binder_count(t: &Term) -> usize {
    match t {
        Term::Var(_) => 0,
        Term::Abs(_, b) => 1 + binder_count(b),
        Term::App(_, f, a) => binder_count(f) + binder_count(a),
        Term::ESub(b, _, u) => 1 + binder_count(b) + binder_count(u),
    }
}

pub fn one_con_per_binder(t: &Term) -> bool {
    let g = translate_term(t).graph;
    g.nodes().filter(|(_, n)| matches!(n.label, NodeLabel::Con(_))).count() == binder_count(t)
}

/// A multiset of fresh names that no context captures.
pub fn fresh_multiset(k: usize) -> VarMultiset {
    VarMultiset::from_names((0..k).map(|i| Name::new(format!("fresh{}", i % 2))))
}
