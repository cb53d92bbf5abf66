//! Translation of terms and answer contexts (`t†`, `A†`) and of evaluation
//! contexts (`E‡_M`) into graphs, plugging of translations, and readback of
//! answer graphs.
//!
//! Wiring: `x†` is a single link. `λx.t†` is a `!`-box holding a λ-node
//! whose body output is `t†`; all occurrences of `x` in `t` enter one
//! contraction node feeding the λ's variable port, and every other free
//! occurrence leaves the box through its own `?`-door. `(t @ u)†` sends the
//! composition output through a dereliction into `t†` and the argument
//! output into `u†`. `t[x←u]†` is `t†` with the occurrences of `x` entering
//! one contraction node whose output is the root of `u†`.
//!
//! Context clauses mirror these, except `A[v] @ E` (left-to-right) where the
//! function part has already been opened: `v` appears as a bare λ-node with
//! no doors and no dereliction.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::graph::{port, End, Graph, LinkId, NodeId, NodeLabel};
use crate::term::{split_esubs, ContextPath, Frame, Name, Strategy, Term, VarMultiset};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("not an answer context")]
    NotAnswerContext,
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("graph is not answer-shaped: {0}")]
    NotReadable(String),
}

/// `t†`: one input (the root); one output per free occurrence.
#[derive(Debug, Clone)]
pub struct TranslationResult {
    pub graph: Graph,
    pub root: LinkId,
    /// Free occurrences in left-to-right order.
    pub occurrences: Vec<(Name, LinkId)>,
}

impl TranslationResult {
    pub fn free_var_ports(&self) -> BTreeMap<Name, Vec<LinkId>> {
        group(&self.occurrences)
    }
}

/// `E‡_M`: inputs are the root then the hole's variable links; outputs are
/// the hole then the free occurrences of the context.
#[derive(Debug, Clone)]
pub struct ContextTranslation {
    pub graph: Graph,
    pub root: LinkId,
    pub hole: LinkId,
    pub hole_vars: Vec<(Name, LinkId)>,
    pub occurrences: Vec<(Name, LinkId)>,
}

impl ContextTranslation {
    pub fn free_var_ports(&self) -> BTreeMap<Name, Vec<LinkId>> {
        group(&self.occurrences)
    }
}

fn group(occ: &[(Name, LinkId)]) -> BTreeMap<Name, Vec<LinkId>> {
    let mut m: BTreeMap<Name, Vec<LinkId>> = BTreeMap::new();
    for (x, l) in occ {
        m.entry(x.clone()).or_default().push(*l);
    }
    m
}

struct Frag {
    root: LinkId,
    occ: Vec<(Name, LinkId)>,
}

#[derive(Default)]
struct Builder {
    g: Graph,
    owner: Option<NodeId>,
}

impl Builder {
    fn link(&mut self) -> LinkId {
        self.g.add_link(self.owner)
    }

    fn term(&mut self, t: &Term) -> Frag {
        match t {
            Term::Var(x) => {
                let l = self.link();
                Frag { root: l, occ: vec![(x.clone(), l)] }
            }
            Term::Abs(x, b) => self.abs(x, b, true),
            Term::App(s, f, a) => {
                let ff = self.term(f);
                let af = self.term(a);
                self.app(*s, ff, af, true)
            }
            Term::ESub(b, x, u) => {
                let bf = self.term(b);
                let uf = self.term(u);
                let mut occ = self.bind(x, bf.occ, uf.root);
                occ.extend(uf.occ);
                Frag { root: bf.root, occ }
            }
        }
    }

    fn abs(&mut self, x: &Name, body: &Term, boxed: bool) -> Frag {
        let outer = self.owner;
        let bang = boxed.then(|| {
            let b = self.g.new_box(outer);
            self.owner = Some(b);
            b
        });
        let input = self.link();
        let var = self.link();
        let bf = self.term(body);
        let (bound, rest): (Vec<_>, Vec<_>) = bf.occ.into_iter().partition(|(y, _)| y == x);
        self.g.add_node(NodeLabel::Con(bound.len()), bound.iter().map(|p| p.1).collect(), vec![var], self.owner);
        self.g.add_node(NodeLabel::Lam, vec![input, var], vec![bf.root], self.owner);
        let Some(bang) = bang else {
            return Frag { root: input, occ: rest };
        };
        let mut doors = Vec::with_capacity(rest.len());
        let mut occ = Vec::with_capacity(rest.len());
        for (y, l) in rest {
            let o = self.g.add_link(outer);
            doors.push(self.g.add_node(NodeLabel::WhyNot, vec![l], vec![o], Some(bang)));
            occ.push((y, o));
        }
        self.owner = outer;
        let root = self.link();
        self.g.set_ports(bang, vec![root], vec![input]);
        self.g.set_aux(bang, doors);
        Frag { root, occ }
    }

    fn app(&mut self, s: Strategy, fun: Frag, arg: Frag, der: bool) -> Frag {
        let comp = if der {
            let d = self.link();
            self.g.add_node(NodeLabel::Der, vec![d], vec![fun.root], self.owner);
            d
        } else {
            fun.root
        };
        let r = self.link();
        self.g.add_node(NodeLabel::app(s), vec![r], vec![comp, arg.root], self.owner);
        let mut occ = fun.occ;
        occ.extend(arg.occ);
        Frag { root: r, occ }
    }

    /// Feeds the occurrences of `x` into a new contraction node whose output
    /// is `out`; returns the remaining occurrences.
    fn bind(&mut self, x: &Name, occ: Vec<(Name, LinkId)>, out: LinkId) -> Vec<(Name, LinkId)> {
        let (bound, rest): (Vec<_>, Vec<_>) = occ.into_iter().partition(|(y, _)| y == x);
        self.g.add_node(NodeLabel::Con(bound.len()), bound.iter().map(|p| p.1).collect(), vec![out], self.owner);
        rest
    }

    fn ctx(&mut self, frames: &[Frame], inner: Frag) -> Result<Frag, TranslateError> {
        let mut cur = inner;
        for f in frames.iter().rev() {
            cur = self.frame(f, cur)?;
        }
        Ok(cur)
    }

    fn frame(&mut self, f: &Frame, cur: Frag) -> Result<Frag, TranslateError> {
        Ok(match f {
            Frame::ESubBody { binder, bound } => {
                let uf = self.term(bound);
                let mut occ = self.bind(binder, cur.occ, uf.root);
                occ.extend(uf.occ);
                Frag { root: cur.root, occ }
            }
            Frame::ESubBound { binder, body } => {
                let l = self.link();
                let e = self.ctx(&body.0, Frag { root: l, occ: vec![(binder.clone(), l)] })?;
                let mut occ = self.bind(binder, e.occ, cur.root);
                occ.extend(cur.occ);
                Frag { root: e.root, occ }
            }
            Frame::AppFun { strategy, arg } => {
                let af = self.term(arg);
                self.app(*strategy, cur, af, true)
            }
            Frame::AppArgWithAnswer { strategy, function } => {
                let ff = self.unboxed_answer(function)?;
                self.app(*strategy, ff, cur, false)
            }
            Frame::AppArg { strategy, function } => {
                let ff = self.term(function);
                self.app(*strategy, ff, cur, true)
            }
        })
    }

    /// `A[λx.t]` with the abstraction's box already opened.
    fn unboxed_answer(&mut self, t: &Term) -> Result<Frag, TranslateError> {
        let (subs, v) = split_esubs(t);
        let Term::Abs(x, body) = v else {
            return Err(TranslateError::NotAnswerContext);
        };
        let f = self.abs(x, body, false);
        let frames: Vec<Frame> =
            subs.into_iter().map(|(binder, bound)| Frame::ESubBody { binder, bound }).collect();
        self.ctx(&frames, f)
    }
}

/// `t†`
pub fn translate_term(t: &Term) -> TranslationResult {
    let mut b = Builder::default();
    let f = b.term(t);
    let mut graph = b.g;
    graph.inputs = vec![f.root];
    graph.outputs = f.occ.iter().map(|p| p.1).collect();
    TranslationResult { graph, root: f.root, occurrences: f.occ }
}

fn multiset_links(b: &mut Builder, m: &VarMultiset) -> Vec<(Name, LinkId)> {
    let mut occ = Vec::new();
    for (x, k) in m.iter() {
        for _ in 0..k {
            let l = b.link();
            occ.push((x.clone(), l));
        }
    }
    occ
}

/// `E‡_M`, where `M` is the multiset of variables at the hole.
pub fn translate_ectx(e: &ContextPath, m: &VarMultiset) -> Result<ContextTranslation, TranslateError> {
    let mut b = Builder::default();
    let hole = b.link();
    let hole_vars = multiset_links(&mut b, m);
    let f = b.ctx(&e.0, Frag { root: hole, occ: hole_vars.clone() })?;
    let mut graph = b.g;
    graph.inputs = std::iter::once(f.root).chain(hole_vars.iter().map(|p| p.1)).collect();
    graph.outputs = std::iter::once(hole).chain(f.occ.iter().map(|p| p.1)).collect();
    Ok(ContextTranslation { graph, root: f.root, hole, hole_vars, occurrences: f.occ })
}

/// `A‡_M` for an answer context.
pub fn translate_actx(a: &ContextPath, m: &VarMultiset) -> Result<ContextTranslation, TranslateError> {
    if !a.is_answer_context() {
        return Err(TranslateError::NotAnswerContext);
    }
    translate_ectx(a, m)
}

fn sorted_names(occ: &[(Name, LinkId)]) -> Vec<Name> {
    let mut v: Vec<Name> = occ.iter().map(|p| p.0.clone()).collect();
    v.sort();
    v
}

/// Joins each hole variable of `ctx` with the matching output of the plugged
/// graph; occurrences of the same name are paired in order.
fn pair_vars(
    g: &mut Graph,
    hole_vars: &[(Name, LinkId)],
    plugged: &[(Name, LinkId)],
    dl: u32,
) -> Result<(), TranslateError> {
    if sorted_names(hole_vars) != sorted_names(plugged) {
        return Err(TranslateError::InterfaceMismatch(format!(
            "hole expects {:?}, plugged graph provides {:?}",
            sorted_names(hole_vars).iter().map(Name::as_str).collect::<Vec<_>>(),
            sorted_names(plugged).iter().map(Name::as_str).collect::<Vec<_>>()
        )));
    }
    let mut slots: HashMap<&Name, Vec<LinkId>> = HashMap::new();
    for (x, l) in hole_vars.iter().rev() {
        slots.entry(x).or_default().push(*l);
    }
    for (x, o) in plugged {
        let v = slots.get_mut(x).and_then(Vec::pop).expect("matched multiset");
        g.join_links(LinkId(o.0 + dl), v);
    }
    Ok(())
}

/// `E‡ ∘ t†`, link-collapsed.
pub fn compose(ctx: &ContextTranslation, t: &TranslationResult) -> Result<TranslationResult, TranslateError> {
    let mut g = ctx.graph.clone();
    let (_, dl) = g.absorb(&t.graph);
    g.join_links(ctx.hole, LinkId(t.root.0 + dl));
    pair_vars(&mut g, &ctx.hole_vars, &t.occurrences, dl)?;
    g.inputs = vec![ctx.root];
    g.outputs = ctx.occurrences.iter().map(|p| p.1).collect();
    g.collapse_links();
    let occurrences = ctx.occurrences.iter().map(|p| p.0.clone()).zip(g.outputs.iter().copied()).collect();
    Ok(TranslationResult { root: g.inputs[0], graph: g, occurrences })
}

/// `E‡ ∘ E'‡`, link-collapsed; the result's hole is the inner hole.
pub fn compose_contexts(
    outer: &ContextTranslation,
    inner: &ContextTranslation,
) -> Result<ContextTranslation, TranslateError> {
    let mut g = outer.graph.clone();
    let (_, dl) = g.absorb(&inner.graph);
    let sh = |l: LinkId| LinkId(l.0 + dl);
    g.join_links(outer.hole, sh(inner.root));
    pair_vars(&mut g, &outer.hole_vars, &inner.occurrences, dl)?;
    let inner_vars: Vec<LinkId> = inner.hole_vars.iter().map(|p| sh(p.1)).collect();
    g.inputs = std::iter::once(outer.root).chain(inner_vars.iter().copied()).collect();
    g.outputs = std::iter::once(sh(inner.hole)).chain(outer.occurrences.iter().map(|p| p.1)).collect();
    g.collapse_links();
    let root = g.inputs[0];
    let hole = g.outputs[0];
    let hole_vars = inner.hole_vars.iter().map(|p| p.0.clone()).zip(inner_vars).collect();
    let occurrences = outer.occurrences.iter().map(|p| p.0.clone()).zip(g.outputs.iter().copied().skip(1)).collect();
    Ok(ContextTranslation { graph: g, root, hole, hole_vars, occurrences })
}

/// `E‡_{FV(t)} ∘ t†` for a context path and a term.
pub fn translate_plugged(e: &ContextPath, t: &Term) -> Result<TranslationResult, TranslateError> {
    let ctx = translate_ectx(e, &crate::term::free_vars(t))?;
    compose(&ctx, &translate_term(t))
}

// ---- readback ------------------------------------------------------------------

struct Reader<'g> {
    g: &'g Graph,
    esubs: HashMap<Option<NodeId>, Vec<NodeId>>,
}

fn con_name(c: NodeId) -> Name {
    Name(format!("x{}", c.0))
}

impl<'g> Reader<'g> {
    fn new(g: &'g Graph) -> Self {
        let mut esubs: HashMap<Option<NodeId>, Vec<NodeId>> = HashMap::new();
        for (n, node) in g.nodes() {
            if matches!(node.label, NodeLabel::Con(_)) {
                let feeds_lambda = g
                    .target(node.outs[0])
                    .is_some_and(|(m, p)| g.label(m) == NodeLabel::Lam && p == port::LAM_VAR);
                if !feeds_lambda {
                    esubs.entry(node.owner).or_default().push(n);
                }
            }
        }
        Reader { g, esubs }
    }

    fn read(&self, l: LinkId) -> Result<Term, TranslateError> {
        let g = self.g;
        let Some(end) = g.link(l).dst else {
            let i = g.outputs.iter().position(|&o| o == l).unwrap_or(usize::MAX);
            return Ok(Term::Var(Name(format!("o{i}"))));
        };
        let End::Node(n, p) = end else {
            return Err(TranslateError::NotReadable("link-to-link edge".into()));
        };
        let node = g.node(n);
        match node.label {
            NodeLabel::Bang => {
                let lam = g.target(node.outs[0]).map(|(m, _)| m);
                match lam {
                    Some(m) if g.label(m) == NodeLabel::Lam => self.lambda(m, Some(n)),
                    _ => Err(TranslateError::NotReadable("box without abstraction".into())),
                }
            }
            NodeLabel::Lam if p == port::LAM_IN => self.lambda(n, None),
            NodeLabel::Lam => Err(TranslateError::NotReadable("variable port reached".into())),
            NodeLabel::AppNeed | NodeLabel::AppLR | NodeLabel::AppRL => {
                let s = node.label.strategy().expect("application");
                let comp = node.outs[port::APP_COMP];
                let f = match g.target(comp) {
                    Some((d, _)) if g.label(d) == NodeLabel::Der => self.read(g.node(d).outs[0])?,
                    _ => self.read(comp)?,
                };
                let a = self.read(node.outs[port::APP_ARG])?;
                Ok(Term::App(s, Box::new(f), Box::new(a)))
            }
            NodeLabel::Der => Err(TranslateError::NotReadable("dereliction outside application".into())),
            NodeLabel::Con(_) => Ok(Term::Var(con_name(n))),
            NodeLabel::WhyNot => self.read(node.outs[0]),
        }
    }

    fn lambda(&self, lam: NodeId, level: Option<NodeId>) -> Result<Term, TranslateError> {
        let g = self.g;
        let node = g.node(lam);
        let var = node.ins[port::LAM_VAR];
        let x = match g.source(var) {
            Some((c, _)) if matches!(g.label(c), NodeLabel::Con(_)) => con_name(c),
            _ => return Err(TranslateError::NotReadable("bound variable without contraction".into())),
        };
        let body = match level {
            Some(b) => self.read_level(node.outs[port::LAM_BODY], Some(b))?,
            None => self.read(node.outs[port::LAM_BODY])?,
        };
        Ok(Term::Abs(x, Box::new(body)))
    }

    /// Reads the term at `l` and wraps the explicit substitutions whose
    /// contraction nodes live at `level`, innermost first.
    fn read_level(&self, l: LinkId, level: Option<NodeId>) -> Result<Term, TranslateError> {
        let mut t = self.read(l)?;
        let mut pending: Vec<(Name, Term)> = Vec::new();
        for &c in self.esubs.get(&level).into_iter().flatten() {
            pending.push((con_name(c), self.read(self.g.node(c).outs[0])?));
        }
        while !pending.is_empty() {
            let pick = (0..pending.len())
                .find(|&i| {
                    let x = &pending[i].0;
                    pending.iter().enumerate().all(|(j, (_, u))| j == i || crate::term::free_vars(u).multiplicity(x) == 0)
                })
                .ok_or_else(|| TranslateError::NotReadable("cyclic substitutions".into()))?;
            let (x, u) = pending.remove(pick);
            t = Term::ESub(Box::new(t), x, Box::new(u));
        }
        Ok(t)
    }
}

/// Reads `A[v]` back from a graph of shape `A‡ ∘ v†`.
pub fn readback(g: &Graph) -> Result<Term, TranslateError> {
    if g.inputs.len() != 1 || !g.outputs.is_empty() {
        return Err(TranslateError::NotReadable("interface is not (1, 0)".into()));
    }
    let root = g.inputs[0];
    match g.target(root) {
        Some((n, _)) if g.label(n) == NodeLabel::Bang => {}
        _ => return Err(TranslateError::NotReadable("root is not a value".into())),
    }
    Reader::new(g).read_level(root, None)
}

/// Reads the sub-term rooted at `l` without collecting substitutions. Names of
/// variables bound outside the sub-term are derived from their binders.
pub fn read_subterm(g: &Graph, l: LinkId) -> Result<Term, TranslateError> {
    Reader::new(g).read(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::isomorphic;
    use crate::term::{alpha_eq, parse};

    fn need(s: &str) -> Term {
        parse(s, Strategy::Need).unwrap()
    }

    fn count(g: &Graph, f: impl Fn(NodeLabel) -> bool) -> usize {
        g.nodes().filter(|(_, n)| f(n.label)).count()
    }

    #[test]
    fn identity_translation() {
        let r = translate_term(&need(r"\x. x"));
        assert_eq!(r.graph.validate(), vec![]);
        assert_eq!(count(&r.graph, |l| l == NodeLabel::Lam), 1);
        assert_eq!(count(&r.graph, |l| l == NodeLabel::Con(1)), 1);
        assert_eq!(r.graph.metrics().box_count, 1);
        assert_eq!(r.graph.inputs.len(), 1);
        assert!(r.graph.outputs.is_empty());
    }

    #[test]
    fn variable_is_a_wire() {
        let r = translate_term(&need("x"));
        assert_eq!(r.graph.metrics().node_count, 0);
        assert_eq!(r.graph.inputs, r.graph.outputs);
        assert_eq!(r.free_var_ports().len(), 1);
    }

    #[test]
    fn application_translation() {
        let r = translate_term(&need(r"(\x. x) (\y. y)"));
        assert_eq!(r.graph.validate(), vec![]);
        assert_eq!(r.graph.label(r.graph.target(r.root).unwrap().0), NodeLabel::AppNeed);
        assert_eq!(r.graph.metrics().box_count, 2);
    }

    #[test]
    fn alpha_invariance_and_size() {
        let a = translate_term(&need(r"\x. x")).graph;
        let b = translate_term(&need(r"\y. y")).graph;
        let c = translate_term(&need(r"\x. \y. y")).graph;
        assert!(isomorphic(&a, &b));
        assert!(!isomorphic(&a, &c));
    }

    #[test]
    fn answer_context_plugging() {
        let a = ContextPath(vec![Frame::ESubBody { binder: "x".into(), bound: need(r"\y. y") }]);
        let ctx = translate_actx(&a, &VarMultiset::new()).unwrap();
        assert_eq!(ctx.graph.validate(), vec![]);
        assert_eq!(ctx.graph.metrics().box_count, 1);
        let plugged = compose(&ctx, &translate_term(&need(r"\z. z"))).unwrap();
        assert_eq!(plugged.graph.validate(), vec![]);
        assert!(!plugged.graph.has_link_link_edges());
        let direct = translate_term(&Term::esub(need(r"\z. z"), "x", need(r"\y. y")));
        assert!(isomorphic(&plugged.graph, &direct.graph));
        let empty = translate_actx(&ContextPath::empty(), &VarMultiset::new()).unwrap();
        assert_eq!(empty.root, empty.hole);
    }

    #[test]
    fn compose_rejects_mismatch() {
        let ctx = translate_ectx(&ContextPath::empty(), &VarMultiset::singleton("x".into())).unwrap();
        let t = translate_term(&need("y"));
        assert!(matches!(compose(&ctx, &t), Err(TranslateError::InterfaceMismatch(_))));
    }

    #[test]
    fn readback_round_trip() {
        let t = need(r"\x. x");
        assert!(alpha_eq(&readback(&translate_term(&t).graph).unwrap(), &t));
        let t = Term::esub(need(r"\y. y"), "x", need(r"\y. y"));
        assert!(alpha_eq(&readback(&translate_term(&t).graph).unwrap(), &t));
        let t = need(r"(\x. x) (\y. y)");
        assert!(readback(&translate_term(&t).graph).is_err());
    }
}
