//! Passes-only token machines for call-by-name: one with exponential
//! signatures and one that jumps back on exiting a box. Neither changes the
//! graph.

use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::graph::{port, Graph, LinkId, NodeId, NodeLabel};
use crate::machine::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExpSignature {
    Star,
    Cons(LinkId, Rc<ExpSignature>),
    Pair(Rc<ExpSignature>, Rc<ExpSignature>),
}

impl ExpSignature {
    pub fn size(&self) -> usize {
        match self {
            ExpSignature::Star => 1,
            ExpSignature::Cons(_, s) => 1 + s.size(),
            ExpSignature::Pair(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// `(link-bearing cells, mark cells)`
    fn cell_kinds(&self) -> (usize, usize) {
        match self {
            ExpSignature::Star => (0, 1),
            ExpSignature::Cons(_, s) => {
                let (l, m) = s.cell_kinds();
                (l + 1, m)
            }
            ExpSignature::Pair(a, b) => {
                let (l1, m1) = a.cell_kinds();
                let (l2, m2) = b.cell_kinds();
                (l1 + l2, m1 + m2 + 1)
            }
        }
    }
}

impl fmt::Display for ExpSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpSignature::Star => write!(f, "⋆"),
            ExpSignature::Cons(e, s) => write!(f, "{e}·{s}"),
            ExpSignature::Pair(a, b) => write!(f, "⟨{a},{b}⟩"),
        }
    }
}

/// Computation-stack marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mark {
    /// Request for the argument of the function being evaluated.
    A,
    At,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbnToken {
    pub dir: Direction,
    pub comp: Vec<Mark>,
    pub boxes: Vec<Rc<ExpSignature>>,
    pub env: Vec<Rc<ExpSignature>>,
}

/// Environment stack of the jumping machine: a persistent list of
/// `(link, saved environment)` entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Env(Option<Rc<EnvCell>>);

#[derive(Debug, PartialEq, Eq)]
pub struct EnvCell {
    pub link: LinkId,
    pub saved: Env,
    pub next: Env,
}

impl Env {
    pub fn push(&self, link: LinkId, saved: Env) -> Env {
        Env(Some(Rc::new(EnvCell { link, saved, next: self.clone() })))
    }

    pub fn pop(&self) -> Option<(LinkId, Env, Env)> {
        self.0.as_ref().map(|c| (c.link, c.saved.clone(), c.next.clone()))
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        let mut cur = &self.0;
        while let Some(c) = cur {
            n += 1;
            cur = &c.next.0;
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    /// Entries counted as if every saved environment were copied.
    pub fn cells_unshared(&self) -> u128 {
        self.unshared_memo(&mut std::collections::HashMap::new())
    }

    fn unshared_memo(&self, memo: &mut std::collections::HashMap<*const EnvCell, u128>) -> u128 {
        let Some(c) = &self.0 else { return 0 };
        if let Some(&n) = memo.get(&Rc::as_ptr(c)) {
            return n;
        }
        let n = c.saved.unshared_memo(memo).saturating_add(c.next.unshared_memo(memo)).saturating_add(1);
        memo.insert(Rc::as_ptr(c), n);
        n
    }

    fn collect_shared(&self, seen: &mut std::collections::HashSet<*const EnvCell>) {
        let mut cur = &self.0;
        while let Some(c) = cur {
            if !seen.insert(Rc::as_ptr(c)) {
                return;
            }
            c.saved.collect_shared(seen);
            cur = &c.next.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumpToken {
    pub dir: Direction,
    pub comp: Vec<Mark>,
    /// Box stack entries are `(dereliction input, environment there)`.
    pub boxes: Vec<(LinkId, Env)>,
    pub env: Env,
}

/// Token size in cells and bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TokenSize {
    pub cells: u128,
    pub bits: u128,
    /// Cells when shared environment snapshots are counted once.
    pub shared_cells: u128,
}

fn link_bits(link_count: usize) -> u128 {
    (usize::BITS - link_count.max(2).saturating_sub(1).leading_zeros()) as u128
}

pub trait TokenSized {
    fn token_size(&self, link_count: usize) -> TokenSize;
}

impl TokenSized for CbnToken {
    /// One cell for the direction, one empty marker per stack, one per mark
    /// and one per signature constructor.
    fn token_size(&self, link_count: usize) -> TokenSize {
        let (mut links, mut marks) = (0usize, 4 + self.comp.len());
        for s in self.boxes.iter().chain(self.env.iter()) {
            let (l, m) = s.cell_kinds();
            links += l;
            marks += m;
        }
        let cells = (links + marks) as u128;
        TokenSize { cells, bits: links as u128 * link_bits(link_count) + 2 * marks as u128, shared_cells: cells }
    }
}

impl TokenSized for JumpToken {
    fn token_size(&self, link_count: usize) -> TokenSize {
        let marks = 4 + self.comp.len() as u128;
        let mut memo = std::collections::HashMap::new();
        let mut links: u128 = self.env.unshared_memo(&mut memo);
        for (_, e) in &self.boxes {
            links = links.saturating_add(e.unshared_memo(&mut memo)).saturating_add(1);
        }
        let mut seen = std::collections::HashSet::new();
        self.env.collect_shared(&mut seen);
        for (_, e) in &self.boxes {
            e.collect_shared(&mut seen);
        }
        let shared_links = self.boxes.len() as u128 + seen.len() as u128;
        TokenSize {
            cells: links.saturating_add(marks),
            bits: links.saturating_mul(link_bits(link_count)).saturating_add(2 * marks),
            shared_cells: shared_links + marks,
        }
    }
}

pub fn token_size(t: &impl TokenSized, g: &Graph) -> TokenSize {
    t.token_size(g.metrics().link_count)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BaselineOutcome {
    /// The token reached the root of a value with an empty computation stack.
    Value(LinkId),
    FuelExhausted,
    StuckToken(String),
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineReport {
    pub outcome: BaselineOutcome,
    pub transitions: u64,
    pub jumps: u64,
    pub graph_size: usize,
    pub graph_unchanged: bool,
    pub max_token_cells: u128,
    pub max_token_shared_cells: u128,
    pub max_token_bits: u128,
    /// Largest growth of the token cell count in a single transition.
    pub max_cell_growth: u128,
    pub cells_series: Vec<(u64, u128)>,
}

impl BaselineReport {
    pub fn value(&self) -> Option<LinkId> {
        match self.outcome {
            BaselineOutcome::Value(l) => Some(l),
            _ => None,
        }
    }
}

enum Step {
    Next,
    Value,
    Stuck(String),
}

struct Here {
    node: NodeId,
    label: NodeLabel,
    port: usize,
}

fn here(g: &Graph, pos: LinkId, dir: Direction) -> Option<Here> {
    let (node, port) = match dir {
        Direction::Up => g.target(pos)?,
        Direction::Down => g.source(pos)?,
    };
    Some(Here { node, label: g.label(node), port })
}

fn check_pre(g: &Graph) -> Result<LinkId, String> {
    if g.inputs.len() != 1 || !g.outputs.is_empty() {
        return Err("graph must have exactly one input and no outputs".into());
    }
    if g.nodes().any(|(_, n)| matches!(n.label, NodeLabel::AppLR | NodeLabel::AppRL)) {
        return Err("passes-only machines need call-by-need application nodes".into());
    }
    Ok(g.inputs[0])
}

trait PassMachine {
    type Token: TokenSized;
    fn step(&mut self, g: &Graph, jumps: &mut u64) -> Step;
    fn token(&self) -> &Self::Token;
    fn pos(&self) -> LinkId;
}

fn drive<M: PassMachine>(g: &Graph, opts: &BaselineOptions, m: &mut M) -> BaselineReport {
    let fp = g.fingerprint();
    let links = g.metrics().link_count;
    let size0 = m.token().token_size(links);
    let mut rep = BaselineReport {
        outcome: BaselineOutcome::FuelExhausted,
        transitions: 0,
        jumps: 0,
        graph_size: g.size(),
        graph_unchanged: true,
        max_token_cells: size0.cells,
        max_token_shared_cells: size0.shared_cells,
        max_token_bits: size0.bits,
        max_cell_growth: 0,
        cells_series: vec![(0, size0.cells)],
    };
    let mut prev = size0.cells;
    while rep.transitions < opts.fuel {
        match m.step(g, &mut rep.jumps) {
            Step::Value => {
                rep.outcome = BaselineOutcome::Value(m.pos());
                break;
            }
            Step::Stuck(msg) => {
                rep.outcome = BaselineOutcome::StuckToken(msg);
                break;
            }
            Step::Next => {}
        }
        rep.transitions += 1;
        let s = m.token().token_size(links);
        rep.max_cell_growth = rep.max_cell_growth.max(s.cells.saturating_sub(prev));
        prev = s.cells;
        rep.max_token_cells = rep.max_token_cells.max(s.cells);
        rep.max_token_shared_cells = rep.max_token_shared_cells.max(s.shared_cells);
        rep.max_token_bits = rep.max_token_bits.max(s.bits);
        if let Some(k) = opts.sample_every.filter(|&k| k > 0) {
            if rep.transitions.is_multiple_of(k) {
                rep.cells_series.push((rep.transitions, s.cells));
            }
        }
    }
    rep.graph_unchanged = g.fingerprint() == fp;
    rep
}

pub struct CbnState {
    pub pos: LinkId,
    pub token: CbnToken,
}

impl CbnState {
    pub fn new(root: LinkId) -> Self {
        CbnState { pos: root, token: CbnToken { dir: Direction::Up, comp: Vec::new(), boxes: Vec::new(), env: Vec::new() } }
    }

    fn step_once(&mut self, g: &Graph) -> Step {
        use Direction::*;
        let Some(h) = here(g, self.pos, self.token.dir) else {
            return Step::Stuck(format!("{} has no node in direction {:?}", self.pos, self.token.dir));
        };
        let node = g.node(h.node);
        let t = &mut self.token;
        let star = || Rc::new(ExpSignature::Star);
        match (h.label, t.dir, h.port) {
            (l, Up, _) if l.is_app() => {
                t.comp.push(Mark::At);
                self.pos = node.outs[port::APP_COMP];
            }
            (l, Down, p) if l.is_app() && p == port::APP_COMP => match t.comp.pop() {
                Some(Mark::At) => {
                    t.dir = Down;
                    self.pos = node.ins[port::APP_IN];
                }
                Some(Mark::A) => {
                    t.dir = Up;
                    self.pos = node.outs[port::APP_ARG];
                }
                None => return Step::Stuck("application exit with empty computation stack".into()),
            },
            (l, Down, _) if l.is_app() => {
                t.comp.push(Mark::A);
                t.dir = Up;
                self.pos = node.outs[port::APP_COMP];
            }
            (NodeLabel::Lam, Up, p) if p == port::LAM_IN => match t.comp.pop() {
                Some(Mark::At) => self.pos = node.outs[port::LAM_BODY],
                Some(Mark::A) => {
                    t.dir = Down;
                    self.pos = node.ins[port::LAM_VAR];
                }
                None => return Step::Stuck("abstraction entered with empty computation stack".into()),
            },
            (NodeLabel::Lam, Up, _) => {
                t.comp.push(Mark::A);
                t.dir = Down;
                self.pos = node.ins[port::LAM_IN];
            }
            (NodeLabel::Lam, Down, _) => {
                t.comp.push(Mark::At);
                self.pos = node.ins[port::LAM_IN];
            }
            (NodeLabel::Der, Up, _) => {
                t.boxes.push(star());
                self.pos = node.outs[0];
            }
            (NodeLabel::Der, Down, _) => {
                t.boxes.pop();
                self.pos = node.ins[0];
            }
            (NodeLabel::Bang, Up, _) => {
                if t.comp.is_empty() {
                    return Step::Value;
                }
                let s = t.boxes.pop().unwrap_or_else(star);
                t.env.push(s);
                self.pos = node.outs[0];
            }
            (NodeLabel::Bang, Down, _) => {
                let Some(s) = t.env.pop() else {
                    return Step::Stuck("box exit with empty environment stack".into());
                };
                t.boxes.push(s);
                self.pos = node.ins[0];
            }
            (NodeLabel::WhyNot, Up, _) => {
                let Some(s) = t.env.pop() else {
                    return Step::Stuck("auxiliary door exit with empty environment stack".into());
                };
                let b = t.boxes.pop().unwrap_or_else(star);
                t.boxes.push(Rc::new(ExpSignature::Pair(s, b)));
                self.pos = node.outs[0];
            }
            (NodeLabel::WhyNot, Down, _) => {
                let Some(top) = t.boxes.pop() else {
                    return Step::Stuck("auxiliary door entry with empty box stack".into());
                };
                let ExpSignature::Pair(s, b) = &*top else {
                    return Step::Stuck(format!("auxiliary door entry with signature {top}"));
                };
                t.env.push(s.clone());
                t.boxes.push(b.clone());
                self.pos = node.ins[0];
            }
            (NodeLabel::Con(_), Up, p) => {
                let s = t.boxes.pop().unwrap_or_else(star);
                t.boxes.push(Rc::new(ExpSignature::Cons(node.ins[p], s)));
                self.pos = node.outs[0];
            }
            (NodeLabel::Con(_), Down, _) => {
                let Some(top) = t.boxes.pop() else {
                    return Step::Stuck("contraction entry with empty box stack".into());
                };
                let ExpSignature::Cons(e, s) = &*top else {
                    return Step::Stuck(format!("contraction entry with signature {top}"));
                };
                if !node.ins.contains(e) {
                    return Step::Stuck(format!("signature names {e}, not an input of {}", h.node));
                }
                t.boxes.push(s.clone());
                self.pos = *e;
            }
            (l, d, p) => return Step::Stuck(format!("no transition for {} {d:?} at port {p}", l.symbol())),
        }
        Step::Next
    }
}

impl PassMachine for CbnState {
    type Token = CbnToken;
    fn step(&mut self, g: &Graph, _: &mut u64) -> Step {
        self.step_once(g)
    }
    fn token(&self) -> &CbnToken {
        &self.token
    }
    fn pos(&self) -> LinkId {
        self.pos
    }
}

pub struct JumpState {
    pub pos: LinkId,
    pub token: JumpToken,
}

impl JumpState {
    pub fn new(root: LinkId) -> Self {
        JumpState {
            pos: root,
            token: JumpToken { dir: Direction::Up, comp: Vec::new(), boxes: Vec::new(), env: Env::default() },
        }
    }

    fn step_once(&mut self, g: &Graph, jumps: &mut u64) -> Step {
        use Direction::*;
        let Some(h) = here(g, self.pos, self.token.dir) else {
            return Step::Stuck(format!("{} has no node in direction {:?}", self.pos, self.token.dir));
        };
        let node = g.node(h.node);
        let t = &mut self.token;
        match (h.label, t.dir, h.port) {
            (l, Up, _) if l.is_app() => {
                t.comp.push(Mark::At);
                self.pos = node.outs[port::APP_COMP];
            }
            (l, Down, p) if l.is_app() && p == port::APP_COMP => match t.comp.pop() {
                Some(Mark::At) => {
                    t.dir = Down;
                    self.pos = node.ins[port::APP_IN];
                }
                Some(Mark::A) => {
                    t.dir = Up;
                    self.pos = node.outs[port::APP_ARG];
                }
                None => return Step::Stuck("application exit with empty computation stack".into()),
            },
            (l, Down, _) if l.is_app() => {
                t.comp.push(Mark::A);
                t.dir = Up;
                self.pos = node.outs[port::APP_COMP];
            }
            (NodeLabel::Lam, Up, p) if p == port::LAM_IN => match t.comp.pop() {
                Some(Mark::At) => self.pos = node.outs[port::LAM_BODY],
                _ => return Step::Stuck("abstraction entered without a pending application".into()),
            },
            (NodeLabel::Lam, Up, _) => {
                t.comp.push(Mark::A);
                t.dir = Down;
                self.pos = node.ins[port::LAM_IN];
            }
            (NodeLabel::Lam, Down, _) => {
                t.comp.push(Mark::At);
                self.pos = node.ins[port::LAM_IN];
            }
            (NodeLabel::Der, Up, _) => {
                t.boxes.push((self.pos, t.env.clone()));
                self.pos = node.outs[0];
            }
            (NodeLabel::Bang, Up, _) => {
                if t.comp.is_empty() {
                    return Step::Value;
                }
                let Some((e, saved)) = t.boxes.pop() else {
                    return Step::Stuck("box entry with empty box stack".into());
                };
                t.env = t.env.push(e, saved);
                self.pos = node.outs[0];
            }
            (NodeLabel::Bang, Down, _) => {
                let Some((e, saved, _)) = t.env.pop() else {
                    return Step::Stuck("box exit with empty environment stack".into());
                };
                t.env = saved;
                *jumps += 1;
                self.pos = e;
            }
            (NodeLabel::WhyNot, Up, _) => {
                let Some((_, _, rest)) = t.env.pop() else {
                    return Step::Stuck("auxiliary door exit with empty environment stack".into());
                };
                t.env = rest;
                self.pos = node.outs[0];
            }
            (NodeLabel::Con(_), Up, _) => self.pos = node.outs[0],
            (l, d, p) => return Step::Stuck(format!("no transition for {} {d:?} at port {p}", l.symbol())),
        }
        Step::Next
    }
}

impl PassMachine for JumpState {
    type Token = JumpToken;
    fn step(&mut self, g: &Graph, jumps: &mut u64) -> Step {
        self.step_once(g, jumps)
    }
    fn token(&self) -> &JumpToken {
        &self.token
    }
    fn pos(&self) -> LinkId {
        self.pos
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineOptions {
    pub fuel: u64,
    pub sample_every: Option<u64>,
}

pub fn cbn_run(g: &Graph, fuel: u64) -> Result<BaselineReport, String> {
    cbn_run_with(g, &BaselineOptions { fuel, sample_every: None })
}

pub fn cbn_run_with(g: &Graph, opts: &BaselineOptions) -> Result<BaselineReport, String> {
    let root = check_pre(g)?;
    Ok(drive(g, opts, &mut CbnState::new(root)))
}

pub fn jump_run(g: &Graph, fuel: u64) -> Result<BaselineReport, String> {
    jump_run_with(g, &BaselineOptions { fuel, sample_every: None })
}

pub fn jump_run_with(g: &Graph, opts: &BaselineOptions) -> Result<BaselineReport, String> {
    let root = check_pre(g)?;
    Ok(drive(g, opts, &mut JumpState::new(root)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_eq_open, parse, Strategy};
    use crate::translate::{read_subterm, translate_term};

    fn graph(s: &str) -> Graph {
        translate_term(&parse(s, Strategy::Need).unwrap()).graph
    }

    #[test]
    fn identity_applied_to_identity() {
        let g = graph(r"(\x. x) (\y. y)");
        for rep in [cbn_run(&g, 1000).unwrap(), jump_run(&g, 1000).unwrap()] {
            assert!(rep.graph_unchanged);
            let v = rep.value().expect("value");
            assert!(alpha_eq_open(&read_subterm(&g, v).unwrap(), &parse(r"\y. y", Strategy::Need).unwrap()));
        }
        assert_eq!(cbn_run(&g, 1000).unwrap().value(), jump_run(&g, 1000).unwrap().value());
    }

    #[test]
    fn shared_argument_is_visited_twice() {
        let g = graph(r"(\x. x x) (\y. y)");
        let c = cbn_run(&g, 10_000).unwrap();
        let j = jump_run(&g, 10_000).unwrap();
        assert_eq!(c.value(), j.value());
        assert!(c.value().is_some());
        assert!(j.jumps > 0);
    }

    #[test]
    fn rejects_value_applications() {
        let g = translate_term(&parse(r"(\x. x) (\y. y)", Strategy::LeftToRightValue).unwrap()).graph;
        assert!(cbn_run(&g, 10).is_err());
        assert!(jump_run(&g, 10).is_err());
    }

    #[test]
    fn fuel_is_respected() {
        let g = graph(r"(\x. x x) (\x. x x)");
        let rep = cbn_run(&g, 500).unwrap();
        assert_eq!(rep.outcome, BaselineOutcome::FuelExhausted);
        assert_eq!(rep.transitions, 500);
    }

    #[test]
    fn environments_share_tails() {
        let a = Env::default().push(LinkId(1), Env::default());
        let b = a.push(LinkId(2), a.clone());
        assert_eq!(b.len(), 2);
        assert_eq!(b.cells_unshared(), 3);
        let mut seen = std::collections::HashSet::new();
        b.collect_shared(&mut seen);
        assert_eq!(seen.len(), 2);
    }
}
