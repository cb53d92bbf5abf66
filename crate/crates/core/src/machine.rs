//! The rewrites-first token-guided graph rewriting machine.

use std::fmt;

use serde::Serialize;

use crate::graph::{port, Graph, LinkId, NodeId, NodeLabel};
use crate::submachine::RedLabel;
use crate::term::Strategy;

pub const DEFAULT_FUEL: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RewriteFlag {
    None,
    Lam,
    Bang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CompElem {
    Star,
    Lam,
    At,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoxElem {
    Star,
    Bang,
    Diamond,
    Link(LinkId),
}

impl BoxElem {
    /// Same constructor, ignoring the link carried by `Link`.
    pub fn same_kind(self, other: BoxElem) -> bool {
        std::mem::discriminant(&self) == std::mem::discriminant(&other)
    }
}

impl fmt::Display for CompElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompElem::Star => "*",
            CompElem::Lam => "λ",
            CompElem::At => "@",
        })
    }
}

impl fmt::Display for BoxElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxElem::Star => f.write_str("*"),
            BoxElem::Bang => f.write_str("!"),
            BoxElem::Diamond => f.write_str("<>"),
            BoxElem::Link(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub dir: Direction,
    pub flag: RewriteFlag,
    /// Computation stack, top last.
    pub comp: Vec<CompElem>,
    /// Box stack, top last.
    pub boxes: Vec<BoxElem>,
}

impl Token {
    pub fn initial() -> Self {
        Token { dir: Direction::Up, flag: RewriteFlag::None, comp: Vec::new(), boxes: vec![BoxElem::Star] }
    }

    /// Direction, flag and one empty marker per stack, plus the elements.
    pub fn cells(&self) -> usize {
        4 + self.comp.len() + self.boxes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Kind {
    Pass,
    Rewrite,
}

/// Every transition of the machine, named after the node it concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    AppNeedUp,
    AppLRUp,
    AppRLUp,
    AppLRCompDown,
    AppArgDown,
    LamFlag,
    LamBounce,
    DerUp,
    ConUp,
    BangBounce,
    BangFlag,
    Beta,
    Open,
    Sigma,
}

impl Rule {
    pub const ALL: [Rule; 14] = [
        Rule::AppNeedUp,
        Rule::AppLRUp,
        Rule::AppRLUp,
        Rule::AppLRCompDown,
        Rule::AppArgDown,
        Rule::LamFlag,
        Rule::LamBounce,
        Rule::DerUp,
        Rule::ConUp,
        Rule::BangBounce,
        Rule::BangFlag,
        Rule::Beta,
        Rule::Open,
        Rule::Sigma,
    ];

    pub fn kind(self) -> Kind {
        match self {
            Rule::Beta | Rule::Open | Rule::Sigma => Kind::Rewrite,
            _ => Kind::Pass,
        }
    }

    pub fn label(self) -> RedLabel {
        match self {
            Rule::Beta => RedLabel::Beta,
            Rule::Sigma => RedLabel::Sigma,
            _ => RedLabel::Eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub rule: Rule,
    pub label: RedLabel,
    pub kind: Kind,
    /// Weight in the time-cost model.
    pub cost: u64,
    /// Nodes and links created or rewired by a rewrite.
    pub touched_nodes: Vec<NodeId>,
    pub touched_links: Vec<LinkId>,
    /// The λ-node consumed by a β-rewrite or exposed by a box opening.
    pub lambda: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(Transition),
    Final,
    NoRedexMatch(String),
}

/// Deliberate corruptions used to check that co-simulation notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// Dereliction passes forget to push `⋄`.
    DerelictionSkipsMark,
    /// β-rewrites leave the token at the redex instead of its root.
    BetaKeepsPosition,
}

#[derive(Debug, Clone)]
pub struct MachineState {
    pub graph: Graph,
    pub pos: LinkId,
    pub token: Token,
    root: LinkId,
    fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("graph must have exactly one input and no outputs")]
    BadInterface,
}

impl MachineState {
    /// `Init(G)`
    pub fn init(graph: Graph) -> Result<Self, InitError> {
        if graph.inputs.len() != 1 || !graph.outputs.is_empty() {
            return Err(InitError::BadInterface);
        }
        let root = graph.inputs[0];
        Ok(MachineState { graph, pos: root, token: Token::initial(), root, fault: None })
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn root(&self) -> LinkId {
        self.root
    }

    pub fn is_final(&self) -> bool {
        let t = &self.token;
        self.pos == self.root
            && t.dir == Direction::Down
            && t.flag == RewriteFlag::None
            && t.comp.is_empty()
            && t.boxes == [BoxElem::Bang]
    }

    /// The node the token is about to cross, with the port it enters by.
    pub fn facing(&self) -> Option<(NodeId, usize)> {
        match self.token.dir {
            Direction::Up => self.graph.target(self.pos),
            Direction::Down => self.graph.source(self.pos),
        }
    }

    fn facing_label(&self) -> Option<(NodeLabel, usize)> {
        self.facing().map(|(n, p)| (self.graph.label(n), p))
    }

    fn guard(&self, r: Rule) -> bool {
        let t = &self.token;
        let s = t.comp.last().copied();
        let b = t.boxes.last().copied();
        let up = t.dir == Direction::Up;
        if t.flag != RewriteFlag::None {
            return match r {
                Rule::Beta => t.flag == RewriteFlag::Lam,
                Rule::Open => t.flag == RewriteFlag::Bang && b == Some(BoxElem::Diamond),
                Rule::Sigma => t.flag == RewriteFlag::Bang && matches!(b, Some(BoxElem::Link(_))),
                _ => false,
            };
        }
        let Some((label, p)) = self.facing_label() else { return false };
        match r {
            Rule::AppNeedUp => up && label == NodeLabel::AppNeed && p == port::APP_IN,
            Rule::AppLRUp => up && label == NodeLabel::AppLR && p == port::APP_IN,
            Rule::AppRLUp => up && label == NodeLabel::AppRL && p == port::APP_IN,
            Rule::AppLRCompDown => {
                !up && label == NodeLabel::AppLR && p == port::APP_COMP && s == Some(CompElem::Lam)
            }
            Rule::AppArgDown => {
                !up && matches!(label, NodeLabel::AppLR | NodeLabel::AppRL)
                    && p == port::APP_ARG
                    && b == Some(BoxElem::Bang)
            }
            Rule::LamFlag => up && label == NodeLabel::Lam && p == port::LAM_IN && s == Some(CompElem::At),
            Rule::LamBounce => up && label == NodeLabel::Lam && p == port::LAM_IN && s == Some(CompElem::Star),
            Rule::DerUp => up && label == NodeLabel::Der,
            Rule::ConUp => up && matches!(label, NodeLabel::Con(_)),
            Rule::BangBounce => up && label == NodeLabel::Bang && b == Some(BoxElem::Star),
            Rule::BangFlag => up && label == NodeLabel::Bang && b.is_some_and(|x| x != BoxElem::Star),
            Rule::Beta | Rule::Open | Rule::Sigma => false,
        }
    }

    /// Every transition whose guard holds in this state.
    pub fn applicable(&self) -> Vec<Rule> {
        Rule::ALL.into_iter().filter(|&r| self.guard(r)).collect()
    }

    pub fn step(&mut self) -> StepResult {
        if self.is_final() {
            return StepResult::Final;
        }
        let Some(rule) = Rule::ALL.into_iter().find(|&r| self.guard(r)) else {
            return StepResult::NoRedexMatch(format!(
                "no transition at {} ({:?}, {:?})",
                self.pos, self.token.dir, self.token.flag
            ));
        };
        match self.apply(rule) {
            Ok(t) => StepResult::Next(t),
            Err(msg) => StepResult::NoRedexMatch(msg),
        }
    }

    fn pass(&mut self, rule: Rule) -> Transition {
        Transition {
            rule,
            label: RedLabel::Eps,
            kind: Kind::Pass,
            cost: 1,
            touched_nodes: Vec::new(),
            touched_links: Vec::new(),
            lambda: None,
        }
    }

    fn apply(&mut self, rule: Rule) -> Result<Transition, String> {
        let g = &self.graph;
        let facing = self.facing();
        let node = facing.map(|(n, _)| n);
        let t = &mut self.token;
        match rule {
            Rule::AppNeedUp | Rule::AppLRUp => {
                let n = node.expect("guarded");
                t.comp.push(if rule == Rule::AppNeedUp { CompElem::At } else { CompElem::Star });
                self.pos = g.node(n).outs[port::APP_COMP];
            }
            Rule::AppRLUp => {
                let n = node.expect("guarded");
                t.boxes.push(BoxElem::Star);
                self.pos = g.node(n).outs[port::APP_ARG];
            }
            Rule::AppLRCompDown => {
                let n = node.expect("guarded");
                t.comp.pop();
                t.boxes.push(BoxElem::Star);
                t.dir = Direction::Up;
                self.pos = g.node(n).outs[port::APP_ARG];
            }
            Rule::AppArgDown => {
                let n = node.expect("guarded");
                t.boxes.pop();
                t.comp.push(CompElem::At);
                t.dir = Direction::Up;
                self.pos = g.node(n).outs[port::APP_COMP];
            }
            Rule::LamFlag => {
                t.comp.pop();
                t.flag = RewriteFlag::Lam;
            }
            Rule::LamBounce => {
                *t.comp.last_mut().expect("guarded") = CompElem::Lam;
                t.dir = Direction::Down;
            }
            Rule::DerUp => {
                if self.fault != Some(Fault::DerelictionSkipsMark) {
                    t.boxes.push(BoxElem::Diamond);
                }
                self.pos = g.node(node.expect("guarded")).outs[0];
            }
            Rule::ConUp => {
                t.boxes.push(BoxElem::Link(self.pos));
                self.pos = g.node(node.expect("guarded")).outs[0];
            }
            Rule::BangBounce => {
                *t.boxes.last_mut().expect("guarded") = BoxElem::Bang;
                t.dir = Direction::Down;
            }
            Rule::BangFlag => t.flag = RewriteFlag::Bang,
            Rule::Beta => return self.beta(),
            Rule::Open => return self.open(),
            Rule::Sigma => return self.sigma(),
        }
        Ok(self.pass(rule))
    }

    fn beta(&mut self) -> Result<Transition, String> {
        let g = &mut self.graph;
        let e = self.pos;
        let (lam, lp) = g.target(e).ok_or("β: position has no target")?;
        if g.label(lam) != NodeLabel::Lam || lp != port::LAM_IN {
            return Err("β: position does not enter a λ-node".into());
        }
        let (app, ap) = g.source(e).ok_or("β: position has no source")?;
        if !g.label(app).is_app() || ap != port::APP_COMP {
            return Err("β: λ-node is not the function of an application".into());
        }
        let r = g.node(app).ins[port::APP_IN];
        let arg = g.node(app).outs[port::APP_ARG];
        let body = g.node(lam).outs[port::LAM_BODY];
        let var = g.node(lam).ins[port::LAM_VAR];
        g.remove_node(lam);
        g.remove_node(app);
        g.redirect_dst(r, body);
        g.redirect_dst(var, arg);
        g.remove_link(e);
        let mut touched_nodes = Vec::new();
        touched_nodes.extend(g.target(r).map(|x| x.0));
        touched_nodes.extend(g.target(var).map(|x| x.0));
        touched_nodes.extend(g.source(var).map(|x| x.0));
        touched_nodes.extend(g.source(r).map(|x| x.0));
        if self.fault != Some(Fault::BetaKeepsPosition) {
            self.pos = r;
        } else {
            self.pos = var;
        }
        self.token.flag = RewriteFlag::None;
        self.token.dir = Direction::Up;
        Ok(Transition {
            rule: Rule::Beta,
            label: RedLabel::Beta,
            kind: Kind::Rewrite,
            cost: 1,
            touched_nodes,
            touched_links: vec![r, var],
            lambda: Some(lam),
        })
    }

    fn open(&mut self) -> Result<Transition, String> {
        let g = &mut self.graph;
        let p = self.pos;
        let (bang, _) = g.target(p).ok_or("open: position has no target")?;
        if g.label(bang) != NodeLabel::Bang {
            return Err("open: position does not enter a principal door".into());
        }
        let (der, _) = g.source(p).ok_or("open: box has no dereliction")?;
        if g.label(der) != NodeLabel::Der {
            return Err("open: box is not derelicted".into());
        }
        let d = g.node(der).ins[0];
        let info = g.box_info(bang).ok_or("open: unregistered box")?;
        let doors = 1 + info.aux.len() as u64;
        let aux_outs: Vec<LinkId> = info.aux.iter().map(|&q| g.node(q).outs[0]).collect();
        g.remove_box_doors(bang).map_err(|e| e.to_string())?;
        g.bypass_keep_in(der);
        let exposed = g.target(d).map(|x| x.0);
        let mut touched_nodes: Vec<NodeId> = exposed.into_iter().collect();
        let mut touched_links = vec![d];
        for &o in &aux_outs {
            touched_nodes.extend(g.source(o).map(|x| x.0));
            touched_nodes.extend(g.target(o).map(|x| x.0));
            touched_links.push(o);
        }
        self.token.boxes.pop();
        self.token.flag = RewriteFlag::None;
        self.pos = d;
        let lambda = exposed.filter(|&n| g.label(n) == NodeLabel::Lam);
        Ok(Transition {
            rule: Rule::Open,
            label: RedLabel::Eps,
            kind: Kind::Rewrite,
            cost: doors,
            touched_nodes,
            touched_links,
            lambda,
        })
    }

    fn sigma(&mut self) -> Result<Transition, String> {
        let g = &mut self.graph;
        let p = self.pos;
        let Some(&BoxElem::Link(e)) = self.token.boxes.last() else {
            return Err("σ: no link on the box stack".into());
        };
        let (bang, _) = g.target(p).ok_or("σ: position has no target")?;
        if g.label(bang) != NodeLabel::Bang {
            return Err("σ: position does not enter a principal door".into());
        }
        let (con, _) = g.source(p).ok_or("σ: box is not shared")?;
        if !matches!(g.label(con), NodeLabel::Con(k) if k >= 1) {
            return Err("σ: box is not the output of a contraction".into());
        }
        if !g.has_link(e) || g.target(e).map(|x| x.0) != Some(con) {
            return Err("σ: stacked link is not an input of the contraction".into());
        }
        let info = g.box_info(bang).ok_or("σ: unregistered box")?;
        let size = info.size() as u64;
        let mut targets = Vec::with_capacity(info.aux.len());
        for &q in &info.aux {
            match g.target(g.node(q).outs[0]) {
                Some((c, _)) if matches!(g.label(c), NodeLabel::Con(_)) => targets.push((q, c)),
                _ => return Err("σ: auxiliary door does not feed a contraction".into()),
            }
        }
        let owner = g.link(e).owner;
        g.con_remove_input(con, e);
        let map = g.copy_box_into(bang, e, owner).map_err(|x| x.to_string())?;
        let mut touched_nodes = vec![con, map.bang.expect("copied")];
        let mut touched_links = vec![e];
        for ((q, c), (q2, o)) in targets.iter().zip(map.aux_outputs.iter()) {
            debug_assert_eq!(q, q2);
            g.con_add_input(*c, *o);
            touched_nodes.push(*c);
            touched_links.push(*o);
        }
        touched_nodes.extend(map.nodes.values().copied());
        touched_links.extend(map.links.values().copied());
        self.token.boxes.pop();
        self.token.flag = RewriteFlag::None;
        self.pos = e;
        Ok(Transition {
            rule: Rule::Sigma,
            label: RedLabel::Sigma,
            kind: Kind::Rewrite,
            cost: size,
            touched_nodes,
            touched_links,
            lambda: None,
        })
    }

    /// The application node strategy the token is facing, if any.
    pub fn facing_strategy(&self) -> Option<Strategy> {
        self.facing_label().and_then(|(l, _)| l.strategy())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counters {
    pub pass_eps: u64,
    pub rewrite_beta: u64,
    pub rewrite_sigma: u64,
    pub rewrite_eps: u64,
}

impl Counters {
    pub fn record(&mut self, t: &Transition) {
        match (t.kind, t.label) {
            (Kind::Pass, _) => self.pass_eps += 1,
            (Kind::Rewrite, RedLabel::Beta) => self.rewrite_beta += 1,
            (Kind::Rewrite, RedLabel::Sigma) => self.rewrite_sigma += 1,
            (Kind::Rewrite, RedLabel::Eps) => self.rewrite_eps += 1,
        }
    }

    pub fn beta(&self) -> u64 {
        self.rewrite_beta
    }

    pub fn sigma(&self) -> u64 {
        self.rewrite_sigma
    }

    /// All ε-labelled transitions, passes and rewrites.
    pub fn eps(&self) -> u64 {
        self.pass_eps + self.rewrite_eps
    }

    /// ε-labelled rewrites only.
    pub fn eps_rewrite(&self) -> u64 {
        self.rewrite_eps
    }

    pub fn total(&self) -> u64 {
        self.pass_eps + self.rewrite_beta + self.rewrite_sigma + self.rewrite_eps
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Final,
    FuelExhausted,
    NoRedexMatch(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeSample {
    pub step: u64,
    pub graph: crate::graph::GraphMetrics,
    #[serde(rename = "tokenCells")]
    pub token_cells: usize,
}

#[derive(Debug, Clone)]
pub struct ExecReport {
    pub outcome: Outcome,
    pub counters: Counters,
    pub weighted_cost: u64,
    pub initial_size: usize,
    pub max_graph_size: usize,
    pub max_token_cells: usize,
    pub size_series: Vec<SizeSample>,
    pub state: MachineState,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub fuel: u64,
    /// Sample graph and token sizes every this many steps.
    pub sample_every: Option<u64>,
    pub fault: Option<Fault>,
}

impl RunOptions {
    pub fn with_fuel(fuel: u64) -> Self {
        RunOptions { fuel, ..Self::default() }
    }
}

/// Runs from `Init(g)` until `Final`, fuel exhaustion or a failed match. The
/// observer sees every state after each transition.
pub fn run_observed(
    g: Graph,
    opts: &RunOptions,
    mut observe: impl FnMut(&MachineState, &Transition),
) -> Result<ExecReport, InitError> {
    let mut m = MachineState::init(g)?.with_fault(opts.fault);
    let initial_size = m.graph.metrics().size();
    let mut counters = Counters::default();
    let mut weighted_cost = 0;
    let mut max_graph_size = initial_size;
    let mut max_token_cells = m.token.cells();
    let mut size_series = Vec::new();
    let outcome = loop {
        if counters.total() >= opts.fuel {
            break if m.is_final() { Outcome::Final } else { Outcome::FuelExhausted };
        }
        match m.step() {
            StepResult::Final => break Outcome::Final,
            StepResult::NoRedexMatch(msg) => break Outcome::NoRedexMatch(msg),
            StepResult::Next(t) => {
                counters.record(&t);
                weighted_cost += t.cost;
                if t.kind == Kind::Rewrite {
                    max_graph_size = max_graph_size.max(m.graph.size());
                }
                max_token_cells = max_token_cells.max(m.token.cells());
                if let Some(k) = opts.sample_every {
                    if k > 0 && counters.total() % k == 0 {
                        size_series.push(SizeSample {
                            step: counters.total(),
                            graph: m.graph.metrics(),
                            token_cells: m.token.cells(),
                        });
                    }
                }
                observe(&m, &t);
            }
        }
    };
    Ok(ExecReport {
        outcome,
        counters,
        weighted_cost,
        initial_size,
        max_graph_size,
        max_token_cells,
        size_series,
        state: m,
    })
}

pub fn run(g: Graph, fuel: u64) -> Result<ExecReport, InitError> {
    run_observed(g, &RunOptions::with_fuel(fuel), |_, _| {})
}

/// One JSONL trace record.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub machine: &'static str,
    pub step: u64,
    pub kind: &'static str,
    pub label: &'static str,
    pub rule: Rule,
    pub position: String,
    pub direction: Direction,
    pub flag: RewriteFlag,
    #[serde(rename = "compStack")]
    pub comp_stack: Vec<String>,
    #[serde(rename = "boxStack")]
    pub box_stack: Vec<String>,
    #[serde(rename = "graphDelta", skip_serializing_if = "Option::is_none")]
    pub graph_delta: Option<GraphDelta>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GraphDelta {
    pub nodes: i64,
    pub links: i64,
}

impl TraceRecord {
    pub fn new(step: u64, m: &MachineState, t: &Transition, delta: Option<GraphDelta>) -> Self {
        TraceRecord {
            machine: "rewrites-first",
            step,
            kind: match t.kind {
                Kind::Pass => "pass",
                Kind::Rewrite => "rewrite",
            },
            label: t.label.as_str(),
            rule: t.rule,
            position: m.pos.to_string(),
            direction: m.token.dir,
            flag: m.token.flag,
            comp_stack: m.token.comp.iter().map(|x| x.to_string()).collect(),
            box_stack: m.token.boxes.iter().map(|x| x.to_string()).collect(),
            graph_delta: delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;
    use crate::translate::translate_term;

    fn graph(s: &str, st: Strategy) -> Graph {
        translate_term(&parse(s, st).unwrap()).graph
    }

    #[test]
    fn init_token() {
        let m = MachineState::init(graph(r"\x. x", Strategy::Need)).unwrap();
        assert_eq!(m.token, Token::initial());
        assert_eq!(m.pos, m.root());
        let open = translate_term(&parse("x", Strategy::Need).unwrap()).graph;
        assert!(matches!(MachineState::init(open), Err(InitError::BadInterface)));
    }

    #[test]
    fn value_reaches_final_without_rewrites() {
        let r = run(graph(r"\x. x", Strategy::Need), 100).unwrap();
        assert_eq!(r.outcome, Outcome::Final);
        assert_eq!(r.counters.total(), 1);
        assert_eq!((r.counters.beta(), r.counters.sigma()), (0, 0));
    }

    #[test]
    fn identity_application_trace() {
        let r = run(graph(r"(\x. x) (\y. y)", Strategy::Need), 100).unwrap();
        assert_eq!(r.outcome, Outcome::Final);
        assert_eq!(r.counters.total(), 10);
        assert_eq!(r.counters.beta(), 1);
        assert_eq!(r.counters.sigma(), 1);
        assert_eq!(r.counters.eps_rewrite(), 1);
        assert_eq!(r.state.graph.validate(), vec![]);
    }

    #[test]
    fn omega_runs_out_of_fuel() {
        let r = run(graph(r"(\x. x x) (\x. x x)", Strategy::Need), 10_000).unwrap();
        assert_eq!(r.outcome, Outcome::FuelExhausted);
    }

    #[test]
    fn all_strategies_finish_self_application() {
        for s in Strategy::ALL {
            let r = run(graph(r"(\x. x x) (\y. y)", s), 1000).unwrap();
            assert_eq!(r.outcome, Outcome::Final, "{s}");
            assert_eq!(r.counters.beta(), 2, "{s}");
        }
    }
}
