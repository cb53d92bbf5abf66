//! Per-transition invariant checking for machine runs.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::graph::{End, Graph, NodeId, Violation};
use crate::iso::box_canonical;
use crate::machine::{Fault, InitError, Kind, MachineState, Rule, StepResult};
use crate::submachine::RedLabel;

/// Graphs up to this size are validated in full after every rewrite; larger
/// ones only around the elements the rewrite touched.
pub const FULL_VALIDATION_LIMIT: usize = 4000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum InvariantKind {
    Malformed(Vec<Violation>),
    LinkLinkEdge,
    PassChangedGraph,
    RewriteChangedStack,
    NotDeterministic(Vec<Rule>),
    BoxNotInInitialGraph(NodeId),
    BoxTooLarge { size: usize, initial_max: usize },
    NoRedexMatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantViolation {
    pub step: u64,
    pub rule: Option<Rule>,
    pub kind: InvariantKind,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InvariantReport {
    pub transitions: u64,
    pub finished: bool,
    pub violations: Vec<InvariantViolation>,
    pub beta: u64,
    /// β-rewrites whose previous rewrite was an ε-rewrite.
    pub beta_after_eps_rewrite: u64,
    /// β-rewrites whose directly preceding transition was an ε-rewrite.
    pub beta_adjacent_to_eps_rewrite: u64,
    /// β-rewrites consuming a λ exposed by an earlier box opening.
    pub beta_on_opened_lambda: u64,
    pub initial_max_box_size: usize,
    pub max_box_size: usize,
    pub boxes_checked: u64,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub struct CheckOptions {
    pub fuel: u64,
    pub fault: Option<Fault>,
    /// Stop recording after this many violations.
    pub max_violations: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { fuel: 100_000, fault: None, max_violations: 20 }
    }
}

fn canonical_boxes(g: &Graph) -> HashSet<String> {
    g.boxes().keys().filter_map(|&b| box_canonical(g, b)).collect()
}

/// Runs the machine on `g`, checking after every transition that the graph
/// is well formed, passes leave the graph alone, rewrites leave the
/// computation stack alone, exactly one transition was applicable, and every
/// box created or changed by a rewrite is a copy of a box of the initial graph.
pub fn check_run(g: Graph, opts: &CheckOptions) -> Result<InvariantReport, InitError> {
    let initial = canonical_boxes(&g);
    let initial_max = g.metrics().max_box_size;
    let mut m = MachineState::init(g)?.with_fault(opts.fault);
    let mut rep = InvariantReport { initial_max_box_size: initial_max, max_box_size: initial_max, ..Default::default() };
    let mut last_rewrite: Option<RedLabel> = None;
    let mut last_kind_rewrite_eps = false;
    let mut opened: HashSet<NodeId> = HashSet::new();
    let push = |rep: &mut InvariantReport, rule: Option<Rule>, kind: InvariantKind| {
        if rep.violations.len() < opts.max_violations {
            rep.violations.push(InvariantViolation { step: rep.transitions, rule, kind });
        }
    };
    while rep.transitions < opts.fuel {
        let applicable = m.applicable();
        if m.is_final() {
            rep.finished = true;
            if !applicable.is_empty() {
                push(&mut rep, None, InvariantKind::NotDeterministic(applicable));
            }
            break;
        }
        if applicable.len() != 1 {
            push(&mut rep, None, InvariantKind::NotDeterministic(applicable));
        }
        let revision = m.graph.revision();
        let comp = m.token.comp.clone();
        let t = match m.step() {
            StepResult::Next(t) => t,
            StepResult::Final => {
                rep.finished = true;
                break;
            }
            StepResult::NoRedexMatch(msg) => {
                push(&mut rep, None, InvariantKind::NoRedexMatch(msg));
                break;
            }
        };
        rep.transitions += 1;
        match t.kind {
            Kind::Pass => {
                if m.graph.revision() != revision {
                    push(&mut rep, Some(t.rule), InvariantKind::PassChangedGraph);
                }
                last_kind_rewrite_eps = false;
                continue;
            }
            Kind::Rewrite => {
                if m.token.comp != comp {
                    push(&mut rep, Some(t.rule), InvariantKind::RewriteChangedStack);
                }
            }
        }
        if t.label == RedLabel::Beta {
            rep.beta += 1;
            if last_rewrite == Some(RedLabel::Eps) {
                rep.beta_after_eps_rewrite += 1;
            }
            if last_kind_rewrite_eps {
                rep.beta_adjacent_to_eps_rewrite += 1;
            }
            if t.lambda.is_some_and(|l| opened.remove(&l)) {
                rep.beta_on_opened_lambda += 1;
            }
        }
        if t.rule == Rule::Open {
            opened.extend(t.lambda);
        }
        last_rewrite = Some(t.label);
        last_kind_rewrite_eps = t.label == RedLabel::Eps;

        let g = &m.graph;
        let violations = if g.size() <= FULL_VALIDATION_LIMIT {
            g.validate()
        } else {
            g.validate_local(&t.touched_nodes, &t.touched_links)
        };
        if !violations.is_empty() {
            push(&mut rep, Some(t.rule), InvariantKind::Malformed(violations));
        }
        let link_link = if g.size() <= FULL_VALIDATION_LIMIT {
            g.has_link_link_edges()
        } else {
            t.touched_links.iter().any(|&l| {
                g.try_link(l).is_some_and(|k| matches!(k.dst, Some(End::Link(_))) || matches!(k.src, Some(End::Link(_))))
            })
        };
        if link_link {
            push(&mut rep, Some(t.rule), InvariantKind::LinkLinkEdge);
        }
        // Boxes created by the rewrite or enclosing something it touched.
        let mut affected: BTreeSet<NodeId> = BTreeSet::new();
        for &n in &t.touched_nodes {
            let Some(node) = g.try_node(n) else { continue };
            if g.box_info(n).is_some() {
                affected.insert(n);
            }
            affected.extend(g.box_chain(node.owner));
        }
        for &l in &t.touched_links {
            if let Some(link) = g.try_link(l) {
                affected.extend(g.box_chain(link.owner));
            }
        }
        for b in affected {
            rep.boxes_checked += 1;
            let size = g.box_info(b).map_or(0, |i| i.size());
            rep.max_box_size = rep.max_box_size.max(size);
            if size > initial_max {
                push(&mut rep, Some(t.rule), InvariantKind::BoxTooLarge { size, initial_max });
            }
            if !box_canonical(g, b).is_some_and(|c| initial.contains(&c)) {
                push(&mut rep, Some(t.rule), InvariantKind::BoxNotInInitialGraph(b));
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, Strategy};
    use crate::translate::translate_term;

    fn graph(s: &str, st: Strategy) -> Graph {
        translate_term(&parse(s, st).unwrap()).graph
    }

    #[test]
    fn small_runs_are_clean() {
        for st in Strategy::ALL {
            for src in [r"(\x. x) (\y. y)", r"(\x. x x) (\y. y)", r"(\f. \a. f (f a)) (\z. z)"] {
                let rep = check_run(graph(src, st), &CheckOptions::default()).unwrap();
                assert!(rep.ok(), "{src} {st:?}: {:?}", rep.violations);
                assert!(rep.finished);
                assert_eq!(rep.beta, rep.beta_on_opened_lambda);
            }
        }
    }

    #[test]
    fn faults_are_reported() {
        let opts = CheckOptions { fault: Some(Fault::BetaKeepsPosition), ..CheckOptions::default() };
        let rep = check_run(graph(r"(\x. x x) (\y. y)", Strategy::Need), &opts).unwrap();
        assert!(!rep.ok() || !rep.finished);
    }
}
