//! Graphs of proper nodes and link nodes with `!`-box structure.
//!
//! Links are stored as first-class objects with at most one source end and at
//! most one target end; an end is either a node port or another link. Nodes
//! keep their ports as ordered link lists. Identifiers are never reused within
//! a graph, so link identifiers held by a token stay meaningful across
//! unrelated rewrites.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::term::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LinkId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeLabel {
    Lam,
    AppNeed,
    AppLR,
    AppRL,
    Bang,
    WhyNot,
    Der,
    Con(usize),
}

impl NodeLabel {
    pub fn app(s: Strategy) -> Self {
        match s {
            Strategy::Need => NodeLabel::AppNeed,
            Strategy::LeftToRightValue => NodeLabel::AppLR,
            Strategy::RightToLeftValue => NodeLabel::AppRL,
        }
    }

    pub fn strategy(self) -> Option<Strategy> {
        match self {
            NodeLabel::AppNeed => Some(Strategy::Need),
            NodeLabel::AppLR => Some(Strategy::LeftToRightValue),
            NodeLabel::AppRL => Some(Strategy::RightToLeftValue),
            _ => None,
        }
    }

    pub fn is_app(self) -> bool {
        self.strategy().is_some()
    }

    /// `(inputs, outputs)`
    pub fn arity(self) -> (usize, usize) {
        match self {
            NodeLabel::Lam => (2, 1),
            NodeLabel::AppNeed | NodeLabel::AppLR | NodeLabel::AppRL => (1, 2),
            NodeLabel::Bang | NodeLabel::WhyNot | NodeLabel::Der => (1, 1),
            NodeLabel::Con(n) => (n, 1),
        }
    }

    pub fn symbol(self) -> String {
        match self {
            NodeLabel::Lam => "λ".into(),
            NodeLabel::AppNeed => "@".into(),
            NodeLabel::AppLR => "@l".into(),
            NodeLabel::AppRL => "@r".into(),
            NodeLabel::Bang => "!".into(),
            NodeLabel::WhyNot => "?".into(),
            NodeLabel::Der => "D".into(),
            NodeLabel::Con(n) => format!("C{n}"),
        }
    }
}

/// Port numbers. Lambda inputs are the function input and the bound-variable
/// port; its single output is the body. Applications have one input and the
/// composition and argument outputs.
pub mod port {
    pub const LAM_IN: usize = 0;
    pub const LAM_VAR: usize = 1;
    pub const LAM_BODY: usize = 0;
    pub const APP_IN: usize = 0;
    pub const APP_COMP: usize = 0;
    pub const APP_ARG: usize = 1;
}

/// One end of a link: a node port or another link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum End {
    Node(NodeId, usize),
    Link(LinkId),
}

impl End {
    pub fn node(self) -> Option<(NodeId, usize)> {
        match self {
            End::Node(n, p) => Some((n, p)),
            End::Link(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    /// Node output port (or link) this link leaves from.
    pub src: Option<End>,
    /// Node input port (or link) this link enters.
    pub dst: Option<End>,
    pub owner: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub label: NodeLabel,
    pub ins: Vec<LinkId>,
    pub outs: Vec<LinkId>,
    /// Innermost box containing this node; doors are owned by their own box.
    pub owner: Option<NodeId>,
}

/// A `!`-box, keyed by its principal door. Member sets include nested boxes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoxInfo {
    pub nodes: BTreeSet<NodeId>,
    pub links: BTreeSet<LinkId>,
    pub aux: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

impl BoxInfo {
    pub fn size(&self) -> usize {
        self.nodes.len() + self.links.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GraphMetrics {
    #[serde(rename = "nodeCount")]
    pub node_count: usize,
    #[serde(rename = "linkCount")]
    pub link_count: usize,
    #[serde(rename = "edgeCount")]
    pub edge_count: usize,
    #[serde(rename = "boxCount")]
    pub box_count: usize,
    #[serde(rename = "maxBoxSize")]
    pub max_box_size: usize,
}

impl GraphMetrics {
    pub fn size(&self) -> usize {
        self.node_count + self.link_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("malformed box at {0}")]
    MalformedBox(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Violation {
    MultipleIncoming(LinkId),
    MultipleOutgoing(LinkId),
    DanglingEnd(LinkId),
    PortMismatch(NodeId),
    Arity(NodeId),
    InterfaceMismatch,
    MalformedBox(NodeId),
    Membership(NodeId),
    BadNesting(NodeId),
}

/// Everything a copy produced, keyed by originals.
#[derive(Debug, Clone, Default)]
pub struct CopyMap {
    pub nodes: HashMap<NodeId, NodeId>,
    pub links: HashMap<LinkId, LinkId>,
    pub bang: Option<NodeId>,
    /// `(original auxiliary door, output link of its copy)`
    pub aux_outputs: Vec<(NodeId, LinkId)>,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Option<Node>>,
    links: Vec<Option<Link>>,
    pub inputs: Vec<LinkId>,
    pub outputs: Vec<LinkId>,
    boxes: BTreeMap<NodeId, BoxInfo>,
    node_count: usize,
    link_count: usize,
    edge_count: usize,
    revision: u64,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bumped by every mutation.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn node(&self, n: NodeId) -> &Node {
        self.nodes[n.0 as usize].as_ref().expect("live node")
    }

    pub fn try_node(&self, n: NodeId) -> Option<&Node> {
        self.nodes.get(n.0 as usize).and_then(|x| x.as_ref())
    }

    pub fn link(&self, l: LinkId) -> &Link {
        self.links[l.0 as usize].as_ref().expect("live link")
    }

    pub fn try_link(&self, l: LinkId) -> Option<&Link> {
        self.links.get(l.0 as usize).and_then(|x| x.as_ref())
    }

    pub fn has_link(&self, l: LinkId) -> bool {
        self.try_link(l).is_some()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(i, _)| NodeId(i as u32))
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.links.iter().enumerate().filter(|(_, l)| l.is_some()).map(|(i, _)| LinkId(i as u32))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.as_ref().map(|n| (NodeId(i as u32), n)))
    }

    pub fn boxes(&self) -> &BTreeMap<NodeId, BoxInfo> {
        &self.boxes
    }

    pub fn box_info(&self, bang: NodeId) -> Option<&BoxInfo> {
        self.boxes.get(&bang)
    }

    /// Upper bound on identifiers handed out so far.
    pub fn id_bounds(&self) -> (usize, usize) {
        (self.nodes.len(), self.links.len())
    }

    /// The node a link enters, with the port.
    pub fn target(&self, l: LinkId) -> Option<(NodeId, usize)> {
        self.link(l).dst.and_then(End::node)
    }

    /// The node a link leaves, with the port.
    pub fn source(&self, l: LinkId) -> Option<(NodeId, usize)> {
        self.link(l).src.and_then(End::node)
    }

    pub fn label(&self, n: NodeId) -> NodeLabel {
        self.node(n).label
    }

    /// Enclosing boxes of an owner, innermost first.
    pub fn box_chain(&self, owner: Option<NodeId>) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = owner;
        while let Some(b) = cur {
            out.push(b);
            cur = self.boxes.get(&b).and_then(|i| i.parent);
        }
        out
    }

    /// Nodes plus links, the same as `metrics().size()`.
    pub fn size(&self) -> usize {
        self.node_count + self.link_count
    }

    pub fn metrics(&self) -> GraphMetrics {
        GraphMetrics {
            node_count: self.node_count,
            link_count: self.link_count,
            edge_count: self.edge_count,
            box_count: self.boxes.len(),
            max_box_size: self.boxes.values().map(BoxInfo::size).max().unwrap_or(0),
        }
    }

    // ---- construction primitives -------------------------------------------------

    pub fn add_link(&mut self, owner: Option<NodeId>) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(Some(Link { src: None, dst: None, owner }));
        self.link_count += 1;
        self.revision += 1;
        for b in self.box_chain(owner) {
            self.boxes.get_mut(&b).expect("box").links.insert(id);
        }
        id
    }

    /// Adds a node and attaches the given links to its ports. The links must
    /// have free ends on the corresponding sides.
    pub fn add_node(&mut self, label: NodeLabel, ins: Vec<LinkId>, outs: Vec<LinkId>, owner: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        for (p, &l) in ins.iter().enumerate() {
            self.set_dst(l, Some(End::Node(id, p)));
        }
        for (p, &l) in outs.iter().enumerate() {
            self.set_src(l, Some(End::Node(id, p)));
        }
        self.nodes.push(Some(Node { label, ins, outs, owner }));
        self.node_count += 1;
        self.revision += 1;
        for b in self.box_chain(owner) {
            self.boxes.get_mut(&b).expect("box").nodes.insert(id);
        }
        id
    }

    /// Creates an empty box record for `bang`; member sets are filled as
    /// members are added with this box as owner.
    pub fn register_box(&mut self, bang: NodeId, parent: Option<NodeId>) {
        self.boxes.insert(bang, BoxInfo { parent, ..BoxInfo::default() });
        self.revision += 1;
    }

    /// Reserves a node identifier with no ports, for boxes whose principal door
    /// must exist before its contents.
    pub fn reserve_node(&mut self, label: NodeLabel, owner: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Some(Node { label, ins: Vec::new(), outs: Vec::new(), owner }));
        self.node_count += 1;
        self.revision += 1;
        id
    }

    /// Creates a principal door with no ports yet, owned by its own new box.
    pub fn new_box(&mut self, parent: Option<NodeId>) -> NodeId {
        let bang = self.reserve_node(NodeLabel::Bang, Some(NodeId(self.nodes.len() as u32)));
        self.register_box(bang, parent);
        self.enroll_node(bang);
        bang
    }

    /// Adds a reserved node to the member sets of the boxes enclosing its owner.
    pub fn enroll_node(&mut self, n: NodeId) {
        let owner = self.node(n).owner;
        for b in self.box_chain(owner) {
            self.boxes.get_mut(&b).expect("box").nodes.insert(n);
        }
    }

    pub fn set_ports(&mut self, n: NodeId, ins: Vec<LinkId>, outs: Vec<LinkId>) {
        for (p, &l) in ins.iter().enumerate() {
            self.set_dst(l, Some(End::Node(n, p)));
        }
        for (p, &l) in outs.iter().enumerate() {
            self.set_src(l, Some(End::Node(n, p)));
        }
        let node = self.nodes[n.0 as usize].as_mut().expect("node");
        node.ins = ins;
        node.outs = outs;
        self.revision += 1;
    }

    pub fn set_aux(&mut self, bang: NodeId, aux: Vec<NodeId>) {
        self.boxes.get_mut(&bang).expect("box").aux = aux;
        self.revision += 1;
    }

    fn link_mut(&mut self, l: LinkId) -> &mut Link {
        self.links[l.0 as usize].as_mut().expect("live link")
    }

    fn node_mut(&mut self, n: NodeId) -> &mut Node {
        self.nodes[n.0 as usize].as_mut().expect("live node")
    }

    fn edge_weight(src: bool, end: Option<End>) -> usize {
        match end {
            Some(End::Node(..)) => 1,
            Some(End::Link(_)) if !src => 1,
            _ => 0,
        }
    }

    /// Sets the target end of a link without touching the other side.
    pub fn set_dst(&mut self, l: LinkId, end: Option<End>) {
        let old = self.link(l).dst;
        self.edge_count -= Self::edge_weight(false, old);
        self.edge_count += Self::edge_weight(false, end);
        self.link_mut(l).dst = end;
        self.revision += 1;
    }

    /// Sets the source end of a link without touching the other side.
    pub fn set_src(&mut self, l: LinkId, end: Option<End>) {
        let old = self.link(l).src;
        self.edge_count -= Self::edge_weight(true, old);
        self.edge_count += Self::edge_weight(true, end);
        self.link_mut(l).src = end;
        self.revision += 1;
    }

    /// Points `l` at `end`, updating the port on the far side.
    fn connect_dst(&mut self, l: LinkId, end: Option<End>) {
        self.set_dst(l, end);
        match end {
            Some(End::Node(n, p)) => self.node_mut(n).ins[p] = l,
            Some(End::Link(m)) => self.set_src(m, Some(End::Link(l))),
            None => {}
        }
    }

    /// Makes `l` leave from `end`, updating the port on the far side.
    fn connect_src(&mut self, l: LinkId, end: Option<End>) {
        self.set_src(l, end);
        match end {
            Some(End::Node(n, p)) => self.node_mut(n).outs[p] = l,
            Some(End::Link(m)) => self.set_dst(m, Some(End::Link(l))),
            None => {}
        }
    }

    pub fn remove_link(&mut self, l: LinkId) {
        let link = self.links[l.0 as usize].take().expect("live link");
        self.edge_count -= Self::edge_weight(true, link.src);
        self.edge_count -= Self::edge_weight(false, link.dst);
        self.link_count -= 1;
        self.revision += 1;
        for b in self.box_chain(link.owner) {
            self.boxes.get_mut(&b).expect("box").links.remove(&l);
        }
        self.inputs.retain(|&x| x != l);
        self.outputs.retain(|&x| x != l);
    }

    /// Removes a node; links at its ports keep existing with that end cleared.
    pub fn remove_node(&mut self, n: NodeId) {
        let node = self.nodes[n.0 as usize].take().expect("live node");
        for &l in &node.ins {
            if self.try_link(l).is_some_and(|k| matches!(k.dst, Some(End::Node(m, _)) if m == n)) {
                self.set_dst(l, None);
            }
        }
        for &l in &node.outs {
            if self.try_link(l).is_some_and(|k| matches!(k.src, Some(End::Node(m, _)) if m == n)) {
                self.set_src(l, None);
            }
        }
        self.node_count -= 1;
        self.revision += 1;
        for b in self.box_chain(node.owner) {
            self.boxes.get_mut(&b).expect("box").nodes.remove(&n);
        }
    }

    /// Redirects `keep` to enter wherever `gone` enters, then deletes `gone`.
    pub fn redirect_dst(&mut self, keep: LinkId, gone: LinkId) {
        let end = self.link(gone).dst;
        self.set_dst(gone, None);
        self.connect_dst(keep, end);
        self.remove_link(gone);
    }

    /// Makes `keep` leave from wherever `gone` leaves, then deletes `gone`.
    pub fn redirect_src(&mut self, keep: LinkId, gone: LinkId) {
        let end = self.link(gone).src;
        self.set_src(gone, None);
        self.connect_src(keep, end);
        self.remove_link(gone);
    }

    /// Deletes a one-in one-out node, keeping its input link.
    pub fn bypass_keep_in(&mut self, n: NodeId) {
        let (i, o) = {
            let node = self.node(n);
            (node.ins[0], node.outs[0])
        };
        self.remove_node(n);
        self.redirect_dst(i, o);
    }

    /// Deletes a one-in one-out node, keeping its output link.
    pub fn bypass_keep_out(&mut self, n: NodeId) {
        let (i, o) = {
            let node = self.node(n);
            (node.ins[0], node.outs[0])
        };
        self.remove_node(n);
        self.redirect_src(o, i);
    }

    /// Removes input `l` from a contraction node, shrinking its arity.
    pub fn con_remove_input(&mut self, c: NodeId, l: LinkId) {
        let pos = self.node(c).ins.iter().position(|&x| x == l).expect("input of contraction");
        self.set_dst(l, None);
        let node = self.node_mut(c);
        node.ins.remove(pos);
        node.label = NodeLabel::Con(node.ins.len());
        let rest: Vec<LinkId> = node.ins[pos..].to_vec();
        for (k, x) in rest.into_iter().enumerate() {
            self.set_dst(x, Some(End::Node(c, pos + k)));
        }
        self.revision += 1;
    }

    /// Appends `l` as a new input of a contraction node.
    pub fn con_add_input(&mut self, c: NodeId, l: LinkId) {
        let node = self.node_mut(c);
        node.ins.push(l);
        let p = node.ins.len() - 1;
        node.label = NodeLabel::Con(node.ins.len());
        self.set_dst(l, Some(End::Node(c, p)));
    }

    /// Adds a link-to-link edge `a → b`.
    pub fn join_links(&mut self, a: LinkId, b: LinkId) {
        self.set_dst(a, Some(End::Link(b)));
        self.set_src(b, Some(End::Link(a)));
    }

    /// Moves everything owned by `from` to `to`, fixing member sets.
    fn reown(&mut self, from: NodeId, to: Option<NodeId>) {
        let info = self.boxes.get(&from).cloned().unwrap_or_default();
        for &n in &info.nodes {
            if let Some(node) = self.nodes[n.0 as usize].as_mut() {
                if node.owner == Some(from) {
                    node.owner = to;
                }
            }
        }
        for &l in &info.links {
            if let Some(link) = self.links[l.0 as usize].as_mut() {
                if link.owner == Some(from) {
                    link.owner = to;
                }
            }
        }
        for n in &info.nodes {
            if let Some(b) = self.boxes.get_mut(n) {
                if b.parent == Some(from) {
                    b.parent = to;
                }
            }
        }
    }

    // ---- box operations --------------------------------------------------------

    fn check_box(&self, bang: NodeId) -> Result<&BoxInfo, GraphError> {
        match self.try_node(bang) {
            Some(n) if n.label == NodeLabel::Bang => {}
            Some(_) => return Err(GraphError::MalformedBox(bang)),
            None => return Err(GraphError::UnknownNode(bang)),
        }
        let info = self.boxes.get(&bang).ok_or(GraphError::MalformedBox(bang))?;
        if !info.nodes.contains(&bang) || info.aux.iter().any(|a| !info.nodes.contains(a)) {
            return Err(GraphError::MalformedBox(bang));
        }
        Ok(info)
    }

    /// Deletes the principal door and all auxiliary doors of a box. The
    /// principal door's input link and the auxiliary doors' output links
    /// survive; the box contents move to the enclosing box.
    pub fn remove_box_doors(&mut self, bang: NodeId) -> Result<(), GraphError> {
        let info = self.check_box(bang)?.clone();
        let parent = info.parent;
        self.bypass_keep_in(bang);
        for &q in &info.aux {
            self.bypass_keep_out(q);
        }
        self.reown(bang, parent);
        self.boxes.remove(&bang);
        self.revision += 1;
        Ok(())
    }

    /// Copies a box. The copy's principal door gets a fresh dangling input
    /// link and its auxiliary doors fresh dangling output links; these are
    /// appended to the graph interface.
    pub fn copy_box(&mut self, bang: NodeId) -> Result<(LinkId, CopyMap), GraphError> {
        let parent = self.check_box(bang)?.parent;
        let root = self.add_link(parent);
        let map = self.copy_box_into(bang, root, parent)?;
        self.inputs.push(root);
        for &(_, o) in &map.aux_outputs {
            self.outputs.push(o);
        }
        Ok((root, map))
    }

    /// Copies a box so that `root` becomes the input of the copy's principal
    /// door, placing the copy inside `owner`.
    pub fn copy_box_into(&mut self, bang: NodeId, root: LinkId, owner: Option<NodeId>) -> Result<CopyMap, GraphError> {
        let info = self.check_box(bang)?.clone();
        let mut map = CopyMap::default();
        let map_owner = |m: &CopyMap, o: Option<NodeId>| -> Option<NodeId> {
            match o {
                Some(b) if b == bang || info.nodes.contains(&b) => Some(m.nodes[&b]),
                _ => owner,
            }
        };
        // Box keys are principal doors, so node identifiers are fixed first.
        for &n in &info.nodes {
            let id = NodeId(self.nodes.len() as u32);
            self.nodes.push(None);
            map.nodes.insert(n, id);
        }
        for &l in &info.links {
            let o = map_owner(&map, self.link(l).owner);
            let id = LinkId(self.links.len() as u32);
            self.links.push(Some(Link { src: None, dst: None, owner: o }));
            self.link_count += 1;
            map.links.insert(l, id);
        }
        let mut new_boxes = Vec::new();
        for &b in &info.nodes {
            if let Some(bi) = self.boxes.get(&b) {
                let nb = BoxInfo {
                    nodes: bi.nodes.iter().map(|x| map.nodes[x]).collect(),
                    links: bi.links.iter().map(|x| map.links[x]).collect(),
                    aux: bi.aux.iter().map(|x| map.nodes[x]).collect(),
                    parent: if b == bang { owner } else { bi.parent.map(|p| map.nodes[&p]) },
                };
                new_boxes.push((map.nodes[&b], nb));
            }
        }
        for (k, v) in new_boxes {
            self.boxes.insert(k, v);
        }
        let aux: BTreeSet<NodeId> = info.aux.iter().copied().collect();
        for &n in &info.nodes {
            let node = self.node(n).clone();
            let id = map.nodes[&n];
            let mut ins = Vec::with_capacity(node.ins.len());
            for &l in &node.ins {
                ins.push(if n == bang { root } else { map.links[&l] });
            }
            let mut outs = Vec::with_capacity(node.outs.len());
            for &l in &node.outs {
                if aux.contains(&n) {
                    let o = self.add_link(owner);
                    map.aux_outputs.push((n, o));
                    outs.push(o);
                } else {
                    outs.push(map.links[&l]);
                }
            }
            let o = map_owner(&map, node.owner);
            self.nodes[id.0 as usize] = Some(Node { label: node.label, ins: Vec::new(), outs: Vec::new(), owner: o });
            self.node_count += 1;
            for (p, &l) in ins.iter().enumerate() {
                self.set_dst(l, Some(End::Node(id, p)));
            }
            for (p, &l) in outs.iter().enumerate() {
                self.set_src(l, Some(End::Node(id, p)));
            }
            let nd = self.node_mut(id);
            nd.ins = ins;
            nd.outs = outs;
        }
        // Internal link-to-link edges.
        for &l in &info.links {
            let link = self.link(l).clone();
            let c = map.links[&l];
            if let Some(End::Link(m)) = link.dst {
                if let Some(&mc) = map.links.get(&m) {
                    self.set_dst(c, Some(End::Link(mc)));
                    self.set_src(mc, Some(End::Link(c)));
                }
            }
        }
        let chain = self.box_chain(owner);
        for b in chain {
            let bi = self.boxes.get_mut(&b).expect("box");
            bi.nodes.extend(map.nodes.values().copied());
            bi.links.extend(map.links.values().copied());
        }
        map.bang = Some(map.nodes[&bang]);
        self.revision += 1;
        Ok(map)
    }

    // ---- normalisation ---------------------------------------------------------

    pub fn has_link_link_edges(&self) -> bool {
        self.links.iter().flatten().any(|l| matches!(l.dst, Some(End::Link(_))))
    }

    /// Wire homeomorphism: merges every chain of links into a single link.
    pub fn collapse_links(&mut self) {
        let ids: Vec<LinkId> = self.link_ids().collect();
        for a in ids {
            while let Some(Some(End::Link(b))) = self.try_link(a).map(|l| l.dst) {
                let was_output = self.outputs.iter().position(|&x| x == b);
                self.set_src(b, None);
                self.redirect_dst(a, b);
                if let Some(i) = was_output {
                    self.outputs.insert(i.min(self.outputs.len()), a);
                }
            }
        }
        self.outputs.dedup();
    }

    // ---- validation ------------------------------------------------------------

    /// All well-formedness violations, empty iff the graph is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (i, link) in self.links.iter().enumerate() {
            let Some(link) = link else { continue };
            let l = LinkId(i as u32);
            match link.src {
                Some(End::Node(n, p)) => match self.try_node(n) {
                    Some(node) if node.outs.get(p) == Some(&l) => {}
                    Some(_) => v.push(Violation::MultipleOutgoing(l)),
                    None => v.push(Violation::DanglingEnd(l)),
                },
                Some(End::Link(m)) => match self.try_link(m) {
                    Some(ml) if ml.dst == Some(End::Link(l)) => {}
                    Some(_) => v.push(Violation::MultipleIncoming(l)),
                    None => v.push(Violation::DanglingEnd(l)),
                },
                None => {}
            }
            match link.dst {
                Some(End::Node(n, p)) => match self.try_node(n) {
                    Some(node) if node.ins.get(p) == Some(&l) => {}
                    Some(_) => v.push(Violation::MultipleIncoming(l)),
                    None => v.push(Violation::DanglingEnd(l)),
                },
                Some(End::Link(m)) => match self.try_link(m) {
                    Some(ml) if ml.src == Some(End::Link(l)) => {}
                    Some(_) => v.push(Violation::MultipleIncoming(m)),
                    None => v.push(Violation::DanglingEnd(l)),
                },
                None => {}
            }
        }
        for (n, node) in self.nodes() {
            let (i, o) = node.label.arity();
            if node.ins.len() != i || node.outs.len() != o {
                v.push(Violation::Arity(n));
            }
            for (p, &l) in node.ins.iter().enumerate() {
                match self.try_link(l) {
                    Some(link) if link.dst == Some(End::Node(n, p)) => {}
                    Some(_) => v.push(Violation::MultipleIncoming(l)),
                    None => v.push(Violation::PortMismatch(n)),
                }
            }
            for (p, &l) in node.outs.iter().enumerate() {
                match self.try_link(l) {
                    Some(link) if link.src == Some(End::Node(n, p)) => {}
                    Some(_) => v.push(Violation::MultipleOutgoing(l)),
                    None => v.push(Violation::PortMismatch(n)),
                }
            }
        }
        let ins: BTreeSet<LinkId> = self.link_ids().filter(|&l| self.link(l).src.is_none()).collect();
        let outs: BTreeSet<LinkId> = self.link_ids().filter(|&l| self.link(l).dst.is_none()).collect();
        let decl_in: BTreeSet<LinkId> = self.inputs.iter().copied().collect();
        let decl_out: BTreeSet<LinkId> = self.outputs.iter().copied().collect();
        if ins != decl_in || outs != decl_out || decl_in.len() != self.inputs.len() || decl_out.len() != self.outputs.len()
        {
            v.push(Violation::InterfaceMismatch);
        }
        self.validate_boxes(&mut v);
        v
    }

    fn validate_boxes(&self, v: &mut Vec<Violation>) {
        let mut aux_owner: HashMap<NodeId, NodeId> = HashMap::new();
        for (&b, info) in &self.boxes {
            let ok_bang = self.try_node(b).is_some_and(|n| n.label == NodeLabel::Bang && n.owner == Some(b));
            if !ok_bang || !info.nodes.contains(&b) {
                v.push(Violation::MalformedBox(b));
                continue;
            }
            for &a in &info.aux {
                let ok = self.try_node(a).is_some_and(|n| n.label == NodeLabel::WhyNot && n.owner == Some(b))
                    && info.nodes.contains(&a);
                if !ok || aux_owner.insert(a, b).is_some() {
                    v.push(Violation::MalformedBox(b));
                }
            }
            if let Some(p) = info.parent {
                match self.boxes.get(&p) {
                    Some(pi) => {
                        if !info.nodes.is_subset(&pi.nodes) || !info.links.is_subset(&pi.links) {
                            v.push(Violation::BadNesting(b));
                        }
                    }
                    None => v.push(Violation::BadNesting(b)),
                }
            }
            // Closure: every member link has member ends, except the interface.
            let bang = self.node(b);
            if let Some(&root) = bang.ins.first() {
                if info.links.contains(&root) {
                    v.push(Violation::MalformedBox(b));
                }
            }
            for &a in &info.aux {
                if let Some(&o) = self.try_node(a).and_then(|n| n.outs.first()) {
                    if info.links.contains(&o) {
                        v.push(Violation::MalformedBox(b));
                    }
                }
            }
            for &l in &info.links {
                let Some(link) = self.try_link(l) else {
                    v.push(Violation::MalformedBox(b));
                    continue;
                };
                for end in [link.src, link.dst].into_iter().flatten() {
                    let inside = match end {
                        End::Node(n, _) => info.nodes.contains(&n),
                        End::Link(m) => info.links.contains(&m),
                    };
                    if !inside {
                        v.push(Violation::MalformedBox(b));
                    }
                }
                if link.src.is_none() || link.dst.is_none() {
                    v.push(Violation::MalformedBox(b));
                }
            }
            for &n in &info.nodes {
                let Some(node) = self.try_node(n) else {
                    v.push(Violation::MalformedBox(b));
                    continue;
                };
                let is_bang = n == b;
                let is_aux = info.aux.contains(&n);
                for &l in &node.ins {
                    if !(is_bang || info.links.contains(&l)) {
                        v.push(Violation::MalformedBox(b));
                    }
                }
                for &l in &node.outs {
                    if !(is_aux || info.links.contains(&l)) {
                        v.push(Violation::MalformedBox(b));
                    }
                }
            }
        }
        for (n, node) in self.nodes() {
            if node.label == NodeLabel::WhyNot && !aux_owner.contains_key(&n) {
                v.push(Violation::MalformedBox(n));
            }
            if node.label == NodeLabel::Bang && !self.boxes.contains_key(&n) {
                v.push(Violation::MalformedBox(n));
            }
            if !self.membership_ok(node.owner, |bi| bi.nodes.contains(&n)) {
                v.push(Violation::Membership(n));
            }
        }
        for l in self.link_ids() {
            let owner = self.link(l).owner;
            if !self.membership_ok(owner, |bi| bi.links.contains(&l)) {
                v.push(Violation::Membership(NodeId(u32::MAX)));
            }
        }
        // Members of a box are exactly the elements whose owner chain reaches it.
        for (&b, info) in &self.boxes {
            let nodes_ok = info.nodes.iter().all(|&n| {
                self.try_node(n).is_some_and(|x| self.box_chain(x.owner).contains(&b))
            });
            let links_ok = info.links.iter().all(|&l| {
                self.try_link(l).is_some_and(|x| self.box_chain(x.owner).contains(&b))
            });
            if !nodes_ok || !links_ok {
                v.push(Violation::Membership(b));
            }
        }
    }

    fn membership_ok(&self, owner: Option<NodeId>, has: impl Fn(&BoxInfo) -> bool) -> bool {
        let mut cur = owner;
        while let Some(b) = cur {
            match self.boxes.get(&b) {
                Some(bi) if has(bi) => cur = bi.parent,
                _ => return false,
            }
        }
        true
    }

    /// Local well-formedness of the given nodes and links: port agreement and
    /// arity. Cheaper than [`Graph::validate`] for large graphs.
    pub fn validate_local(&self, nodes: &[NodeId], links: &[LinkId]) -> Vec<Violation> {
        let mut v = Vec::new();
        for &n in nodes {
            let Some(node) = self.try_node(n) else { continue };
            let (i, o) = node.label.arity();
            if node.ins.len() != i || node.outs.len() != o {
                v.push(Violation::Arity(n));
            }
            for (p, &l) in node.ins.iter().enumerate() {
                if self.try_link(l).map(|k| k.dst) != Some(Some(End::Node(n, p))) {
                    v.push(Violation::PortMismatch(n));
                }
            }
            for (p, &l) in node.outs.iter().enumerate() {
                if self.try_link(l).map(|k| k.src) != Some(Some(End::Node(n, p))) {
                    v.push(Violation::PortMismatch(n));
                }
            }
            if !self.membership_ok(node.owner, |bi| bi.nodes.contains(&n)) {
                v.push(Violation::Membership(n));
            }
        }
        for &l in links {
            let Some(link) = self.try_link(l) else { continue };
            if let Some(End::Node(n, p)) = link.src {
                if self.try_node(n).and_then(|x| x.outs.get(p)) != Some(&l) {
                    v.push(Violation::MultipleOutgoing(l));
                }
            }
            if let Some(End::Node(n, p)) = link.dst {
                if self.try_node(n).and_then(|x| x.ins.get(p)) != Some(&l) {
                    v.push(Violation::MultipleIncoming(l));
                }
            }
            if matches!(link.src, Some(End::Link(_))) || matches!(link.dst, Some(End::Link(_))) {
                v.push(Violation::PortMismatch(NodeId(u32::MAX)));
            }
        }
        v
    }

    /// Nodes and links reachable from `start` by following edges in either
    /// direction.
    pub fn component(&self, start: LinkId) -> (BTreeSet<NodeId>, BTreeSet<LinkId>) {
        let mut nodes = BTreeSet::new();
        let mut links = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(l) = stack.pop() {
            if !links.insert(l) {
                continue;
            }
            let link = self.link(l);
            for end in [link.src, link.dst].into_iter().flatten() {
                match end {
                    End::Link(m) => stack.push(m),
                    End::Node(n, _) => {
                        if nodes.insert(n) {
                            let node = self.node(n);
                            stack.extend(node.ins.iter().chain(node.outs.iter()).copied());
                        }
                    }
                }
            }
        }
        (nodes, links)
    }

    /// A structural fingerprint that ignores nothing; equal fingerprints mean
    /// identical graphs including identifiers.
    pub fn fingerprint(&self) -> u64 {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let mut h = DefaultHasher::new();
        for (n, node) in self.nodes() {
            n.hash(&mut h);
            node.label.hash(&mut h);
            node.ins.hash(&mut h);
            node.outs.hash(&mut h);
            node.owner.hash(&mut h);
        }
        for l in self.link_ids() {
            let link = self.link(l);
            l.hash(&mut h);
            link.src.hash(&mut h);
            link.dst.hash(&mut h);
        }
        for (b, bi) in &self.boxes {
            b.hash(&mut h);
            bi.nodes.hash(&mut h);
            bi.links.hash(&mut h);
            bi.aux.hash(&mut h);
        }
        self.inputs.hash(&mut h);
        self.outputs.hash(&mut h);
        h.finish()
    }

    /// Disjoint union; returns the identifier offsets applied to `other`.
    pub fn absorb(&mut self, other: &Graph) -> (u32, u32) {
        let dn = self.nodes.len() as u32;
        let dl = self.links.len() as u32;
        let mn = |n: NodeId| NodeId(n.0 + dn);
        let ml = |l: LinkId| LinkId(l.0 + dl);
        let me = |e: End| match e {
            End::Node(n, p) => End::Node(mn(n), p),
            End::Link(l) => End::Link(ml(l)),
        };
        for n in &other.nodes {
            self.nodes.push(n.as_ref().map(|n| Node {
                label: n.label,
                ins: n.ins.iter().map(|&l| ml(l)).collect(),
                outs: n.outs.iter().map(|&l| ml(l)).collect(),
                owner: n.owner.map(mn),
            }));
        }
        for l in &other.links {
            self.links.push(l.as_ref().map(|l| Link {
                src: l.src.map(me),
                dst: l.dst.map(me),
                owner: l.owner.map(mn),
            }));
        }
        for (&b, bi) in &other.boxes {
            self.boxes.insert(
                mn(b),
                BoxInfo {
                    nodes: bi.nodes.iter().map(|&n| mn(n)).collect(),
                    links: bi.links.iter().map(|&l| ml(l)).collect(),
                    aux: bi.aux.iter().map(|&n| mn(n)).collect(),
                    parent: bi.parent.map(mn),
                },
            );
        }
        self.inputs.extend(other.inputs.iter().map(|&l| ml(l)));
        self.outputs.extend(other.outputs.iter().map(|&l| ml(l)));
        self.node_count += other.node_count;
        self.link_count += other.link_count;
        self.edge_count += other.edge_count;
        self.revision += 1;
        (dn, dl)
    }

    // ---- export ----------------------------------------------------------------

    /// Graphviz rendering; boxes become clusters and the token position, if
    /// given, is drawn as a bold red edge.
    pub fn to_dot(&self, token: Option<LinkId>) -> String {
        let mut s = String::from("digraph G {\n  rankdir=BT;\n  node [fontname=\"monospace\"];\n");
        let mut children: BTreeMap<Option<NodeId>, Vec<NodeId>> = BTreeMap::new();
        for (n, node) in self.nodes() {
            children.entry(node.owner).or_default().push(n);
        }
        let mut sub_boxes: BTreeMap<Option<NodeId>, Vec<NodeId>> = BTreeMap::new();
        for (&b, bi) in &self.boxes {
            sub_boxes.entry(bi.parent).or_default().push(b);
        }
        fn emit(
            g: &Graph,
            s: &mut String,
            owner: Option<NodeId>,
            children: &BTreeMap<Option<NodeId>, Vec<NodeId>>,
            sub_boxes: &BTreeMap<Option<NodeId>, Vec<NodeId>>,
            depth: usize,
        ) {
            let pad = "  ".repeat(depth);
            for &n in children.get(&owner).into_iter().flatten() {
                let _ = writeln!(s, "{pad}{n} [label=\"{}\"];", g.node(n).label.symbol());
            }
            for &b in sub_boxes.get(&owner).into_iter().flatten() {
                let _ = writeln!(s, "{pad}subgraph cluster_{} {{\n{pad}  style=dashed;", b.0);
                emit(g, s, Some(b), children, sub_boxes, depth + 1);
                let _ = writeln!(s, "{pad}}}");
            }
        }
        emit(self, &mut s, None, &children, &sub_boxes, 1);
        for l in self.link_ids() {
            let link = self.link(l);
            let from = match link.src {
                Some(End::Node(n, _)) => n.to_string(),
                Some(End::Link(m)) => format!("{m}"),
                None => {
                    let _ = writeln!(s, "  in_{} [shape=point];", l.0);
                    format!("in_{}", l.0)
                }
            };
            let to = match link.dst {
                Some(End::Node(n, _)) => n.to_string(),
                Some(End::Link(m)) => format!("{m}"),
                None => {
                    let _ = writeln!(s, "  out_{} [shape=point];", l.0);
                    format!("out_{}", l.0)
                }
            };
            let style = if token == Some(l) { ", color=red, penwidth=3" } else { "" };
            let _ = writeln!(s, "  {from} -> {to} [label=\"{l}\"{style}];");
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `!` around a lambda whose body is its own variable.
    fn identity_box() -> (Graph, NodeId) {
        let mut g = Graph::new();
        let root = g.add_link(None);
        let bang = g.new_box(None);
        let inner = g.add_link(Some(bang));
        let var = g.add_link(Some(bang));
        let body = g.add_link(Some(bang));
        g.add_node(NodeLabel::Lam, vec![inner, var], vec![body], Some(bang));
        g.add_node(NodeLabel::Con(1), vec![body], vec![var], Some(bang));
        g.set_ports(bang, vec![root], vec![inner]);
        g.inputs.push(root);
        (g, bang)
    }

    #[test]
    fn identity_box_is_valid() {
        let (g, _) = identity_box();
        assert_eq!(g.validate(), vec![]);
        let m = g.metrics();
        assert_eq!(m.box_count, 1);
        assert_eq!(m.node_count, 3);
        assert_eq!(m.link_count, 4);
        assert_eq!(m.edge_count, 7);
        assert_eq!(m.max_box_size, 6);
    }

    #[test]
    fn single_wire_graph() {
        let mut g = Graph::new();
        let l = g.add_link(None);
        g.inputs.push(l);
        g.outputs.push(l);
        assert_eq!(g.validate(), vec![]);
        assert_eq!(g.metrics().node_count, 0);
    }

    #[test]
    fn double_target_is_reported() {
        let (mut g, _) = identity_box();
        let extra = g.add_link(None);
        g.inputs.push(extra);
        let root = g.inputs[0];
        // A second node claims the root as its input.
        let d = g.reserve_node(NodeLabel::Der, None);
        g.node_mut(d).ins = vec![root];
        g.node_mut(d).outs = vec![extra];
        let v = g.validate();
        assert!(v.contains(&Violation::MultipleIncoming(root)), "{v:?}");
    }

    #[test]
    fn box_without_principal_is_malformed() {
        let (mut g, bang) = identity_box();
        g.boxes.get_mut(&bang).unwrap().nodes.remove(&bang);
        assert!(g.validate().contains(&Violation::MalformedBox(bang)));
    }

    #[test]
    fn copy_adds_box_size() {
        let (mut g, bang) = identity_box();
        let before = g.metrics();
        let (_, map) = g.copy_box(bang).unwrap();
        assert_eq!(g.validate(), vec![]);
        let after = g.metrics();
        assert_eq!(after.node_count, before.node_count + 3);
        assert_eq!(after.box_count, 2);
        assert!(map.aux_outputs.is_empty());
        let (_, map2) = g.copy_box(bang).unwrap();
        let a: BTreeSet<_> = map.nodes.values().collect();
        assert!(map2.nodes.values().all(|n| !a.contains(n)));
    }

    #[test]
    fn removing_doors_keeps_root() {
        let (mut g, bang) = identity_box();
        let root = g.inputs[0];
        g.remove_box_doors(bang).unwrap();
        assert_eq!(g.validate(), vec![]);
        assert_eq!(g.metrics().node_count, 2);
        assert_eq!(g.label(g.target(root).unwrap().0), NodeLabel::Lam);
        assert!(!g.has_link_link_edges());
    }

    #[test]
    fn collapse_chains() {
        let (mut g, _) = identity_box();
        let root = g.inputs[0];
        let top = g.add_link(None);
        g.inputs = vec![top];
        g.join_links(top, root);
        assert!(g.has_link_link_edges());
        assert_eq!(g.validate(), vec![]);
        g.collapse_links();
        assert!(!g.has_link_link_edges());
        assert_eq!(g.validate(), vec![]);
        let fp = g.fingerprint();
        g.collapse_links();
        assert_eq!(g.fingerprint(), fp);
    }
}
