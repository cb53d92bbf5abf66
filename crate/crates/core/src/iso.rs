//! Graph isomorphism by colour refinement with individualisation, and
//! canonical strings for box contents.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::graph::{End, Graph, LinkId, NodeId, NodeLabel};

/// Vertex-coloured directed multigraph with labelled edges. Every element of
/// a [`Graph`] (node, link, box) becomes one vertex.
struct Coloured {
    colour: Vec<u32>,
    adj: Vec<Vec<(u32, u32)>>,
}

const E_OUT: u32 = 0;
const E_IN: u32 = 1 << 20;
const E_LL: u32 = 2 << 20;
const E_OWN: u32 = 3 << 20;
const E_PRIN: u32 = 4 << 20;
const E_PAR: u32 = 5 << 20;
const REV: u32 = 1 << 24;

fn label_code(l: NodeLabel) -> u64 {
    match l {
        NodeLabel::Lam => 1,
        NodeLabel::AppNeed => 2,
        NodeLabel::AppLR => 3,
        NodeLabel::AppRL => 4,
        NodeLabel::Bang => 5,
        NodeLabel::WhyNot => 6,
        NodeLabel::Der => 7,
        NodeLabel::Con(n) => 100 + n as u64,
    }
}

fn encode(g: &Graph, ann: Option<&HashMap<LinkId, u64>>) -> (Coloured, Vec<u64>) {
    let mut vid_node: HashMap<NodeId, u32> = HashMap::new();
    let mut vid_link: HashMap<LinkId, u32> = HashMap::new();
    let mut vid_box: HashMap<NodeId, u32> = HashMap::new();
    let mut init: Vec<u64> = Vec::new();
    for (n, node) in g.nodes() {
        vid_node.insert(n, init.len() as u32);
        init.push(label_code(node.label));
    }
    let ins: HashMap<LinkId, usize> = g.inputs.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let outs: HashMap<LinkId, usize> = g.outputs.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    for l in g.link_ids() {
        vid_link.insert(l, init.len() as u32);
        match ann {
            Some(a) => init.push(2_000_000 + a.get(&l).copied().unwrap_or(0)),
            None => {
                let i = ins.get(&l).map_or(0, |&i| i as u64 + 1);
                let o = outs.get(&l).map_or(0, |&o| o as u64 + 1);
                init.push(1_000_000 + i * 10_000 + o);
            }
        }
    }
    for &b in g.boxes().keys() {
        vid_box.insert(b, init.len() as u32);
        init.push(999);
    }
    let mut adj = vec![Vec::new(); init.len()];
    let mut edge = |a: u32, b: u32, lab: u32| {
        adj[a as usize].push((lab, b));
        adj[b as usize].push((lab | REV, a));
    };
    for (n, node) in g.nodes() {
        let v = vid_node[&n];
        for (p, l) in node.outs.iter().enumerate() {
            edge(v, vid_link[l], E_OUT + p as u32);
        }
        let unordered = matches!(node.label, NodeLabel::Con(_));
        for (p, l) in node.ins.iter().enumerate() {
            let p = if unordered { 0 } else { p as u32 };
            edge(vid_link[l], v, E_IN + p);
        }
        if let Some(o) = node.owner {
            edge(v, vid_box[&o], E_OWN);
        }
    }
    for l in g.link_ids() {
        let link = g.link(l);
        if let Some(End::Link(m)) = link.dst {
            edge(vid_link[&l], vid_link[&m], E_LL);
        }
        if let Some(o) = link.owner {
            edge(vid_link[&l], vid_box[&o], E_OWN);
        }
    }
    for (&b, bi) in g.boxes() {
        edge(vid_box[&b], vid_node[&b], E_PRIN);
        if let Some(p) = bi.parent {
            edge(vid_box[&b], vid_box[&p], E_PAR);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    (Coloured { colour: Vec::new(), adj }, init)
}

/// Refines both colourings jointly until stable. Returns false as soon as the
/// colour histograms differ.
fn refine(a: &mut Coloured, b: &mut Coloured) -> bool {
    let mut classes = count_classes(a, b);
    loop {
        let mut intern: HashMap<(u32, Vec<(u32, u32)>), u32> = HashMap::new();
        let mut next = |c: &Coloured| -> Vec<u32> {
            (0..c.colour.len())
                .map(|v| {
                    let mut sig: Vec<(u32, u32)> = c.adj[v].iter().map(|&(l, w)| (l, c.colour[w as usize])).collect();
                    sig.sort_unstable();
                    let key = (c.colour[v], sig);
                    let k = intern.len() as u32;
                    *intern.entry(key).or_insert(k)
                })
                .collect()
        };
        let na = next(a);
        let nb = next(b);
        a.colour = na;
        b.colour = nb;
        if histogram(a) != histogram(b) {
            return false;
        }
        let now = count_classes(a, b);
        if now == classes {
            return true;
        }
        classes = now;
    }
}

fn count_classes(a: &Coloured, b: &Coloured) -> usize {
    a.colour.iter().chain(b.colour.iter()).collect::<BTreeSet<_>>().len()
}

fn histogram(c: &Coloured) -> Vec<(u32, usize)> {
    let mut h: HashMap<u32, usize> = HashMap::new();
    for &x in &c.colour {
        *h.entry(x).or_default() += 1;
    }
    let mut v: Vec<_> = h.into_iter().collect();
    v.sort_unstable();
    v
}

fn search(a: &mut Coloured, b: &mut Coloured) -> bool {
    if !refine(a, b) {
        return false;
    }
    let h = histogram(a);
    let Some(&(cell, _)) = h.iter().filter(|(_, k)| *k > 1).min_by_key(|(c, k)| (*k, *c)) else {
        return verify(a, b);
    };
    let fresh = a.colour.iter().chain(b.colour.iter()).max().copied().unwrap_or(0) + 1;
    let v = a.colour.iter().position(|&c| c == cell).expect("cell member");
    let candidates: Vec<usize> = (0..b.colour.len()).filter(|&w| b.colour[w] == cell).collect();
    for w in candidates {
        let (sa, sb) = (a.colour.clone(), b.colour.clone());
        a.colour[v] = fresh;
        b.colour[w] = fresh;
        if search(a, b) {
            return true;
        }
        a.colour = sa;
        b.colour = sb;
    }
    false
}

/// Discrete colourings define a bijection; check it preserves every edge.
fn verify(a: &Coloured, b: &Coloured) -> bool {
    let mut inv: HashMap<u32, usize> = HashMap::new();
    for (w, &c) in b.colour.iter().enumerate() {
        inv.insert(c, w);
    }
    for v in 0..a.colour.len() {
        let Some(&w) = inv.get(&a.colour[v]) else { return false };
        let mut ea: Vec<(u32, usize)> = a.adj[v].iter().map(|&(l, x)| (l, inv[&a.colour[x as usize]])).collect();
        let mut eb: Vec<(u32, usize)> = b.adj[w].iter().map(|&(l, x)| (l, x as usize)).collect();
        ea.sort_unstable();
        eb.sort_unstable();
        if ea != eb {
            return false;
        }
    }
    true
}

/// True iff a bijection preserves labels, port order (contraction inputs
/// excepted), interface order and box structure.
pub fn isomorphic(g1: &Graph, g2: &Graph) -> bool {
    isomorphic_impl(g1, None, g2, None)
}

/// Like [`isomorphic`], but interface links are matched by the given
/// annotations (for instance variable names) instead of interface position.
/// Links absent from an annotation map count as unannotated.
pub fn isomorphic_annotated(g1: &Graph, ann1: &HashMap<LinkId, u64>, g2: &Graph, ann2: &HashMap<LinkId, u64>) -> bool {
    isomorphic_impl(g1, Some(ann1), g2, Some(ann2))
}

fn isomorphic_impl(
    g1: &Graph,
    ann1: Option<&HashMap<LinkId, u64>>,
    g2: &Graph,
    ann2: Option<&HashMap<LinkId, u64>>,
) -> bool {
    let m1 = g1.metrics();
    let m2 = g2.metrics();
    if m1 != m2 || g1.inputs.len() != g2.inputs.len() || g1.outputs.len() != g2.outputs.len() {
        return false;
    }
    let (mut a, ia) = encode(g1, ann1);
    let (mut b, ib) = encode(g2, ann2);
    let mut intern: HashMap<u64, u32> = HashMap::new();
    for x in ia.iter().chain(ib.iter()) {
        let k = intern.len() as u32;
        intern.entry(*x).or_insert(k);
    }
    a.colour = ia.iter().map(|x| intern[x]).collect();
    b.colour = ib.iter().map(|x| intern[x]).collect();
    if histogram(&a) != histogram(&b) {
        return false;
    }
    search(&mut a, &mut b)
}

/// A string that is identical for copies of the same box: contents visited
/// depth-first from the principal door through ordered ports.
pub fn box_canonical(g: &Graph, bang: NodeId) -> Option<String> {
    let info = g.box_info(bang)?;
    let depth = |owner: Option<NodeId>| -> usize {
        let chain = g.box_chain(owner);
        chain.iter().position(|&b| b == bang).unwrap_or(usize::MAX)
    };
    let mut seen: HashMap<NodeId, usize> = HashMap::new();
    let mut out = String::new();
    // Iterative preorder with explicit port expansion.
    enum Item {
        Visit(NodeId),
        Text(String),
    }
    let mut work = vec![Item::Visit(bang)];
    while let Some(item) = work.pop() {
        match item {
            Item::Text(t) => out.push_str(&t),
            Item::Visit(n) => {
                if let Some(&k) = seen.get(&n) {
                    let _ = write!(out, "#{k}");
                    continue;
                }
                let k = seen.len();
                seen.insert(n, k);
                let node = g.node(n);
                let _ = write!(out, "({}/{}", node.label.symbol(), depth(node.owner));
                let mut pending: Vec<Item> = Vec::new();
                let ports = node.ins.iter().map(|&l| (true, l)).chain(node.outs.iter().map(|&l| (false, l)));
                for (p, (is_in, l)) in ports.enumerate() {
                    if !info.links.contains(&l) {
                        pending.push(Item::Text(format!(" {p}:x")));
                        continue;
                    }
                    let link = g.link(l);
                    let other = if is_in { link.src } else { link.dst };
                    match other {
                        Some(End::Node(m, q)) => {
                            pending.push(Item::Text(format!(" {p}>{q}:")));
                            pending.push(Item::Visit(m));
                        }
                        _ => pending.push(Item::Text(format!(" {p}:-"))),
                    }
                }
                pending.push(Item::Text(")".into()));
                work.extend(pending.into_iter().rev());
            }
        }
    }
    let unreached = info.nodes.len() - seen.len();
    let _ = write!(out, "+{unreached}");
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn identity_with(pad: bool) -> Graph {
        let mut g = Graph::new();
        let root = g.add_link(None);
        let extra = pad.then(|| g.add_link(None));
        let bang = g.new_box(None);
        let inner = g.add_link(Some(bang));
        let var = g.add_link(Some(bang));
        let body = g.add_link(Some(bang));
        g.add_node(NodeLabel::Con(1), vec![body], vec![var], Some(bang));
        g.add_node(NodeLabel::Lam, vec![inner, var], vec![body], Some(bang));
        g.set_ports(bang, vec![root], vec![inner]);
        g.inputs.push(root);
        if let Some(p) = extra {
            g.remove_link(p);
        }
        g
    }

    #[test]
    fn renamed_graphs_are_isomorphic() {
        let a = identity_with(true);
        let b = identity_with(false);
        assert!(isomorphic(&a, &b));
        assert!(isomorphic(&a, &a));
    }

    #[test]
    fn canonical_is_stable_under_copy() {
        let mut g = identity_with(true);
        let bang = *g.boxes().keys().next().unwrap();
        let (_, map) = g.copy_box(bang).unwrap();
        let c = map.bang.unwrap();
        assert_eq!(box_canonical(&g, bang), box_canonical(&g, c));
    }
}
