//! Channel environments: labelled trees of channel usage, dependency
//! relations between uses, linearity, and the append operations.

use crate::ast::{GlobalType, Participant, RecVar};
use std::fmt::Write as _;

/// Label of a channel use `a: s -> r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UseLabel {
    pub chan: String,
    pub sender: Participant,
    pub receiver: String,
}

impl UseLabel {
    pub fn new(chan: &str, sender: Participant, receiver: &str) -> Self {
        UseLabel {
            chan: chan.to_string(),
            sender,
            receiver: receiver.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Tree {
    Hole,
    Use(UseLabel, Box<Tree>),
    Mark(RecVar, Box<Tree>),
    Fork(Box<Tree>, Box<Tree>),
}

/// A channel environment. The root is implicit; `Hole`s are the empty
/// trees where appends graft.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChannelEnv {
    tree: Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepKind {
    II,
    IO,
    OO,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeLabel {
    Root,
    Fork,
    Use(UseLabel),
    RecMark(RecVar),
}

/// Flattened node with a pre-order id; the root has id 0.
#[derive(Clone, Debug)]
pub struct NodeInfo {
    pub id: usize,
    pub label: NodeLabel,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinearityError {
    #[error("no recursion mark for {0} in the channel environment")]
    MissingRecMark(RecVar),
}

fn ii(n1: &UseLabel, n2: &UseLabel) -> bool {
    n1.receiver == n2.receiver
}

fn io(n1: &UseLabel, n2: &UseLabel) -> bool {
    n2.sender.is(&n1.receiver)
}

fn oo(n1: &UseLabel, n2: &UseLabel) -> bool {
    n1.chan == n2.chan
        && (n1.sender == n2.sender
            || (n1.sender == Participant::Star && n1.receiver == n2.receiver))
}

fn edge(n1: &UseLabel, n2: &UseLabel, k: DepKind) -> bool {
    match k {
        DepKind::II => ii(n1, n2),
        DepKind::IO => io(n1, n2),
        DepKind::OO => oo(n1, n2),
    }
}

/// Input and output dependency from every `path[j]` to the last node of
/// `path`, where `path` lists the uses from top to bottom.
fn deps_to_last(path: &[&UseLabel]) -> (Vec<bool>, Vec<bool>) {
    let k = path.len() - 1;
    let n2 = path[k];
    let mut inp = vec![false; k];
    let mut out = vec![false; k];
    for j in (0..k).rev() {
        let u = path[j];
        inp[j] = ii(u, n2) || (j + 1..k).any(|l| inp[l] && (ii(u, path[l]) || io(u, path[l])));
        out[j] = oo(u, n2)
            || io(u, n2)
            || (j + 1..k).any(|l| out[l] && (oo(u, path[l]) || io(u, path[l])));
    }
    (inp, out)
}

/// First ancestor on `path` that uses the channel of the last node without
/// both dependencies.
fn violation(path: &[&UseLabel]) -> Option<usize> {
    let k = path.len() - 1;
    if !path[..k].iter().any(|u| u.chan == path[k].chan) {
        return None;
    }
    let (inp, out) = deps_to_last(path);
    (0..k).find(|&j| path[j].chan == path[k].chan && !(inp[j] && out[j]))
}

impl Tree {
    fn graft(&self, c2: &Tree) -> Tree {
        match self {
            Tree::Hole => c2.clone(),
            Tree::Use(l, t) => Tree::Use(l.clone(), Box::new(t.graft(c2))),
            Tree::Mark(x, t) => Tree::Mark(x.clone(), Box::new(t.graft(c2))),
            Tree::Fork(a, b) => Tree::Fork(Box::new(a.graft(c2)), Box::new(b.graft(c2))),
        }
    }

    fn strip_marks(&self) -> Tree {
        match self {
            Tree::Hole => Tree::Hole,
            Tree::Use(l, t) => Tree::Use(l.clone(), Box::new(t.strip_marks())),
            Tree::Mark(_, t) => t.strip_marks(),
            Tree::Fork(a, b) => Tree::Fork(Box::new(a.strip_marks()), Box::new(b.strip_marks())),
        }
    }

    fn holes(&self) -> usize {
        match self {
            Tree::Hole => 1,
            Tree::Use(_, t) | Tree::Mark(_, t) => t.holes(),
            Tree::Fork(a, b) => a.holes() + b.holes(),
        }
    }

    fn has_mark(&self, x: &str) -> bool {
        match self {
            Tree::Hole => false,
            Tree::Mark(y, t) => y == x || t.has_mark(x),
            Tree::Use(_, t) => t.has_mark(x),
            Tree::Fork(a, b) => a.has_mark(x) || b.has_mark(x),
        }
    }

    /// Unfold at every mark for `x` that has no mark for `x` below it.
    fn unfold_at(&self, x: &str) -> Tree {
        match self {
            Tree::Hole => Tree::Hole,
            Tree::Mark(y, t) if y == x && !t.has_mark(x) => {
                Tree::Mark(y.clone(), Box::new(t.graft(&t.strip_marks())))
            }
            Tree::Mark(y, t) => Tree::Mark(y.clone(), Box::new(t.unfold_at(x))),
            Tree::Use(l, t) => Tree::Use(l.clone(), Box::new(t.unfold_at(x))),
            Tree::Fork(a, b) => Tree::Fork(Box::new(a.unfold_at(x)), Box::new(b.unfold_at(x))),
        }
    }

    fn deepest_mark(&self, x: &str, depth: usize, best: &mut Option<(usize, Tree)>) {
        match self {
            Tree::Hole => {}
            Tree::Mark(y, t) => {
                if y == x && best.as_ref().is_none_or(|(d, _)| depth > *d) {
                    *best = Some((depth, self.clone()));
                }
                t.deepest_mark(x, depth + 1, best);
            }
            Tree::Use(_, t) => t.deepest_mark(x, depth + 1, best),
            Tree::Fork(a, b) => {
                a.deepest_mark(x, depth + 1, best);
                b.deepest_mark(x, depth + 1, best);
            }
        }
    }

    fn check<'a>(&'a self, path: &mut Vec<&'a UseLabel>) -> Option<(UseLabel, UseLabel)> {
        match self {
            Tree::Hole => None,
            Tree::Use(l, t) => {
                path.push(l);
                let r = match violation(path) {
                    Some(j) => Some((path[j].clone(), l.clone())),
                    None => t.check(path),
                };
                path.pop();
                r
            }
            Tree::Mark(_, t) => t.check(path),
            Tree::Fork(a, b) => a.check(path).or_else(|| b.check(path)),
        }
    }

    fn flatten(&self, parent: usize, out: &mut Vec<NodeInfo>) {
        let (label, kids): (NodeLabel, Vec<&Tree>) = match self {
            Tree::Hole => return,
            Tree::Use(l, t) => (NodeLabel::Use(l.clone()), vec![t]),
            Tree::Mark(x, t) => (NodeLabel::RecMark(x.clone()), vec![t]),
            Tree::Fork(a, b) => (NodeLabel::Fork, vec![a, b]),
        };
        let id = out.len();
        out.push(NodeInfo {
            id,
            label,
            parent: Some(parent),
        });
        for k in kids {
            k.flatten(id, out);
        }
    }
}

impl Default for ChannelEnv {
    fn default() -> Self {
        ChannelEnv::empty()
    }
}

impl ChannelEnv {
    /// The empty environment `•`.
    pub fn empty() -> Self {
        ChannelEnv { tree: Tree::Hole }
    }

    /// A single use `a: s -> r` with an empty subtree.
    pub fn use_node(chan: &str, sender: Participant, receiver: &str) -> Self {
        ChannelEnv {
            tree: Tree::Use(UseLabel::new(chan, sender, receiver), Box::new(Tree::Hole)),
        }
    }

    pub fn rec_mark(x: &str) -> Self {
        ChannelEnv {
            tree: Tree::Mark(x.to_string(), Box::new(Tree::Hole)),
        }
    }

    pub fn fork(a: ChannelEnv, b: ChannelEnv) -> Self {
        ChannelEnv {
            tree: Tree::Fork(Box::new(a.tree), Box::new(b.tree)),
        }
    }

    /// A straight path of uses, top first.
    pub fn path(uses: &[UseLabel]) -> Self {
        let mut tree = Tree::Hole;
        for u in uses.iter().rev() {
            tree = Tree::Use(u.clone(), Box::new(tree));
        }
        ChannelEnv { tree }
    }

    pub fn is_empty(&self) -> bool {
        self.tree == Tree::Hole
    }

    /// Number of empty subtrees, i.e. append points.
    pub fn leaf_count(&self) -> usize {
        self.tree.holes()
    }

    /// Pre-order nodes; id 0 is the root.
    pub fn nodes(&self) -> Vec<NodeInfo> {
        let mut out = vec![NodeInfo {
            id: 0,
            label: NodeLabel::Root,
            parent: None,
        }];
        self.tree.flatten(0, &mut out);
        out
    }

    /// Uses on the path from `from` (exclusive ancestor) down to `to`
    /// (inclusive), or `None` when `from` is not an ancestor of `to`.
    fn use_path(nodes: &[NodeInfo], from: usize, to: usize) -> Option<Vec<UseLabel>> {
        let mut path = Vec::new();
        let mut cur = Some(to);
        while let Some(i) = cur {
            if i == from {
                path.reverse();
                return Some(path);
            }
            if let NodeLabel::Use(l) = &nodes[i].label {
                path.push(l.clone());
            }
            cur = nodes[i].parent;
        }
        None
    }

    fn use_label(nodes: &[NodeInfo], n: usize) -> Option<&UseLabel> {
        match &nodes.get(n)?.label {
            NodeLabel::Use(l) => Some(l),
            _ => None,
        }
    }

    /// `n1 ≺ n2` and their labels match the clause for `k`.
    pub fn dep_edge(&self, n1: usize, n2: usize, k: DepKind) -> bool {
        let nodes = self.nodes();
        let (Some(l1), Some(l2)) = (Self::use_label(&nodes, n1), Self::use_label(&nodes, n2))
        else {
            return false;
        };
        n1 != n2 && Self::use_path(&nodes, n1, n2).is_some() && edge(l1, l2, k)
    }

    fn chain(&self, n1: usize, n2: usize) -> Option<Vec<UseLabel>> {
        let nodes = self.nodes();
        let l1 = Self::use_label(&nodes, n1)?.clone();
        Self::use_label(&nodes, n2)?;
        if n1 == n2 {
            return Some(vec![l1]);
        }
        let mut path = Self::use_path(&nodes, n1, n2)?;
        path.insert(0, l1);
        Some(path)
    }

    /// Chain of II/IO edges from `n1` to `n2` ending with II; holds for `n1 = n2`.
    pub fn has_input_dep(&self, n1: usize, n2: usize) -> bool {
        match self.chain(n1, n2) {
            Some(p) if p.len() == 1 => true,
            Some(p) => deps_to_last(&p.iter().collect::<Vec<_>>()).0[0],
            None => false,
        }
    }

    /// Chain of at least one OO/IO edge from `n1` to `n2`.
    pub fn has_output_dep(&self, n1: usize, n2: usize) -> bool {
        match self.chain(n1, n2) {
            Some(p) if p.len() > 1 => deps_to_last(&p.iter().collect::<Vec<_>>()).1[0],
            _ => false,
        }
    }

    /// First pair of same-channel uses lacking an input or output dependency.
    pub fn first_violation(&self) -> Option<(UseLabel, UseLabel)> {
        self.tree.check(&mut Vec::new())
    }

    pub fn is_linear(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Subtree rooted at the deepest mark for `x`, the mark included.
    pub fn subtree_at_rec(&self, x: &str) -> Result<ChannelEnv, LinearityError> {
        let mut best = None;
        self.tree.deepest_mark(x, 0, &mut best);
        best.map(|(_, tree)| ChannelEnv { tree })
            .ok_or_else(|| LinearityError::MissingRecMark(x.to_string()))
    }

    /// Graft one copy of the body of the mark for `x` below itself, inner
    /// marks removed from the copy.
    pub fn unfold_env_at(&self, x: &str) -> Result<ChannelEnv, LinearityError> {
        if !self.tree.has_mark(x) {
            return Err(LinearityError::MissingRecMark(x.to_string()));
        }
        Ok(ChannelEnv {
            tree: self.tree.unfold_at(x),
        })
    }

    pub fn has_rec_mark(&self, x: &str) -> bool {
        self.tree.has_mark(x)
    }

    /// DOT rendering with dependency edges between uses overlaid.
    pub fn to_dot(&self) -> String {
        let nodes = self.nodes();
        let mut out = String::from("digraph C {\n");
        for n in &nodes {
            let label = match &n.label {
                NodeLabel::Root => "•".to_string(),
                NodeLabel::Fork => "∘".to_string(),
                NodeLabel::Use(l) => format!("{}: {} -> {}", l.chan, l.sender, l.receiver),
                NodeLabel::RecMark(x) => x.clone(),
            };
            let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, label);
            if let Some(p) = n.parent {
                let _ = writeln!(out, "  n{p} -> n{};", n.id);
            }
        }
        for a in &nodes {
            for b in &nodes {
                for (k, name) in [
                    (DepKind::II, "II"),
                    (DepKind::IO, "IO"),
                    (DepKind::OO, "OO"),
                ] {
                    if self.dep_edge(a.id, b.id, k) {
                        let _ = writeln!(
                            out,
                            "  n{} -> n{} [style=dashed, label=\"{name}\"];",
                            a.id, b.id
                        );
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// `⊛`: graft `c2` at every empty subtree of `c`.
pub fn append_env(c: &ChannelEnv, c2: &ChannelEnv) -> ChannelEnv {
    ChannelEnv {
        tree: c.tree.graft(&c2.tree),
    }
}

/// `⊙`: the append when it is linear.
pub fn append_linear(c: &ChannelEnv, c2: &ChannelEnv) -> Option<ChannelEnv> {
    let r = append_env(c, c2);
    r.is_linear().then_some(r)
}

/// Channel environment of a global type.
pub fn chan_g(g: &GlobalType) -> ChannelEnv {
    fn go(g: &GlobalType) -> Tree {
        match g {
            GlobalType::End | GlobalType::GVar(_) => Tree::Hole,
            GlobalType::Msg {
                sender,
                receiver,
                channel,
                cont,
                ..
            } => Tree::Use(
                UseLabel::new(channel, sender.clone(), receiver),
                Box::new(go(cont)),
            ),
            GlobalType::Rec(x, body) => Tree::Mark(x.clone(), Box::new(go(body))),
            GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
                Tree::Fork(Box::new(go(a)), Box::new(go(b)))
            }
            GlobalType::Seq(a, b) => go(a).graft(&go(b)),
        }
    }
    ChannelEnv { tree: go(g) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_global;

    fn u(a: &str, s: &str, r: &str) -> UseLabel {
        let s = if s == "*" {
            Participant::Star
        } else {
            Participant::named(s)
        };
        UseLabel::new(a, s, r)
    }

    #[test]
    fn edges() {
        let c = ChannelEnv::path(&[u("a", "s1", "r"), u("b", "s2", "r")]);
        assert!(c.dep_edge(1, 2, DepKind::II));
        assert!(!c.dep_edge(2, 1, DepKind::II));
        let c = ChannelEnv::path(&[u("a", "s", "r"), u("b", "r", "t")]);
        assert!(c.dep_edge(1, 2, DepKind::IO));
        let c = ChannelEnv::path(&[u("a", "*", "r"), u("a", "s", "r")]);
        assert!(c.dep_edge(1, 2, DepKind::OO));
    }

    #[test]
    fn input_dep_reflexive() {
        let c = ChannelEnv::path(&[u("a", "s", "r")]);
        assert!(c.has_input_dep(1, 1));
        assert!(!c.has_output_dep(1, 1));
    }

    #[test]
    fn unrelated_same_channel_no_output_dep() {
        let c = ChannelEnv::path(&[u("a", "s1", "r1"), u("a", "s2", "r2")]);
        assert!(!c.has_output_dep(1, 2));
        assert!(!c.is_linear());
    }

    #[test]
    fn single_node_linear() {
        assert!(ChannelEnv::empty().is_linear());
        assert!(ChannelEnv::use_node("a", Participant::named("s"), "r").is_linear());
    }

    #[test]
    fn append_identity_and_leaves() {
        let c = ChannelEnv::path(&[u("a", "s", "r")]);
        assert_eq!(append_env(&ChannelEnv::empty(), &c), c);
        assert_eq!(append_linear(&ChannelEnv::empty(), &c), Some(c.clone()));
        let two = ChannelEnv::fork(ChannelEnv::empty(), ChannelEnv::empty());
        let r = append_env(&two, &two);
        assert_eq!(r.leaf_count(), 4);
        let r = append_env(&two, &c);
        assert_eq!(
            r.nodes()
                .iter()
                .filter(|n| matches!(n.label, NodeLabel::Use(_)))
                .count(),
            2
        );
    }

    #[test]
    fn append_linear_rejects_unrelated_reuse() {
        let c = ChannelEnv::path(&[u("a", "s1", "r1")]);
        assert!(append_linear(&c, &ChannelEnv::path(&[u("a", "s", "r")])).is_none());
    }

    #[test]
    fn chan_g_shapes() {
        assert!(chan_g(&GlobalType::End).is_empty());
        let g = parse_global("B1->S1:t1<order>. S1->B1:p1<price>").unwrap();
        assert_eq!(
            chan_g(&g),
            ChannelEnv::path(&[u("t1", "B1", "S1"), u("p1", "S1", "B1")])
        );
    }

    #[test]
    fn rec_subtree_and_unfold() {
        let c = append_env(
            &ChannelEnv::rec_mark("X"),
            &ChannelEnv::use_node("a", Participant::named("s"), "r"),
        );
        let sub = c.subtree_at_rec("X").unwrap();
        assert_eq!(sub, c);
        let un = c.unfold_env_at("X").unwrap();
        assert_eq!(un.nodes().len(), 4);
        assert!(un.is_linear());
        assert!(matches!(
            c.unfold_env_at("Y"),
            Err(LinearityError::MissingRecMark(_))
        ));
    }

    #[test]
    fn nested_marks_pick_inner() {
        let c = append_env(
            &append_env(
                &ChannelEnv::rec_mark("X1"),
                &ChannelEnv::use_node("a", Participant::named("s"), "r"),
            ),
            &ChannelEnv::rec_mark("X2"),
        );
        let c = append_env(&c, &ChannelEnv::use_node("b", Participant::named("r"), "s"));
        let x1 = c.subtree_at_rec("X1").unwrap();
        let x2 = c.subtree_at_rec("X2").unwrap();
        assert_ne!(x1, x2);
        assert!(matches!(x2.nodes()[1].label, NodeLabel::RecMark(ref x) if x == "X2"));
        assert_eq!(x2.nodes().len(), 3);
    }

    #[test]
    fn informed_choice_linear() {
        let g = parse_global("s->r:a. (r->t:b (+) r->t:c)").unwrap();
        assert!(chan_g(&g).is_linear());
    }
}
