//! Terms for local behaviours, systems and global types.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Channel = String;
pub type Sort = String;
pub type RecVar = String;

/// A participant name, or the anonymous sender of queued messages.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Participant {
    Named(String),
    Star,
}

impl Participant {
    pub fn named(n: &str) -> Self {
        Participant::Named(n.to_string())
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Participant::Named(n) => Some(n),
            Participant::Star => None,
        }
    }

    pub fn is(&self, n: &str) -> bool {
        self.name() == Some(n)
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Participant::Named(n) => write!(f, "{n}"),
            Participant::Star => write!(f, "*"),
        }
    }
}

/// One guarded branch `a!<e>.P` or `a?<e>.P`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub chan: Channel,
    pub sort: Sort,
    pub cont: Behaviour,
}

impl Branch {
    pub fn new(chan: &str, sort: &str, cont: Behaviour) -> Self {
        Branch {
            chan: chan.to_string(),
            sort: sort.to_string(),
            cont,
        }
    }
}

/// Local behaviour. The inert process is the empty choice.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Behaviour {
    InternalChoice(Vec<Branch>),
    ExternalChoice(Vec<Branch>),
    Rec(RecVar, Box<Behaviour>),
    Var(RecVar),
}

impl Behaviour {
    pub fn zero() -> Self {
        Behaviour::InternalChoice(Vec::new())
    }

    pub fn send(chan: &str, sort: &str, cont: Behaviour) -> Self {
        Behaviour::InternalChoice(vec![Branch::new(chan, sort, cont)])
    }

    pub fn recv(chan: &str, sort: &str, cont: Behaviour) -> Self {
        Behaviour::ExternalChoice(vec![Branch::new(chan, sort, cont)])
    }

    pub fn rec(var: &str, body: Behaviour) -> Self {
        Behaviour::Rec(var.to_string(), Box::new(body))
    }

    pub fn var(var: &str) -> Self {
        Behaviour::Var(var.to_string())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Behaviour::InternalChoice(b) | Behaviour::ExternalChoice(b) if b.is_empty())
    }

    pub fn branches(&self) -> &[Branch] {
        match self {
            Behaviour::InternalChoice(b) | Behaviour::ExternalChoice(b) => b,
            _ => &[],
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Behaviour::InternalChoice(b) if !b.is_empty())
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Behaviour::ExternalChoice(b) if !b.is_empty())
    }

    /// Guard channels of a top-level choice.
    pub fn guards(&self) -> Vec<&str> {
        self.branches().iter().map(|b| b.chan.as_str()).collect()
    }

    /// All channels occurring anywhere in the term.
    pub fn chans(&self) -> BTreeSet<Channel> {
        let mut out = BTreeSet::new();
        self.collect_chans(&mut out);
        out
    }

    fn collect_chans(&self, out: &mut BTreeSet<Channel>) {
        match self {
            Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
                for b in bs {
                    out.insert(b.chan.clone());
                    b.cont.collect_chans(out);
                }
            }
            Behaviour::Rec(_, body) => body.collect_chans(out),
            Behaviour::Var(_) => {}
        }
    }

    /// Substitute `rep` for the free occurrences of `x`.
    pub fn subst(&self, x: &str, rep: &Behaviour) -> Behaviour {
        match self {
            Behaviour::InternalChoice(bs) => Behaviour::InternalChoice(subst_branches(bs, x, rep)),
            Behaviour::ExternalChoice(bs) => Behaviour::ExternalChoice(subst_branches(bs, x, rep)),
            Behaviour::Rec(y, _) if y == x => self.clone(),
            Behaviour::Rec(y, body) => Behaviour::Rec(y.clone(), Box::new(body.subst(x, rep))),
            Behaviour::Var(y) if y == x => rep.clone(),
            Behaviour::Var(_) => self.clone(),
        }
    }

    /// One unfolding `μx.P -> P[μx.P/x]`; other terms are returned unchanged.
    pub fn unfold(&self) -> Behaviour {
        match self {
            Behaviour::Rec(x, body) => body.subst(x, self),
            _ => self.clone(),
        }
    }

    /// Unfold top-level recursion until a choice or a variable is exposed.
    /// Guardedness bounds the loop; an unguarded term stops after one pass per binder.
    pub fn unfold_head(&self) -> Behaviour {
        let mut cur = self.clone();
        let mut guard = 0;
        while let Behaviour::Rec(..) = cur {
            cur = cur.unfold();
            guard += 1;
            if guard > 64 {
                break;
            }
        }
        cur
    }

    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<RecVar>, out: &mut BTreeSet<RecVar>) {
        match self {
            Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
                for b in bs {
                    b.cont.collect_free(bound, out);
                }
            }
            Behaviour::Rec(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Behaviour::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
        }
    }

    pub fn has_rec(&self) -> bool {
        match self {
            Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
                bs.iter().any(|b| b.cont.has_rec())
            }
            Behaviour::Rec(..) => true,
            Behaviour::Var(_) => false,
        }
    }

    /// Number of prefixes in the term.
    pub fn size(&self) -> usize {
        match self {
            Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
                bs.iter().map(|b| 1 + b.cont.size()).sum()
            }
            Behaviour::Rec(_, body) => body.size(),
            Behaviour::Var(_) => 0,
        }
    }
}

fn subst_branches(bs: &[Branch], x: &str, rep: &Behaviour) -> Vec<Branch> {
    bs.iter()
        .map(|b| Branch {
            chan: b.chan.clone(),
            sort: b.sort.clone(),
            cont: b.cont.subst(x, rep),
        })
        .collect()
}

/// Participants with their behaviours, plus FIFO queues (empty map for programs).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct System {
    pub participants: BTreeMap<String, Behaviour>,
    pub queues: BTreeMap<Channel, Vec<Sort>>,
}

impl System {
    pub fn new() -> Self {
        System::default()
    }

    pub fn with(mut self, name: &str, p: Behaviour) -> Self {
        self.participants.insert(name.to_string(), p);
        self
    }

    pub fn with_queue(mut self, chan: &str, contents: &[&str]) -> Self {
        self.queues.insert(
            chan.to_string(),
            contents.iter().map(|s| s.to_string()).collect(),
        );
        self
    }

    pub fn is_program(&self) -> bool {
        self.queues.is_empty()
    }

    pub fn chans(&self) -> BTreeSet<Channel> {
        let mut out: BTreeSet<Channel> = self.queues.keys().cloned().collect();
        for p in self.participants.values() {
            out.extend(p.chans());
        }
        out
    }

    pub fn parts(&self) -> BTreeSet<String> {
        self.participants.keys().cloned().collect()
    }

    /// Add an empty queue for every channel lacking one.
    pub fn lift(&self) -> System {
        let mut s = self.clone();
        for a in self.chans() {
            s.queues.entry(a).or_default();
        }
        s
    }

    /// Canonical form: behaviours normalised, participants at 0 and empty queues kept.
    pub fn normalized(&self) -> System {
        System {
            participants: self
                .participants
                .iter()
                .map(|(n, p)| (n.clone(), norm_local(p)))
                .collect(),
            queues: self.queues.clone(),
        }
    }

    pub fn has_rec_binder(&self) -> bool {
        self.participants.values().any(|p| p.has_rec())
    }
}

/// Global types.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GlobalType {
    Msg {
        sender: Participant,
        receiver: String,
        channel: Channel,
        sort: Sort,
        cont: Box<GlobalType>,
    },
    Seq(Box<GlobalType>, Box<GlobalType>),
    Choice(Box<GlobalType>, Box<GlobalType>),
    Par(Box<GlobalType>, Box<GlobalType>),
    Rec(RecVar, Box<GlobalType>),
    GVar(RecVar),
    End,
}

impl GlobalType {
    pub fn msg(s: &str, r: &str, a: &str, e: &str, cont: GlobalType) -> Self {
        let sender = if s == "*" {
            Participant::Star
        } else {
            Participant::named(s)
        };
        GlobalType::Msg {
            sender,
            receiver: r.to_string(),
            channel: a.to_string(),
            sort: e.to_string(),
            cont: Box::new(cont),
        }
    }

    pub fn seq(a: GlobalType, b: GlobalType) -> Self {
        GlobalType::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: GlobalType, b: GlobalType) -> Self {
        GlobalType::Choice(Box::new(a), Box::new(b))
    }

    pub fn par(a: GlobalType, b: GlobalType) -> Self {
        GlobalType::Par(Box::new(a), Box::new(b))
    }

    pub fn rec(x: &str, body: GlobalType) -> Self {
        GlobalType::Rec(x.to_string(), Box::new(body))
    }

    pub fn var(x: &str) -> Self {
        GlobalType::GVar(x.to_string())
    }

    /// Named participants occurring in the type.
    pub fn parts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_msgs(&mut |s, r, _, _| {
            if let Participant::Named(n) = s {
                out.insert(n.clone());
            }
            out.insert(r.to_string());
        });
        out
    }

    pub fn chans(&self) -> BTreeSet<Channel> {
        let mut out = BTreeSet::new();
        self.visit_msgs(&mut |_, _, a, _| {
            out.insert(a.to_string());
        });
        out
    }

    /// Calls `f(sender, receiver, channel, sort)` on every prefix.
    pub fn visit_msgs<F: FnMut(&Participant, &str, &str, &str)>(&self, f: &mut F) {
        match self {
            GlobalType::Msg {
                sender,
                receiver,
                channel,
                sort,
                cont,
            } => {
                f(sender, receiver, channel, sort);
                cont.visit_msgs(f);
            }
            GlobalType::Seq(a, b) | GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
                a.visit_msgs(f);
                b.visit_msgs(f);
            }
            GlobalType::Rec(_, body) => body.visit_msgs(f),
            GlobalType::GVar(_) | GlobalType::End => {}
        }
    }

    pub fn has_rec(&self) -> bool {
        match self {
            GlobalType::Msg { cont, .. } => cont.has_rec(),
            GlobalType::Seq(a, b) | GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
                a.has_rec() || b.has_rec()
            }
            GlobalType::Rec(..) | GlobalType::GVar(_) => true,
            GlobalType::End => false,
        }
    }

    pub fn has_star(&self) -> bool {
        let mut found = false;
        self.visit_msgs(&mut |s, _, _, _| found |= *s == Participant::Star);
        found
    }

    pub fn subst(&self, x: &str, rep: &GlobalType) -> GlobalType {
        match self {
            GlobalType::Msg {
                sender,
                receiver,
                channel,
                sort,
                cont,
            } => GlobalType::Msg {
                sender: sender.clone(),
                receiver: receiver.clone(),
                channel: channel.clone(),
                sort: sort.clone(),
                cont: Box::new(cont.subst(x, rep)),
            },
            GlobalType::Seq(a, b) => GlobalType::seq(a.subst(x, rep), b.subst(x, rep)),
            GlobalType::Choice(a, b) => GlobalType::choice(a.subst(x, rep), b.subst(x, rep)),
            GlobalType::Par(a, b) => GlobalType::par(a.subst(x, rep), b.subst(x, rep)),
            GlobalType::Rec(y, _) if y == x => self.clone(),
            GlobalType::Rec(y, body) => GlobalType::Rec(y.clone(), Box::new(body.subst(x, rep))),
            GlobalType::GVar(y) if y == x => rep.clone(),
            GlobalType::GVar(_) | GlobalType::End => self.clone(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        fn go(g: &GlobalType, bound: &mut Vec<RecVar>, out: &mut BTreeSet<RecVar>) {
            match g {
                GlobalType::Msg { cont, .. } => go(cont, bound, out),
                GlobalType::Seq(a, b) | GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                GlobalType::Rec(x, body) => {
                    bound.push(x.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                GlobalType::GVar(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
                GlobalType::End => {}
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Number of prefixes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit_msgs(&mut |_, _, _, _| n += 1);
        n
    }
}

/// Structural violations of a system: duplicate guards, unguarded or unbound
/// recursion variables, rebinding of a bound variable.
pub fn validate_system(s: &System) -> Vec<String> {
    let mut out = Vec::new();
    for (n, p) in &s.participants {
        validate_behaviour(n, p, &mut Vec::new(), &mut out);
        for x in p.free_vars() {
            out.push(format!("unbound recursion variable {x} in {n}"));
        }
    }
    out
}

fn validate_behaviour(n: &str, p: &Behaviour, bound: &mut Vec<RecVar>, out: &mut Vec<String>) {
    match p {
        Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
            let kind = if matches!(p, Behaviour::InternalChoice(_)) {
                "internal"
            } else {
                "external"
            };
            let mut seen = BTreeSet::new();
            for b in bs {
                if !seen.insert(b.chan.as_str()) {
                    out.push(format!(
                        "duplicate guard {} in {kind} choice of {n}",
                        b.chan
                    ));
                }
            }
            for b in bs {
                validate_behaviour(n, &b.cont, bound, out);
            }
        }
        Behaviour::Rec(x, body) => {
            if bound.contains(x) {
                out.push(format!("recursion variable {x} bound twice in {n}"));
            }
            if !guarded(x, body) {
                out.push(format!("unguarded recursion variable {x} in {n}"));
            }
            bound.push(x.clone());
            validate_behaviour(n, body, bound, out);
            bound.pop();
        }
        Behaviour::Var(_) => {}
    }
}

fn guarded(x: &str, p: &Behaviour) -> bool {
    match p {
        Behaviour::InternalChoice(_) | Behaviour::ExternalChoice(_) => true,
        Behaviour::Rec(_, body) => guarded(x, body),
        Behaviour::Var(y) => y != x,
    }
}

/// Canonical local form: branches sorted by channel, 0 represented once.
pub fn norm_local(p: &Behaviour) -> Behaviour {
    match p {
        Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) if bs.is_empty() => {
            Behaviour::zero()
        }
        Behaviour::InternalChoice(bs) => Behaviour::InternalChoice(norm_branches(bs)),
        Behaviour::ExternalChoice(bs) => Behaviour::ExternalChoice(norm_branches(bs)),
        Behaviour::Rec(x, body) => Behaviour::Rec(x.clone(), Box::new(norm_local(body))),
        Behaviour::Var(_) => p.clone(),
    }
}

fn norm_branches(bs: &[Branch]) -> Vec<Branch> {
    let mut out: Vec<Branch> = bs
        .iter()
        .map(|b| Branch {
            chan: b.chan.clone(),
            sort: b.sort.clone(),
            cont: norm_local(&b.cont),
        })
        .collect();
    out.sort();
    out
}

/// Equality of behaviours up to the commutative-monoid laws of choice.
pub fn local_eq(p: &Behaviour, q: &Behaviour) -> bool {
    norm_local(p) == norm_local(q)
}

/// Canonical global form. Recursion is never unfolded.
pub fn norm_global(g: &GlobalType) -> GlobalType {
    match g {
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            sort,
            cont,
        } => GlobalType::Msg {
            sender: sender.clone(),
            receiver: receiver.clone(),
            channel: channel.clone(),
            sort: sort.clone(),
            cont: Box::new(norm_global(cont)),
        },
        GlobalType::Seq(..) => {
            let mut items = Vec::new();
            flatten_seq(g, &mut items);
            build_seq(items)
        }
        GlobalType::Choice(..) => {
            let mut items = Vec::new();
            flatten_op(g, Op::Choice, &mut items);
            build_sorted(items, GlobalType::choice)
        }
        GlobalType::Par(..) => {
            let mut items = Vec::new();
            flatten_op(g, Op::Par, &mut items);
            build_sorted(items, GlobalType::par)
        }
        GlobalType::Rec(x, body) => GlobalType::Rec(x.clone(), Box::new(norm_global(body))),
        GlobalType::GVar(_) | GlobalType::End => g.clone(),
    }
}

/// Normalised operands of a sequence, in order, without End.
fn flatten_seq(g: &GlobalType, out: &mut Vec<GlobalType>) {
    match g {
        GlobalType::Seq(a, b) => {
            flatten_seq(a, out);
            flatten_seq(b, out);
        }
        _ => match norm_global(g) {
            GlobalType::End => {}
            GlobalType::Seq(a, b) => {
                out.push(*a);
                flatten_seq(&b, out);
            }
            n => out.push(n),
        },
    }
}

/// Right-associated sequence with prefixes pushed inside: `(i.G);G' = i.(G;G')`.
fn build_seq(mut items: Vec<GlobalType>) -> GlobalType {
    if items.is_empty() {
        return GlobalType::End;
    }
    let first = items.remove(0);
    if items.is_empty() {
        return first;
    }
    match first {
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            sort,
            cont,
        } => {
            let mut rest = Vec::new();
            flatten_seq(&cont, &mut rest);
            rest.extend(items);
            GlobalType::Msg {
                sender,
                receiver,
                channel,
                sort,
                cont: Box::new(build_seq(rest)),
            }
        }
        other => GlobalType::seq(other, build_seq(items)),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Op {
    Choice,
    Par,
}

fn operands(g: &GlobalType, op: Op) -> Option<(&GlobalType, &GlobalType)> {
    match (g, op) {
        (GlobalType::Choice(a, b), Op::Choice) | (GlobalType::Par(a, b), Op::Par) => Some((a, b)),
        _ => None,
    }
}

/// Normalised operands of a choice or parallel composition, without End.
fn flatten_op(g: &GlobalType, op: Op, out: &mut Vec<GlobalType>) {
    if let Some((a, b)) = operands(g, op) {
        flatten_op(a, op, out);
        flatten_op(b, op, out);
        return;
    }
    let n = norm_global(g);
    if let Some((a, b)) = operands(&n, op) {
        flatten_op(a, op, out);
        flatten_op(b, op, out);
    } else if n != GlobalType::End {
        out.push(n);
    }
}

fn build_sorted(
    mut items: Vec<GlobalType>,
    mk: fn(GlobalType, GlobalType) -> GlobalType,
) -> GlobalType {
    items.sort_by_cached_key(|g| crate::parser::print_global(&alpha_canon(g)));
    let mut it = items.into_iter().rev();
    let Some(mut acc) = it.next() else {
        return GlobalType::End;
    };
    for g in it {
        acc = mk(g, acc);
    }
    acc
}

/// Rename bound variables to depth-indexed names so that α-equivalent terms coincide.
pub fn alpha_canon(g: &GlobalType) -> GlobalType {
    fn go(g: &GlobalType, env: &mut Vec<(RecVar, RecVar)>) -> GlobalType {
        match g {
            GlobalType::Msg {
                sender,
                receiver,
                channel,
                sort,
                cont,
            } => GlobalType::Msg {
                sender: sender.clone(),
                receiver: receiver.clone(),
                channel: channel.clone(),
                sort: sort.clone(),
                cont: Box::new(go(cont, env)),
            },
            GlobalType::Seq(a, b) => GlobalType::seq(go(a, env), go(b, env)),
            GlobalType::Choice(a, b) => GlobalType::choice(go(a, env), go(b, env)),
            GlobalType::Par(a, b) => GlobalType::par(go(a, env), go(b, env)),
            GlobalType::Rec(x, body) => {
                let fresh = format!("X{}", env.len());
                env.push((x.clone(), fresh.clone()));
                let body = go(body, env);
                env.pop();
                GlobalType::Rec(fresh, Box::new(body))
            }
            GlobalType::GVar(x) => match env.iter().rev().find(|(o, _)| o == x) {
                Some((_, n)) => GlobalType::GVar(n.clone()),
                None => g.clone(),
            },
            GlobalType::End => GlobalType::End,
        }
    }
    go(g, &mut Vec::new())
}

fn canon(g: &GlobalType) -> GlobalType {
    // renaming first makes the operand order independent of source names
    alpha_canon(&norm_global(&alpha_canon(g)))
}

/// Structural congruence without recursion unfolding.
pub fn global_eq(g1: &GlobalType, g2: &GlobalType) -> bool {
    canon(g1) == canon(g2)
}

/// Structural congruence that additionally tries one unfolding of the
/// outermost recursions on either side.
pub fn global_eq_unfold(g1: &GlobalType, g2: &GlobalType) -> bool {
    if global_eq(g1, g2) {
        return true;
    }
    let (u1, u2) = (
        unfold_outer(&norm_global(g1)),
        unfold_outer(&norm_global(g2)),
    );
    global_eq(&u1, g2) || global_eq(g1, &u2) || global_eq(&u1, &u2)
}

/// Unfold every recursion that is not nested inside another recursion.
pub fn unfold_outer(g: &GlobalType) -> GlobalType {
    match g {
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            sort,
            cont,
        } => GlobalType::Msg {
            sender: sender.clone(),
            receiver: receiver.clone(),
            channel: channel.clone(),
            sort: sort.clone(),
            cont: Box::new(unfold_outer(cont)),
        },
        GlobalType::Seq(a, b) => GlobalType::seq(unfold_outer(a), unfold_outer(b)),
        GlobalType::Choice(a, b) => GlobalType::choice(unfold_outer(a), unfold_outer(b)),
        GlobalType::Par(a, b) => GlobalType::par(unfold_outer(a), unfold_outer(b)),
        GlobalType::Rec(x, body) => body.subst(x, g),
        GlobalType::GVar(_) | GlobalType::End => g.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b1() -> Behaviour {
        Behaviour::send("b", "", Behaviour::zero())
    }

    #[test]
    fn zero_forms_coincide() {
        assert_eq!(
            norm_local(&Behaviour::ExternalChoice(vec![])),
            Behaviour::zero()
        );
        assert!(local_eq(
            &Behaviour::ExternalChoice(vec![]),
            &Behaviour::InternalChoice(vec![])
        ));
    }

    #[test]
    fn branches_sorted() {
        let p = Behaviour::InternalChoice(vec![
            Branch::new("b", "", Behaviour::zero()),
            Branch::new("a", "", Behaviour::zero()),
        ]);
        let n = norm_local(&p);
        assert_eq!(n.guards(), vec!["a", "b"]);
    }

    #[test]
    fn duplicate_guard_reported() {
        let s = System::new().with(
            "B",
            Behaviour::ExternalChoice(vec![
                Branch::new("a", "int", Behaviour::zero()),
                Branch::new("a", "bool", Behaviour::zero()),
            ]),
        );
        assert_eq!(
            validate_system(&s),
            vec!["duplicate guard a in external choice of B".to_string()]
        );
    }

    #[test]
    fn empty_system_valid() {
        assert!(validate_system(&System::new()).is_empty());
    }

    #[test]
    fn unguarded_and_unbound_reported() {
        let s = System::new()
            .with("P", Behaviour::rec("x", Behaviour::var("x")))
            .with("Q", Behaviour::var("y"));
        let v = validate_system(&s);
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn unfold_substitutes() {
        let p = Behaviour::rec("x", Behaviour::send("a", "", Behaviour::var("x")));
        assert_eq!(p.unfold(), Behaviour::send("a", "", p.clone()));
        assert!(b1().unfold() == b1());
    }

    #[test]
    fn seq_unit_laws() {
        let g = GlobalType::msg("s", "r", "a", "", GlobalType::End);
        assert_eq!(norm_global(&GlobalType::seq(g.clone(), GlobalType::End)), g);
        assert_eq!(norm_global(&GlobalType::seq(GlobalType::End, g.clone())), g);
    }

    #[test]
    fn prefix_pushed_into_seq() {
        let p = GlobalType::par(
            GlobalType::msg("a", "b", "x", "", GlobalType::End),
            GlobalType::msg("c", "d", "y", "", GlobalType::End),
        );
        let tail = GlobalType::msg("b", "d", "z", "", GlobalType::End);
        let lhs = GlobalType::msg("s", "r", "m", "", GlobalType::seq(p.clone(), tail.clone()));
        let rhs = GlobalType::seq(GlobalType::msg("s", "r", "m", "", p), tail);
        assert_eq!(norm_global(&lhs), norm_global(&rhs));
    }

    #[test]
    fn par_commutes() {
        let g1 = GlobalType::msg("a", "b", "x", "", GlobalType::End);
        let g2 = GlobalType::msg("c", "d", "y", "", GlobalType::End);
        assert!(global_eq(
            &GlobalType::par(g1.clone(), g2.clone()),
            &GlobalType::par(g2.clone(), g1.clone())
        ));
        assert!(global_eq(
            &GlobalType::choice(g1.clone(), g2.clone()),
            &GlobalType::choice(g2, g1)
        ));
    }

    #[test]
    fn alpha_equivalence() {
        let g1 = GlobalType::rec(
            "X",
            GlobalType::msg("s", "r", "a", "", GlobalType::var("X")),
        );
        let g2 = GlobalType::rec(
            "Y",
            GlobalType::msg("s", "r", "a", "", GlobalType::var("Y")),
        );
        assert!(global_eq(&g1, &g2));
    }

    #[test]
    fn one_level_unfold_flag() {
        let g = GlobalType::rec(
            "X",
            GlobalType::msg("s", "r", "a", "", GlobalType::var("X")),
        );
        let u = GlobalType::msg("s", "r", "a", "", g.clone());
        assert!(!global_eq(&g, &u));
        assert!(global_eq_unfold(&g, &u));
    }
}
