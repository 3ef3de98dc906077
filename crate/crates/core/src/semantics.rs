//! Asynchronous semantics of systems: ready sets, single steps and bounded
//! state-space exploration.

use crate::ast::{norm_local, Behaviour, Channel, Sort, System};
use crate::parser::print_system;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Action {
    Send(Channel, Sort),
    Recv(Channel, Sort),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    Act(Action),
    Tick,
    Push(Channel, Sort),
    Pop(Sort, Channel),
    Boxed(String, Action),
    SyncSend(String, Channel, Sort),
    SyncRecv(String, Channel, Sort),
}

fn sort_suffix(e: &str) -> String {
    if e.is_empty() {
        String::new()
    } else {
        format!("<{e}>")
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Send(a, e) => write!(f, "{a}!{}", sort_suffix(e)),
            Action::Recv(a, e) => write!(f, "{a}?{}", sort_suffix(e)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Act(a) => write!(f, "{a}"),
            Label::Tick => write!(f, "tick"),
            Label::Push(a, e) => write!(f, "{a}.{e}"),
            Label::Pop(e, a) => write!(f, "{e}.{a}"),
            Label::Boxed(n, a) => write!(f, "[{n}]{a}"),
            Label::SyncSend(n, a, e) => write!(f, "{n}:{a}!{}", sort_suffix(e)),
            Label::SyncRecv(n, a, e) => write!(f, "{n}:{a}?{}", sort_suffix(e)),
        }
    }
}

/// Polarised channels that can fire immediately.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReadySet {
    pub inputs: BTreeSet<Channel>,
    pub outputs: BTreeSet<Channel>,
}

impl ReadySet {
    pub fn union(&mut self, other: ReadySet) {
        self.inputs.extend(other.inputs);
        self.outputs.extend(other.outputs);
    }

    /// Channels occurring with either polarity.
    pub fn channels(&self) -> BTreeSet<Channel> {
        self.inputs.union(&self.outputs).cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty() && self.outputs.is_empty()
    }

    pub fn matched(&self) -> BTreeSet<Channel> {
        self.inputs.intersection(&self.outputs).cloned().collect()
    }
}

/// Ready set of a single behaviour (recursion unfolded first).
pub fn ready_behaviour(p: &Behaviour) -> ReadySet {
    let p = p.unfold_head();
    let mut r = ReadySet::default();
    match &p {
        Behaviour::InternalChoice(bs) => r.outputs.extend(bs.iter().map(|b| b.chan.clone())),
        Behaviour::ExternalChoice(bs) => r.inputs.extend(bs.iter().map(|b| b.chan.clone())),
        _ => {}
    }
    r
}

pub fn ready(s: &System) -> ReadySet {
    let mut r = ReadySet::default();
    for p in s.participants.values() {
        r.union(ready_behaviour(p));
    }
    for (a, q) in &s.queues {
        if !q.is_empty() {
            r.outputs.insert(a.clone());
        }
    }
    r
}

/// Some channel is ready with both polarities.
pub fn onestep(s: &System) -> bool {
    let r = ready(s);
    r.inputs.iter().any(|a| r.outputs.contains(a))
}

pub fn restrict(s: &System, n: &str) -> Option<Behaviour> {
    s.participants.get(n).cloned()
}

pub fn restrict_queue(s: &System, a: &str) -> Option<Vec<Sort>> {
    s.queues.get(a).cloned()
}

/// Transitions of a single behaviour.
pub fn local_steps(p: &Behaviour) -> Vec<(Action, Behaviour)> {
    let p = p.unfold_head();
    match &p {
        Behaviour::InternalChoice(bs) => bs
            .iter()
            .map(|b| {
                (
                    Action::Send(b.chan.clone(), b.sort.clone()),
                    norm_local(&b.cont),
                )
            })
            .collect(),
        Behaviour::ExternalChoice(bs) => bs
            .iter()
            .map(|b| {
                (
                    Action::Recv(b.chan.clone(), b.sort.clone()),
                    norm_local(&b.cont),
                )
            })
            .collect(),
        _ => Vec::new(),
    }
}

/// The system has terminated: every participant is 0 and every queue empty.
pub fn is_terminated(s: &System) -> bool {
    s.participants.values().all(|p| p.unfold_head().is_zero())
        && s.queues.values().all(|q| q.is_empty())
}

/// All transitions of a system. Programs are lifted with empty queues first.
pub fn step(s: &System) -> Vec<(Label, System)> {
    let s = s.lift();
    let mut out = Vec::new();
    if is_terminated(&s) {
        out.push((Label::Tick, s));
        return out;
    }
    for (n, p) in &s.participants {
        for (act, cont) in local_steps(p) {
            let mut next = s.clone();
            match &act {
                Action::Send(a, e) => {
                    next.queues.entry(a.clone()).or_default().push(e.clone());
                    next.participants.insert(n.clone(), cont);
                    out.push((Label::SyncSend(n.clone(), a.clone(), e.clone()), next));
                }
                Action::Recv(a, e) => {
                    let q = next.queues.entry(a.clone()).or_default();
                    if q.first() == Some(e) {
                        q.remove(0);
                        next.participants.insert(n.clone(), cont);
                        out.push((Label::SyncRecv(n.clone(), a.clone(), e.clone()), next));
                    }
                }
            }
        }
    }
    out
}

/// Canonical key for the visited set.
pub fn state_key(s: &System) -> String {
    print_system(&s.normalized())
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreLimits {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits {
            max_states: 10_000,
            max_depth: 64,
        }
    }
}

/// Explored state graph. State 0 is the (lifted) initial state.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Exploration {
    pub states: Vec<System>,
    pub depth: Vec<usize>,
    pub edges: Vec<(usize, Label, usize)>,
    pub terminated: Vec<usize>,
    pub stuck: Vec<usize>,
    /// States whose successors were not computed because of the bounds.
    pub frontier: Vec<usize>,
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("exploration bound exceeded after {} states", partial.states.len())]
pub struct BoundExceeded {
    pub partial: Box<Exploration>,
}

impl Exploration {
    pub fn successors(&self, i: usize) -> impl Iterator<Item = &(usize, Label, usize)> {
        self.edges.iter().filter(move |(a, _, _)| *a == i)
    }

    pub fn has_cycle(&self) -> bool {
        let n = self.states.len();
        let mut adj = vec![Vec::new(); n];
        for (a, l, b) in &self.edges {
            if *l != Label::Tick {
                adj[*a].push(*b);
            }
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut mark = vec![0u8; n];
        for start in 0..n {
            if mark[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            mark[start] = 1;
            while let Some((v, i)) = stack.pop() {
                if i < adj[v].len() {
                    stack.push((v, i + 1));
                    let w = adj[v][i];
                    if mark[w] == 1 {
                        return true;
                    }
                    if mark[w] == 0 {
                        mark[w] = 1;
                        stack.push((w, 0));
                    }
                } else {
                    mark[v] = 2;
                }
            }
        }
        false
    }

    /// One line per transition: `src --label--> dst`, states by index.
    pub fn trace(&self) -> String {
        self.edges
            .iter()
            .map(|(a, l, b)| format!("s{a} --{l}--> s{b}\n"))
            .collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph LTS {\n");
        for (i, s) in self.states.iter().enumerate() {
            let label = print_system(s).replace('"', "\\\"").replace('\n', "\\l");
            out.push_str(&format!("  s{i} [shape=box, label=\"{label}\"];\n"));
        }
        for (a, l, b) in &self.edges {
            out.push_str(&format!("  s{a} -> s{b} [label=\"{l}\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first exploration of the reachable states.
pub fn explore(s: &System, limits: ExploreLimits) -> Result<Exploration, BoundExceeded> {
    let init = s.lift().normalized();
    let mut ex = Exploration::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    index.insert(state_key(&init), 0);
    ex.states.push(init);
    ex.depth.push(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if ex.depth[i] >= limits.max_depth {
            ex.frontier.push(i);
            continue;
        }
        let succ = step(&ex.states[i]);
        if succ.is_empty() {
            ex.stuck.push(i);
        }
        for (l, t) in succ {
            if l == Label::Tick {
                ex.terminated.push(i);
                ex.edges.push((i, l, i));
                continue;
            }
            let t = t.normalized();
            let key = state_key(&t);
            let j = match index.get(&key) {
                Some(&j) => j,
                None => {
                    if ex.states.len() >= limits.max_states {
                        ex.frontier.push(i);
                        continue;
                    }
                    let j = ex.states.len();
                    index.insert(key, j);
                    ex.states.push(t);
                    ex.depth.push(ex.depth[i] + 1);
                    queue.push_back(j);
                    j
                }
            };
            ex.edges.push((i, l, j));
        }
    }
    ex.frontier.sort_unstable();
    ex.frontier.dedup();
    if ex.frontier.is_empty() {
        Ok(ex)
    } else {
        Err(BoundExceeded {
            partial: Box::new(ex),
        })
    }
}

/// Explored graph whether or not a bound was hit, with the truncation flag.
pub fn explore_partial(s: &System, limits: ExploreLimits) -> (Exploration, bool) {
    match explore(s, limits) {
        Ok(ex) => (ex, false),
        Err(BoundExceeded { partial }) => (*partial, true),
    }
}
