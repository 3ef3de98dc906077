//! Splitting a system into two sequential parts: the splitting judgement
//! `Ψ; Θ ⊢ S ▷ Ω`, coherence, and the split function.

use crate::ast::{local_eq, norm_local, Behaviour, Branch, Channel, Sort, System};
use crate::parser::print_system;
use crate::semantics::{onestep, ready_behaviour};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A behaviour prefix whose leaves may be the separator `ε`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SplitBehaviour {
    Eps,
    Internal(Vec<SplitBranch>),
    External(Vec<SplitBranch>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SplitBranch {
    pub chan: Channel,
    pub sort: Sort,
    pub cont: SplitBehaviour,
}

impl SplitBehaviour {
    pub fn zero() -> Self {
        SplitBehaviour::Internal(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SplitBehaviour::Internal(b) | SplitBehaviour::External(b) if b.is_empty())
    }

    fn prefixed(internal: bool, chan: &str, sort: &str, cont: SplitBehaviour) -> Self {
        let b = vec![SplitBranch {
            chan: chan.to_string(),
            sort: sort.to_string(),
            cont,
        }];
        if internal {
            SplitBehaviour::Internal(b)
        } else {
            SplitBehaviour::External(b)
        }
    }

    pub fn branches(&self) -> &[SplitBranch] {
        match self {
            SplitBehaviour::Internal(b) | SplitBehaviour::External(b) => b,
            SplitBehaviour::Eps => &[],
        }
    }

    pub fn chans(&self) -> BTreeSet<Channel> {
        let mut out = BTreeSet::new();
        for b in self.branches() {
            out.insert(b.chan.clone());
            out.extend(b.cont.chans());
        }
        out
    }

    /// The behaviour with every `ε` read as 0.
    pub fn to_behaviour(&self) -> Behaviour {
        let conv = |bs: &[SplitBranch]| {
            bs.iter()
                .map(|b| Branch {
                    chan: b.chan.clone(),
                    sort: b.sort.clone(),
                    cont: b.cont.to_behaviour(),
                })
                .collect()
        };
        match self {
            SplitBehaviour::Eps => Behaviour::zero(),
            SplitBehaviour::Internal(bs) => Behaviour::InternalChoice(conv(bs)),
            SplitBehaviour::External(bs) if bs.is_empty() => Behaviour::zero(),
            SplitBehaviour::External(bs) => Behaviour::ExternalChoice(conv(bs)),
        }
    }

    fn sorted(mut bs: Vec<SplitBranch>) -> Vec<SplitBranch> {
        bs.sort();
        bs
    }
}

impl fmt::Display for SplitBehaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (pol, sep, bs) = match self {
            SplitBehaviour::Eps => return write!(f, "eps"),
            _ if self.is_zero() => return write!(f, "end"),
            SplitBehaviour::Internal(bs) => ('!', " (+) ", bs),
            SplitBehaviour::External(bs) => ('?', " + ", bs),
        };
        let parts: Vec<String> = bs
            .iter()
            .map(|b| {
                let sort = if b.sort.is_empty() {
                    String::new()
                } else {
                    format!("<{}>", b.sort)
                };
                let cont = if b.cont.branches().len() > 1 {
                    format!("({})", b.cont)
                } else {
                    b.cont.to_string()
                };
                format!("{}{pol}{sort}. {cont}", b.chan)
            })
            .collect();
        write!(f, "{}", parts.join(sep))
    }
}

/// Ω: split prefixes per participant and consumed contents per queue.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Omega {
    pub parts: BTreeMap<String, SplitBehaviour>,
    pub queues: BTreeMap<Channel, Vec<Sort>>,
}

pub type Ensembles = Vec<BTreeSet<String>>;
pub type Duo = (String, String);

/// A coherent splitting judgement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitEnvs {
    pub psi: Ensembles,
    pub theta: Vec<Duo>,
    pub omega: Omega,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("no splitting derivation; stuck at:\n{0}")]
    NoDerivation(String),
}

fn duo(a: &str, b: &str) -> Duo {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Merge of two Ω entries that differ only up to external choice.
fn merge_split(p: &SplitBehaviour, q: &SplitBehaviour) -> Option<SplitBehaviour> {
    if p == q {
        return Some(p.clone());
    }
    match (p, q) {
        (SplitBehaviour::Internal(a), SplitBehaviour::Internal(b))
        | (SplitBehaviour::External(a), SplitBehaviour::External(b))
            if a.len() == 1 && b.len() == 1 && a[0].chan == b[0].chan && a[0].sort == b[0].sort =>
        {
            let cont = merge_split(&a[0].cont, &b[0].cont)?;
            Some(SplitBehaviour::prefixed(
                matches!(p, SplitBehaviour::Internal(_)),
                &a[0].chan,
                &a[0].sort,
                cont,
            ))
        }
        (SplitBehaviour::External(a), SplitBehaviour::External(b))
            if !a.is_empty()
                && !b.is_empty()
                && a.iter().all(|x| b.iter().all(|y| x.chan != y.chan)) =>
        {
            Some(SplitBehaviour::External(SplitBehaviour::sorted(
                a.iter().chain(b).cloned().collect(),
            )))
        }
        _ => None,
    }
}

/// `compatible(Ω, Ω')` on every participant but `except`.
pub fn compatible(o1: &Omega, o2: &Omega, except: &str) -> bool {
    merge_omega(o1, o2, except).is_some()
}

/// `merge-Ω`, leaving `except` to the caller.
pub fn merge_omega(o1: &Omega, o2: &Omega, except: &str) -> Option<Omega> {
    if o1.queues != o2.queues || o1.parts.keys().ne(o2.parts.keys()) {
        return None;
    }
    let mut out = Omega {
        parts: BTreeMap::new(),
        queues: o1.queues.clone(),
    };
    for (n, p) in &o1.parts {
        if n != except {
            out.parts.insert(n.clone(), merge_split(p, &o2.parts[n])?);
        }
    }
    Some(out)
}

#[derive(Clone, Debug)]
struct St {
    parts: BTreeMap<String, Behaviour>,
    queues: BTreeMap<Channel, Vec<Sort>>,
    ens: BTreeMap<String, usize>,
    /// Remaining duos, or `None` when duos are inferred.
    theta: Option<Vec<Duo>>,
}

fn can_interact(p: &Behaviour, q: &Behaviour) -> bool {
    let (rp, rq) = (ready_behaviour(p), ready_behaviour(q));
    !rp.outputs.is_disjoint(&rq.inputs) || !rq.outputs.is_disjoint(&rp.inputs)
}

fn queue_ready(st: &St, p: &Behaviour) -> bool {
    p.branches()
        .iter()
        .any(|b| p.is_external() && st.queues.get(&b.chan).and_then(|q| q.first()) == Some(&b.sort))
}

struct Deriver {
    deepest: (usize, String),
}

impl Deriver {
    fn stuck(&mut self, st: &St, depth: usize) -> SplitError {
        if depth >= self.deepest.0 {
            let s = System {
                participants: st.parts.clone(),
                queues: st.queues.clone(),
            };
            self.deepest = (depth, print_system(&s));
        }
        SplitError::NoDerivation(self.deepest.1.clone())
    }

    fn derive(&mut self, st: St, depth: usize) -> Result<(Omega, Vec<Duo>), SplitError> {
        // end
        if let Some(n) = st
            .parts
            .iter()
            .find(|(_, p)| p.is_zero())
            .map(|(n, _)| n.clone())
        {
            let mut next = st;
            next.parts.remove(&n);
            next.ens.remove(&n);
            let (mut o, d) = self.derive(next, depth + 1)?;
            o.parts.insert(n, SplitBehaviour::zero());
            return Ok((o, d));
        }
        if st
            .parts
            .values()
            .any(|p| matches!(p, Behaviour::Rec(..) | Behaviour::Var(_)))
        {
            return Err(self.stuck(&st, depth));
        }
        // q
        for (n, p) in &st.parts {
            if !p.is_external() {
                continue;
            }
            for b in p.branches() {
                if st.queues.get(&b.chan).and_then(|q| q.first()) == Some(&b.sort) {
                    let mut next = st.clone();
                    next.queues.get_mut(&b.chan).expect("queue").remove(0);
                    next.parts.insert(n.clone(), norm_local(&b.cont));
                    let (mut o, d) = self.derive(next, depth + 1)?;
                    let rest = o.parts.remove(n).unwrap_or(SplitBehaviour::Eps);
                    o.parts.insert(
                        n.clone(),
                        SplitBehaviour::prefixed(false, &b.chan, &b.sort, rest),
                    );
                    o.queues
                        .entry(b.chan.clone())
                        .or_default()
                        .insert(0, b.sort.clone());
                    return Ok((o, d));
                }
            }
        }
        // sync
        for (n, p) in &st.parts {
            let Behaviour::InternalChoice(bs) = p else {
                continue;
            };
            if bs.len() != 1 || st.queues.get(&bs[0].chan).is_some_and(|q| !q.is_empty()) {
                continue;
            }
            let out = &bs[0];
            let Some(&e) = st.ens.get(n) else { continue };
            for (m, q) in &st.parts {
                if m == n || st.ens.get(m) != Some(&e) || !q.is_external() {
                    continue;
                }
                if let Some(inb) = q
                    .branches()
                    .iter()
                    .find(|b| b.chan == out.chan && b.sort == out.sort)
                {
                    let mut next = st.clone();
                    next.parts.insert(n.clone(), norm_local(&out.cont));
                    next.parts.insert(m.clone(), norm_local(&inb.cont));
                    let (mut o, d) = self.derive(next, depth + 1)?;
                    let rn = o.parts.remove(n).unwrap_or(SplitBehaviour::Eps);
                    let rm = o.parts.remove(m).unwrap_or(SplitBehaviour::Eps);
                    o.parts.insert(
                        n.clone(),
                        SplitBehaviour::prefixed(true, &out.chan, &out.sort, rn),
                    );
                    o.parts.insert(
                        m.clone(),
                        SplitBehaviour::prefixed(false, &inb.chan, &inb.sort, rm),
                    );
                    return Ok((o, d));
                }
            }
        }
        // internal choice
        for (n, p) in &st.parts {
            let Behaviour::InternalChoice(bs) = p else {
                continue;
            };
            if bs.len() < 2 {
                continue;
            }
            let Some(&e) = st.ens.get(n) else { continue };
            let peer = st
                .parts
                .iter()
                .any(|(m, q)| m != n && st.ens.get(m) == Some(&e) && can_interact(p, q));
            if !peer {
                continue;
            }
            let mut acc: Option<(Omega, Vec<Duo>)> = None;
            let mut chooser = Vec::new();
            for b in bs {
                let mut next = st.clone();
                next.parts
                    .insert(n.clone(), Behaviour::InternalChoice(vec![b.clone()]));
                let (mut o, d) = self.derive(next, depth + 1)?;
                match o.parts.remove(n) {
                    Some(SplitBehaviour::Internal(cb)) if cb.len() == 1 => chooser.extend(cb),
                    _ => return Err(self.stuck(&st, depth)),
                }
                acc = Some(match acc {
                    None => (o, d),
                    Some((prev, pd)) => {
                        if pd != d {
                            return Err(self.stuck(&st, depth));
                        }
                        match merge_omega(&prev, &o, n) {
                            Some(m) => (m, pd),
                            None => return Err(self.stuck(&st, depth)),
                        }
                    }
                });
            }
            let (mut o, d) = acc.expect("at least two branches");
            o.parts.insert(
                n.clone(),
                SplitBehaviour::Internal(SplitBehaviour::sorted(chooser)),
            );
            return Ok((o, d));
        }
        // ε
        let eps_pair = match &st.theta {
            Some(duos) => duos
                .iter()
                .find(|(a, b)| {
                    st.parts.contains_key(a)
                        && st.parts.contains_key(b)
                        && matches!((st.ens.get(a), st.ens.get(b)), (Some(x), Some(y)) if x != y)
                })
                .cloned(),
            None => {
                let mut found = None;
                'outer: for (a, p) in &st.parts {
                    for (b, q) in st.parts.range::<String, _>((
                        std::ops::Bound::Excluded(a),
                        std::ops::Bound::Unbounded,
                    )) {
                        let diff =
                            matches!((st.ens.get(a), st.ens.get(b)), (Some(x), Some(y)) if x != y);
                        if diff && can_interact(p, q) {
                            found = Some(duo(a, b));
                            break 'outer;
                        }
                    }
                }
                found
            }
        };
        if let Some((a, b)) = eps_pair {
            let mut next = st.clone();
            for x in [&a, &b] {
                next.parts.remove(x);
                next.ens.remove(x);
            }
            if let Some(duos) = next.theta.as_mut() {
                duos.retain(|d| *d != (a.clone(), b.clone()));
            }
            let (mut o, mut d) = self.derive(next, depth + 1)?;
            o.parts.insert(a.clone(), SplitBehaviour::Eps);
            o.parts.insert(b.clone(), SplitBehaviour::Eps);
            d.insert(0, (a, b));
            return Ok((o, d));
        }
        // rem
        for (n, p) in &st.parts {
            let lonely =
                !queue_ready(&st, p) && st.parts.iter().all(|(m, q)| m == n || !can_interact(p, q));
            if lonely {
                let mut next = st.clone();
                next.parts.remove(n);
                next.ens.remove(n);
                let (mut o, d) = self.derive(next, depth + 1)?;
                o.parts.insert(n.clone(), SplitBehaviour::Eps);
                return Ok((o, d));
            }
        }
        // ax
        if st.parts.is_empty() && st.theta.as_ref().is_none_or(|t| t.is_empty()) {
            let queues = st.queues.keys().map(|a| (a.clone(), Vec::new())).collect();
            return Ok((
                Omega {
                    parts: BTreeMap::new(),
                    queues,
                },
                Vec::new(),
            ));
        }
        Err(self.stuck(&st, depth))
    }
}

fn initial_state(s: &System, psi: &[BTreeSet<String>], theta: Option<Vec<Duo>>) -> St {
    let mut ens = BTreeMap::new();
    for (i, n) in psi.iter().enumerate() {
        for p in n {
            ens.insert(p.clone(), i);
        }
    }
    St {
        parts: s
            .participants
            .iter()
            .map(|(n, p)| (n.clone(), norm_local(p)))
            .collect(),
        queues: s.queues.clone(),
        ens,
        theta,
    }
}

/// Derive `Ψ; Θ ⊢ S ▷ Ω` for the given environments.
pub fn derive_split(
    s: &System,
    psi: &[BTreeSet<String>],
    theta: &[Duo],
) -> Result<Omega, SplitError> {
    let theta: Vec<Duo> = theta.iter().map(|(a, b)| duo(a, b)).collect();
    let mut d = Deriver {
        deepest: (0, String::new()),
    };
    d.derive(initial_state(s, psi, Some(theta)), 0)
        .map(|(o, _)| o)
}

/// Derivation under `Ψ` with the duos read off the derivation.
pub fn derive_split_inferring(
    s: &System,
    psi: &[BTreeSet<String>],
) -> Result<(Omega, Vec<Duo>), SplitError> {
    let mut d = Deriver {
        deepest: (0, String::new()),
    };
    let (o, mut duos) = d.derive(initial_state(s, psi, None), 0)?;
    duos.sort();
    duos.dedup();
    Ok((o, duos))
}

fn restrict_to(s: &System, n: &BTreeSet<String>) -> System {
    System {
        participants: s
            .participants
            .iter()
            .filter(|(p, _)| n.contains(*p))
            .map(|(p, b)| (p.clone(), b.clone()))
            .collect(),
        queues: s.queues.clone(),
    }
}

/// Enabled interactions of `s`: participant pairs sharing a ready channel
/// with opposite polarities, and participants able to consume a queue head.
pub fn interactions(s: &System) -> Vec<BTreeSet<String>> {
    let mut out = Vec::new();
    let names: Vec<&String> = s.participants.keys().collect();
    for (i, a) in names.iter().enumerate() {
        let pa = &s.participants[*a];
        for b in &names[i + 1..] {
            if can_interact(pa, &s.participants[*b]) {
                out.push(BTreeSet::from([(*a).clone(), (*b).clone()]));
            }
        }
        let ra = ready_behaviour(pa);
        let qready = s
            .queues
            .iter()
            .any(|(c, q)| !q.is_empty() && ra.inputs.contains(c));
        if qready {
            out.push(BTreeSet::from([(*a).clone()]));
        }
    }
    out
}

fn total_closure(nodes: &[String], linked: impl Fn(&str, &str) -> bool, reflexive: bool) -> bool {
    if nodes.is_empty() {
        return true;
    }
    if !reflexive && !nodes.iter().all(|n| nodes.iter().any(|m| linked(n, m))) {
        return false;
    }
    let mut seen = BTreeSet::from([nodes[0].clone()]);
    let mut stack = vec![nodes[0].clone()];
    while let Some(n) = stack.pop() {
        for m in nodes {
            if !seen.contains(m) && linked(&n, m) {
                seen.insert(m.clone());
                stack.push(m.clone());
            }
        }
    }
    seen.len() == nodes.len()
}

/// Why a judgement is not coherent, or `None` when it is.
pub fn incoherence(
    s: &System,
    psi: &[BTreeSet<String>],
    theta: &[Duo],
    omega: &Omega,
) -> Option<String> {
    if theta.is_empty() {
        return Some("no duos".to_string());
    }
    for n in psi {
        let sub = restrict_to(s, n);
        if !onestep(&sub) {
            return Some(format!("ensemble {n:?} cannot move"));
        }
        let k = interactions(&sub).len();
        if k != 1 {
            return Some(format!("ensemble {n:?} has {k} enabled interactions"));
        }
        let members: Vec<String> = n.iter().cloned().collect();
        let chans = |p: &str| omega.parts.get(p).map(|w| w.chans()).unwrap_or_default();
        if !total_closure(&members, |a, b| !chans(a).is_disjoint(&chans(b)), false) {
            return Some(format!("ensemble {n:?} is not linked by shared channels"));
        }
    }
    let idx: Vec<String> = (0..psi.len()).map(|i| i.to_string()).collect();
    let theta_linked = |a: &str, b: &str| {
        let (a, b): (usize, usize) = (a.parse().expect("index"), b.parse().expect("index"));
        theta.iter().any(|(x, y)| {
            (psi[a].contains(x) && psi[b].contains(y)) || (psi[a].contains(y) && psi[b].contains(x))
        })
    };
    if !total_closure(&idx, theta_linked, true) {
        return Some("ensembles are not connected by duos".to_string());
    }
    None
}

pub fn coherent(s: &System, psi: &[BTreeSet<String>], theta: &[Duo], omega: &Omega) -> bool {
    incoherence(s, psi, theta, omega).is_none()
}

/// Candidate ensemble families: at least two ensembles, each seeded by
/// exactly one enabled interaction, other participants assigned to an
/// ensemble or left out.
fn candidates(s: &System) -> Vec<Ensembles> {
    let inter = interactions(s);
    let mut out = Vec::new();
    let n = inter.len();
    if !(2..=12).contains(&n) {
        return out;
    }
    for mask in 0u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let seeds: Vec<&BTreeSet<String>> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &inter[i])
            .collect();
        let mut used = BTreeSet::new();
        if !seeds
            .iter()
            .all(|sd| sd.iter().all(|p| used.insert(p.clone())))
        {
            continue;
        }
        let rest: Vec<String> = s
            .participants
            .keys()
            .filter(|p| !used.contains(*p))
            .cloned()
            .collect();
        let k = seeds.len();
        let combos = (k + 1).checked_pow(rest.len() as u32).unwrap_or(usize::MAX);
        if combos > 200_000 {
            continue;
        }
        for mut code in 0..combos {
            let mut ens: Ensembles = seeds.iter().map(|sd| (*sd).clone()).collect();
            for p in &rest {
                let slot = code % (k + 1);
                code /= k + 1;
                if slot < k {
                    ens[slot].insert(p.clone());
                }
            }
            out.push(ens);
        }
    }
    out
}

/// All coherent judgements for `s`.
pub fn find_all_coherent_splits(s: &System) -> Vec<SplitEnvs> {
    let mut found: Vec<SplitEnvs> = Vec::new();
    if s.has_rec_binder() {
        return found;
    }
    let s = s.normalized();
    for psi in candidates(&s) {
        if psi
            .iter()
            .any(|n| interactions(&restrict_to(&s, n)).len() != 1)
        {
            continue;
        }
        let Ok((omega, theta)) = derive_split_inferring(&s, &psi) else {
            continue;
        };
        if !coherent(&s, &psi, &theta, &omega)
            || derive_split(&s, &psi, &theta).as_ref() != Ok(&omega)
        {
            continue;
        }
        let mut psi = psi;
        psi.sort();
        let env = SplitEnvs { psi, theta, omega };
        if !found.contains(&env) {
            found.push(env);
        }
    }
    found
}

/// The first coherent judgement in canonical search order.
pub fn find_coherent_split(s: &System) -> Option<SplitEnvs> {
    find_all_coherent_splits(s).into_iter().next()
}

/// First part of a split behaviour.
pub fn pre_part(p: &Behaviour, w: &SplitBehaviour) -> Behaviour {
    let p = norm_local(p);
    match (&p, w) {
        (_, SplitBehaviour::Eps) => Behaviour::zero(),
        (Behaviour::InternalChoice(ps), SplitBehaviour::Internal(ws))
            if !ps.is_empty() && !ws.is_empty() =>
        {
            let bs = ps
                .iter()
                .filter_map(|b| {
                    let m = ws.iter().find(|x| x.chan == b.chan)?;
                    Some(Branch {
                        chan: b.chan.clone(),
                        sort: b.sort.clone(),
                        cont: pre_part(&b.cont, &m.cont),
                    })
                })
                .collect();
            norm_local(&Behaviour::InternalChoice(bs))
        }
        (Behaviour::ExternalChoice(ps), SplitBehaviour::External(ws))
            if !ps.is_empty() && !ws.is_empty() =>
        {
            let bs = ps
                .iter()
                .map(|b| match ws.iter().find(|x| x.chan == b.chan) {
                    Some(m) => Branch {
                        chan: b.chan.clone(),
                        sort: b.sort.clone(),
                        cont: pre_part(&b.cont, &m.cont),
                    },
                    None => b.clone(),
                })
                .collect();
            norm_local(&Behaviour::ExternalChoice(bs))
        }
        _ => Behaviour::zero(),
    }
}

/// Second part of a split behaviour, `None` when matched branches leave
/// different remainders.
pub fn post_part(p: &Behaviour, w: &SplitBehaviour) -> Option<Behaviour> {
    let p = norm_local(p);
    if *w == SplitBehaviour::Eps {
        return Some(p);
    }
    if p.is_zero() && w.is_zero() {
        return Some(Behaviour::zero());
    }
    let same_kind = matches!(
        (&p, w),
        (Behaviour::InternalChoice(_), SplitBehaviour::Internal(_))
            | (Behaviour::ExternalChoice(_), SplitBehaviour::External(_))
    );
    if !same_kind {
        return None;
    }
    let mut rest: Option<Behaviour> = None;
    for b in p.branches() {
        for m in w.branches().iter().filter(|m| m.chan == b.chan) {
            let r = post_part(&b.cont, &m.cont)?;
            match &rest {
                None => rest = Some(r),
                Some(prev) if local_eq(prev, &r) => {}
                Some(_) => return None,
            }
        }
    }
    rest
}

/// `split(S)`: the two sequential parts of `s` under its coherent judgement.
pub fn split_system(s: &System) -> Option<(System, System, SplitEnvs)> {
    let env = find_coherent_split(s)?;
    let (s1, s2) = split_with(s, &env.omega)?;
    Some((s1, s2, env))
}

/// Both parts of `s` for a given Ω.
pub fn split_with(s: &System, omega: &Omega) -> Option<(System, System)> {
    let mut s1 = System::new();
    let mut s2 = System::new();
    for (n, p) in &s.participants {
        let w = omega.parts.get(n).cloned().unwrap_or(SplitBehaviour::Eps);
        s1.participants.insert(n.clone(), pre_part(p, &w));
        s2.participants.insert(n.clone(), post_part(p, &w)?);
    }
    for (a, q) in &s.queues {
        let taken = omega.queues.get(a).cloned().unwrap_or_default();
        if !q.starts_with(&taken) {
            return None;
        }
        s1.queues.insert(a.clone(), taken.clone());
        s2.queues.insert(a.clone(), q[taken.len()..].to_vec());
    }
    Some((s1, s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_behaviour, parse_system};

    const SBS: &str = "
        B1 = t1!<order>. p1?<price>. r?<price>. (c1!. t1!<addr> (+) c2!. no1!);
        B2 = t2!<order>. p2?<price>. r!<price>. (c2?. t2!<addr> + c1?. no2!);
        S1 = t1?<order>. p1!<price>. (t1?<addr> + no1?);
        S2 = t2?<order>. p2!<price>. (t2?<addr> + no2?);
    ";

    fn b(s: &str) -> Behaviour {
        parse_behaviour(s).unwrap()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn sbs_psi() -> Ensembles {
        vec![set(&["B1", "S1"]), set(&["B2", "S2"])]
    }

    #[test]
    fn sbs_derivation_and_coherence() {
        let s = parse_system(SBS).unwrap();
        let theta = vec![duo("B1", "B2")];
        let o = derive_split(&s, &sbs_psi(), &theta).unwrap();
        assert_eq!(o.parts["S1"].to_string(), "t1?<order>. p1!<price>. eps");
        assert!(coherent(&s, &sbs_psi(), &theta, &o));
        assert!(!coherent(&s, &sbs_psi(), &[], &o));
        let one = vec![set(&["B1", "S1", "B2", "S2"])];
        assert!(!coherent(&s, &one, &theta, &o));
    }

    #[test]
    fn sbs_search_and_split() {
        let s = parse_system(SBS).unwrap();
        let all = find_all_coherent_splits(&s);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].psi, sbs_psi());
        assert_eq!(all[0].theta, vec![duo("B1", "B2")]);
        let (s1, s2, _) = split_system(&s).unwrap();
        assert_eq!(
            s1.participants["B1"],
            norm_local(&b("t1!<order>. p1?<price>"))
        );
        assert_eq!(
            s2.participants["B1"],
            norm_local(&b("r?<price>. (c1!. t1!<addr> (+) c2!. no1!)"))
        );
        for i in ["1", "2"] {
            assert_eq!(
                s1.participants[&format!("S{i}")],
                norm_local(&b(&format!("t{i}?<order>. p{i}!<price>")))
            );
            assert_eq!(
                s2.participants[&format!("S{i}")],
                norm_local(&b(&format!("t{i}?<addr> + no{i}?")))
            );
        }
    }

    #[test]
    fn trivial_cases() {
        let o = derive_split(&System::new(), &[], &[]).unwrap();
        assert_eq!(o, Omega::default());
        assert!(split_system(&System::new()).is_none());
        assert!(find_coherent_split(&parse_system("B = a!; C = a?;").unwrap()).is_none());
        let rec = parse_system("P = rec X . a!. X; Q = rec X . a?. X; R = b!; T = b?;").unwrap();
        assert!(find_coherent_split(&rec).is_none());
    }

    #[test]
    fn incompatible_branches_fail() {
        // after the choice, q continues differently but not by external choice
        let s = parse_system("P = a!. x! (+) b!. y!; Q = a?. x?. c! + b?. y?. d!; R = c? + d?;")
            .unwrap();
        let psi = vec![set(&["P", "Q", "R"])];
        assert!(derive_split(&s, &psi, &[]).is_ok());
        let s = parse_system("P = a!. c! (+) b!. d!; Q = a? + b?; R = c?; T = d?;").unwrap();
        let psi = vec![set(&["P", "Q", "R", "T"])];
        assert!(derive_split(&s, &psi, &[]).is_err());
    }

    #[test]
    fn pre_and_post_parts() {
        assert_eq!(pre_part(&b("a!"), &SplitBehaviour::Eps), Behaviour::zero());
        let p = b("a?. x! + b?. y!");
        let w = SplitBehaviour::prefixed(false, "a", "", SplitBehaviour::Eps);
        assert_eq!(pre_part(&p, &w), norm_local(&b("a? + b?. y!")));
        assert_eq!(post_part(&p, &SplitBehaviour::Eps), Some(norm_local(&p)));
        let q = b("a!. b! (+) c!. d!");
        let w = SplitBehaviour::Internal(vec![
            SplitBranch {
                chan: "a".into(),
                sort: "".into(),
                cont: SplitBehaviour::Eps,
            },
            SplitBranch {
                chan: "c".into(),
                sort: "".into(),
                cont: SplitBehaviour::Eps,
            },
        ]);
        assert_eq!(post_part(&q, &w), None);
    }

    #[test]
    fn queue_rule() {
        let s = parse_system("R = a?<v>. b!; T = b?; queue a = [v]; queue b = [];").unwrap();
        let o = derive_split(&s, &[set(&["R", "T"])], &[]).unwrap();
        assert_eq!(o.queues["a"], vec!["v".to_string()]);
        assert_eq!(o.parts["R"].to_string(), "a?<v>. b!. end");
    }
}
