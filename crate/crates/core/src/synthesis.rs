//! The validation judgement `A; Γ; C ⊢ S ▷ G` as a backtracking search,
//! including the runtime rules for queues and the anonymous sender.

use crate::ast::{
    alpha_canon, norm_global, norm_local, validate_system, Behaviour, Channel, GlobalType,
    Participant, RecVar, System,
};
use crate::linearity::{append_env, append_linear, chan_g, ChannelEnv};
use crate::parser::{print_global, print_system};
use crate::semantics::{onestep, ready, ready_behaviour};
use crate::split::{find_all_coherent_splits, find_coherent_split, split_with};
use crate::wellformed::loop_sequential;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthMode {
    /// Stop at the first derivation.
    First,
    /// Collect every derivation, deduplicated up to `global_eq`.
    All,
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    /// Extra unfoldings of interacting recursive pairs allowed per
    /// participant when queues are non-empty.
    pub unfold_budget: usize,
    /// Reject loops whose receivers may be overtaken (see `loop_sequential`).
    pub loop_check: bool,
    pub mode: SynthMode,
    /// Search nodes visited before giving up.
    pub max_nodes: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            unfold_budget: 2,
            loop_check: true,
            mode: SynthMode::First,
            max_nodes: 2_000_000,
        }
    }
}

/// The environments `A`, `Γ` and `C`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SynthContext {
    pub a_chans: BTreeSet<Channel>,
    pub gamma: BTreeMap<(String, RecVar), RecVar>,
    pub cenv: ChannelEnv,
}

impl SynthContext {
    /// All channels of `s`, empty `Γ`, empty channel environment.
    pub fn for_system(s: &System) -> Self {
        SynthContext {
            a_chans: s.chans(),
            gamma: BTreeMap::new(),
            cenv: ChannelEnv::empty(),
        }
    }

    fn with(&self, a_chans: BTreeSet<Channel>, keep_gamma: bool, cenv: ChannelEnv) -> Self {
        let gamma = if keep_gamma {
            self.gamma.clone()
        } else {
            BTreeMap::new()
        };
        SynthContext {
            a_chans,
            gamma,
            cenv,
        }
    }
}

/// A node of a derivation tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub rule: String,
    pub system: String,
    pub global: String,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    fn node(rule: &str, s: &System, g: &GlobalType, premises: Vec<Derivation>) -> Self {
        Derivation {
            rule: rule.to_string(),
            system: print_system(s),
            global: print_global(g),
            premises,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn rules(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::from([self.rule.clone()]);
        for p in &self.premises {
            out.extend(p.rules());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("not typable; no rule applies to:\n{frontier}")]
    NotTypable { frontier: String },
    #[error("search bound exceeded; deepest configuration:\n{frontier}")]
    BoundExceeded { frontier: String },
}

type Res = Vec<(GlobalType, Derivation)>;
type Budget = BTreeMap<String, usize>;

struct Engine<'o> {
    opts: &'o SynthOptions,
    fresh: usize,
    nodes: usize,
    aborted: bool,
    budget_hit: bool,
    deepest: (usize, String),
    memo: HashMap<(SynthContext, String, Budget), Res>,
}

fn without(s: &System, names: &[&str], queue: Option<&str>) -> System {
    let mut r = s.clone();
    for n in names {
        r.participants.remove(*n);
    }
    if let Some(a) = queue {
        r.queues.remove(a);
    }
    r
}

fn is_rec(p: &Behaviour) -> bool {
    matches!(p, Behaviour::Rec(..))
}

fn interact(p: &Behaviour, q: &Behaviour) -> bool {
    let (rp, rq) = (ready_behaviour(p), ready_behaviour(q));
    !rp.outputs.is_disjoint(&rq.inputs) || !rq.outputs.is_disjoint(&rp.inputs)
}

/// Rule `+`: the other branches of `r` may be discharged when every guard
/// is in `A` and no discharged guard can fire in `s`. Returns whether
/// anything was discharged.
fn discharge(s: &System, r: &Behaviour, taken: &str, a: &BTreeSet<Channel>) -> Option<bool> {
    let guards = r.guards();
    if guards.len() <= 1 {
        return Some(false);
    }
    let out = ready(s).outputs;
    let ok = guards.iter().all(|g| a.contains(*g))
        && guards.iter().all(|g| *g == taken || !out.contains(*g));
    ok.then_some(true)
}

fn eq_key(g: &GlobalType) -> String {
    print_global(&alpha_canon(&norm_global(&alpha_canon(g))))
}

fn fold_choice(gs: Vec<GlobalType>) -> GlobalType {
    let mut it = gs.into_iter().rev();
    let last = it.next().expect("non-empty");
    it.fold(last, |acc, g| GlobalType::choice(g, acc))
}

fn has_par(g: &GlobalType) -> bool {
    match g {
        GlobalType::Par(..) => true,
        GlobalType::Msg { cont, .. } => has_par(cont),
        GlobalType::Rec(_, b) => has_par(b),
        GlobalType::Seq(a, b) | GlobalType::Choice(a, b) => has_par(a) || has_par(b),
        GlobalType::GVar(_) | GlobalType::End => false,
    }
}

impl Engine<'_> {
    fn first(&self) -> bool {
        self.opts.mode == SynthMode::First
    }

    /// Add `rs` to `out`, reporting whether the search can stop.
    fn collect(&self, out: &mut Res, rs: Res) -> bool {
        for r in rs {
            let k = eq_key(&r.0);
            if !out.iter().any(|o| eq_key(&o.0) == k) {
                out.push(r);
            }
        }
        self.first() && !out.is_empty()
    }

    /// Rule eq and rule []: drop inert participants and empty queues, and
    /// unfold recursions that interact with a non-recursive party.
    fn normalise(&self, s: &System) -> (System, Vec<&'static str>) {
        let mut notes = Vec::new();
        let mut r = System::new();
        for (n, p) in &s.participants {
            let p = norm_local(p);
            if p.is_zero() {
                notes.push("eq");
            } else {
                r.participants.insert(n.clone(), p);
            }
        }
        for (a, q) in &s.queues {
            if q.is_empty() {
                notes.push("[]");
            } else {
                r.queues.insert(a.clone(), q.clone());
            }
        }
        let unfold: Vec<String> = r
            .participants
            .iter()
            .filter(|(n, p)| {
                if !is_rec(p) {
                    return false;
                }
                let rp = ready_behaviour(p);
                let queue = r.queues.keys().any(|a| rp.inputs.contains(a));
                queue
                    || r.participants
                        .iter()
                        .any(|(m, q)| m != *n && !is_rec(q) && interact(p, q))
            })
            .map(|(n, _)| n.clone())
            .collect();
        for n in unfold {
            let p = r.participants[&n].unfold_head();
            r.participants.insert(n, norm_local(&p));
            notes.push("eq");
        }
        (r, notes)
    }

    fn fail(&mut self, s: &System, depth: usize) {
        if depth >= self.deepest.0 || self.deepest.1.is_empty() {
            self.deepest = (depth, print_system(s));
        }
    }

    fn synth(&mut self, ctx: &SynthContext, s0: &System, budget: &Budget, depth: usize) -> Res {
        let (s, notes) = self.normalise(s0);
        let key = (ctx.clone(), print_system(&s), budget.clone());
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        self.nodes += 1;
        if self.nodes > self.opts.max_nodes {
            self.aborted = true;
            return Vec::new();
        }
        let mut res = self.rules(ctx, &s, budget, depth);
        if res.is_empty() {
            self.fail(&s, depth);
        }
        if !notes.is_empty() {
            let rule = if notes.iter().all(|n| *n == "[]") {
                "[]"
            } else {
                "eq"
            };
            res = res
                .into_iter()
                .map(|(g, d)| {
                    let d = Derivation::node(rule, s0, &g, vec![d]);
                    (g, d)
                })
                .collect();
        }
        if !self.aborted {
            self.memo.insert(key, res.clone());
        }
        res
    }

    fn rules(&mut self, ctx: &SynthContext, s: &System, budget: &Budget, depth: usize) -> Res {
        let mut out = Res::new();
        // end
        if s.participants.is_empty() && s.queues.is_empty() {
            let g = GlobalType::End;
            out.push((g.clone(), Derivation::node("end", s, &g, vec![])));
            return out;
        }
        if let Some(r) = self.rule_var(ctx, s) {
            out.push(r);
            return out;
        }
        let rs = self.rule_queue(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_prefix(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_choice(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_rec(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_unfold(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_par(ctx, s, budget, depth);
        if self.collect(&mut out, rs) {
            return out;
        }
        let rs = self.rule_seq(ctx, s, budget, depth);
        self.collect(&mut out, rs);
        out
    }

    /// Rule χ.
    fn rule_var(&self, ctx: &SynthContext, s: &System) -> Option<(GlobalType, Derivation)> {
        if !s.queues.is_empty() {
            return None;
        }
        let mut chi: Option<&RecVar> = None;
        for (n, p) in &s.participants {
            let Behaviour::Var(x) = p else { return None };
            let c = ctx.gamma.get(&(n.clone(), x.clone()))?;
            if chi.is_some_and(|prev| prev != c) {
                return None;
            }
            chi = Some(c);
        }
        let chi = chi?;
        let registered: BTreeSet<&String> = ctx
            .gamma
            .iter()
            .filter(|(_, v)| *v == chi)
            .map(|((n, _), _)| n)
            .collect();
        if registered.len() != s.participants.len()
            || registered.iter().any(|n| !s.participants.contains_key(*n))
        {
            return None;
        }
        let unfolded = ctx.cenv.unfold_env_at(chi).ok()?;
        if !unfolded.is_linear() {
            return None;
        }
        let g = GlobalType::GVar(chi.clone());
        Some((g.clone(), Derivation::node("χ", s, &g, vec![])))
    }

    /// Rule ρ: the head of a queue is consumed by its unique receiver.
    fn rule_queue(&mut self, ctx: &SynthContext, s: &System, budget: &Budget, depth: usize) -> Res {
        let mut out = Res::new();
        for (a, q) in &s.queues {
            let e = &q[0];
            let receivers: Vec<&String> = s
                .participants
                .iter()
                .filter(|(_, p)| ready_behaviour(p).inputs.contains(a))
                .map(|(n, _)| n)
                .collect();
            if receivers.len() != 1 || !ctx.a_chans.contains(a) {
                continue;
            }
            let r = receivers[0];
            let rb = &s.participants[r];
            let Some(br) = rb.branches().iter().find(|b| b.chan == *a && b.sort == *e) else {
                continue;
            };
            if onestep(&without(s, &[r], Some(a))) {
                continue;
            }
            let Some(discharged) = discharge(s, rb, a, &ctx.a_chans) else {
                continue;
            };
            let Some(c2) = append_linear(&ctx.cenv, &ChannelEnv::use_node(a, Participant::Star, r))
            else {
                continue;
            };
            let mut next = s.clone();
            next.participants.insert(r.clone(), br.cont.clone());
            next.queues.get_mut(a).expect("queue").remove(0);
            let sub = self.synth(
                &ctx.with(ctx.a_chans.clone(), false, c2),
                &next,
                budget,
                depth + 1,
            );
            let rs = sub
                .into_iter()
                .map(|(g, d)| {
                    let g = GlobalType::Msg {
                        sender: Participant::Star,
                        receiver: r.clone(),
                        channel: a.clone(),
                        sort: e.clone(),
                        cont: Box::new(g),
                    };
                    let d = Derivation::node("ρ", s, &g, vec![d]);
                    let d = if discharged {
                        Derivation::node("+", s, &g, vec![d])
                    } else {
                        d
                    };
                    (g, d)
                })
                .collect();
            if self.collect(&mut out, rs) {
                break;
            }
        }
        out
    }

    /// Rule `;`: the unique enabled pair synchronises.
    fn rule_prefix(
        &mut self,
        ctx: &SynthContext,
        s: &System,
        budget: &Budget,
        depth: usize,
    ) -> Res {
        let mut out = Res::new();
        for (sn, sb) in &s.participants {
            let Behaviour::InternalChoice(bs) = sb else {
                continue;
            };
            if bs.len() != 1
                || !ctx.a_chans.contains(&bs[0].chan)
                || s.queues.contains_key(&bs[0].chan)
            {
                continue;
            }
            let ob = &bs[0];
            for (rn, rb) in &s.participants {
                if rn == sn || !rb.is_external() {
                    continue;
                }
                let Some(ib) = rb
                    .branches()
                    .iter()
                    .find(|b| b.chan == ob.chan && b.sort == ob.sort)
                else {
                    continue;
                };
                if onestep(&without(s, &[sn, rn], None)) {
                    continue;
                }
                let Some(discharged) = discharge(s, rb, &ob.chan, &ctx.a_chans) else {
                    continue;
                };
                let u = ChannelEnv::use_node(&ob.chan, Participant::named(sn), rn);
                let Some(c2) = append_linear(&ctx.cenv, &u) else {
                    continue;
                };
                let mut next = s.clone();
                next.participants.insert(sn.clone(), ob.cont.clone());
                next.participants.insert(rn.clone(), ib.cont.clone());
                let sub = self.synth(
                    &ctx.with(ctx.a_chans.clone(), true, c2),
                    &next,
                    budget,
                    depth + 1,
                );
                let rs = sub
                    .into_iter()
                    .map(|(g, d)| {
                        let g = GlobalType::msg(sn, rn, &ob.chan, &ob.sort, g);
                        let d = Derivation::node(";", s, &g, vec![d]);
                        let d = if discharged {
                            Derivation::node("+", s, &g, vec![d])
                        } else {
                            d
                        };
                        (g, d)
                    })
                    .collect();
                if self.collect(&mut out, rs) {
                    return out;
                }
            }
        }
        out
    }

    /// Rule ⊕: a participant chooses, nothing else can happen.
    fn rule_choice(
        &mut self,
        ctx: &SynthContext,
        s: &System,
        budget: &Budget,
        depth: usize,
    ) -> Res {
        let mut out = Res::new();
        for (n, p) in &s.participants {
            let Behaviour::InternalChoice(bs) = p else {
                continue;
            };
            if bs.len() < 2
                || !bs.iter().all(|b| ctx.a_chans.contains(&b.chan))
                || onestep(&without(s, &[n], None))
            {
                continue;
            }
            let mut per_branch: Vec<Res> = Vec::new();
            for b in bs {
                let mut next = s.clone();
                next.participants
                    .insert(n.clone(), Behaviour::InternalChoice(vec![b.clone()]));
                let r = self.synth(ctx, &next, budget, depth + 1);
                if r.is_empty() {
                    break;
                }
                per_branch.push(r);
            }
            if per_branch.len() != bs.len() {
                continue;
            }
            let mut combos: Vec<Vec<(GlobalType, Derivation)>> = vec![Vec::new()];
            for alts in per_branch {
                let mut next = Vec::new();
                for c in &combos {
                    for a in &alts {
                        let mut c2 = c.clone();
                        c2.push(a.clone());
                        next.push(c2);
                    }
                }
                combos = next;
            }
            let rs = combos
                .into_iter()
                .map(|c| {
                    let (gs, ds): (Vec<_>, Vec<_>) = c.into_iter().unzip();
                    let g = fold_choice(gs);
                    (g.clone(), Derivation::node("⊕", s, &g, ds))
                })
                .collect();
            if self.collect(&mut out, rs) {
                break;
            }
        }
        out
    }

    /// Rule μ: bind a fresh global variable for a guessed set of looping
    /// participants.
    fn rule_rec(&mut self, ctx: &SynthContext, s: &System, budget: &Budget, depth: usize) -> Res {
        let mut out = Res::new();
        let recs: Vec<&String> = s
            .participants
            .iter()
            .filter(|(_, p)| is_rec(p))
            .map(|(n, _)| n)
            .collect();
        if recs.len() < 2 || recs.len() > 12 {
            return out;
        }
        let mut subsets: Vec<Vec<&String>> = (1u32..(1 << recs.len()))
            .map(|m| {
                (0..recs.len())
                    .filter(|i| m & (1 << i) != 0)
                    .map(|i| recs[i])
                    .collect::<Vec<_>>()
            })
            .filter(|r| r.len() >= 2)
            .collect();
        subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        for r in subsets {
            let pair = r.iter().any(|n| {
                r.iter()
                    .any(|m| n != m && interact(&s.participants[*n], &s.participants[*m]))
            });
            if !pair {
                continue;
            }
            self.fresh += 1;
            let chi = format!("X{}", self.fresh);
            let mut ctx2 = ctx.with(
                ctx.a_chans.clone(),
                true,
                append_env(&ctx.cenv, &ChannelEnv::rec_mark(&chi)),
            );
            let mut next = s.clone();
            for n in &r {
                if let Behaviour::Rec(x, body) = &s.participants[*n] {
                    ctx2.gamma.insert(((*n).clone(), x.clone()), chi.clone());
                    next.participants.insert((*n).clone(), (**body).clone());
                }
            }
            let members: BTreeSet<String> = r.iter().map(|n| (*n).clone()).collect();
            let sub = self.synth(&ctx2, &next, budget, depth + 1);
            let rs = sub
                .into_iter()
                .filter(|(g, _)| g.parts().is_subset(&members))
                .map(|(g, d)| {
                    let g = GlobalType::Rec(chi.clone(), Box::new(g));
                    (g.clone(), Derivation::node("μ", s, &g, vec![d]))
                })
                .filter(|(g, _)| {
                    !self.opts.loop_check || (loop_sequential(g).is_ok() && !has_par(g))
                })
                .collect();
            if self.collect(&mut out, rs) {
                break;
            }
        }
        out
    }

    /// Unfolding of an interacting recursive pair while messages are in
    /// flight, bounded per participant.
    fn rule_unfold(
        &mut self,
        ctx: &SynthContext,
        s: &System,
        budget: &Budget,
        depth: usize,
    ) -> Res {
        let mut out = Res::new();
        if s.queues.is_empty() {
            return out;
        }
        let recs: Vec<&String> = s
            .participants
            .iter()
            .filter(|(_, p)| is_rec(p))
            .map(|(n, _)| n)
            .collect();
        for (i, n) in recs.iter().enumerate() {
            for m in &recs[i + 1..] {
                if !interact(&s.participants[*n], &s.participants[*m]) {
                    continue;
                }
                let used = |x: &String| budget.get(x).copied().unwrap_or(0);
                if used(n) >= self.opts.unfold_budget || used(m) >= self.opts.unfold_budget {
                    self.budget_hit = true;
                    continue;
                }
                let mut b2 = budget.clone();
                let mut next = s.clone();
                for x in [*n, *m] {
                    *b2.entry(x.clone()).or_default() += 1;
                    next.participants
                        .insert(x.clone(), norm_local(&s.participants[x].unfold_head()));
                }
                let sub = self.synth(ctx, &next, &b2, depth + 1);
                let rs = sub
                    .into_iter()
                    .map(|(g, d)| (g.clone(), Derivation::node("eq", s, &g, vec![d])))
                    .collect();
                if self.collect(&mut out, rs) {
                    return out;
                }
            }
        }
        out
    }

    /// Rule ∥: independent halves over disjoint channel sets.
    fn rule_par(&mut self, ctx: &SynthContext, s: &System, budget: &Budget, depth: usize) -> Res {
        let mut out = Res::new();
        let names: Vec<&String> = s.participants.keys().collect();
        if names.len() < 2 || names.len() > 16 {
            return out;
        }
        let mut cands: Vec<(usize, BTreeSet<String>, BTreeSet<String>)> = Vec::new();
        for mask in 1u32..(1 << (names.len() - 1)) {
            let right: BTreeSet<String> = (1..names.len())
                .filter(|i| mask & (1 << (i - 1)) != 0)
                .map(|i| names[i].clone())
                .collect();
            let left: BTreeSet<String> = names
                .iter()
                .filter(|n| !right.contains(**n))
                .map(|n| (*n).clone())
                .collect();
            let cross = left.iter().any(|l| {
                right
                    .iter()
                    .any(|r| interact(&s.participants[l], &s.participants[r]))
            });
            if cross {
                continue;
            }
            let chans = |side: &BTreeSet<String>| -> BTreeSet<Channel> {
                side.iter()
                    .flat_map(|n| s.participants[n].chans())
                    .collect()
            };
            let shared = chans(&left).intersection(&chans(&right)).count();
            cands.push((shared, left, right));
        }
        cands.sort();
        for (_, left, right) in cands {
            let chans = |side: &BTreeSet<String>| -> BTreeSet<Channel> {
                side.iter()
                    .flat_map(|n| s.participants[n].chans())
                    .filter(|a| ctx.a_chans.contains(a))
                    .collect()
            };
            let (cl, cr) = (chans(&left), chans(&right));
            let shared: Vec<Channel> = cl.intersection(&cr).cloned().collect();
            if shared.len() > 10 {
                continue;
            }
            for assign in 0u32..(1 << shared.len()) {
                let mut a1: BTreeSet<Channel> = cl.difference(&cr).cloned().collect();
                let mut a2: BTreeSet<Channel> = cr.difference(&cl).cloned().collect();
                for (i, c) in shared.iter().enumerate() {
                    if assign & (1 << i) == 0 {
                        a1.insert(c.clone());
                    } else {
                        a2.insert(c.clone());
                    }
                }
                let mut s1 = System::new();
                let mut s2 = System::new();
                for (n, p) in &s.participants {
                    let side = if left.contains(n) { &mut s1 } else { &mut s2 };
                    side.participants.insert(n.clone(), p.clone());
                }
                let mut orphan = false;
                for (a, q) in &s.queues {
                    if a1.contains(a) {
                        s1.queues.insert(a.clone(), q.clone());
                    } else if a2.contains(a) {
                        s2.queues.insert(a.clone(), q.clone());
                    } else {
                        orphan = true;
                    }
                }
                if orphan {
                    continue;
                }
                let r1 = self.synth(
                    &ctx.with(a1, false, ctx.cenv.clone()),
                    &s1,
                    budget,
                    depth + 1,
                );
                if r1.is_empty() {
                    continue;
                }
                let r2 = self.synth(
                    &ctx.with(a2, false, ctx.cenv.clone()),
                    &s2,
                    budget,
                    depth + 1,
                );
                let mut rs = Res::new();
                for (g1, d1) in &r1 {
                    for (g2, d2) in &r2 {
                        let g = GlobalType::par(g1.clone(), g2.clone());
                        rs.push((
                            g.clone(),
                            Derivation::node("∥", s, &g, vec![d1.clone(), d2.clone()]),
                        ));
                    }
                }
                if self.collect(&mut out, rs) {
                    return out;
                }
            }
        }
        out
    }

    /// Rule ⨟: type both parts of the coherent split.
    fn rule_seq(&mut self, ctx: &SynthContext, s: &System, budget: &Budget, depth: usize) -> Res {
        let mut out = Res::new();
        if s.has_rec_binder() || s.participants.values().any(|p| !p.free_vars().is_empty()) {
            return out;
        }
        let envs = if self.first() {
            find_coherent_split(s).into_iter().collect()
        } else {
            find_all_coherent_splits(s)
        };
        for env in envs {
            let Some((s1, s2)) = split_with(s, &env.omega) else {
                continue;
            };
            if s1.participants.values().all(Behaviour::is_zero) || s2 == *s {
                continue;
            }
            let r1 = self.synth(
                &ctx.with(ctx.a_chans.clone(), false, ctx.cenv.clone()),
                &s1,
                budget,
                depth + 1,
            );
            let mut rs = Res::new();
            for (g1, d1) in &r1 {
                let Some(c2) = append_linear(&ctx.cenv, &chan_g(g1)) else {
                    continue;
                };
                let r2 = self.synth(
                    &ctx.with(ctx.a_chans.clone(), false, c2),
                    &s2,
                    budget,
                    depth + 1,
                );
                for (g2, d2) in r2 {
                    let g = GlobalType::seq(g1.clone(), g2);
                    rs.push((
                        g.clone(),
                        Derivation::node("⨟", s, &g, vec![d1.clone(), d2]),
                    ));
                }
            }
            if self.collect(&mut out, rs) {
                break;
            }
        }
        out
    }
}

/// Run the search, returning all results found (one in `First` mode).
pub fn synth_all(ctx: &SynthContext, s: &System, opts: &SynthOptions) -> Result<Res, SynthError> {
    let errs = validate_system(s);
    if !errs.is_empty() {
        return Err(SynthError::Invalid(errs.join("; ")));
    }
    let mut e = Engine {
        opts,
        fresh: 0,
        nodes: 0,
        aborted: false,
        budget_hit: false,
        deepest: (0, String::new()),
        memo: HashMap::new(),
    };
    let res = e.synth(ctx, s, &Budget::new(), 0);
    if res.is_empty() || (e.aborted && opts.mode == SynthMode::All) {
        let frontier = e.deepest.1.clone();
        return Err(if e.aborted || e.budget_hit {
            SynthError::BoundExceeded { frontier }
        } else {
            SynthError::NotTypable { frontier }
        });
    }
    Ok(res)
}

/// First derivation of `A; Γ; C ⊢ S ▷ G`.
pub fn synth(
    ctx: &SynthContext,
    s: &System,
    opts: &SynthOptions,
) -> Result<(GlobalType, Derivation), SynthError> {
    let opts = SynthOptions {
        mode: SynthMode::First,
        ..opts.clone()
    };
    synth_all(ctx, s, &opts).map(|mut r| r.remove(0))
}

/// Typing of a program: all channels available, empty `Γ` and `C`.
pub fn synth_program(s: &System) -> Result<GlobalType, SynthError> {
    synth_program_with(s, &SynthOptions::default()).map(|r| r.0)
}

pub fn synth_program_with(
    s: &System,
    opts: &SynthOptions,
) -> Result<(GlobalType, Derivation), SynthError> {
    if !s.is_program() {
        return Err(SynthError::Invalid("a program has no queues".to_string()));
    }
    synth(&SynthContext::for_system(s), s, opts)
}

/// Typing of a runtime system with queues.
pub fn synth_runtime(s: &System) -> Result<GlobalType, SynthError> {
    synth_runtime_with(s, &SynthOptions::default()).map(|r| r.0)
}

pub fn synth_runtime_with(
    s: &System,
    opts: &SynthOptions,
) -> Result<(GlobalType, Derivation), SynthError> {
    synth(&SynthContext::for_system(s), s, opts)
}

/// Every derivable global type of a system, deduplicated up to `global_eq`.
pub fn synth_every(s: &System, opts: &SynthOptions) -> Result<Vec<GlobalType>, SynthError> {
    let opts = SynthOptions {
        mode: SynthMode::All,
        ..opts.clone()
    };
    synth_all(&SynthContext::for_system(s), s, &opts).map(|r| r.into_iter().map(|x| x.0).collect())
}

/// Whether `S` consumes the head of `a` before any new send on `a`.
pub fn queue_first(g: &GlobalType, a: &str) -> bool {
    let mut seen_send = false;
    let mut ok = true;
    g.visit_msgs(&mut |s, _, c, _| {
        if c == a {
            if *s == Participant::Star && seen_send {
                ok = false;
            }
            if *s != Participant::Star {
                seen_send = true;
            }
        }
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::global_eq;
    use crate::parser::{parse_global, parse_system};
    use crate::wellformed::is_wf;

    const SBS: &str = "
        B1 = t1!<order>. p1?<price>. r?<price>. (c1!. t1!<addr> (+) c2!. no1!);
        B2 = t2!<order>. p2?<price>. r!<price>. (c2?. t2!<addr> + c1?. no2!);
        S1 = t1?<order>. p1!<price>. (t1?<addr> + no1?);
        S2 = t2?<order>. p2!<price>. (t2?<addr> + no2?);
    ";
    const GBS: &str = "(B1->S1:t1<order>. S1->B1:p1<price> | B2->S2:t2<order>. S2->B2:p2<price>) ;; B2->B1:r<price>. ((B1->B2:c1. (B1->S1:t1<addr> | B2->S2:no2)) (+) (B1->B2:c2. (B2->S2:t2<addr> | B1->S1:no1)))";

    fn sys(t: &str) -> System {
        parse_system(t).unwrap()
    }

    #[test]
    fn golden_buyer_seller() {
        let g = synth_program(&sys(SBS)).unwrap();
        assert!(
            global_eq(&g, &parse_global(GBS).unwrap()),
            "{}",
            print_global(&g)
        );
        assert!(is_wf(&g));
    }

    #[test]
    fn single_pair_and_empty() {
        let g = synth_program(&sys("s = a!<int>; r = a?<int>;")).unwrap();
        assert_eq!(g, GlobalType::msg("s", "r", "a", "int", GlobalType::End));
        assert_eq!(synth_program(&System::new()).unwrap(), GlobalType::End);
    }

    #[test]
    fn recursive_pair() {
        let g = synth_program(&sys("B = rec x . a!<int>. x; C = rec x . a?<int>. x;")).unwrap();
        let expect = parse_global("rec X . B->C:a<int>. X").unwrap();
        assert!(global_eq(&g, &expect), "{}", print_global(&g));
    }

    #[test]
    fn race_and_guarded_choice() {
        let race = sys("r1 = a? + b?; s2 = b!; r2 = b?;");
        assert!(matches!(
            synth_program(&race),
            Err(SynthError::NotTypable { .. })
        ));
        let guarded = sys("s1 = a!; r1 = a? + c?. b?; s2 = b!; r2 = b?;");
        let g = synth_program(&guarded).unwrap();
        let expect = parse_global("s1->r1:a | s2->r2:b").unwrap();
        assert!(global_eq(&g, &expect), "{}", print_global(&g));
    }

    #[test]
    fn independent_pairs_use_par() {
        let (g, d) = synth_program_with(
            &sys("s1 = a!; r1 = a?; s2 = b!; r2 = b?;"),
            &SynthOptions::default(),
        )
        .unwrap();
        assert!(matches!(g, GlobalType::Par(..)));
        assert!(!d.rules().contains("⨟"));
    }

    #[test]
    fn informed_and_uninformed_choice() {
        let informed = sys(
            "s = a!. b?. c! (+) a2!. b?. c2!; r = a?. d? + a2?. d2?; n = b!. (c?. d! + c2?. d2!);",
        );
        assert!(synth_program(&informed).is_ok());
        let uninformed = sys("s = a! (+) b!; r = a?. c? + b?. d?; n = c! (+) d!;");
        assert!(synth_program(&uninformed).is_err());
    }

    #[test]
    fn runtime_star_example() {
        let s = sys("n = end; s = b!. a?<e>; r = b?; queue a = [e];");
        let g = synth_runtime(&s).unwrap();
        let expect = GlobalType::msg(
            "s",
            "r",
            "b",
            "",
            GlobalType::msg("*", "s", "a", "e", GlobalType::End),
        );
        assert_eq!(g, expect);
    }

    #[test]
    fn lifted_program_same_type() {
        let s = sys(SBS);
        assert!(global_eq(
            &synth_runtime(&s.lift()).unwrap(),
            &synth_program(&s).unwrap()
        ));
    }

    #[test]
    fn queue_consumed_first() {
        let s = sys("s = a!<v>; r = a?<v>. a?<v>; queue a = [v];");
        let g = synth_runtime(&s).unwrap();
        assert!(queue_first(&g, "a"));
        assert_eq!(
            g,
            GlobalType::msg(
                "*",
                "r",
                "a",
                "v",
                GlobalType::msg("s", "r", "a", "v", GlobalType::End)
            )
        );
    }

    #[test]
    fn exhaustive_mode_singleton() {
        for t in [SBS, "s1 = a!; r1 = a?; s2 = b!; r2 = b?;", ""] {
            let all = synth_every(&sys(t), &SynthOptions::default()).unwrap();
            assert_eq!(all.len(), 1, "{t}");
        }
    }

    #[test]
    fn derivation_names_rules() {
        let (_, d) = synth_program_with(&sys(SBS), &SynthOptions::default()).unwrap();
        for r in ["⨟", "∥", ";", "⊕", "+", "end"] {
            assert!(d.rules().contains(r), "{r}: {:?}", d.rules());
        }
        assert!(serde_json::to_string(&d).is_ok());
    }
}
