//! Random well-formed projectable global types and random programs.

use crate::ast::{Behaviour, Branch, GlobalType, System};
use crate::projection::{project_system, projectable};
use crate::wellformed::is_wf;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_parts: usize,
    pub max_depth: usize,
    /// Allow recursion at the top of generated types.
    pub recursion: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_parts: 5,
            max_depth: 4,
            recursion: true,
        }
    }
}

const SORTS: [&str; 3] = ["", "int", "str"];

struct Gen {
    rng: ChaCha8Rng,
    chan: usize,
}

impl Gen {
    fn fresh(&mut self) -> String {
        self.chan += 1;
        format!("c{}", self.chan)
    }

    fn sort(&mut self) -> String {
        SORTS.choose(&mut self.rng).expect("sorts").to_string()
    }

    fn pick<'a>(&mut self, xs: &'a [String]) -> &'a String {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn other(&mut self, parts: &[String], not: &str) -> String {
        let rest: Vec<String> = parts.iter().filter(|p| *p != not).cloned().collect();
        self.pick(&rest).clone()
    }

    /// A type whose first interactions each involve a member of `must`
    /// (any participant when empty).
    fn global(&mut self, parts: &[String], must: &[String], depth: usize) -> GlobalType {
        if depth == 0 || parts.len() < 2 {
            return GlobalType::End;
        }
        let k = self.rng.gen_range(0..10);
        match k {
            0 => GlobalType::End,
            1 | 2 => self.choice(parts, must, depth),
            3 if must.len() == 2 && parts.len() >= 4 => self.fork(parts, must, depth),
            _ => self.prefix(parts, must, depth),
        }
    }

    fn endpoint(&mut self, parts: &[String], must: &[String]) -> (String, String) {
        let anchor = if must.is_empty() {
            self.pick(parts).clone()
        } else {
            self.pick(must).clone()
        };
        let other = self.other(parts, &anchor);
        if self.rng.gen_bool(0.5) {
            (anchor, other)
        } else {
            (other, anchor)
        }
    }

    fn prefix(&mut self, parts: &[String], must: &[String], depth: usize) -> GlobalType {
        let (s, r) = self.endpoint(parts, must);
        let (a, e) = (self.fresh(), self.sort());
        let cont = self.global(parts, &[s.clone(), r.clone()], depth.saturating_sub(1));
        GlobalType::msg(&s, &r, &a, &e, cont)
    }

    fn choice(&mut self, parts: &[String], must: &[String], depth: usize) -> GlobalType {
        let (s, r) = self.endpoint(parts, must);
        let n = self.rng.gen_range(2..=3);
        let mut bs = Vec::new();
        for _ in 0..n {
            let (a, e) = (self.fresh(), self.sort());
            let cont = self.global(parts, &[s.clone(), r.clone()], depth.saturating_sub(1));
            bs.push(GlobalType::msg(&s, &r, &a, &e, cont));
        }
        let last = bs.pop().expect("branches");
        bs.into_iter()
            .rev()
            .fold(last, |acc, g| GlobalType::choice(g, acc))
    }

    /// Two independent continuations, one led by each member of `must`.
    fn fork(&mut self, parts: &[String], must: &[String], depth: usize) -> GlobalType {
        let mut rest: Vec<String> = parts
            .iter()
            .filter(|p| !must.contains(p))
            .cloned()
            .collect();
        rest.shuffle(&mut self.rng);
        let cut = self.rng.gen_range(1..rest.len());
        let mut left = vec![must[0].clone()];
        left.extend(rest[..cut].iter().cloned());
        let mut right = vec![must[1].clone()];
        right.extend(rest[cut..].iter().cloned());
        let l = self.prefix(&left, &left[..1], depth.saturating_sub(1));
        let r = self.prefix(&right, &right[..1], depth.saturating_sub(1));
        GlobalType::par(l, r)
    }

    /// Independent pairs followed by a phase that joins them.
    fn sequence(&mut self, parts: &[String], depth: usize) -> GlobalType {
        let mut ps = parts.to_vec();
        ps.shuffle(&mut self.rng);
        let (l, r) = ps.split_at(2);
        let g1 = self.prefix(l, &[], depth.min(2));
        let g1b = self.prefix(&r[..2], &[], depth.min(2));
        let joiner = [
            l[self.rng.gen_range(0..2)].clone(),
            r[self.rng.gen_range(0..2)].clone(),
        ];
        let (a, e) = (self.fresh(), self.sort());
        let (s, rcv) = if self.rng.gen_bool(0.5) {
            (&joiner[0], &joiner[1])
        } else {
            (&joiner[1], &joiner[0])
        };
        let cont = self.global(parts, &joiner, depth.saturating_sub(1));
        GlobalType::seq(
            GlobalType::par(g1, g1b),
            GlobalType::msg(s, rcv, &a, &e, cont),
        )
    }

    /// A token-passing loop, optionally with an exit branch.
    fn looping(&mut self, parts: &[String]) -> GlobalType {
        let n = self.rng.gen_range(2..=parts.len().min(3));
        let mut ring: Vec<String> = parts.to_vec();
        ring.shuffle(&mut self.rng);
        ring.truncate(n);
        let len = self.rng.gen_range(n..=n + 1);
        let mut msgs = Vec::new();
        for i in 0..len {
            let s = ring[i % n].clone();
            let r = ring[(i + 1) % n].clone();
            msgs.push((s, r, self.fresh(), self.sort()));
        }
        let chain = |msgs: &[(String, String, String, String)]| {
            msgs.iter()
                .rev()
                .fold(GlobalType::var("X"), |g, (s, r, a, e)| {
                    GlobalType::msg(s, r, a, e, g)
                })
        };
        let body = if self.rng.gen_bool(0.5) {
            let (s0, r0, _, _) = msgs[0].clone();
            let exit = GlobalType::msg(&s0, &r0, &self.fresh(), "", GlobalType::End);
            GlobalType::choice(chain(&msgs), exit)
        } else {
            chain(&msgs)
        };
        GlobalType::rec("X", body)
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// A random global type that is well-formed and projectable.
pub fn random_global(seed: u64, cfg: &GenConfig) -> GlobalType {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        chan: 0,
    };
    loop {
        g.chan = 0;
        let n = g.rng.gen_range(2..=cfg.max_parts.max(2));
        let parts = names(n);
        let t = match g.rng.gen_range(0..10) {
            0 | 1 if cfg.recursion => g.looping(&parts),
            2 | 3 if n >= 4 => g.sequence(&parts, cfg.max_depth),
            _ => g.global(&parts, &[], cfg.max_depth),
        };
        if t != GlobalType::End && is_wf(&t) && projectable(&t) {
            return t;
        }
    }
}

/// `count` distinct random global types.
pub fn random_globals(seed: u64, count: usize, cfg: &GenConfig) -> Vec<GlobalType> {
    let mut out: Vec<GlobalType> = Vec::new();
    let mut i = 0;
    while out.len() < count {
        let g = random_global(seed.wrapping_mul(1_000_003).wrapping_add(i), cfg);
        i += 1;
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

fn random_behaviour(rng: &mut ChaCha8Rng, chans: &[String], depth: usize) -> Behaviour {
    if depth == 0 || rng.gen_bool(0.2) {
        return Behaviour::zero();
    }
    let n = if rng.gen_bool(0.7) { 1 } else { 2 };
    let mut cs: Vec<&String> = chans.iter().collect();
    cs.shuffle(rng);
    let bs: Vec<Branch> = cs
        .into_iter()
        .take(n)
        .map(|c| Branch::new(c, "", random_behaviour(rng, chans, depth.saturating_sub(1))))
        .collect();
    if rng.gen_bool(0.5) {
        Behaviour::InternalChoice(bs)
    } else {
        Behaviour::ExternalChoice(bs)
    }
}

/// A random program over at most `max_parts` participants and `max_chans`
/// channels. Half of the draws are projections of random global types,
/// some with an extra never-used external branch; the rest are random
/// local behaviours.
pub fn random_program(seed: u64, max_parts: usize, max_chans: usize) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if rng.gen_bool(0.5) {
        let cfg = GenConfig {
            max_parts: max_parts.min(5),
            max_depth: 3,
            recursion: true,
        };
        let g = random_global(rng.gen(), &cfg);
        if g.chans().len() <= max_chans {
            if let Some(mut s) = project_system(&g, false) {
                if rng.gen_bool(0.3) {
                    add_idle_branch(&mut rng, &mut s);
                }
                return s;
            }
        }
    }
    let n = rng.gen_range(2..=max_parts.max(2));
    let k = rng.gen_range(1..=max_chans.max(1));
    let chans: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();
    let mut s = System::new();
    for p in names(n) {
        let b = random_behaviour(&mut rng, &chans, 3);
        s.participants.insert(p, b);
    }
    s
}

/// Add a branch on a fresh, never-sent channel to some top-level input.
fn add_idle_branch(rng: &mut ChaCha8Rng, s: &mut System) {
    let inputs: Vec<String> = s
        .participants
        .iter()
        .filter(|(_, p)| p.is_external())
        .map(|(n, _)| n.clone())
        .collect();
    if let Some(n) = inputs.choose(rng) {
        if let Behaviour::ExternalChoice(bs) = s.participants[n].clone() {
            let mut bs = bs;
            bs.push(Branch::new("idle", "", Behaviour::zero()));
            s.participants
                .insert(n.clone(), Behaviour::ExternalChoice(bs));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::validate_system;

    #[test]
    fn globals_are_wf_and_projectable() {
        let gs = random_globals(7, 40, &GenConfig::default());
        assert_eq!(gs.len(), 40);
        assert!(gs.iter().all(|g| is_wf(g) && projectable(g)));
        assert!(gs.iter().any(|g| g.has_rec()));
        assert!(gs.iter().any(|g| matches!(g, GlobalType::Seq(..))));
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            random_global(3, &GenConfig::default()),
            random_global(3, &GenConfig::default())
        );
        assert_eq!(random_program(3, 5, 6), random_program(3, 5, 6));
    }

    #[test]
    fn programs_are_valid() {
        for i in 0..100 {
            let s = random_program(i, 5, 6);
            assert!(validate_system(&s).is_empty(), "{s:?}");
            assert!(s.participants.len() <= 5);
        }
    }
}
