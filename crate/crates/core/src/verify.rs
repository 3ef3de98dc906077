//! Executable metatheory: property checks over systems and global types.

use crate::ast::{global_eq, norm_local, Behaviour, GlobalType, System};
use crate::linearity::ChannelEnv;
use crate::parser::{print_behaviour, print_global, print_system};
use crate::projection::{project, project_queue, project_system};
use crate::semantics::{
    explore_partial, local_steps, ready_behaviour, Exploration, ExploreLimits, Label,
};
use crate::synthesis::{synth_every, synth_program, synth_runtime, SynthError, SynthOptions};
use crate::wellformed::wf;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub instance: String,
    pub reason: String,
    /// Smallest failing system found by shrinking, when one was computed.
    pub minimized: Option<String>,
    /// Groups of participants linked by shared channels.
    pub connected: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub instances: usize,
    pub failures: Vec<Failure>,
    /// Instances whose exploration hit a bound.
    pub bounded: usize,
    pub millis: u128,
}

impl PropertyReport {
    fn new(property: &str) -> Self {
        PropertyReport {
            property: property.to_string(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn absorb(&mut self, other: PropertyReport) {
        self.instances += other.instances;
        self.failures.extend(other.failures);
        self.bounded += other.bounded;
        self.millis += other.millis;
    }

    fn fail_system(&mut self, s: &System, reason: String) {
        self.failures.push(Failure {
            instance: print_system(s),
            reason,
            minimized: None,
            connected: connected_groups(s),
        });
    }

    fn fail_global(&mut self, g: &GlobalType, reason: String) {
        self.failures.push(Failure {
            instance: print_global(g),
            reason,
            minimized: None,
            connected: Vec::new(),
        });
    }

    fn finish(mut self, start: Instant) -> Self {
        self.instances = self.instances.max(1);
        self.millis = start.elapsed().as_millis();
        self
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        write!(
            f,
            "{}: {verdict} ({} instances, {} bounded, {} ms)",
            self.property, self.instances, self.bounded, self.millis
        )?;
        for x in &self.failures {
            write!(
                f,
                "\n  - {}\n    {}",
                x.reason,
                x.instance.replace('\n', "\n    ")
            )?;
            if let Some(m) = &x.minimized {
                write!(f, "\n    minimized:\n    {}", m.replace('\n', "\n    "))?;
            }
        }
        Ok(())
    }
}

/// Participants grouped by transitive channel sharing.
pub fn connected_groups(s: &System) -> Vec<Vec<String>> {
    let names: Vec<&String> = s.participants.keys().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n in &names {
        if seen.contains(*n) {
            continue;
        }
        let mut group = vec![(*n).clone()];
        seen.insert((*n).clone());
        let mut i = 0;
        while i < group.len() {
            let cs = s.participants[&group[i]].chans();
            for m in &names {
                if !seen.contains(*m) && !s.participants[*m].chans().is_disjoint(&cs) {
                    seen.insert((*m).clone());
                    group.push((*m).clone());
                }
            }
            i += 1;
        }
        group.sort();
        out.push(group);
    }
    out
}

/// Error or race in a single state, if any.
pub fn state_error(s: &System) -> Option<String> {
    let mut ins: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    let mut outs: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    let readies: BTreeMap<&String, _> = s
        .participants
        .iter()
        .map(|(n, p)| (n, ready_behaviour(p)))
        .collect();
    for (n, r) in &readies {
        for a in &r.inputs {
            ins.entry(a).or_default().push(n);
        }
        for a in &r.outputs {
            outs.entry(a).or_default().push(n);
        }
    }
    for (a, ns) in ins.iter().chain(outs.iter()) {
        if ns.len() > 1 {
            return Some(format!(
                "race on {a} between {}",
                ns.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(", ")
            ));
        }
    }
    for (a, q) in &s.queues {
        let (Some(e), Some(rs)) = (q.first(), ins.get(a.as_str())) else {
            continue;
        };
        if rs.len() == 1 {
            let p = s.participants[rs[0]].unfold_head();
            if !p.branches().iter().any(|b| b.chan == *a && b.sort == *e) {
                return Some(format!("{} expects another sort than {e} on {a}", rs[0]));
            }
        }
    }
    None
}

fn explored(s: &System, limits: ExploreLimits, report: &mut PropertyReport) -> Exploration {
    let (ex, truncated) = explore_partial(s, limits);
    if truncated {
        report.bounded += 1;
    }
    ex
}

/// No reachable state has a sort mismatch or a race.
pub fn check_safety(s: &System, limits: ExploreLimits) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("safety");
    let ex = explored(s, limits, &mut r);
    if let Some((i, e)) = ex
        .states
        .iter()
        .enumerate()
        .find_map(|(i, t)| state_error(t).map(|e| (i, e)))
    {
        r.fail_system(
            s,
            format!("state s{i}: {e}\n{}", print_system(&ex.states[i])),
        );
    }
    r.finish(start)
}

/// Every reachable state is terminated or can move.
pub fn check_progress(s: &System, limits: ExploreLimits) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("progress");
    let ex = explored(s, limits, &mut r);
    if let Some(&i) = ex.stuck.first() {
        r.fail_system(
            s,
            format!("stuck state s{i}:\n{}", print_system(&ex.states[i])),
        );
    }
    r.finish(start)
}

/// Queue contents described by `g` match the queues of `s`.
fn queue_shape(g: &GlobalType, s: &System) -> Result<(), String> {
    for (a, q) in &s.queues {
        let p = project_queue(g, a).ok_or_else(|| format!("queue {a} does not project"))?;
        if p != *q {
            return Err(format!(
                "queue {a} holds {q:?} but the type describes {p:?}"
            ));
        }
    }
    Ok(())
}

/// Every reachable state is typable, and its type describes its queues.
pub fn check_subject_reduction(s: &System, limits: ExploreLimits) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("subject-reduction");
    let ex = explored(s, limits, &mut r);
    for (i, t) in ex.states.iter().enumerate() {
        match synth_runtime(t) {
            Ok(g) => {
                if let Err(e) = queue_shape(&g, t) {
                    r.fail_system(s, format!("state s{i}: {e}\n{}", print_system(t)));
                    break;
                }
            }
            Err(SynthError::BoundExceeded { .. }) => r.bounded += 1,
            Err(e) => {
                r.fail_system(
                    s,
                    format!("state s{i} is not typable: {e}\n{}", print_system(t)),
                );
                break;
            }
        }
    }
    r.finish(start)
}

/// `q` simulates `p`: every move of `p` is matched by `q`, and `q` is
/// terminated whenever `p` is.
pub fn simulates(q: &Behaviour, p: &Behaviour) -> bool {
    let key = |b: &Behaviour| print_behaviour(&norm_local(b));
    let mut pairs: HashMap<(String, String), (Behaviour, Behaviour)> = HashMap::new();
    let mut todo = VecDeque::from([(norm_local(p), norm_local(q))]);
    while let Some((x, y)) = todo.pop_front() {
        let k = (key(&x), key(&y));
        if pairs.contains_key(&k) {
            continue;
        }
        for (a, x2) in local_steps(&x) {
            for (b, y2) in local_steps(&y) {
                if a == b {
                    todo.push_back((x2.clone(), y2));
                }
            }
        }
        pairs.insert(k, (x, y));
        if pairs.len() > 100_000 {
            return false;
        }
    }
    let mut rel: HashSet<(String, String)> = pairs.keys().cloned().collect();
    loop {
        let before = rel.len();
        let snapshot = rel.clone();
        rel.retain(|k| {
            let (x, y) = &pairs[k];
            let term = |b: &Behaviour| b.unfold_head().is_zero();
            if term(x) && !term(y) {
                return false;
            }
            let ys = local_steps(y);
            local_steps(x).iter().all(|(a, x2)| {
                ys.iter()
                    .any(|(b, y2)| a == b && snapshot.contains(&(key(x2), key(y2))))
            })
        });
        if rel.len() == before {
            break;
        }
    }
    rel.contains(&(key(&norm_local(p)), key(&norm_local(q))))
}

/// Each projection of the synthesised type is simulated by the participant.
pub fn check_simulation(s: &System) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("simulation");
    let g = match synth_runtime(s) {
        Ok(g) => g,
        Err(e) => {
            r.fail_system(s, format!("not typable: {e}"));
            return r.finish(start);
        }
    };
    for (n, p) in &s.participants {
        match project(&g, n) {
            Some(proj) if simulates(p, &proj) => {}
            Some(proj) => r.fail_system(
                s,
                format!(
                    "{n}: {} does not simulate {}",
                    print_behaviour(p),
                    print_behaviour(&proj)
                ),
            ),
            None => r.fail_system(s, format!("{n}: projection undefined")),
        }
    }
    r.finish(start)
}

/// Strong bisimilarity of two explored graphs on synchronisation labels
/// and termination.
pub fn bisimilar(a: &Exploration, b: &Exploration) -> bool {
    fn adj(e: &Exploration) -> Vec<Vec<(Label, usize)>> {
        let mut v = vec![Vec::new(); e.states.len()];
        for (x, l, y) in &e.edges {
            v[*x].push((l.clone(), *y));
        }
        v
    }
    let (aa, ba) = (adj(a), adj(b));
    let mut pairs = HashSet::new();
    let mut todo = VecDeque::from([(0usize, 0usize)]);
    while let Some((x, y)) = todo.pop_front() {
        if !pairs.insert((x, y)) {
            continue;
        }
        for (l, x2) in &aa[x] {
            for (m, y2) in &ba[y] {
                if l == m {
                    todo.push_back((*x2, *y2));
                }
            }
        }
    }
    let mut rel = pairs;
    loop {
        let before = rel.len();
        let snapshot = rel.clone();
        rel.retain(|(x, y)| {
            let fwd = aa[*x].iter().all(|(l, x2)| {
                ba[*y]
                    .iter()
                    .any(|(m, y2)| l == m && snapshot.contains(&(*x2, *y2)))
            });
            let bwd = ba[*y].iter().all(|(m, y2)| {
                aa[*x]
                    .iter()
                    .any(|(l, x2)| l == m && snapshot.contains(&(*x2, *y2)))
            });
            fwd && bwd
        });
        if rel.len() == before {
            break;
        }
    }
    rel.contains(&(0, 0))
}

/// The system and the projections of its type (with projected queues) are
/// bisimilar on synchronisation labels and termination.
pub fn check_weak_equiv(s: &System, limits: ExploreLimits) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("weak-equivalence");
    let g = match synth_runtime(s) {
        Ok(g) => g,
        Err(e) => {
            r.fail_system(s, format!("not typable: {e}"));
            return r.finish(start);
        }
    };
    let Some(mut t) = project_system(&g, true) else {
        r.fail_system(s, format!("type does not project: {}", print_global(&g)));
        return r.finish(start);
    };
    for n in s.participants.keys() {
        t.participants
            .entry(n.clone())
            .or_insert_with(Behaviour::zero);
    }
    let sx = explored(s, limits, &mut r);
    let tx = explored(&t, limits, &mut r);
    if !bisimilar(&sx, &tx) {
        r.fail_system(
            s,
            format!(
                "not equivalent to the projections of {}\n{}",
                print_global(&g),
                print_system(&t)
            ),
        );
    }
    r.finish(start)
}

/// The projections of `g` synthesise back to `g`.
pub fn check_completeness(g: &GlobalType) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("completeness");
    let Some(s) = project_system(g, false) else {
        r.fail_global(g, "not projectable".to_string());
        return r.finish(start);
    };
    match synth_program(&s) {
        Ok(g2) if global_eq(g, &g2) => {}
        Ok(g2) => r.fail_global(g, format!("synthesised {}", print_global(&g2))),
        Err(e) => r.fail_global(
            g,
            format!("projection not typable: {e}\n{}", print_system(&s)),
        ),
    }
    r.finish(start)
}

/// All derivations of `s` give the same type.
pub fn check_uniqueness(s: &System) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("uniqueness");
    match synth_every(s, &SynthOptions::default()) {
        Ok(gs) if gs.len() == 1 => {}
        Ok(gs) => {
            let shown: Vec<String> = gs.iter().map(print_global).collect();
            r.fail_system(
                s,
                format!("{} distinct types: {}", gs.len(), shown.join(" | ")),
            );
        }
        Err(SynthError::BoundExceeded { .. }) => r.bounded += 1,
        Err(e) => r.fail_system(s, format!("not typable: {e}")),
    }
    r.finish(start)
}

/// The synthesised type is well-formed.
pub fn check_well_formed(s: &System) -> PropertyReport {
    let start = Instant::now();
    let mut r = PropertyReport::new("well-formedness");
    match synth_runtime(s) {
        Ok(g) => {
            if let Err(e) = wf(&ChannelEnv::empty(), &g) {
                r.fail_system(s, format!("{} is not well-formed: {e}", print_global(&g)));
            }
        }
        Err(e) => r.fail_system(s, format!("not typable: {e}")),
    }
    r.finish(start)
}

/// Smaller variants of `s`: one participant removed, one branch dropped,
/// or a behaviour cut to a continuation.
fn shrink_candidates(s: &System) -> Vec<System> {
    let mut out = Vec::new();
    for n in s.participants.keys() {
        let mut t = s.clone();
        t.participants.remove(n);
        out.push(t);
    }
    for (n, p) in &s.participants {
        let p = norm_local(p);
        for (i, b) in p.branches().iter().enumerate() {
            let mut t = s.clone();
            t.participants.insert(n.clone(), b.cont.clone());
            out.push(t);
            if p.branches().len() > 1 {
                let mut bs = p.branches().to_vec();
                bs.remove(i);
                let q = if p.is_internal() {
                    Behaviour::InternalChoice(bs)
                } else {
                    Behaviour::ExternalChoice(bs)
                };
                let mut t = s.clone();
                t.participants.insert(n.clone(), q);
                out.push(t);
            }
        }
    }
    out
}

/// Greedy shrinking while `fails` keeps holding.
pub fn minimize(s: &System, fails: impl Fn(&System) -> bool) -> System {
    let mut cur = s.clone();
    let mut rounds = 0;
    'outer: while rounds < 200 {
        rounds += 1;
        for t in shrink_candidates(&cur) {
            if fails(&t) {
                cur = t;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

/// Attach minimized counterexamples to the failures of `report`.
pub fn minimize_failures(report: &mut PropertyReport, check: impl Fn(&System) -> PropertyReport) {
    for f in &mut report.failures {
        if let Ok(s) = crate::parser::parse_system(&f.instance) {
            let m = minimize(&s, |t| !check(t).passed());
            f.minimized = Some(print_system(&m));
        }
    }
}

/// Run `check` on every instance and merge the reports.
pub fn run_suite<T>(
    name: &str,
    items: &[T],
    check: impl Fn(&T) -> PropertyReport,
) -> PropertyReport {
    let start = Instant::now();
    let mut total = PropertyReport::new(name);
    for it in items {
        let mut r = check(it);
        r.instances = 1;
        total.absorb(r);
    }
    total.instances = items.len();
    total.millis = start.elapsed().as_millis();
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_behaviour, parse_global, parse_system};

    const SBS: &str = "
        B1 = t1!<order>. p1?<price>. r?<price>. (c1!. t1!<addr> (+) c2!. no1!);
        B2 = t2!<order>. p2?<price>. r!<price>. (c2?. t2!<addr> + c1?. no2!);
        S1 = t1?<order>. p1!<price>. (t1?<addr> + no1?);
        S2 = t2?<order>. p2!<price>. (t2?<addr> + no2?);
    ";

    fn sys(t: &str) -> System {
        parse_system(t).unwrap()
    }

    fn lim() -> ExploreLimits {
        ExploreLimits::default()
    }

    #[test]
    fn buyer_seller_passes_everything() {
        let s = sys(SBS);
        for r in [
            check_safety(&s, lim()),
            check_progress(&s, lim()),
            check_subject_reduction(&s, lim()),
            check_simulation(&s),
            check_weak_equiv(&s, lim()),
            check_uniqueness(&s),
            check_well_formed(&s),
        ] {
            assert!(r.passed() && r.bounded == 0, "{r}");
        }
    }

    #[test]
    fn empty_system() {
        let s = System::new();
        assert!(check_safety(&s, lim()).passed());
        assert!(check_subject_reduction(&s, lim()).passed());
        assert!(check_simulation(&s).passed());
        assert!(check_weak_equiv(&s, lim()).passed());
        assert!(check_uniqueness(&s).passed());
        assert!(check_completeness(&GlobalType::End).passed());
    }

    #[test]
    fn negative_controls() {
        let race = sys("r1 = a? + b?; s2 = b!; r2 = b?;");
        assert!(!check_safety(&race, lim()).passed());
        let lonely = sys("B = a?;");
        assert!(!check_progress(&lonely, lim()).passed());
    }

    #[test]
    fn looping_pair() {
        let s = sys("B = rec x . a!<int>. x; C = rec x . a?<int>. x;");
        assert!(check_progress(&s, lim()).passed());
        let r = check_subject_reduction(&s, lim());
        assert!(r.passed(), "{r}");
        assert!(check_weak_equiv(&s, lim()).passed());
    }

    #[test]
    fn simulation_direction() {
        let s = sys("s1 = a!; r1 = a? + c?. b?; s2 = b!; r2 = b?;");
        assert!(check_simulation(&s).passed());
        assert!(simulates(
            &parse_behaviour("a? + c?").unwrap(),
            &parse_behaviour("a?").unwrap()
        ));
        assert!(!simulates(
            &parse_behaviour("a?").unwrap(),
            &parse_behaviour("a? + c?").unwrap()
        ));
    }

    #[test]
    fn runtime_star_example_equivalent() {
        let s = sys("n = end; s = b!. a?<e>; r = b?; queue a = [e];");
        let r = check_weak_equiv(&s, lim());
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn completeness_of_buyer_seller() {
        let g = parse_global("(B1->S1:t1<order>. S1->B1:p1<price> | B2->S2:t2<order>. S2->B2:p2<price>) ;; B2->B1:r<price>. ((B1->B2:c1. (B1->S1:t1<addr> | B2->S2:no2)) (+) (B1->B2:c2. (B2->S2:t2<addr> | B1->S1:no1)))").unwrap();
        assert!(check_completeness(&g).passed());
    }

    #[test]
    fn shrinking_keeps_failure() {
        let s = sys("r1 = a? + b?; s2 = b!; r2 = b?; x = c!; y = c?;");
        let m = minimize(&s, |t| !check_safety(t, lim()).passed());
        assert!(!check_safety(&m, lim()).passed());
        assert!(m.participants.len() <= 2);
    }
}
