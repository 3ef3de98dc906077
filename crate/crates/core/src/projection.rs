//! Projection of global types onto participants and queues.

use crate::ast::{local_eq, norm_local, Behaviour, Branch, GlobalType, Participant, Sort, System};
use crate::wellformed::g_fin;
use std::collections::BTreeSet;

fn disjoint_guards(p: &[Branch], q: &[Branch]) -> bool {
    p.iter().all(|b| q.iter().all(|c| b.chan != c.chan))
}

fn joined(p: &[Branch], q: &[Branch]) -> Vec<Branch> {
    let mut bs: Vec<Branch> = p.iter().chain(q).cloned().collect();
    bs.sort_by(|a, b| a.chan.cmp(&b.chan));
    bs
}

/// Merge of the behaviours of a participant that is not making the choice:
/// disjoint external choices are joined, equal prefixes merge their
/// continuations, congruent behaviours are kept, anything else is `None`.
/// Internal choices are joined only for the chooser, see `join_chooser`.
pub fn merge(p: &Behaviour, q: &Behaviour) -> Option<Behaviour> {
    let (p, q) = (norm_local(p), norm_local(q));
    match (&p, &q) {
        (Behaviour::InternalChoice(a), Behaviour::InternalChoice(b))
        | (Behaviour::ExternalChoice(a), Behaviour::ExternalChoice(b))
            if a.len() == 1 && b.len() == 1 && a[0].chan == b[0].chan && a[0].sort == b[0].sort =>
        {
            let cont = merge(&a[0].cont, &b[0].cont)?;
            let br = vec![Branch {
                chan: a[0].chan.clone(),
                sort: a[0].sort.clone(),
                cont,
            }];
            Some(if p.is_internal() {
                Behaviour::InternalChoice(br)
            } else {
                Behaviour::ExternalChoice(br)
            })
        }
        (Behaviour::ExternalChoice(a), Behaviour::ExternalChoice(b))
            if !a.is_empty() && !b.is_empty() && disjoint_guards(a, b) =>
        {
            Some(Behaviour::ExternalChoice(joined(a, b)))
        }
        _ if local_eq(&p, &q) => Some(p),
        _ => None,
    }
}

/// Combination of the branches of the participant making a choice:
/// internal choices with disjoint guards are joined.
pub fn join_chooser(p: &Behaviour, q: &Behaviour) -> Option<Behaviour> {
    let (np, nq) = (norm_local(p), norm_local(q));
    match (&np, &nq) {
        (Behaviour::InternalChoice(a), Behaviour::InternalChoice(b))
            if !a.is_empty() && !b.is_empty() && disjoint_guards(a, b) =>
        {
            Some(Behaviour::InternalChoice(joined(a, b)))
        }
        _ => merge(&np, &nq),
    }
}

/// `P[Q/0]`: every inert leaf of `p` replaced by `q`.
pub fn subst_end(p: &Behaviour, q: &Behaviour) -> Behaviour {
    match p {
        _ if p.is_zero() => q.clone(),
        Behaviour::InternalChoice(bs) => Behaviour::InternalChoice(subst_branches(bs, q)),
        Behaviour::ExternalChoice(bs) => Behaviour::ExternalChoice(subst_branches(bs, q)),
        Behaviour::Rec(x, b) => Behaviour::Rec(x.clone(), Box::new(subst_end(b, q))),
        Behaviour::Var(_) => p.clone(),
    }
}

fn subst_branches(bs: &[Branch], q: &Behaviour) -> Vec<Branch> {
    bs.iter()
        .map(|b| Branch {
            chan: b.chan.clone(),
            sort: b.sort.clone(),
            cont: subst_end(&b.cont, q),
        })
        .collect()
}

/// The unique sender of the first interactions of a choice.
fn chooser(g: &GlobalType) -> Option<Participant> {
    let senders: BTreeSet<Participant> = g_fin(g).into_iter().map(|t| t.1).collect();
    (senders.len() == 1).then(|| senders.into_iter().next().expect("one sender"))
}

/// `G↾n`, or `None` when undefined.
pub fn project(g: &GlobalType, n: &str) -> Option<Behaviour> {
    let p = match g {
        GlobalType::End => Behaviour::zero(),
        GlobalType::GVar(x) => Behaviour::Var(x.clone()),
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            sort,
            cont,
        } => {
            let c = project(cont, n)?;
            if sender.is(n) {
                Behaviour::send(channel, sort, c)
            } else if receiver == n {
                Behaviour::recv(channel, sort, c)
            } else {
                c
            }
        }
        GlobalType::Choice(a, b) => {
            let (pa, pb) = (project(a, n)?, project(b, n)?);
            if chooser(g).is_some_and(|c| c.is(n)) {
                join_chooser(&pa, &pb)?
            } else {
                merge(&pa, &pb)?
            }
        }
        GlobalType::Par(a, b) => match (a.parts().contains(n), b.parts().contains(n)) {
            (true, true) => return None,
            (true, false) => project(a, n)?,
            (false, true) => project(b, n)?,
            (false, false) => Behaviour::zero(),
        },
        GlobalType::Seq(a, b) => subst_end(&project(a, n)?, &project(b, n)?),
        GlobalType::Rec(x, body) => {
            if !body.parts().contains(n) {
                Behaviour::zero()
            } else {
                let pb = norm_local(&project(body, n)?);
                if pb == Behaviour::Var(x.clone()) {
                    return None;
                }
                Behaviour::Rec(x.clone(), Box::new(pb))
            }
        }
    };
    Some(norm_local(&p))
}

fn has_star_on(g: &GlobalType, a: &str) -> bool {
    let mut found = false;
    g.visit_msgs(&mut |s, _, c, _| found |= *s == Participant::Star && c == a);
    found
}

/// Contents of queue `a` described by `g`, or `None` when undefined.
pub fn project_queue(g: &GlobalType, a: &str) -> Option<Vec<Sort>> {
    match g {
        GlobalType::Msg {
            sender,
            channel,
            sort,
            cont,
            ..
        } => {
            let mut rest = project_queue(cont, a)?;
            if *sender == Participant::Star && channel == a {
                rest.insert(0, sort.clone());
            }
            Some(rest)
        }
        GlobalType::Choice(l, r) => {
            let q = project_queue(l, a)?;
            (project_queue(r, a)? == q).then_some(q)
        }
        GlobalType::Par(l, r) => match (l.chans().contains(a), r.chans().contains(a)) {
            (true, true) => (!has_star_on(g, a)).then(Vec::new),
            (true, false) => project_queue(l, a),
            _ => project_queue(r, a),
        },
        GlobalType::Seq(l, r) => {
            let mut q = project_queue(l, a)?;
            q.extend(project_queue(r, a)?);
            Some(q)
        }
        GlobalType::Rec(..) | GlobalType::GVar(_) | GlobalType::End => Some(Vec::new()),
    }
}

/// Every participant and every channel projects.
pub fn projectable(g: &GlobalType) -> bool {
    g.parts().iter().all(|n| project(g, n).is_some())
        && g.chans().iter().all(|a| project_queue(g, a).is_some())
}

/// The system of all projections. With `queues`, one queue per channel
/// holding its projected contents.
pub fn project_system(g: &GlobalType, queues: bool) -> Option<System> {
    let mut s = System::new();
    for n in g.parts() {
        let p = project(g, &n)?;
        s.participants.insert(n, p);
    }
    if queues {
        for a in g.chans() {
            let q = project_queue(g, &a)?;
            s.queues.insert(a, q);
        }
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_behaviour, parse_global};

    fn b(s: &str) -> Behaviour {
        parse_behaviour(s).unwrap()
    }

    #[test]
    fn merge_clauses() {
        assert_eq!(merge(&b("a?. end"), &b("b?. end")), Some(b("a? + b?")));
        let p = b("a!. b?");
        assert_eq!(merge(&p, &p), Some(norm_local(&p)));
        assert_eq!(merge(&b("a?. b!"), &b("a?. c!")), None);
        assert_eq!(merge(&b("a?. b?"), &b("a?. c?")), Some(b("a?. (b? + c?)")));
        assert_eq!(merge(&b("a!"), &b("a?")), None);
    }

    #[test]
    fn subst_end_clauses() {
        let q = b("c!");
        assert_eq!(subst_end(&Behaviour::zero(), &q), q);
        assert_eq!(subst_end(&b("a!"), &q), b("a!. c!"));
        assert_eq!(
            subst_end(&b("a!. x? (+) b!"), &q),
            b("a!. x?. c! (+) b!. c!")
        );
    }

    #[test]
    fn project_basic() {
        assert_eq!(project(&GlobalType::End, "n"), Some(Behaviour::zero()));
        let g12 = parse_global("B1->B2:c1. (B1->S1:t1<addr> | B2->S2:no2)").unwrap();
        assert_eq!(project(&g12, "S2"), Some(b("no2?")));
        assert_eq!(project(&g12, "B1"), Some(b("c1!. t1!<addr>")));
    }

    #[test]
    fn project_rec() {
        let g = parse_global("rec X . s->r:a<int>. X").unwrap();
        assert_eq!(project(&g, "s"), Some(b("rec X . a!<int>. X")));
        assert_eq!(project(&g, "t"), Some(Behaviour::zero()));
    }

    #[test]
    fn project_seq_end_identity() {
        let g = parse_global("s->r:a. r->s:b").unwrap();
        let ge = GlobalType::seq(g.clone(), GlobalType::End);
        for n in ["s", "r"] {
            assert_eq!(project(&g, n), project(&ge, n));
        }
    }

    #[test]
    fn par_both_sides_undefined() {
        let g = GlobalType::par(
            parse_global("s->r:a").unwrap(),
            parse_global("s->t:b").unwrap(),
        );
        assert_eq!(project(&g, "s"), None);
    }

    #[test]
    fn queue_projection() {
        let g = parse_global("s->r:a. r->s:b").unwrap();
        assert_eq!(project_queue(&g, "a"), Some(vec![]));
        let g = parse_global("*->r:a<v>").unwrap();
        assert_eq!(project_queue(&g, "a"), Some(vec!["v".to_string()]));
        let same = parse_global("*->r:a<v>. r->s:b (+) *->r:a<v>. r->s:c").unwrap();
        assert_eq!(project_queue(&same, "a"), Some(vec!["v".to_string()]));
        let diff = GlobalType::choice(
            parse_global("*->r:a<v>. r->s:b").unwrap(),
            parse_global("*->r:a<w>. r->s:c").unwrap(),
        );
        assert_eq!(project_queue(&diff, "a"), None);
    }

    #[test]
    fn projectability() {
        assert!(projectable(&GlobalType::End));
        // t behaves differently without learning the choice
        let g = parse_global("s->r:a. t->r:c (+) s->r:b. t->r:d").unwrap();
        assert!(!projectable(&g));
        let g = parse_global("s->r:a. r->t:x. t->r:c (+) s->r:b. r->t:y. t->r:d").unwrap();
        assert!(projectable(&g));
    }
}
