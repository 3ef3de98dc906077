//! Ready-set families of global types and the well-formedness judgement
//! `C ⊢ G`.

use crate::ast::{norm_global, Channel, GlobalType, Participant};
use crate::linearity::{append_env, append_linear, chan_g, ChannelEnv, UseLabel};
use crate::parser::print_global;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// First interaction `(channel, sender, receiver)`.
pub type Triple = (Channel, Participant, String);
pub type PartSet = BTreeSet<String>;
pub type Family = BTreeSet<PartSet>;

fn names(s: &Participant, r: &str) -> PartSet {
    let mut out = PartSet::new();
    if let Some(n) = s.name() {
        out.insert(n.to_string());
    }
    out.insert(r.to_string());
    out
}

/// Ready set of a global type.
pub fn g_fin(g: &GlobalType) -> BTreeSet<Triple> {
    fin_raw(&norm_global(g))
}

fn fin_raw(g: &GlobalType) -> BTreeSet<Triple> {
    match g {
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            ..
        } => BTreeSet::from([(channel.clone(), sender.clone(), receiver.clone())]),
        GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
            let mut out = fin_raw(a);
            out.extend(fin_raw(b));
            out
        }
        GlobalType::Rec(_, b) => fin_raw(b),
        GlobalType::Seq(a, b) => {
            let f = fin_raw(a);
            if f.is_empty() {
                fin_raw(b)
            } else {
                f
            }
        }
        GlobalType::GVar(_) | GlobalType::End => BTreeSet::new(),
    }
}

/// Participants grouped by top-level concurrent branch.
pub fn g_finp(g: &GlobalType) -> Family {
    finp_raw(&norm_global(g))
}

fn finp_raw(g: &GlobalType) -> Family {
    match g {
        GlobalType::Par(a, b) => {
            let mut out = finp_raw(a);
            out.extend(finp_raw(b));
            out
        }
        _ => BTreeSet::from([g.parts()]),
    }
}

/// Participants grouped by concurrent branch in the last part of `g`;
/// `None` when undefined.
pub fn g_fout(g: &GlobalType) -> Option<Family> {
    let mut f = fout_raw(&norm_global(g), &PartSet::new())?;
    f.remove(&PartSet::new());
    Some(f)
}

pub fn g_fout_with(g: &GlobalType, p: &PartSet) -> Option<Family> {
    fout_raw(&norm_global(g), p)
}

fn fout_raw(g: &GlobalType, p: &PartSet) -> Option<Family> {
    match g {
        GlobalType::Msg {
            sender,
            receiver,
            cont,
            ..
        } => {
            let mut q = p.clone();
            q.extend(names(sender, receiver));
            fout_raw(cont, &q)
        }
        GlobalType::Par(a, b) => {
            let mut out = fout_raw(a, &PartSet::new())?;
            out.extend(fout_raw(b, &PartSet::new())?);
            Some(out)
        }
        GlobalType::Choice(a, b) => {
            let fa = fout_raw(a, p)?;
            (fout_raw(b, p)? == fa).then_some(fa)
        }
        GlobalType::Rec(_, b) => fout_raw(b, p),
        GlobalType::Seq(_, b) => fout_raw(b, &PartSet::new()),
        GlobalType::End | GlobalType::GVar(_) => Some(BTreeSet::from([p.clone()])),
    }
}

/// Failed well-formedness premise: the rule, the subterm, and why.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WfError {
    pub rule: &'static str,
    pub subterm: String,
    pub reason: String,
}

impl fmt::Display for WfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule {} fails on `{}`: {}",
            self.rule, self.subterm, self.reason
        )
    }
}

impl std::error::Error for WfError {}

fn fail<T>(rule: &'static str, g: &GlobalType, reason: String) -> Result<T, WfError> {
    Err(WfError {
        rule,
        subterm: print_global(g),
        reason,
    })
}

/// `• ⊢ G`.
pub fn is_wf(g: &GlobalType) -> bool {
    wf(&ChannelEnv::empty(), g).is_ok()
}

/// `C ⊢ G`, with the outermost failing premise on failure.
pub fn wf(c: &ChannelEnv, g: &GlobalType) -> Result<(), WfError> {
    let g = norm_global(g);
    wf_rec(c, &g)?;
    loop_sequential(&g)
}

fn operands(g: &GlobalType, choice: bool, out: &mut Vec<GlobalType>) {
    match (g, choice) {
        (GlobalType::Choice(a, b), true) | (GlobalType::Par(a, b), false) => {
            operands(a, choice, out);
            operands(b, choice, out);
        }
        _ => out.push(g.clone()),
    }
}

fn has_par(g: &GlobalType) -> bool {
    match g {
        GlobalType::Par(..) => true,
        GlobalType::Msg { cont, .. } => has_par(cont),
        GlobalType::Seq(a, b) | GlobalType::Choice(a, b) => has_par(a) || has_par(b),
        GlobalType::Rec(_, b) => has_par(b),
        GlobalType::GVar(_) | GlobalType::End => false,
    }
}

fn show(t: &Triple) -> String {
    format!("{}->{}:{}", t.1, t.2, t.0)
}

fn wf_rec(c: &ChannelEnv, g: &GlobalType) -> Result<(), WfError> {
    match g {
        GlobalType::End => Ok(()),
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            cont,
            ..
        } => {
            let here = names(sender, receiver);
            let star_here = *sender == Participant::Star;
            for t in fin_raw(cont) {
                let shares = here.contains(&t.2)
                    || t.1.name().is_some_and(|n| here.contains(n))
                    || (star_here && t.1 == Participant::Star);
                if !shares {
                    return fail(
                        "prefix",
                        g,
                        format!("no ordering dependency with {}", show(&t)),
                    );
                }
            }
            let u = ChannelEnv::use_node(channel, sender.clone(), receiver);
            let Some(c2) = append_linear(c, &u) else {
                return fail("prefix", g, format!("use of {channel} breaks linearity"));
            };
            wf_rec(&c2, cont)
        }
        GlobalType::Seq(left, right) => {
            if left.has_rec() || right.has_rec() {
                return fail(
                    "seq",
                    g,
                    "recursion inside a sequential composition".to_string(),
                );
            }
            let Some(fo) = fout_raw(left, &PartSet::new()) else {
                return fail(
                    "seq",
                    g,
                    "last concurrent branches of the left side are undefined".to_string(),
                );
            };
            for t in fin_raw(right) {
                let split = fo.iter().any(|n1| {
                    t.1.name().is_some_and(|s| n1.contains(s))
                        && fo.iter().any(|n2| n2 != n1 && n2.contains(&t.2))
                });
                if !split {
                    return fail(
                        "seq",
                        g,
                        format!("{} is not split across two concurrent branches", show(&t)),
                    );
                }
            }
            let fr = finp_raw(right);
            for n in finp_raw(left) {
                if !fr.iter().any(|m| !n.is_disjoint(m)) {
                    let ns: Vec<_> = n.into_iter().collect();
                    return fail(
                        "seq",
                        g,
                        format!("branch {{{}}} is not continued", ns.join(",")),
                    );
                }
            }
            wf_rec(c, left)?;
            let Some(c2) = append_linear(c, &chan_g(left)) else {
                return fail("seq", g, "sequencing breaks linearity".to_string());
            };
            wf_rec(&c2, right)
        }
        GlobalType::Par(..) => {
            let mut ops = Vec::new();
            operands(g, false, &mut ops);
            for i in 0..ops.len() {
                for j in i + 1..ops.len() {
                    if !ops[i].parts().is_disjoint(&ops[j].parts()) {
                        return fail(
                            "par",
                            g,
                            "concurrent branches share participants".to_string(),
                        );
                    }
                    if !ops[i].chans().is_disjoint(&ops[j].chans()) {
                        return fail("par", g, "concurrent branches share channels".to_string());
                    }
                }
            }
            ops.iter().try_for_each(|o| wf_rec(c, o))
        }
        GlobalType::Choice(..) => {
            let mut ops = Vec::new();
            operands(g, true, &mut ops);
            let mut deciders = BTreeSet::new();
            let mut guards: BTreeMap<Channel, usize> = BTreeMap::new();
            for o in &ops {
                let f = fin_raw(o);
                if f.is_empty() {
                    return fail(
                        "choice",
                        g,
                        "a branch has no initial interaction".to_string(),
                    );
                }
                for t in f {
                    deciders.insert(t.1.clone());
                    *guards.entry(t.0.clone()).or_default() += 1;
                }
            }
            if deciders.len() != 1 {
                let ds: Vec<String> = deciders.iter().map(|d| d.to_string()).collect();
                return fail(
                    "choice",
                    g,
                    format!("choice made by several participants ({})", ds.join(", ")),
                );
            }
            if let Some((a, _)) = guards.iter().find(|(_, k)| **k > 1) {
                return fail(
                    "choice",
                    g,
                    format!("guard channel {a} used by several branches"),
                );
            }
            ops.iter().try_for_each(|o| wf_rec(c, o))
        }
        GlobalType::Rec(x, body) => {
            if has_par(body) {
                return fail("rec", g, "concurrent branches under recursion".to_string());
            }
            wf_rec(&append_env(c, &ChannelEnv::rec_mark(x)), body)
        }
        GlobalType::GVar(x) => match c.unfold_env_at(x) {
            Err(e) => fail("var", g, e.to_string()),
            Ok(u) => match u.first_violation() {
                None => Ok(()),
                Some((n1, n2)) => fail(
                    "var",
                    g,
                    format!(
                        "unfolding breaks linearity between {} and {}",
                        lab(&n1),
                        lab(&n2)
                    ),
                ),
            },
        },
    }
}

fn lab(u: &UseLabel) -> String {
    format!("{}->{}:{}", u.sender, u.receiver, u.chan)
}

/// First interactions, with recursion variables resolved to the first
/// interactions of their loop body.
fn first(g: &GlobalType, env: &BTreeMap<String, BTreeSet<Triple>>) -> BTreeSet<Triple> {
    match g {
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            ..
        } => BTreeSet::from([(channel.clone(), sender.clone(), receiver.clone())]),
        GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
            let mut out = first(a, env);
            out.extend(first(b, env));
            out
        }
        GlobalType::Seq(a, b) => {
            let f = first(a, env);
            if f.is_empty() {
                first(b, env)
            } else {
                f
            }
        }
        GlobalType::Rec(x, b) => {
            let mut env2 = env.clone();
            env2.insert(x.clone(), BTreeSet::new());
            first(b, &env2)
        }
        GlobalType::GVar(x) => env.get(x).cloned().unwrap_or_default(),
        GlobalType::End => BTreeSet::new(),
    }
}

/// Inside recursion, and before it, the receiver of each prefix takes part
/// in every interaction that can follow it. Without this, a sender can run
/// ahead into the next iteration while its previous message is in flight,
/// and the resulting runtime states are not typable.
pub fn loop_sequential(g: &GlobalType) -> Result<(), WfError> {
    ls_rec(g, &BTreeMap::new(), false)
}

fn ls_rec(
    g: &GlobalType,
    env: &BTreeMap<String, BTreeSet<Triple>>,
    in_loop: bool,
) -> Result<(), WfError> {
    match g {
        GlobalType::Msg { receiver, cont, .. } => {
            if in_loop || cont.has_rec() {
                for t in first(cont, env) {
                    if t.2 != *receiver && !t.1.is(receiver) {
                        return fail(
                            "loop-sequential",
                            g,
                            format!(
                                "receiver {receiver} does not take part in the following {}",
                                show(&t)
                            ),
                        );
                    }
                }
            }
            ls_rec(cont, env, in_loop)
        }
        GlobalType::Rec(x, b) => {
            let mut env2 = env.clone();
            env2.insert(x.clone(), BTreeSet::new());
            let f = first(b, &env2);
            env2.insert(x.clone(), f);
            ls_rec(b, &env2, true)
        }
        GlobalType::Seq(a, b) | GlobalType::Choice(a, b) | GlobalType::Par(a, b) => {
            ls_rec(a, env, in_loop)?;
            ls_rec(b, env, in_loop)
        }
        GlobalType::GVar(_) | GlobalType::End => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_global;

    fn g(s: &str) -> GlobalType {
        parse_global(s).unwrap()
    }

    fn set(xs: &[&str]) -> PartSet {
        xs.iter().map(|s| s.to_string()).collect()
    }

    const G12: &str = "B1->B2:c1. (B1->S1:t1<addr> | B2->S2:no2)";
    const G21: &str = "B1->B2:c2. (B2->S2:t2<addr> | B1->S1:no1)";

    fn gbs() -> GlobalType {
        g(&format!(
            "(B1->S1:t1<order>. S1->B1:p1<price> | B2->S2:t2<order>. S2->B2:p2<price>) ;; B2->B1:r<price>. (({G12}) (+) ({G21}))"
        ))
    }

    #[test]
    fn families_of_g12() {
        let t = g(G12);
        assert_eq!(
            g_fin(&t),
            BTreeSet::from([("c1".to_string(), Participant::named("B1"), "B2".to_string())])
        );
        assert_eq!(g_finp(&t), BTreeSet::from([set(&["B1", "S1", "B2", "S2"])]));
        assert_eq!(
            g_fout(&t),
            Some(BTreeSet::from([set(&["B1", "S1"]), set(&["B2", "S2"])]))
        );
    }

    #[test]
    fn families_of_whole_protocol() {
        let whole = gbs();
        let fin: BTreeSet<String> = g_fin(&whole).iter().map(|t| t.0.clone()).collect();
        assert_eq!(fin, set(&["t1", "t2"]));
        assert_eq!(g_finp(&whole), g_finp(&g(G12)));
        assert_eq!(g_fout(&whole), g_fout(&g(G12)));
    }

    #[test]
    fn fout_choice_mismatch() {
        assert_eq!(g_fout(&g("s->r:a (+) s->r:b. (r->t:c | s->u:d)")), None);
    }

    #[test]
    fn classification() {
        assert!(is_wf(&gbs()));
        assert!(!is_wf(&g("s1->r1:a<e>. s2->r2:b<e>")));
        assert!(!is_wf(&g("(s1->r1:a | s2->r2:b) ;; s1->r1:c")));
        assert!(!is_wf(&g("(s1->r1:a | s2->r2:b | s3->r3:c) ;; s1->r2:d")));
        assert!(!is_wf(&g("s1->r1:a1. r1->s1:x (+) s2->r2:a2. r2->s2:y")));
        assert!(is_wf(&g(
            "s->r:a. n->s:b. s->n:c. n->r:d (+) s->r:a2. n->s:b. s->n:c2. n->r:d2"
        )));
        assert!(is_wf(&GlobalType::End));
    }

    #[test]
    fn explain_names_rule() {
        let e = wf(&ChannelEnv::empty(), &g("s1->r1:a. s2->r2:b")).unwrap_err();
        assert_eq!(e.rule, "prefix");
        let e = wf(
            &ChannelEnv::empty(),
            &g("(s1->r1:a | s2->r2:b) ;; s1->r1:c"),
        )
        .unwrap_err();
        assert_eq!(e.rule, "seq");
    }

    #[test]
    fn par_and_rec_rules() {
        assert!(!is_wf(&g("s->r:a | s->t:b")));
        assert!(!is_wf(&g("s->r:a | t->u:a")));
        assert!(is_wf(&g("rec X . s->r:a. r->s:b. X")));
        assert!(!is_wf(&g("rec X . (s->r:a. X | t->u:b)")));
        assert!(is_wf(&g("rec X . s->r:a. X")));
    }

    #[test]
    fn loop_sequential_rejects_racing_loop() {
        let e = wf(&ChannelEnv::empty(), &g("rec X . s->r:a. s->t:b. X")).unwrap_err();
        assert_eq!(e.rule, "loop-sequential");
    }

    #[test]
    fn linear_reuse_in_loop() {
        // the second a-use has no input dependency on the first iteration's b
        assert!(!is_wf(&g("rec X . s->r:a. r->s:b. t->r:a. X")));
    }

    #[test]
    fn stable_under_norm() {
        for t in [
            gbs(),
            g("s1->r1:a<e>. s2->r2:b<e>"),
            g("(s->r:a ;; end) | end"),
        ] {
            assert_eq!(is_wf(&t), is_wf(&norm_global(&t)));
        }
    }
}
