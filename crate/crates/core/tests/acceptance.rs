//! Acceptance criteria, one PASS/FAIL line each.

use choreo_core::ast::{global_eq, norm_local, GlobalType, Participant, System};
use choreo_core::generate::{random_globals, random_program, GenConfig};
use choreo_core::linearity::{append_linear, ChannelEnv, DepKind, UseLabel};
use choreo_core::parser::{
    parse_behaviour, parse_global, parse_system, print_global, print_system,
};
use choreo_core::projection::projectable;
use choreo_core::semantics::{explore_partial, ExploreLimits};
use choreo_core::split::split_system;
use choreo_core::synthesis::{synth_program, synth_program_with, synth_runtime, SynthOptions};
use choreo_core::verify::{
    check_completeness, check_progress, check_safety, check_simulation, check_subject_reduction,
    check_uniqueness, check_weak_equiv, check_well_formed, PropertyReport,
};
use choreo_core::wellformed::is_wf;
use std::path::PathBuf;
use std::time::{Duration, Instant};

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Outcome {
            ok,
            detail: detail.into(),
        }
    }
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_systems(sub: &str) -> Vec<(String, System)> {
    let dir = corpus_dir().join(sub);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "lst"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).expect("readable");
            let name = p.file_name().expect("file").to_string_lossy().to_string();
            let s = parse_system(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, s)
        })
        .collect()
}

const SBS: &str = "
    B1 = t1!<order>. p1?<price>. r?<price>. (c1!. t1!<addr> (+) c2!. no1!);
    B2 = t2!<order>. p2?<price>. r!<price>. (c2?. t2!<addr> + c1?. no2!);
    S1 = t1?<order>. p1!<price>. (t1?<addr> + no1?);
    S2 = t2?<order>. p2!<price>. (t2?<addr> + no2?);
";
const G1: &str = "B1->S1:t1<order>. S1->B1:p1<price>";
const G2: &str = "B2->S2:t2<order>. S2->B2:p2<price>";
const G12: &str = "B1->B2:c1. (B1->S1:t1<addr> | B2->S2:no2)";
const G21: &str = "B1->B2:c2. (B2->S2:t2<addr> | B1->S1:no1)";

fn limits() -> ExploreLimits {
    ExploreLimits {
        max_states: 10_000,
        max_depth: 64,
    }
}

fn typable_random_programs(count: usize) -> Vec<System> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let s = random_program(seed, 5, 6);
        seed += 1;
        if s.participants.len() <= 5
            && s.chans().len() <= 6
            && synth_program(&s).is_ok()
            && !out.contains(&s)
        {
            out.push(s);
        }
    }
    out
}

fn report_line(r: &PropertyReport) -> String {
    let mut s = r.to_string();
    s.truncate(2000);
    s
}

fn c1_golden_synthesis() -> Outcome {
    let t = Instant::now();
    let expect = parse_global(&format!(
        "({G1} | {G2}) ;; B2->B1:r<price>. (({G12}) (+) ({G21}))"
    ))
    .expect("type");
    match synth_program(&parse_system(SBS).expect("system")) {
        Ok(g) => {
            let el = t.elapsed();
            Outcome::check(
                global_eq(&g, &expect) && el < Duration::from_secs(1),
                format!("{} in {el:?}", print_global(&g)),
            )
        }
        Err(e) => Outcome::check(false, e.to_string()),
    }
}

fn c2_golden_split() -> Outcome {
    let t = Instant::now();
    let Some((s1, s2, _)) = split_system(&parse_system(SBS).expect("system")) else {
        return Outcome::check(false, "no split");
    };
    let b = |x: &str| norm_local(&parse_behaviour(x).expect("behaviour"));
    let rows = [
        (&s1, "B1", "t1!<order>. p1?<price>"),
        (&s2, "B1", "r?<price>. (c1!. t1!<addr> (+) c2!. no1!)"),
        (&s1, "S1", "t1?<order>. p1!<price>"),
        (&s2, "S1", "t1?<addr> + no1?"),
        (&s1, "S2", "t2?<order>. p2!<price>"),
        (&s2, "S2", "t2?<addr> + no2?"),
    ];
    let bad: Vec<String> = rows
        .iter()
        .filter(|(s, n, want)| norm_local(&s.participants[*n]) != b(want))
        .map(|(_, n, want)| format!("{n}: expected {want}"))
        .collect();
    let el = t.elapsed();
    Outcome::check(
        bad.is_empty() && el < Duration::from_secs(1),
        format!(
            "{} rows, {} mismatches {bad:?}, {el:?}",
            rows.len(),
            bad.len()
        ),
    )
}

fn c3_classification() -> Outcome {
    let t = Instant::now();
    let accepted = |src: &str| {
        let g = parse_global(src).expect("type");
        is_wf(&g) && projectable(&g)
    };
    let types: [(&str, &str, bool); 8] = [
        (
            "sequentiality, unordered prefixes",
            "s1->r1:a<e>. s2->r2:b<e>",
            false,
        ),
        (
            "sequentiality, ordered prefixes",
            "s1->r1:a<e>. r1->r2:b<e>",
            true,
        ),
        (
            "seq, first participants not separated",
            "(s1->r1:a | s2->r2:b) ;; s1->r1:c",
            false,
        ),
        (
            "seq, branch without successor",
            "(s1->r1:a | s2->r2:b | s3->r3:c) ;; s1->r2:d",
            false,
        ),
        ("two deciders", "s1->r1:a1 (+) s2->r2:a2", false),
        (
            "uninformed choice",
            "s->r:a. n->r:c (+) s->r:b. n->r:d",
            false,
        ),
        (
            "informed choice",
            "s->r:a. n->s:b. s->n:c. n->r:d (+) s->r:a2. n->s:b. s->n:c2. n->r:d2",
            true,
        ),
        (
            "buyer-seller",
            &format!("({G1} | {G2}) ;; B2->B1:r<price>. (({G12}) (+) ({G21}))"),
            true,
        ),
    ];
    let mut wrong: Vec<String> = types
        .iter()
        .filter(|(_, g, want)| accepted(g) != *want)
        .map(|(n, _, _)| n.to_string())
        .collect();
    let systems: [(&str, &str, bool); 2] = [
        ("race choice", "r1 = a? + b?; s2 = b!; r2 = b?;", false),
        (
            "guarded choice",
            "s1 = a!; r1 = a? + c?. b?; s2 = b!; r2 = b?;",
            true,
        ),
    ];
    for (n, s, want) in systems {
        if synth_program(&parse_system(s).expect("system")).is_ok() != want {
            wrong.push(n.to_string());
        }
    }
    // two independent pairs: typed by ∥, never by a leading ;
    let pairs = parse_system("s1 = a!; r1 = a?; s2 = b!; r2 = b?;").expect("system");
    match synth_program_with(&pairs, &SynthOptions::default()) {
        Ok((g, d)) if matches!(g, GlobalType::Par(..)) && d.rule == "∥" => {}
        _ => wrong.push("independent pairs".to_string()),
    }
    let el = t.elapsed();
    Outcome::check(
        wrong.is_empty() && el < Duration::from_secs(1),
        format!("11 examples, misclassified {wrong:?}, {el:?}"),
    )
}

fn c4_uniqueness(programs: &[System]) -> Outcome {
    let t = Instant::now();
    let mut total = PropertyReport::default();
    for s in programs {
        total.absorb(check_uniqueness(s));
    }
    let el = t.elapsed();
    Outcome::check(
        total.passed()
            && total.bounded == 0
            && programs.len() >= 200
            && el < Duration::from_secs(300),
        format!(
            "{} programs, {} failures, {} bounded, {el:?}\n{}",
            programs.len(),
            total.failures.len(),
            total.bounded,
            report_line(&total)
        ),
    )
}

fn c5_well_formed(systems: &[System]) -> Outcome {
    let mut total = PropertyReport::default();
    for s in systems {
        total.absorb(check_well_formed(s));
    }
    Outcome::check(
        total.passed(),
        format!(
            "{} systems, {} failures\n{}",
            systems.len(),
            total.failures.len(),
            report_line(&total)
        ),
    )
}

fn c6_subject_reduction(systems: &[System]) -> Outcome {
    let t = Instant::now();
    let mut total = PropertyReport::default();
    let mut looped = 0;
    for s in systems {
        total.absorb(check_subject_reduction(s, limits()));
        if s.has_rec_binder() {
            let (ex, _) = explore_partial(s, limits());
            // a cycle in the state graph means every unfolding count is reached
            if ex.has_cycle() && ex.depth.iter().max().copied().unwrap_or(0) >= 2 {
                looped += 1;
            }
        }
    }
    let el = t.elapsed();
    Outcome::check(
        total.passed() && total.bounded == 0 && looped > 0 && el < Duration::from_secs(600),
        format!(
            "{} systems ({looped} looping), {} failures, {} bounded, {el:?}\n{}",
            systems.len(),
            total.failures.len(),
            total.bounded,
            report_line(&total)
        ),
    )
}

fn c7_safety_progress(systems: &[System], negatives: &[(String, System)]) -> Outcome {
    let mut total = PropertyReport::default();
    for s in systems {
        total.absorb(check_safety(s, limits()));
        total.absorb(check_progress(s, limits()));
    }
    let mut controls = Vec::new();
    for (name, s) in negatives {
        let typable = synth_program(s).is_ok();
        let flagged = !check_safety(s, limits()).passed() || !check_progress(s, limits()).passed();
        if typable || !flagged {
            controls.push(name.clone());
        }
    }
    Outcome::check(
        total.passed() && total.bounded == 0 && controls.is_empty(),
        format!(
            "{} systems, {} failures, {} controls, misbehaving controls {controls:?}\n{}",
            systems.len(),
            total.failures.len(),
            negatives.len(),
            report_line(&total)
        ),
    )
}

fn c8_round_trip(systems: &[System]) -> Outcome {
    let mut total = PropertyReport::default();
    let mut star = false;
    for s in systems {
        if !s.is_program() {
            star |= synth_runtime(s).is_ok_and(|g| g.has_star());
        } else {
            total.absorb(check_simulation(s));
        }
        total.absorb(check_weak_equiv(s, limits()));
    }
    Outcome::check(
        total.passed() && total.bounded == 0 && star,
        format!(
            "{} systems, runtime example included: {star}, {} failures\n{}",
            systems.len(),
            total.failures.len(),
            report_line(&total)
        ),
    )
}

fn c9_completeness() -> Outcome {
    let t = Instant::now();
    let gs = random_globals(2024, 300, &GenConfig::default());
    let mut total = PropertyReport::default();
    for g in &gs {
        total.absorb(check_completeness(g));
    }
    let recs = gs.iter().filter(|g| g.has_rec()).count();
    let seqs = gs
        .iter()
        .filter(|g| matches!(g, GlobalType::Seq(..)))
        .count();
    let el = t.elapsed();
    Outcome::check(
        total.passed() && gs.len() >= 300 && el < Duration::from_secs(600),
        format!(
            "{} types ({recs} recursive, {seqs} sequenced), {} failures, {el:?}\n{}",
            gs.len(),
            total.failures.len(),
            report_line(&total)
        ),
    )
}

fn u(a: &str, s: &str, r: &str) -> UseLabel {
    let s = if s == "*" {
        Participant::Star
    } else {
        Participant::named(s)
    };
    UseLabel::new(a, s, r)
}

fn c10_linearity() -> Outcome {
    let mut bad = Vec::new();
    let new = ChannelEnv::use_node("a", Participant::named("s"), "r");
    // no earlier use of the channel
    let c = ChannelEnv::path(&[u("b", "s", "r"), u("c", "r", "t")]);
    if append_linear(&c, &new).is_none() {
        bad.push("fresh channel");
    }
    // the last use of the channel has the same label
    let c = ChannelEnv::path(&[u("a", "s", "r"), u("b", "r", "s")]);
    if append_linear(&c, &new).is_none() {
        bad.push("same label");
    }
    // the last use of the channel is ⋆-headed, and nothing depends on it
    let c = ChannelEnv::path(&[u("a", "*", "r"), u("b", "r", "s")]);
    let next = append_linear(&c, &new);
    let into_star = ChannelEnv::path(&[u("b", "s", "r"), u("b", "s", "t"), u("a", "*", "r")]);
    if next.is_none()
        || into_star.dep_edge(1, 3, DepKind::OO)
        || into_star.dep_edge(2, 3, DepKind::IO)
        || into_star.has_output_dep(1, 3)
    {
        bad.push("star-headed");
    }
    // only the receivers differ: a:s->r' OO a:s->r, and a:s->r' IO b:r'->r II a:s->r
    let c = ChannelEnv::path(&[u("a", "s", "r2"), u("b", "r2", "r"), u("a", "s", "r")]);
    let ok = c.dep_edge(1, 3, DepKind::OO)
        && c.dep_edge(1, 2, DepKind::IO)
        && c.dep_edge(2, 3, DepKind::II)
        && c.has_input_dep(1, 3)
        && c.has_output_dep(1, 3)
        && c.is_linear();
    let without = ChannelEnv::path(&[u("a", "s", "r2"), u("a", "s", "r")]);
    if !ok || without.is_linear() {
        bad.push("same-sender chain");
    }
    // only the senders differ: a:s'->r II a:s->r, ordered through b:r->s
    let c = ChannelEnv::path(&[u("a", "s2", "r"), u("b", "r", "s"), u("a", "s", "r")]);
    let ok = c.dep_edge(1, 3, DepKind::II)
        && c.dep_edge(1, 2, DepKind::IO)
        && c.dep_edge(2, 3, DepKind::IO)
        && c.is_linear();
    let cross = ChannelEnv::path(&[u("a", "s2", "r"), u("b", "s2", "s"), u("a", "s", "r")]);
    if !ok || cross.dep_edge(1, 2, DepKind::OO) || cross.is_linear() {
        bad.push("same-receiver chain");
    }
    // both differ, shortest chain: a:s'->r' IO c1:r'->s IO c2:s->r II a:s->r, and c1 IO a for output
    let c = ChannelEnv::path(&[
        u("a", "s2", "r2"),
        u("c1", "r2", "s"),
        u("c2", "s", "r"),
        u("a", "s", "r"),
    ]);
    let ok = c.dep_edge(1, 2, DepKind::IO)
        && c.dep_edge(2, 3, DepKind::IO)
        && c.dep_edge(3, 4, DepKind::II)
        && c.dep_edge(2, 4, DepKind::IO)
        && c.has_input_dep(1, 4)
        && c.has_output_dep(1, 4)
        && c.is_linear();
    let missing_c2 = ChannelEnv::path(&[u("a", "s2", "r2"), u("c1", "r2", "s"), u("a", "s", "r")]);
    if !ok || missing_c2.is_linear() {
        bad.push("both-different chain");
    }
    // both differ, the longer input chain through b1, b2, b3 next to the output chain through c
    let c = ChannelEnv::path(&[
        u("a", "s2", "r2"),
        u("c", "r2", "s"),
        u("b1", "r2", "s1"),
        u("b2", "s1", "x2"),
        u("b3", "x2", "r"),
        u("a", "s", "r"),
    ]);
    if !(c.has_input_dep(1, 6) && c.has_output_dep(1, 6) && c.is_linear()) {
        bad.push("both-different long chain");
    }
    Outcome::check(bad.is_empty(), format!("6 families, failing {bad:?}"))
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let corpus = corpus_systems("");
    let negatives = corpus_systems("negative");
    let randoms = typable_random_programs(200);
    let mut typable: Vec<System> = corpus
        .iter()
        .map(|(_, s)| s.clone())
        .filter(|s| synth_runtime(s).is_ok())
        .collect();
    assert_eq!(
        typable.len(),
        corpus.len(),
        "every positive corpus system is typable"
    );
    typable.extend(randoms.iter().cloned());

    let crits: Vec<(&str, Criterion)> = vec![
        ("1 golden synthesis", Box::new(c1_golden_synthesis)),
        ("2 golden split", Box::new(c2_golden_split)),
        (
            "3 well-formedness classification",
            Box::new(c3_classification),
        ),
        ("4 uniqueness", Box::new(|| c4_uniqueness(&randoms))),
        (
            "5 synthesised types are well-formed",
            Box::new(|| c5_well_formed(&typable)),
        ),
        (
            "6 subject reduction",
            Box::new(|| c6_subject_reduction(&typable)),
        ),
        (
            "7 safety and progress",
            Box::new(|| c7_safety_progress(&typable, &negatives)),
        ),
        (
            "8 round-trip equivalence",
            Box::new(|| c8_round_trip(&typable)),
        ),
        ("9 completeness", Box::new(c9_completeness)),
        ("10 linearity families", Box::new(c10_linearity)),
    ];
    let mut failed = 0;
    for (name, f) in crits {
        let o = f();
        println!(
            "{} criterion {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail.lines().next().unwrap_or("")
        );
        if !o.ok {
            failed += 1;
            for l in o.detail.lines().skip(1) {
                println!("    {l}");
            }
        }
    }
    let sample = randoms.first().map(print_system).unwrap_or_default();
    println!("random program sample:\n{sample}");
    if failed > 0 {
        std::process::exit(1);
    }
}
