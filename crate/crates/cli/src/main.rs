//! `choreo`: synthesis, well-formedness, projection, splitting, execution and
//! property checking from the command line.
//!
//! Exit codes: 0 success, 1 analysis failure, 2 usage, input or parse error.

use choreo_core::generate::{random_globals, random_program, GenConfig};
use choreo_core::linearity::chan_g;
use choreo_core::parser::{parse_global_file, parse_system_file};
use choreo_core::projection::{project_system, projectable};
use choreo_core::semantics::{explore_partial, ExploreLimits};
use choreo_core::split::split_system;
use choreo_core::synthesis::{
    synth_every, synth_program_with, synth_runtime_with, Derivation, SynthMode,
};
use choreo_core::verify::{
    check_completeness, check_progress, check_safety, check_simulation, check_subject_reduction,
    check_uniqueness, check_weak_equiv, check_well_formed, minimize_failures, state_error, Failure,
    PropertyReport,
};
use choreo_core::wellformed::wf;
use choreo_core::{print_global, print_system, ChannelEnv, GlobalType, SynthOptions, System};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "choreo",
    version,
    about = "Choreography synthesis from local session types"
)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// Machine-readable JSON output.
    #[arg(long, global = true, conflicts_with = "dot")]
    json: bool,
    /// Graphviz output, where the subcommand has a graph to show.
    #[arg(long, global = true)]
    dot: bool,
    /// Maximum number of explored states.
    #[arg(long, global = true, env = "CHOREO_STATE_BOUND", default_value_t = 10_000,
          value_parser = clap::value_parser!(u64).range(1..))]
    bound: u64,
    /// Maximum exploration depth.
    #[arg(long, global = true, env = "CHOREO_DEPTH", default_value_t = 64,
          value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    /// Unfolding budget for recursive participants with pending messages.
    #[arg(long, global = true, env = "CHOREO_UNFOLD", default_value_t = 2,
          value_parser = clap::value_parser!(u64).range(1..))]
    unfold: u64,
    /// More detail in text output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesise a global type from a `.lst` system.
    Synth {
        file: PathBuf,
        /// Write the derivation tree as JSON to this path.
        #[arg(long, value_name = "PATH")]
        derivation: Option<PathBuf>,
        /// Print every derivable type, not just the first.
        #[arg(long)]
        all: bool,
    },
    /// Check that a `.gt` global type is well-formed.
    Wf {
        file: PathBuf,
        /// Print the failing rule.
        #[arg(long)]
        explain: bool,
    },
    /// Project a `.gt` global type onto every participant and channel.
    Project { file: PathBuf },
    /// Split a `.lst` system into two sequential halves.
    Split { file: PathBuf },
    /// Explore the reachable states of a `.lst` system.
    Simulate {
        file: PathBuf,
        /// Also write the transition trace to this path.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Run the property suites over files, directories or random instances.
    Verify {
        paths: Vec<PathBuf>,
        /// Include the exhaustive suites (uniqueness).
        #[arg(long)]
        all: bool,
        /// Also check this many random programs and global types.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesise, check well-formedness, project back and compare behaviours.
    Roundtrip { file: PathBuf },
}

/// Resolved bounds, all at least 1.
#[derive(Clone, Copy, Debug)]
struct Config {
    limits: ExploreLimits,
    unfold: usize,
}

impl Config {
    fn synth_options(&self, mode: SynthMode) -> SynthOptions {
        SynthOptions {
            unfold_budget: self.unfold,
            mode,
            ..SynthOptions::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
    Dot,
}

/// Output sink plus the selected format.
struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    format: Format,
    verbose: u8,
}

impl Io<'_> {
    fn print(&mut self, s: &str) {
        let _ = self.out.write_all(s.as_bytes());
        if !s.ends_with('\n') {
            let _ = self.out.write_all(b"\n");
        }
    }

    fn json(&mut self, v: &Value) {
        let text = serde_json::to_string_pretty(v).expect("json values serialize");
        self.print(&text);
    }

    fn error(&mut self, msg: &str) -> i32 {
        let _ = writeln!(self.err, "error: {msg}");
        2
    }

    fn no_dot(&mut self, cmd: &str) -> Option<i32> {
        (self.format == Format::Dot).then(|| self.error(&format!("`{cmd}` has no graph output")))
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_system(path: &Path) -> Result<System, String> {
    let text = read(path)?;
    parse_system_file(&text, &path.display().to_string()).map_err(|e| e.to_string())
}

fn load_global(path: &Path) -> Result<GlobalType, String> {
    let text = read(path)?;
    parse_global_file(&text, &path.display().to_string()).map_err(|e| e.to_string())
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("core types serialize")
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let o = &cli.opts;
    let format = if o.json {
        Format::Json
    } else if o.dot {
        Format::Dot
    } else {
        Format::Text
    };
    let cfg = Config {
        limits: ExploreLimits {
            max_states: o.bound as usize,
            max_depth: o.depth as usize,
        },
        unfold: o.unfold as usize,
    };
    let mut io = Io {
        out,
        err,
        format,
        verbose: o.verbose,
    };
    match cli.cmd {
        Command::Synth {
            file,
            derivation,
            all,
        } => cmd_synth(&mut io, cfg, &file, derivation.as_deref(), all),
        Command::Wf { file, explain } => cmd_wf(&mut io, &file, explain),
        Command::Project { file } => cmd_project(&mut io, cfg, &file),
        Command::Split { file } => cmd_split(&mut io, &file),
        Command::Simulate { file, trace } => cmd_simulate(&mut io, cfg, &file, trace.as_deref()),
        Command::Verify {
            paths,
            all,
            random,
            seed,
        } => cmd_verify(&mut io, cfg, &paths, all, random, seed),
        Command::Roundtrip { file } => cmd_roundtrip(&mut io, cfg, &file),
    }
}

fn derivation_text(d: &Derivation, indent: usize, out: &mut String) {
    out.push_str(&format!(
        "{}[{}] {}\n",
        "  ".repeat(indent),
        d.rule,
        d.global
    ));
    for p in &d.premises {
        derivation_text(p, indent + 1, out);
    }
}

fn synthesise(
    s: &System,
    opts: &SynthOptions,
) -> Result<(GlobalType, Derivation), choreo_core::SynthError> {
    if s.is_program() {
        synth_program_with(s, opts)
    } else {
        synth_runtime_with(s, opts)
    }
}

fn cmd_synth(io: &mut Io, cfg: Config, file: &Path, derivation: Option<&Path>, all: bool) -> i32 {
    let s = match load_system(file) {
        Ok(s) => s,
        Err(e) => return io.error(&e),
    };
    let (g, d) = match synthesise(&s, &cfg.synth_options(SynthMode::First)) {
        Ok(r) => r,
        Err(e) => {
            match io.format {
                Format::Json => io.json(&json!({ "typable": false, "error": e.to_string() })),
                _ => io.print(&format!("not typable: {e}")),
            }
            return 1;
        }
    };
    if let Some(path) = derivation {
        let text = serde_json::to_string_pretty(&d).expect("derivations serialize");
        if let Err(e) = std::fs::write(path, text + "\n") {
            return io.error(&format!("{}: {e}", path.display()));
        }
    }
    let types = if all {
        match synth_every(&s.lift(), &cfg.synth_options(SynthMode::All)) {
            Ok(gs) => gs,
            Err(e) => {
                io.print(&format!("exhaustive search failed: {e}"));
                return 1;
            }
        }
    } else {
        vec![g]
    };
    match io.format {
        Format::Json => {
            let printed: Vec<String> = types.iter().map(print_global).collect();
            let mut v = json!({ "typable": true, "global": printed[0], "ast": to_json(&types[0]) });
            if all {
                v["all"] = json!(printed);
            }
            io.json(&v);
        }
        Format::Dot => io.print(&chan_g(&types[0]).to_dot()),
        Format::Text => {
            for g in &types {
                io.print(&print_global(g));
            }
            if io.verbose > 0 {
                let mut t = String::new();
                derivation_text(&d, 0, &mut t);
                io.print(&t);
            }
        }
    }
    0
}

fn cmd_wf(io: &mut Io, file: &Path, explain: bool) -> i32 {
    let g = match load_global(file) {
        Ok(g) => g,
        Err(e) => return io.error(&e),
    };
    let res = wf(&ChannelEnv::empty(), &g);
    match io.format {
        Format::Json => {
            let mut v = json!({ "well_formed": res.is_ok(), "projectable": projectable(&g) });
            if let Err(e) = &res {
                v["rule"] = json!(e.rule);
                v["subterm"] = json!(e.subterm);
                v["reason"] = json!(e.reason);
            }
            io.json(&v);
        }
        Format::Dot => io.print(&chan_g(&g).to_dot()),
        Format::Text => match &res {
            Ok(()) => io.print("well-formed"),
            Err(e) if explain => io.print(&format!("not well-formed: {e}")),
            Err(_) => io.print("not well-formed"),
        },
    }
    i32::from(res.is_err())
}

fn cmd_project(io: &mut Io, cfg: Config, file: &Path) -> i32 {
    let g = match load_global(file) {
        Ok(g) => g,
        Err(e) => return io.error(&e),
    };
    let Some(s) = project_system(&g, true) else {
        match io.format {
            Format::Json => io.json(&json!({ "projectable": false })),
            _ => io.print("not projectable"),
        }
        return 1;
    };
    match io.format {
        Format::Json => {
            io.json(&json!({ "projectable": true, "system": print_system(&s), "ast": to_json(&s) }))
        }
        Format::Dot => io.print(&explore_partial(&s, cfg.limits).0.to_dot()),
        Format::Text => io.print(&print_system(&s)),
    }
    0
}

fn cmd_split(io: &mut Io, file: &Path) -> i32 {
    if let Some(c) = io.no_dot("split") {
        return c;
    }
    let s = match load_system(file) {
        Ok(s) => s,
        Err(e) => return io.error(&e),
    };
    let Some((s1, s2, envs)) = split_system(&s) else {
        match io.format {
            Format::Json => io.json(&json!({ "split": false })),
            _ => io.print("no coherent split"),
        }
        return 1;
    };
    let envs_json = to_json(&envs);
    match io.format {
        Format::Json => io.json(&json!({
            "split": true,
            "first": print_system(&s1),
            "second": print_system(&s2),
            "envs": envs_json,
        })),
        _ => {
            let envs_text =
                serde_json::to_string_pretty(&envs_json).expect("json values serialize");
            io.print(&format!(
                "-- first\n{}-- second\n{}-- environments\n{envs_text}",
                print_system(&s1),
                print_system(&s2)
            ));
        }
    }
    0
}

fn cmd_simulate(io: &mut Io, cfg: Config, file: &Path, trace: Option<&Path>) -> i32 {
    let s = match load_system(file) {
        Ok(s) => s,
        Err(e) => return io.error(&e),
    };
    let (ex, truncated) = explore_partial(&s, cfg.limits);
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(path, ex.trace()) {
            return io.error(&format!("{}: {e}", path.display()));
        }
    }
    let errors: Vec<(usize, String)> = ex
        .states
        .iter()
        .enumerate()
        .filter_map(|(i, st)| state_error(st).map(|e| (i, e)))
        .collect();
    let ok = !truncated && ex.stuck.is_empty() && errors.is_empty();
    match io.format {
        Format::Json => io.json(&json!({
            "states": ex.states.len(),
            "transitions": ex.edges.len(),
            "truncated": truncated,
            "terminated": ex.terminated,
            "stuck": ex.stuck,
            "errors": errors,
            "trace": ex.trace().lines().collect::<Vec<_>>(),
        })),
        Format::Dot => io.print(&ex.to_dot()),
        Format::Text => {
            let mut t = format!(
                "{} states, {} transitions, {} terminated, {} stuck{}\n",
                ex.states.len(),
                ex.edges.len(),
                ex.terminated.len(),
                ex.stuck.len(),
                if truncated { ", bound reached" } else { "" }
            );
            t.push_str(&ex.trace());
            for (i, e) in &errors {
                t.push_str(&format!("error in s{i}: {e}\n"));
            }
            for i in &ex.stuck {
                t.push_str(&format!("stuck s{i}:\n{}", print_system(&ex.states[*i])));
            }
            if io.verbose > 0 {
                for (i, st) in ex.states.iter().enumerate() {
                    t.push_str(&format!("s{i}:\n{}", print_system(st)));
                }
            }
            io.print(&t);
        }
    }
    i32::from(!ok)
}

fn failing(property: &str, instance: String, reason: String) -> PropertyReport {
    PropertyReport {
        property: property.to_string(),
        instances: 1,
        failures: vec![Failure {
            instance,
            reason,
            minimized: None,
            connected: Vec::new(),
        }],
        ..PropertyReport::default()
    }
}

fn passing(property: &str) -> PropertyReport {
    PropertyReport {
        property: property.to_string(),
        instances: 1,
        ..PropertyReport::default()
    }
}

type ExploredCheck = fn(&System, ExploreLimits) -> PropertyReport;

/// The suites for one system; failures of the state-space suites are shrunk.
fn system_suites(s: &System, cfg: Config, exhaustive: bool) -> Vec<PropertyReport> {
    let opts = cfg.synth_options(SynthMode::First);
    if let Err(e) = synthesise(s, &opts) {
        return vec![failing("typable", print_system(s), e.to_string())];
    }
    let limits = cfg.limits;
    let mut out = vec![passing("typable"), check_well_formed(s)];
    let explored: [(ExploredCheck, bool); 3] = [
        (check_safety, true),
        (check_progress, true),
        (check_subject_reduction, false),
    ];
    for (check, shrink) in explored {
        let mut r = check(s, limits);
        if shrink && !r.passed() {
            minimize_failures(&mut r, |x| check(x, limits));
        }
        out.push(r);
    }
    if s.is_program() {
        out.push(check_simulation(s));
    }
    out.push(check_weak_equiv(s, limits));
    if exhaustive && s.is_program() {
        out.push(check_uniqueness(s));
    }
    out
}

fn global_suites(g: &GlobalType) -> Vec<PropertyReport> {
    if let Err(e) = wf(&ChannelEnv::empty(), g) {
        return vec![failing("well-formed", print_global(g), e.to_string())];
    }
    if !projectable(g) {
        return vec![failing(
            "projectable",
            print_global(g),
            "no projection".to_string(),
        )];
    }
    vec![
        passing("well-formed"),
        passing("projectable"),
        check_completeness(g),
    ]
}

/// Negative controls: an untypable system must show a race, error or stuck
/// state; a rejected global type must fail well-formedness or projection.
fn system_control(s: &System, cfg: Config) -> (bool, String) {
    if synthesise(s, &cfg.synth_options(SynthMode::First)).is_ok() {
        return (false, "typable".to_string());
    }
    let safety = check_safety(s, cfg.limits);
    let progress = check_progress(s, cfg.limits);
    let reasons: Vec<String> = safety
        .failures
        .iter()
        .chain(&progress.failures)
        .map(|f| f.reason.clone())
        .collect();
    match reasons.first() {
        Some(r) => (true, format!("untypable; {r}")),
        None => (
            false,
            "untypable but no race, error or stuck state".to_string(),
        ),
    }
}

fn global_control(g: &GlobalType) -> (bool, String) {
    match wf(&ChannelEnv::empty(), g) {
        Err(e) => (true, format!("not well-formed: {e}")),
        Ok(()) if !projectable(g) => (true, "well-formed but not projectable".to_string()),
        Ok(()) => (false, "well-formed and projectable".to_string()),
    }
}

struct Outcome {
    name: String,
    ok: bool,
    json: Value,
    text: String,
}

fn report_outcome(name: String, reports: Vec<PropertyReport>) -> Outcome {
    let ok = reports.iter().all(PropertyReport::passed);
    let text = reports.iter().map(|r| format!("  {r}\n")).collect();
    let json = json!({ "instance": name, "expected_failure": false, "ok": ok, "reports": to_json(&reports) });
    Outcome {
        name,
        ok,
        json,
        text,
    }
}

fn control_outcome(name: String, (ok, why): (bool, String)) -> Outcome {
    let text = format!(
        "  expected failure: {}\n",
        if ok {
            format!("confirmed ({why})")
        } else {
            format!("NOT confirmed ({why})")
        }
    );
    let json = json!({ "instance": name, "expected_failure": true, "ok": ok, "detail": why });
    Outcome {
        name,
        ok,
        json,
        text,
    }
}

fn collect_files(
    path: &Path,
    negative: bool,
    out: &mut Vec<(PathBuf, bool)>,
) -> Result<(), String> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            let neg = negative || p.file_name().is_some_and(|n| n == "negative");
            if p.is_dir() || p.extension().is_some_and(|x| x == "lst" || x == "gt") {
                collect_files(&p, neg, out)?;
            }
        }
        Ok(())
    } else if path.exists() {
        out.push((path.to_path_buf(), negative));
        Ok(())
    } else {
        Err(format!("{}: no such file or directory", path.display()))
    }
}

fn verify_file(
    path: &Path,
    negative: bool,
    cfg: Config,
    exhaustive: bool,
) -> Result<Outcome, String> {
    let name = path.display().to_string();
    if path.extension().is_some_and(|x| x == "gt") {
        let g = load_global(path)?;
        Ok(if negative {
            control_outcome(name, global_control(&g))
        } else {
            report_outcome(name, global_suites(&g))
        })
    } else {
        let s = load_system(path)?;
        Ok(if negative {
            control_outcome(name, system_control(&s, cfg))
        } else {
            report_outcome(name, system_suites(&s, cfg, exhaustive))
        })
    }
}

fn cmd_verify(
    io: &mut Io,
    cfg: Config,
    paths: &[PathBuf],
    exhaustive: bool,
    random: usize,
    seed: u64,
) -> i32 {
    if let Some(c) = io.no_dot("verify") {
        return c;
    }
    if paths.is_empty() && random == 0 {
        return io.error("nothing to verify; give paths or --random N");
    }
    let mut files = Vec::new();
    for p in paths {
        if let Err(e) = collect_files(p, false, &mut files) {
            return io.error(&e);
        }
    }
    let mut outcomes = Vec::new();
    for (path, negative) in &files {
        match verify_file(path, *negative, cfg, exhaustive) {
            Ok(o) => outcomes.push(o),
            Err(e) => return io.error(&e),
        }
    }
    if random > 0 {
        let opts = cfg.synth_options(SynthMode::First);
        let mut kept = 0;
        let mut i = 0u64;
        // only typable draws are checked
        while kept < random && i < 50 * random as u64 {
            let s = random_program(seed.wrapping_add(i), 5, 6);
            i += 1;
            if synthesise(&s, &opts).is_ok() {
                kept += 1;
                outcomes.push(report_outcome(
                    format!("random program {}", i - 1),
                    system_suites(&s, cfg, exhaustive),
                ));
            }
        }
        for (k, g) in random_globals(seed, random, &GenConfig::default())
            .iter()
            .enumerate()
        {
            outcomes.push(report_outcome(format!("random type {k}"), global_suites(g)));
        }
    }
    let failed = outcomes.iter().filter(|o| !o.ok).count();
    match io.format {
        Format::Json => {
            let items: Vec<Value> = outcomes.iter().map(|o| o.json.clone()).collect();
            io.json(&json!({ "instances": outcomes.len(), "failed": failed, "results": items }));
        }
        _ => {
            let mut t = String::new();
            for o in &outcomes {
                t.push_str(&format!(
                    "{} {}\n",
                    if o.ok { "ok  " } else { "FAIL" },
                    o.name
                ));
                if !o.ok || io.verbose > 0 {
                    t.push_str(&o.text);
                }
            }
            t.push_str(&format!("{} instances, {failed} failed\n", outcomes.len()));
            io.print(&t);
        }
    }
    i32::from(failed > 0)
}

fn cmd_roundtrip(io: &mut Io, cfg: Config, file: &Path) -> i32 {
    if let Some(c) = io.no_dot("roundtrip") {
        return c;
    }
    let s = match load_system(file) {
        Ok(s) => s,
        Err(e) => return io.error(&e),
    };
    let mut steps: Vec<(String, bool, String)> = Vec::new();
    let typed = synthesise(&s, &cfg.synth_options(SynthMode::First));
    match &typed {
        Ok((g, _)) => steps.push(("synth".into(), true, print_global(g))),
        Err(e) => steps.push(("synth".into(), false, e.to_string())),
    }
    if let Ok((g, _)) = &typed {
        let w = wf(&ChannelEnv::empty(), g);
        steps.push((
            "wf".into(),
            w.is_ok(),
            w.err().map(|e| e.to_string()).unwrap_or_default(),
        ));
        match project_system(g, true) {
            Some(p) => steps.push(("project".into(), true, print_system(&p))),
            None => steps.push(("project".into(), false, "no projection".into())),
        }
        let mut reports = Vec::new();
        if s.is_program() {
            reports.push(check_simulation(&s));
        }
        reports.push(check_weak_equiv(&s, cfg.limits));
        for r in reports {
            steps.push((
                r.property.clone(),
                r.passed(),
                if r.passed() {
                    String::new()
                } else {
                    r.to_string()
                },
            ));
        }
    }
    let ok = steps.iter().all(|(_, ok, _)| *ok);
    match io.format {
        Format::Json => {
            let items: Vec<Value> = steps
                .iter()
                .map(|(n, ok, d)| json!({ "step": n, "ok": ok, "detail": d }))
                .collect();
            io.json(&json!({ "ok": ok, "steps": items }));
        }
        _ => {
            let mut t = String::new();
            for (n, ok, d) in &steps {
                t.push_str(&format!("{} {n}\n", if *ok { "ok  " } else { "FAIL" }));
                if !d.is_empty() && (!ok || io.verbose > 0) {
                    t.push_str(&format!("  {}\n", d.trim_end().replace('\n', "\n  ")));
                }
            }
            io.print(&t);
        }
    }
    i32::from(!ok)
}

fn main() {
    let code = run(
        std::env::args_os().collect(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
