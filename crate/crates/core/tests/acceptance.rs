//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, captured or not.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the prompt snapshots.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{diag, fixtures_dir, simple, vuln_fixtures, TranscriptBuilder};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rustport_core::buildcheck::{
    compile, parse_diagnostics, parse_json_diagnostics, CompilerConfig, Diagnostic, ErrorCatalogue,
    ErrorCode, Level,
};
use rustport_core::corpus::{SourceProgram, TestCase};
use rustport_core::exec::{run_tests, ExecLimits, Verdict};
use rustport_core::llm::{BackendSpec, Gateway};
use rustport_core::pipeline::{
    load_transcripts, run_campaign, select_guided_phase, CampaignOptions, CampaignSummary,
    IterationCounts, Outcome, Phase, RunConfig, STATE_FILE, TRANSCRIPT_FILE,
};
use rustport_core::prompt::{DynamicErrorKind, PromptKit, GUIDED_CODES};
use rustport_core::report::{
    cdf_by_metric, repair_and_pass_rates, resolution_rate, CampaignReport, Metric, RepairRates,
    Resolution,
};
use rustport_core::vuln::{
    build_c, checker_available, replay_mitigation, verify_c_program, CCompilerConfig,
    CheckerConfig, MitigationConfig, VerificationKind,
};
use tempfile::TempDir;

// ---------------------------------------------------------------------------
// scripted campaign fixture

const C_DOUBLE: &str = "#include <stdio.h>\n\nint main(void) {\n    long x;\n    scanf(\"%ld\", &x);\n    printf(\"%ld\\n\", x * 2);\n    return 0;\n}\n";

const GOOD: &str = "use std::io::Read;\n\nfn main() {\n    let mut s = String::new();\n    std::io::stdin().read_to_string(&mut s).unwrap();\n    let x: i64 = s.trim().parse().unwrap();\n    println!(\"{}\", x * 2);\n}\n";
const MISMATCH: &str = "fn main() {\n    let x: i64 = \"4\";\n    println!(\"{}\", x * 2);\n}\n";
const UNRESOLVED: &str = "fn main() {\n    let x = parser::read_i64();\n    println!(\"{}\", x * 2);\n}\n";
const WRONG: &str = "fn main() {\n    println!(\"0\");\n}\n";
const PANICS: &str = "use std::io::Read;\n\nfn main() {\n    let mut s = String::new();\n    std::io::stdin().read_to_string(&mut s).unwrap();\n    let x: usize = s.trim().parse().unwrap();\n    let v: Vec<i64> = Vec::new();\n    println!(\"{}\", v[x]);\n}\n";
const SPINS: &str = "fn main() {\n    loop {\n        std::hint::black_box(());\n    }\n}\n";
const ABORTS: &str = "fn main() {\n    std::process::abort();\n}\n";

fn fenced(code: &str) -> String {
    format!("Here is the translation.\n\n```rust\n{code}```\n")
}

struct ScriptedProgram {
    id: &'static str,
    responses: Vec<String>,
    outcome: Outcome,
    /// base, basic, guided, dynamic
    counts: [u32; 4],
}

fn scripted_programs() -> Vec<ScriptedProgram> {
    let f = fenced;
    let rep = |code: &str, n: usize| vec![f(code); n];
    let mut guided = rep(MISMATCH, 6);
    guided.push(f(GOOD));
    vec![
        ScriptedProgram { id: "p01_first_try", responses: vec![f(GOOD)], outcome: Outcome::Success, counts: [1, 0, 0, 0] },
        ScriptedProgram { id: "p02_two_basic", responses: vec![f(UNRESOLVED), f(UNRESOLVED), f(GOOD)], outcome: Outcome::Success, counts: [1, 2, 0, 0] },
        ScriptedProgram { id: "p03_guided", responses: guided, outcome: Outcome::Success, counts: [1, 5, 1, 0] },
        ScriptedProgram { id: "p04_dynamic", responses: vec![f(WRONG), f(GOOD)], outcome: Outcome::Success, counts: [1, 0, 0, 1] },
        ScriptedProgram { id: "p05_no_fence", responses: vec!["I am unable to translate this program.".into()], outcome: Outcome::GenerationError, counts: [1, 0, 0, 0] },
        ScriptedProgram { id: "p06_exhausted", responses: vec![f(MISMATCH)], outcome: Outcome::CompilationError, counts: [1, 5, 5, 0] },
        ScriptedProgram { id: "p07_untargeted", responses: vec![f(UNRESOLVED)], outcome: Outcome::CompilationError, counts: [1, 5, 0, 0] },
        ScriptedProgram { id: "p08_panic", responses: vec![f(PANICS)], outcome: Outcome::RuntimeError, counts: [1, 0, 0, 5] },
        ScriptedProgram { id: "p09_loop", responses: vec![f(SPINS)], outcome: Outcome::InfiniteLoop, counts: [1, 0, 0, 5] },
        ScriptedProgram { id: "p10_wrong_output", responses: vec![f(WRONG)], outcome: Outcome::TestCaseError, counts: [1, 0, 0, 5] },
        ScriptedProgram { id: "p11_abort", responses: vec![f(ABORTS)], outcome: Outcome::RuntimeError, counts: [1, 0, 0, 5] },
        ScriptedProgram {
            id: "p12_truncated_repair",
            responses: vec![f(UNRESOLVED), "@@finish: length_truncated\n```rust\nfn main() {\n".into(), f(GOOD)],
            outcome: Outcome::Success,
            counts: [1, 2, 0, 0],
        },
    ]
}

struct Fixture {
    _tmp: TempDir,
    root: PathBuf,
    programs: Vec<SourceProgram>,
    gateway_dir: PathBuf,
    config: RunConfig,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_owned();
        let gateway_dir = root.join("script");
        let mut programs = Vec::new();
        for p in scripted_programs() {
            let dir = gateway_dir.join("playlists").join(p.id);
            fs::create_dir_all(&dir).unwrap();
            for (n, r) in p.responses.iter().enumerate() {
                fs::write(dir.join(format!("{}.txt", n + 1)), r).unwrap();
            }
            programs.push(SourceProgram {
                id: p.id.into(),
                source_text: C_DOUBLE.into(),
                test_cases: vec![
                    TestCase { input: "4\n".into(), expected_output: "8\n".into() },
                    TestCase { input: "21\n".into(), expected_output: "42\n".into() },
                ],
                metrics: rustport_core::corpus::extract_code_metrics(C_DOUBLE),
                coverage: None,
            });
        }
        let mut config = RunConfig::default();
        config.exec.wall_timeout_ms = 1000;
        Fixture { _tmp: tmp, root, programs, gateway_dir, config }
    }

    /// A fresh gateway: scripted playlists keep a per-gateway cursor.
    fn gateway(&self) -> Gateway {
        Gateway::from_spec(BackendSpec::scripted("scripted", &self.gateway_dir)).unwrap()
    }

    fn run(&self, name: &str, options: &CampaignOptions) -> (PathBuf, CampaignSummary) {
        let out = self.root.join(name).join("run");
        let s = run_campaign(&self.programs, &self.gateway(), &self.config, &out, options).unwrap();
        (out, s)
    }
}

#[derive(Default)]
struct Shared {
    fixture: Option<Fixture>,
    first_run: Option<(PathBuf, CampaignSummary)>,
}

fn counts_array(c: &IterationCounts) -> [u32; 4] {
    [c.base, c.basic_repair, c.guided_repair, c.dynamic_repair]
}

fn criterion_1(shared: &mut Shared) -> String {
    let fixture = Fixture::new();
    let start = Instant::now();
    let (out, summary) = fixture.run("a", &CampaignOptions::default());
    let elapsed = start.elapsed();
    assert!(summary.is_complete());
    assert_eq!(summary.transcripts.len(), 12);
    let mut kinds = BTreeSet::new();
    for (p, t) in scripted_programs().iter().zip(&summary.transcripts) {
        assert_eq!(t.program_id, p.id);
        let outcome = t.outcome.as_ref().unwrap();
        assert_eq!(outcome.outcome, p.outcome, "{}", p.id);
        let counts = counts_array(&outcome.iteration_counts);
        assert_eq!(counts, p.counts, "{}", p.id);
        assert_eq!(counts_array(&t.iteration_counts()), counts, "{}", p.id);
        let caps = [1, 5, 5, 5];
        assert!(counts.iter().zip(caps).all(|(c, cap)| *c <= cap), "{}", p.id);
        kinds.insert(p.outcome);
    }
    assert_eq!(kinds.len(), Outcome::ALL.len());
    assert!(elapsed < Duration::from_secs(300), "{elapsed:?}");
    shared.first_run = Some((out, summary));
    shared.fixture = Some(fixture);
    format!("12/12 outcomes and iteration counts exact, caps 1/5/5/5 held, {:.1}s", elapsed.as_secs_f64())
}

// ---------------------------------------------------------------------------

fn pp(x: f64) -> f64 {
    x * 100.0
}

/// (initial, remaining, published rr in percent)
type Cell = (u64, u64, f64);

fn criterion_2(_: &mut Shared) -> String {
    // (failures, repaired, repair rate %, pass rate %)
    let table4 = [
        ("Qwen2.5-Coder", 1743, 1090, 62.5, 23.4),
        ("Llama3", 1884, 1096, 58.1, 14.1),
        ("DeepSeek-Coder", 1836, 1021, 55.6, 33.7),
        ("Codestral", 906, 778, 85.8, 28.9),
        ("GPT-4o", 558, 522, 93.5, 43.4),
        ("DeepSeek-V3", 579, 520, 89.8, 47.1),
    ];
    for (model, failures, repaired, rate, pass) in table4 {
        let r = RepairRates::from_counts(failures, repaired, 0);
        let got = pp(r.repair_rate.unwrap());
        assert!((got - rate).abs() <= 0.1, "{model}: {got} vs {rate}");
        // the published pass rate is consistent with repaired as its
        // denominator: some integer count reproduces it
        let implied = (0..=repaired).any(|k| (pp(k as f64 / repaired as f64) - pass).abs() < 0.1);
        assert!(implied, "{model} pass rate");
    }

    // the two headline rows, end to end through transcripts
    for (failures, repaired, passed, rate) in [(558u64, 522u64, 227u64, 93.5), (579, 520, 245, 89.8)] {
        let mut ts = Vec::new();
        for i in 0..failures {
            let b = TranscriptBuilder::new(&format!("p{i}")).compiled(Phase::Base, &[Some("E0308")]);
            let t = if i < repaired {
                let o = if i < passed { Outcome::Success } else { Outcome::TestCaseError };
                b.compiled(Phase::BasicRepair, &[]).outcome(o)
            } else {
                b.compiled(Phase::BasicRepair, &[Some("E0308")]).outcome(Outcome::CompilationError)
            };
            ts.push(t);
        }
        ts.push(simple("clean", Outcome::Success));
        let r = repair_and_pass_rates(&ts);
        assert_eq!((r.initial_failures, r.repaired, r.repaired_and_passed), (failures, repaired, passed));
        assert!((pp(r.repair_rate.unwrap()) - rate).abs() <= 0.1);
    }

    // (initial, remaining, rr %) per error code and model column
    let table5: [(&str, [Cell; 6]); 8] = [
        ("E0277", [(35, 18, 48.57), (273, 178, 34.80), (341, 194, 43.11), (241, 85, 64.73), (24, 5, 79.17), (17, 3, 82.35)]),
        ("E0308", [(38, 15, 60.53), (345, 227, 34.20), (345, 238, 31.01), (224, 73, 67.41), (22, 4, 81.82), (10, 5, 50.00)]),
        ("E0425", [(10, 1, 90.00), (187, 81, 56.68), (180, 91, 49.44), (141, 15, 89.36), (6, 1, 83.33), (0, 0, 0.00)]),
        ("E0599", [(13, 4, 69.23), (186, 61, 67.20), (291, 87, 70.10), (179, 29, 83.80), (12, 3, 75.00), (5, 1, 80.00)]),
        ("E0384", [(2, 0, 100.00), (49, 11, 77.55), (49, 26, 46.94), (35, 9, 74.29), (1, 0, 100.00), (0, 0, 0.00)]),
        ("E0282", [(4, 0, 100.00), (15, 5, 66.67), (11, 2, 81.82), (8, 0, 100.00), (0, 0, 0.00), (0, 0, 0.00)]),
        ("E0502", [(12, 7, 41.67), (19, 17, 10.53), (27, 16, 40.74), (9, 4, 55.56), (5, 2, 60.00), (4, 1, 75.00)]),
        ("E0499", [(3, 2, 33.33), (12, 9, 25.00), (9, 7, 22.22), (6, 1, 83.33), (5, 2, 60.00), (3, 0, 100.00)]),
    ];
    let mut cells = 0;
    for (code, row) in table5 {
        for (initial, remaining, rr) in row {
            let got = pp(Resolution::from_counts(initial, remaining).rr);
            assert!((got - rr).abs() <= 0.01 + 1e-9, "{code} {initial}/{remaining}: {got} vs {rr}");
            cells += 1;
        }
    }

    // one cell end to end: 35 programs enter guided repair with one E0277
    // each, 18 still have it afterwards
    let code = ErrorCode::new("E0277").unwrap();
    let ts: Vec<_> = (0..35)
        .map(|i| {
            let b = TranscriptBuilder::new(&format!("g{i}"))
                .compiled(Phase::Base, &[Some("E0277")])
                .compiled(Phase::BasicRepair, &[Some("E0277")]);
            if i < 18 {
                b.compiled(Phase::GuidedRepair, &[Some("E0277")]).outcome(Outcome::CompilationError)
            } else {
                b.compiled(Phase::GuidedRepair, &[]).outcome(Outcome::Success)
            }
        })
        .collect();
    let r = resolution_rate(&code, &ts);
    assert_eq!((r.initial, r.remaining), (35, 18));
    assert!((pp(r.rr) - 48.57).abs() <= 0.01);
    assert_eq!(resolution_rate(&ErrorCode::new("E0499").unwrap(), &ts).rr, 0.0);
    format!("6 repair-rate rows within 0.1 pp, {cells} resolution cells within 0.01 pp (0/0 -> 0)")
}

// ---------------------------------------------------------------------------

fn rustc_stderr(file: &Path, json: bool, out: &Path) -> String {
    let mut cmd = Command::new("rustc");
    cmd.args(["--edition", "2021", "--color", "never"]);
    if json {
        cmd.arg("--error-format=json");
    }
    let o = cmd.arg(file).arg("-o").arg(out).output().unwrap();
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn error_codes(diags: &[Diagnostic]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for d in diags.iter().filter(|d| d.level == Level::Error) {
        if let Some(c) = &d.code {
            *m.entry(c.as_str().to_owned()).or_default() += 1;
        }
    }
    m
}

fn criterion_3(_: &mut Shared) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let catalogue = ErrorCatalogue::default();
    let mut files: Vec<PathBuf> = fs::read_dir(fixtures_dir().join("diagnostics"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let mut elicited = BTreeSet::new();
    for file in &files {
        let expected = file.file_stem().unwrap().to_string_lossy().into_owned();
        let out = tmp.path().join("bin");
        let structured = error_codes(&parse_json_diagnostics(&rustc_stderr(file, true, &out)));
        let human = error_codes(&parse_diagnostics(&rustc_stderr(file, false, &out)));
        assert_eq!(structured, human, "{expected}: parsers disagree");
        assert!(structured.contains_key(&expected), "{expected}: got {structured:?}");
        assert!(catalogue.contains(&ErrorCode::new(&expected).unwrap()));
        elicited.insert(expected);
    }
    let guided: BTreeSet<String> = GUIDED_CODES.iter().map(|c| c.to_string()).collect();
    assert!(elicited.len() >= 12);
    assert!(guided.is_subset(&elicited));
    format!("{} fixtures, {} distinct codes incl. all 8 guided, parsers agree on 100%", files.len(), elicited.len())
}

// ---------------------------------------------------------------------------

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn golden(name: &str, actual: &str) {
    let path = fixtures_dir().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let want = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing snapshot {}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, want, "snapshot {name} differs");
}

const FIG3_MARK: &str = "All variables are immutable by default.";

fn rendered(code: &str, message: &str) -> Diagnostic {
    Diagnostic {
        code: Some(ErrorCode::new(code).unwrap()),
        level: Level::Error,
        message: message.into(),
        rendered: format!("error[{code}]: {message}\n --> main.rs:4:5\n"),
    }
}

fn criterion_4(_: &mut Shared) -> String {
    let catalogue = ErrorCatalogue::default();
    let mut pool: Vec<Option<String>> = catalogue.codes().map(|c| Some(c.as_str().to_owned())).collect();
    pool.extend([Some("E0765".into()), Some("E0004".into()), None]);
    let kit = PromptKit::default();

    let strategy = proptest::collection::vec(proptest::sample::select(pool.clone()), 0..8);
    runner(1000)
        .run(&strategy, |codes| {
            let diags: Vec<Diagnostic> = codes.iter().map(|c| diag(c.as_deref())).collect();
            let hits: BTreeSet<&str> = codes
                .iter()
                .flatten()
                .map(String::as_str)
                .filter(|c| GUIDED_CODES.contains(c))
                .collect();
            prop_assert_eq!(select_guided_phase(&diags), !hits.is_empty());
            match kit.guided(C_DOUBLE, MISMATCH, &diags) {
                Ok(prompt) => {
                    for entry in kit.kb.entries() {
                        let header = format!("Error {}: {}", entry.code.as_str(), entry.title);
                        prop_assert_eq!(prompt.contains(&header), hits.contains(entry.code.as_str()));
                    }
                    prop_assert_eq!(prompt.contains(FIG3_MARK), hits.contains("E0384"));
                }
                Err(_) => prop_assert!(hits.is_empty()),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
        .unwrap();

    let e0384 = kit.guided(C_DOUBLE, MISMATCH, &[rendered("E0384", "cannot assign twice to immutable variable `x`")]).unwrap();
    assert!(e0384.contains(FIG3_MARK));
    golden("guided_e0384.txt", &e0384);
    let pair = [
        rendered("E0308", "mismatched types"),
        rendered("E0502", "cannot borrow `v` as mutable because it is also borrowed as immutable"),
        rendered("E0433", "failed to resolve: use of undeclared crate or module `parser`"),
    ];
    let pair_prompt = kit.guided(C_DOUBLE, MISMATCH, &pair).unwrap();
    assert!(!pair_prompt.contains(FIG3_MARK));
    golden("guided_e0308_e0502.txt", &pair_prompt);
    "gating property held on 1000 random sets; guidance embedded iff targeted; 2 golden prompts match".into()
}

// ---------------------------------------------------------------------------

fn criterion_5(_: &mut Shared) -> String {
    let kit = PromptKit::default();
    let base = kit.base(C_DOUBLE).unwrap();
    let basic = kit
        .repair(C_DOUBLE, UNRESOLVED, &[rendered("E0433", "failed to resolve: use of undeclared crate or module `parser`")])
        .unwrap();
    let guided = kit.guided(C_DOUBLE, MISMATCH, &[rendered("E0308", "mismatched types")]).unwrap();
    let runtime = kit
        .dynamic(C_DOUBLE, PANICS, DynamicErrorKind::Runtime, "thread 'main' panicked at main.rs:8:20:\nindex out of bounds: the len is 0 but the index is 4\nexited with status 101")
        .unwrap();
    let looping = kit
        .dynamic(C_DOUBLE, SPINS, DynamicErrorKind::InfiniteLoop, "the program did not terminate within 10 seconds")
        .unwrap();
    let wrong = kit
        .dynamic(C_DOUBLE, WRONG, DynamicErrorKind::TestCase, "output differs from the expected output at line 1\ninput:\n4\nexpected output:\n8\nactual output:\n0")
        .unwrap();

    for p in [&base, &basic, &guided, &runtime, &looping, &wrong] {
        assert!(p.starts_with(&base));
        assert!(p.contains("Produce only safe Rust code."));
    }
    for p in [&basic, &guided] {
        assert!(p.contains("because it is syntactically incorrect"));
    }
    assert!(runtime.contains("gives the following runtime error"));
    assert!(looping.contains("gives the following infinite loop error"));
    assert!(wrong.contains("gives the following test case error"));
    for (name, text) in [
        ("base.txt", &base),
        ("basic_repair.txt", &basic),
        ("guided_repair.txt", &guided),
        ("dynamic_runtime.txt", &runtime),
        ("dynamic_infinite_loop.txt", &looping),
        ("dynamic_test_case.txt", &wrong),
    ] {
        golden(name, text);
    }
    "anchor phrases present, 6 snapshots match".into()
}

// ---------------------------------------------------------------------------

fn transcript_bytes(run: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in fs::read_dir(run).unwrap() {
        let p = e.unwrap().path().join(TRANSCRIPT_FILE);
        if p.is_file() {
            m.insert(p.parent().unwrap().file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap());
        }
    }
    m
}

/// Names the first differing line so a failure is diagnosable from one line.
fn assert_same_transcripts(got: &BTreeMap<String, Vec<u8>>, want: &BTreeMap<String, Vec<u8>>, what: &str) {
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>(), "{what}: program sets differ");
    for (id, bytes) in want {
        let (a, b) = (String::from_utf8_lossy(&got[id]), String::from_utf8_lossy(bytes));
        if let Some((n, (x, y))) = a.lines().zip(b.lines()).enumerate().find(|(_, (x, y))| x != y) {
            let at = x.char_indices().zip(y.chars()).find(|((_, p), q)| p != q).map_or(0, |((i, _), _)| i);
            let lo = at.saturating_sub(60);
            panic!("{what}: {id} line {} differs near {:?} vs {:?}", n + 1, x.get(lo..).unwrap_or(x).chars().take(120).collect::<String>(), y.get(lo..).unwrap_or(y).chars().take(120).collect::<String>());
        }
        assert_eq!(a.lines().count(), b.lines().count(), "{what}: {id} line count differs");
    }
}

fn criterion_6(shared: &mut Shared) -> String {
    if shared.fixture.is_none() {
        criterion_1(shared);
    }
    let fixture = shared.fixture.as_ref().unwrap();
    let (run_a, summary_a) = shared.first_run.as_ref().unwrap();
    let bytes_a = transcript_bytes(run_a);
    let report_a = CampaignReport::from_transcripts(&summary_a.transcripts).unwrap();

    let (run_b, _) = fixture.run("b", &CampaignOptions::default());
    assert_same_transcripts(&transcript_bytes(&run_b), &bytes_a, "second run");

    // interrupted campaign: five programs finish, the sixth dies mid-way
    let limited = CampaignOptions { limit: Some(5), ..CampaignOptions::default() };
    let (run_c, partial) = fixture.run("c", &limited);
    assert_eq!(partial.ran.len(), 5);
    assert!(!partial.is_complete());
    let done: BTreeSet<String> = partial.ran.iter().cloned().collect();
    let before = transcript_bytes(&run_c);
    let victim = &partial.pending[0];
    let torn: Vec<&str> = std::str::from_utf8(&bytes_a[victim]).unwrap().lines().take(2).collect();
    fs::create_dir_all(run_c.join(victim)).unwrap();
    fs::write(run_c.join(victim).join(TRANSCRIPT_FILE), format!("{}\n{}\n{{\"record\":\"che", torn[0], torn[1])).unwrap();

    let resume = CampaignOptions { resume: true, ..CampaignOptions::default() };
    let s = run_campaign(&fixture.programs, &fixture.gateway(), &fixture.config, &run_c, &resume).unwrap();
    assert!(s.is_complete());
    let rerun: BTreeSet<String> = s.ran.iter().cloned().collect();
    assert!(rerun.is_disjoint(&done), "completed programs re-ran: {:?}", rerun.intersection(&done).collect::<Vec<_>>());
    assert!(rerun.contains(victim));
    assert_eq!(s.skipped.len(), 5);
    let after = transcript_bytes(&run_c);
    for id in &done {
        assert_eq!(after[id], before[id], "{id} rewritten");
    }
    assert_eq!(after, bytes_a, "resumed transcripts differ from an uninterrupted run");
    assert!(run_c.join(STATE_FILE).is_file());
    let report_c = CampaignReport::from_transcripts(&load_transcripts(&run_c).unwrap()).unwrap();
    assert_eq!(report_c.to_json(), report_a.to_json());
    "two workers=1 runs byte-identical; resume re-ran 0 of 5 completed programs, final report identical".into()
}

// ---------------------------------------------------------------------------

fn criterion_7(_: &mut Shared) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let limits = ExecLimits { wall_timeout_ms: 1000, ..ExecLimits::default() };
    let cases = vec![
        TestCase { input: "4\n".into(), expected_output: "8\n".into() },
        TestCase { input: "21\n".into(), expected_output: "42\n".into() },
    ];
    let bins = [("pass", GOOD, Verdict::Pass), ("panic", PANICS, Verdict::RuntimeError), ("loop", SPINS, Verdict::InfiniteLoop), ("wrong", WRONG, Verdict::TestCaseError)];
    let mut loop_time = Duration::ZERO;
    for (name, src, want) in bins {
        let r = compile(src, &tmp.path().join(name), &CompilerConfig::default()).unwrap();
        assert!(r.succeeded(), "{name}");
        let start = Instant::now();
        let v = run_tests(r.binary_path.as_ref().unwrap(), &cases, &limits).unwrap();
        let took = start.elapsed();
        assert_eq!(v.verdict, want, "{name}: {}", v.detail);
        if want == Verdict::InfiniteLoop {
            assert!(took <= limits.wall_timeout() + Duration::from_secs(1), "{took:?}");
            loop_time = took;
        }
    }
    format!("4/4 verdicts correct; loop detected after {:.2}s (limit 2.00s)", loop_time.as_secs_f64())
}

// ---------------------------------------------------------------------------

fn criterion_8(_: &mut Shared) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let config = MitigationConfig::default();
    let fixtures = vuln_fixtures();
    let mut verdicts = Vec::new();
    for f in &fixtures {
        let c = build_c(&f.name, &f.c_source, &tmp.path().join(&f.name).join("c"), &CCompilerConfig::default()).unwrap();
        let r = compile(&f.translation, &tmp.path().join(&f.name).join("rs"), &CompilerConfig::default()).unwrap();
        assert!(r.succeeded(), "{}", f.name);
        let v = replay_mitigation(&c, r.binary_path.as_ref().unwrap(), Some(&f.trigger), &config).unwrap();
        assert!(v.kind.is_mitigated(), "{}: {:?}", f.name, v);
        verdicts.push(format!("{}={}", f.name, v.kind.as_str()));
    }
    let checker = CheckerConfig::default();
    let checker_part = if checker_available(&checker) {
        let mut correct = 0;
        for f in &fixtures {
            let p = SourceProgram {
                id: f.name.clone(),
                source_text: f.c_source.clone(),
                test_cases: Vec::new(),
                metrics: Default::default(),
                coverage: None,
            };
            let o = verify_c_program(&p, &checker, &tmp.path().join(&f.name).join("scan")).unwrap();
            if o.kind == VerificationKind::Failed && o.findings.iter().any(|x| x.vuln_type.key() == f.category) {
                correct += 1;
            }
        }
        assert!(correct >= 4, "checker categorised {correct}/5");
        format!("checker categorised {correct}/5")
    } else {
        format!(
            "checker part SKIPPED: `{}` is not installed",
            checker.command[0]
        )
    };
    format!("replay mitigated 5/5 ({}); {checker_part}", verdicts.join(", "))
}

// ---------------------------------------------------------------------------

fn criterion_9(_: &mut Shared) -> String {
    let program = (0usize..7, 0u64..60, 0u64..12, 1u64..9);
    let strategy = proptest::collection::vec(program, 1..40);
    runner(1000)
        .run(&strategy, |rows| {
            let ts: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, &(o, loc, ptrs, fns))| {
                    let id = format!("p{i}");
                    match Outcome::ALL.get(o) {
                        Some(&outcome) => {
                            let mut t = simple(&id, outcome);
                            t.metrics.loc = loc;
                            t.metrics.pointers = ptrs;
                            t.metrics.functions = fns;
                            t
                        }
                        // index 6: an unfinished transcript, excluded
                        None => TranscriptBuilder::new(&id).metrics(loc, ptrs, fns).unfinished(),
                    }
                })
                .collect();
            let complete = ts.iter().filter(|t| t.is_complete()).count();
            for metric in Metric::ALL {
                let set = cdf_by_metric(&ts, metric);
                if complete == 0 {
                    continue;
                }
                for curve in set.curves.values() {
                    prop_assert_eq!(curve.len(), set.values.len());
                    prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]), "not monotone");
                    prop_assert!(curve.iter().all(|v| (0.0..=1.0).contains(v)));
                }
                // stacked curves at each value give the share of programs
                // at or below it
                let measured: Vec<u64> = ts
                    .iter()
                    .filter(|t| t.is_complete())
                    .map(|t| match metric {
                        Metric::Loc => t.metrics.loc,
                        Metric::Pointers => t.metrics.pointers,
                        Metric::Functions => t.metrics.functions,
                    })
                    .collect();
                for (k, v) in set.values.iter().enumerate() {
                    let stacked: f64 = set.curves.values().map(|c| c[k]).sum();
                    let below = measured.iter().filter(|m| **m <= *v).count() as f64 / complete as f64;
                    prop_assert!((stacked - below).abs() < 1e-9, "at {}: {} vs {}", v, stacked, below);
                }
                let last = set.values.len() - 1;
                let total: f64 = set.curves.values().map(|c| c[last]).sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "sum at max {}", total);
            }
            Ok(())
        })
        .map_err(|e: proptest::test_runner::TestError<_>| e.to_string())
        .unwrap();
    "1000 random campaigns: curves monotone, in [0,1], stacking to the at-or-below share and to 1 at the max".into()
}

// ---------------------------------------------------------------------------

type Criterion = fn(&mut Shared) -> String;

fn main() {
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "scripted end-to-end campaign", criterion_1),
        (2, "metric oracles", criterion_2),
        (3, "diagnostic parser coverage", criterion_3),
        (4, "guided-phase gating", criterion_4),
        (5, "prompt fidelity", criterion_5),
        (6, "determinism and resumability", criterion_6),
        (7, "validation classifier", criterion_7),
        (8, "mitigation replay", criterion_8),
        (9, "CDF partition property", criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        match panic::catch_unwind(AssertUnwindSafe(|| f(&mut shared))) {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {n} ({name}): FAIL: {}", msg.lines().next().unwrap_or(""));
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
