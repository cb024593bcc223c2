//! Bounded model checking of the C originals and replay of the flaws it
//! finds against the translations.
//!
//! The checker is an external program. Its text output is parsed for the
//! final verdict, the violated properties and the counterexample states that
//! assign values read from standard input.

mod batch;
mod replay;

use std::fmt;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SourceProgram, SOURCE_FILE};
use crate::process::{self, Limits, Termination};

pub use self::batch::{
    load_scan, mitigate_run, scan_corpus, ContingencyRow, ContingencyTable, MitigationEntry,
    MitigationReport, ScanSummary, MITIGATION_DIR, MITIGATION_REPORT, SCAN_FILE, SCAN_SUMMARY,
    TRIGGER_EXT,
};
pub use self::replay::{
    build_c, decide, replay_mitigation, CBuildKind, CBuilds, CCompilerConfig, MitigationConfig,
    MitigationKind, MitigationVerdict, PanicSignature, RunRecord,
};

const CHECKER_OUTPUT_CAP: usize = 16 << 20;
const RAW_EXCERPT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnType {
    BufferOverflow,
    ArrayBounds,
    ArithmeticOverflow,
    NullDeref,
    DivByZero,
    VlaOverflow,
    ForgottenMemory,
    InvalidPointer,
    InvalidatedObject,
    InvalidFree,
    MisalignedAccess,
    Other(String),
}

impl VulnType {
    /// Every named category; `Other` is the fallback.
    pub const NAMED: [VulnType; 11] = [
        VulnType::BufferOverflow,
        VulnType::ArrayBounds,
        VulnType::ArithmeticOverflow,
        VulnType::NullDeref,
        VulnType::DivByZero,
        VulnType::VlaOverflow,
        VulnType::ForgottenMemory,
        VulnType::InvalidPointer,
        VulnType::InvalidatedObject,
        VulnType::InvalidFree,
        VulnType::MisalignedAccess,
    ];

    /// Snake-case key used in summaries. All `Other` texts share one key.
    pub fn key(&self) -> &'static str {
        match self {
            VulnType::BufferOverflow => "buffer_overflow",
            VulnType::ArrayBounds => "array_bounds",
            VulnType::ArithmeticOverflow => "arithmetic_overflow",
            VulnType::NullDeref => "null_deref",
            VulnType::DivByZero => "div_by_zero",
            VulnType::VlaOverflow => "vla_overflow",
            VulnType::ForgottenMemory => "forgotten_memory",
            VulnType::InvalidPointer => "invalid_pointer",
            VulnType::InvalidatedObject => "invalidated_object",
            VulnType::InvalidFree => "invalid_free",
            VulnType::MisalignedAccess => "misaligned_access",
            VulnType::Other(_) => "other",
        }
    }

    /// Human-readable category name as used in vulnerability tables.
    pub fn label(&self) -> &str {
        match self {
            VulnType::BufferOverflow => "Buffer Overflow",
            VulnType::ArrayBounds => "Array Bounds Violated",
            VulnType::ArithmeticOverflow => "Arithmetic Overflow",
            VulnType::NullDeref => "Dereference Failure: NULL Pointer",
            VulnType::DivByZero => "Division by Zero",
            VulnType::VlaOverflow => "VLA Array Size Overflows Address Space",
            VulnType::ForgottenMemory => "Dereference Failure: Forgotten Memory",
            VulnType::InvalidPointer => "Dereference Failure: Invalid Pointer",
            VulnType::InvalidatedObject => "Dereference Failure: Invalidated Dynamic Object",
            VulnType::InvalidFree => "Dereference Failure: Invalid Pointer Freed",
            VulnType::MisalignedAccess => "Dereference Failure: Misaligned Access to Data Object",
            VulnType::Other(text) => text,
        }
    }
}

impl fmt::Display for VulnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a violation message to its category, ignoring case. Never fails:
/// unrecognised text becomes `Other` carrying the trimmed message.
pub fn classify_finding(raw_line: &str) -> VulnType {
    let s = raw_line.to_lowercase();
    let has = |needle: &str| s.contains(needle);
    // more specific phrases first: "invalid pointer freed" contains
    // "invalid pointer", the VLA message contains "overflow"
    if has("array bounds violated") {
        VulnType::ArrayBounds
    } else if has("invalid pointer freed") {
        VulnType::InvalidFree
    } else if has("null pointer") {
        VulnType::NullDeref
    } else if has("forgotten memory") {
        VulnType::ForgottenMemory
    } else if has("invalidated dynamic object") {
        VulnType::InvalidatedObject
    } else if has("misaligned") || has("alignment") {
        VulnType::MisalignedAccess
    } else if has("invalid pointer") {
        VulnType::InvalidPointer
    } else if has("division by zero") {
        VulnType::DivByZero
    } else if has("vla array size") || (has("vla") && has("address space")) {
        VulnType::VlaOverflow
    } else if has("arithmetic overflow") {
        VulnType::ArithmeticOverflow
    } else if has("buffer overflow") || has("out of bounds") {
        VulnType::BufferOverflow
    } else {
        VulnType::Other(raw_line.trim().to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub vuln_type: VulnType,
    pub location: Option<Location>,
    /// Standard input that drives the C program into the violation; absent
    /// when the counterexample could not be turned into input.
    pub trigger_input: Option<String>,
    /// The violated-property block as printed by the checker.
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationKind {
    Failed,
    Successful,
    ScanError,
}

impl VerificationKind {
    pub const ALL: [VerificationKind; 3] = [
        VerificationKind::Failed,
        VerificationKind::Successful,
        VerificationKind::ScanError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationKind::Failed => "failed",
            VerificationKind::Successful => "successful",
            VerificationKind::ScanError => "scan_error",
        }
    }
}

/// Invariant: `kind == Failed` exactly when `findings` is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub kind: VerificationKind,
    pub findings: Vec<Finding>,
    pub duration_ms: u64,
    /// Why the scan errored; empty otherwise.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckerConfig {
    /// Program and leading arguments; the source file follows them.
    pub command: Vec<String>,
    /// Arguments after the source file.
    pub flags: Vec<String>,
    pub timeout_secs: u64,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            command: vec!["esbmc".into()],
            flags: [
                "--overflow-check",
                "--memory-leak-check",
                "--unwind",
                "8",
                "--no-unwinding-assertions",
            ]
            .map(String::from)
            .to_vec(),
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Error)]
pub enum VulnError {
    #[error("checker command is empty")]
    EmptyCommand,
    #[error("checker `{0}` is not installed; vulnerability scanning is disabled")]
    CheckerMissing(String),
    #[error("C compiler `{0}` is not installed")]
    CCompilerMissing(String),
    #[error("C program {program} does not build:\n{stderr}")]
    CBuild { program: String, stderr: String },
    #[error("cannot run {command}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is malformed: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("cannot read run: {0}")]
    Run(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VulnError + '_ {
    move |source| VulnError::Io {
        path: path.to_owned(),
        source,
    }
}

fn find_program(name: &str) -> Option<PathBuf> {
    let candidate = Path::new(name);
    if name.contains('/') {
        return candidate.is_file().then(|| candidate.to_owned());
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(name))
            .find(|p| p.is_file())
    })
}

/// Whether the configured checker can be started. When it cannot, callers
/// report [`VulnError::CheckerMissing`] instead of scanning.
pub fn checker_available(config: &CheckerConfig) -> bool {
    config
        .command
        .first()
        .is_some_and(|c| find_program(c).is_some())
}

fn excerpt(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut end = max;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}

/// Parsed checker transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckerReport {
    /// `Some(true)` for a failed verification, `Some(false)` for a successful
    /// one, `None` when the output carries no verdict.
    pub failed: Option<bool>,
    pub findings: Vec<Finding>,
}

fn input_lines(source: &str) -> Vec<bool> {
    static INPUT: OnceLock<Regex> = OnceLock::new();
    let re = INPUT.get_or_init(|| {
        Regex::new(r"\b(scanf|fscanf|sscanf|getchar|fgetc|getc|fgets|gets|getline|read)\s*\(")
            .expect("static regex")
    });
    source.lines().map(|l| re.is_match(l)).collect()
}

fn scalar(value: &str) -> Option<String> {
    static NUM: OnceLock<Regex> = OnceLock::new();
    static CHR: OnceLock<Regex> = OnceLock::new();
    let num = NUM.get_or_init(|| {
        Regex::new(r"^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?[fFlLuU]*$").expect("static regex")
    });
    let chr = CHR.get_or_init(|| Regex::new(r"^'(.)'$").expect("static regex"));
    let v = value.trim();
    if num.is_match(v) {
        return Some(v.trim_end_matches(['f', 'F', 'l', 'L', 'u', 'U']).to_owned());
    }
    chr.captures(v).map(|c| c[1].to_owned())
}

/// Turns the states of one counterexample into an input line. `states`
/// holds (source line, lhs, value) for states located in the program file.
fn derive_trigger(states: &[(u32, String, String)], inputs: &[bool]) -> Option<String> {
    if !inputs.iter().any(|&b| b) {
        // the program reads nothing, so empty input reproduces the run
        return Some(String::new());
    }
    let mut values = Vec::new();
    for (line, lhs, value) in states {
        let reads = usize::try_from(*line)
            .ok()
            .and_then(|l| l.checked_sub(1))
            .and_then(|i| inputs.get(i))
            .copied()
            .unwrap_or(false);
        if !reads || lhs.contains("return_value") {
            continue;
        }
        values.push(scalar(value)?);
    }
    (!values.is_empty()).then(|| values.join(" ") + "\n")
}

/// Parses checker output for `source` (the checked C text). Violations with
/// no recognisable counterexample keep `trigger_input` absent.
pub fn parse_checker_output(output: &str, source: &str) -> CheckerReport {
    static STATE: OnceLock<Regex> = OnceLock::new();
    static ASSIGN: OnceLock<Regex> = OnceLock::new();
    static LOC: OnceLock<Regex> = OnceLock::new();
    let state_re = STATE.get_or_init(|| {
        Regex::new(r"^State \d+(?: file (\S+) line (\d+))?").expect("static regex")
    });
    let assign_re = ASSIGN.get_or_init(|| {
        Regex::new(r"^\s+([^=\s][^=]*?)\s*=\s*(.+?)(?:\s+\([01 ]+\))?\s*$").expect("static regex")
    });
    let loc_re =
        LOC.get_or_init(|| Regex::new(r"^\s*file (\S+) line (\d+)").expect("static regex"));
    let inputs = input_lines(source);

    let lines: Vec<&str> = output.lines().collect();
    let mut failed = None;
    let mut findings = Vec::new();
    let mut states: Vec<(u32, String, String)> = Vec::new();
    let mut current_line: Option<u32> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let trimmed = line.trim();
        if trimmed == "[Counterexample]" {
            states.clear();
            current_line = None;
        } else if let Some(c) = state_re.captures(line) {
            current_line = c.get(2).and_then(|m| m.as_str().parse().ok());
        } else if trimmed == "Violated property:" {
            let mut block = Vec::new();
            i += 1;
            while i < lines.len() && !lines[i].trim().is_empty() {
                block.push(lines[i].trim());
                i += 1;
            }
            let (location, rest) = match block.first().and_then(|l| loc_re.captures(l)) {
                Some(c) => (
                    Some(Location {
                        file: c[1].to_owned(),
                        line: c[2].parse().unwrap_or(0),
                    }),
                    &block[1..],
                ),
                None => (None, &block[..]),
            };
            let message = rest.first().copied().unwrap_or("unparsed violation");
            findings.push(Finding {
                vuln_type: classify_finding(message),
                location,
                trigger_input: derive_trigger(&states, &inputs),
                raw: excerpt(&block.join("\n"), RAW_EXCERPT).to_owned(),
            });
            states.clear();
            current_line = None;
            continue;
        } else if trimmed == "VERIFICATION FAILED" {
            failed = Some(true);
        } else if trimmed == "VERIFICATION SUCCESSFUL" {
            failed = Some(false);
        } else if let (Some(l), Some(c)) = (current_line, assign_re.captures(line)) {
            if !line.starts_with("---") {
                states.push((l, c[1].trim().to_owned(), c[2].trim().to_owned()));
            }
        }
        i += 1;
    }
    CheckerReport { failed, findings }
}

fn outcome_from(report: CheckerReport, exit: Termination, tail: &str) -> (VerificationKind, Vec<Finding>, String) {
    match report.failed {
        Some(true) => {
            let mut findings = report.findings;
            if findings.is_empty() {
                // keep the failed/findings invariant even when the property
                // block could not be parsed
                findings.push(Finding {
                    vuln_type: VulnType::Other("unparsed violation".into()),
                    location: None,
                    trigger_input: None,
                    raw: tail.to_owned(),
                });
            }
            (VerificationKind::Failed, findings, String::new())
        }
        Some(false) => (VerificationKind::Successful, Vec::new(), String::new()),
        None => (
            VerificationKind::ScanError,
            Vec::new(),
            format!("checker gave no verdict ({})", describe_exit(exit)),
        ),
    }
}

fn describe_exit(t: Termination) -> String {
    match t {
        Termination::Exited(c) => format!("exited with status {c}"),
        Termination::Signaled(s) => format!("killed by signal {s}"),
        Termination::TimedOut => "timed out".into(),
        Termination::OutputLimit => "output limit exceeded".into(),
    }
}

/// Runs the checker on `program`, writing its source into `workdir`.
/// Crashes, timeouts and verdict-less output become `ScanError`.
pub fn verify_c_program(
    program: &SourceProgram,
    config: &CheckerConfig,
    workdir: &Path,
) -> Result<VerificationOutcome, VulnError> {
    let (exe, lead) = config.command.split_first().ok_or(VulnError::EmptyCommand)?;
    if !checker_available(config) {
        return Err(VulnError::CheckerMissing(exe.clone()));
    }
    std::fs::create_dir_all(workdir).map_err(io_err(workdir))?;
    let source_path = workdir.join(SOURCE_FILE);
    std::fs::write(&source_path, &program.source_text).map_err(io_err(&source_path))?;

    let mut cmd = Command::new(exe);
    cmd.args(lead)
        .arg(SOURCE_FILE)
        .args(&config.flags)
        .current_dir(workdir);
    let timeout = Duration::from_secs(config.timeout_secs);
    let limits = Limits {
        wall_timeout: timeout,
        memory_cap: None,
        output_cap: CHECKER_OUTPUT_CAP,
    };
    let out = process::run(cmd, b"", &limits).map_err(|source| match source.kind() {
        ErrorKind::NotFound => VulnError::CheckerMissing(exe.clone()),
        _ => VulnError::Spawn {
            command: exe.clone(),
            source,
        },
    })?;
    let duration_ms = u64::try_from(out.duration.as_millis()).unwrap_or(u64::MAX);
    let text = out.stdout_lossy() + &out.stderr_lossy();

    let (kind, findings, detail) = match out.termination {
        Termination::TimedOut => (
            VerificationKind::ScanError,
            Vec::new(),
            format!("checker timed out after {} s", timeout.as_secs_f64()),
        ),
        Termination::Signaled(s) => (
            VerificationKind::ScanError,
            Vec::new(),
            format!("checker crashed (signal {s})"),
        ),
        t => {
            let tail_start = text.len().saturating_sub(RAW_EXCERPT);
            let mut start = tail_start;
            while !text.is_char_boundary(start) {
                start += 1;
            }
            outcome_from(
                parse_checker_output(&text, &program.source_text),
                t,
                &text[start..],
            )
        }
    };
    Ok(VerificationOutcome {
        kind,
        findings,
        duration_ms,
        detail,
    })
}
