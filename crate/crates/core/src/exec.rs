//! Running compiled translations against their test cases.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TestCase;
use crate::process::{self, Limits, ProcessOutput, Termination};

pub const OUTPUT_LIMIT_MESSAGE: &str = "output limit exceeded";

/// Excerpts of outputs and stderr kept in verdict details.
const DETAIL_EXCERPT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecLimits {
    pub wall_timeout_ms: u64,
    pub memory_cap: u64,
    pub output_cap: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_timeout_ms: 10_000,
            memory_cap: 1 << 30,
            output_cap: 8 << 20,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), ExecError> {
        if self.wall_timeout_ms == 0 || self.memory_cap == 0 || self.output_cap == 0 {
            return Err(ExecError::InvalidLimits);
        }
        Ok(())
    }

    pub fn wall_timeout(&self) -> Duration {
        Duration::from_millis(self.wall_timeout_ms)
    }

    pub(crate) fn process_limits(&self) -> Limits {
        Limits {
            wall_timeout: self.wall_timeout(),
            memory_cap: Some(self.memory_cap),
            output_cap: usize::try_from(self.output_cap).unwrap_or(usize::MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    RuntimeError,
    InfiniteLoop,
    TestCaseError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub status: Verdict,
    pub termination: Termination,
    #[serde(skip)]
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub verdict: Verdict,
    /// Zero-based index into the program's test cases.
    pub failing_case: Option<usize>,
    pub detail: String,
    pub per_case: Vec<CaseRecord>,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("binary {0} does not exist")]
    MissingBinary(PathBuf),
    #[error("execution limits must all be positive")]
    InvalidLimits,
    #[error("cannot run {path}: {source}")]
    Spawn {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Message used in place of runtime output when a case times out.
pub fn infinite_loop_notice(timeout: Duration) -> String {
    format!(
        "the program did not terminate within {} seconds",
        timeout.as_secs_f64()
    )
}

fn normalize(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).trim_end())
        .collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

/// Equality after unifying line endings and dropping trailing whitespace on
/// each line and trailing blank lines. Interior whitespace is significant.
pub fn compare_output(actual: &str, expected: &str) -> bool {
    normalize(actual) == normalize(expected)
}

fn excerpt(text: &str) -> &str {
    if text.len() <= DETAIL_EXCERPT {
        return text;
    }
    let mut end = DETAIL_EXCERPT;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}

pub fn signal_name(sig: i32) -> &'static str {
    match sig {
        libc::SIGSEGV => "SIGSEGV",
        libc::SIGABRT => "SIGABRT",
        libc::SIGFPE => "SIGFPE",
        libc::SIGBUS => "SIGBUS",
        libc::SIGILL => "SIGILL",
        libc::SIGKILL => "SIGKILL",
        libc::SIGTRAP => "SIGTRAP",
        _ => "signal",
    }
}

fn mismatch_detail(case: &TestCase, actual: &str) -> String {
    let got = normalize(actual);
    let want = normalize(&case.expected_output);
    let line = got
        .iter()
        .zip(&want)
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| got.len().min(want.len()));
    format!(
        "output differs from the expected output at line {}\ninput:\n{}\nexpected output:\n{}\nactual output:\n{}",
        line + 1,
        excerpt(&case.input).trim_end(),
        excerpt(&case.expected_output).trim_end(),
        excerpt(actual).trim_end(),
    )
}

/// Drops the OS thread id newer toolchains print in panic messages
/// (`thread 'main' (4242) panicked`); it differs on every run and would
/// leak into transcripts and repair prompts.
pub fn scrub_panic_thread_ids(stderr: &str) -> std::borrow::Cow<'_, str> {
    static TID: OnceLock<Regex> = OnceLock::new();
    TID.get_or_init(|| Regex::new(r"(?m)^(thread '[^'\n]*') \(\d+\) panicked").expect("static regex"))
        .replace_all(stderr, "$1 panicked")
}

/// Maps one execution to a verdict and the detail text for it.
pub fn classify(out: &ProcessOutput, case: &TestCase, timeout: Duration) -> (Verdict, String) {
    let stderr = out.stderr_lossy();
    let stderr = scrub_panic_thread_ids(&stderr);
    let stderr = excerpt(stderr.trim_end());
    match out.termination {
        Termination::TimedOut => (Verdict::InfiniteLoop, infinite_loop_notice(timeout)),
        Termination::OutputLimit => (Verdict::RuntimeError, OUTPUT_LIMIT_MESSAGE.to_owned()),
        Termination::Signaled(sig) => (
            Verdict::RuntimeError,
            format!("terminated by {} ({sig})\n{stderr}", signal_name(sig))
                .trim_end()
                .to_owned(),
        ),
        Termination::Exited(code) if code != 0 => (
            Verdict::RuntimeError,
            if stderr.is_empty() {
                format!("exited with status {code}")
            } else {
                format!("{stderr}\nexited with status {code}")
            },
        ),
        Termination::Exited(_) => {
            let actual = out.stdout_lossy();
            if compare_output(&actual, &case.expected_output) {
                (Verdict::Pass, String::new())
            } else {
                (Verdict::TestCaseError, mismatch_detail(case, &actual))
            }
        }
    }
}

/// Runs the cases in order and stops at the first failure.
pub fn run_tests(
    binary: &Path,
    cases: &[TestCase],
    limits: &ExecLimits,
) -> Result<ValidationResult, ExecError> {
    limits.validate()?;
    if !binary.is_file() {
        return Err(ExecError::MissingBinary(binary.to_owned()));
    }
    let mut per_case = Vec::with_capacity(cases.len());
    for (index, case) in cases.iter().enumerate() {
        let mut cmd = Command::new(binary);
        // backtraces would make runtime details differ between runs
        cmd.env_remove("RUST_BACKTRACE").env_remove("RUST_LIB_BACKTRACE");
        let out = process::run(cmd, case.input.as_bytes(), &limits.process_limits()).map_err(
            |source| ExecError::Spawn {
                path: binary.to_owned(),
                source,
            },
        )?;
        let (verdict, detail) = classify(&out, case, limits.wall_timeout());
        per_case.push(CaseRecord {
            status: verdict,
            termination: out.termination,
            duration: out.duration,
        });
        if verdict != Verdict::Pass {
            return Ok(ValidationResult {
                verdict,
                failing_case: Some(index),
                detail,
                per_case,
            });
        }
    }
    Ok(ValidationResult {
        verdict: Verdict::Pass,
        failing_case: None,
        detail: String::new(),
        per_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn panic_thread_ids_are_scrubbed() {
        let raw = "\nthread 'main' (17008) panicked at main.rs:8:21:\nboom\nthread 'worker (2)' (9) panicked at x.rs:1:1:\n";
        assert_eq!(
            scrub_panic_thread_ids(raw),
            "\nthread 'main' panicked at main.rs:8:21:\nboom\nthread 'worker (2)' panicked at x.rs:1:1:\n"
        );
        let old = "thread 'main' panicked at main.rs:1:1:\n";
        assert_eq!(scrub_panic_thread_ids(old), old);
    }

    #[test]
    fn comparison_rules() {
        assert!(compare_output("1 2\n", "1 2\n"));
        assert!(compare_output("1 2", "1 2\n"));
        assert!(compare_output("1 2\r\n3  \n\n\n", "1 2\n3"));
        assert!(!compare_output("1 2", "1  2"));
        assert!(!compare_output(" 1", "1"));
        assert!(!compare_output("1\n\n2", "1\n2"));
    }

    #[test]
    fn notice_formats_seconds() {
        assert_eq!(
            infinite_loop_notice(Duration::from_secs(10)),
            "the program did not terminate within 10 seconds"
        );
        assert_eq!(
            infinite_loop_notice(Duration::from_millis(1500)),
            "the program did not terminate within 1.5 seconds"
        );
    }

    #[test]
    fn zero_limits_rejected() {
        let limits = ExecLimits {
            wall_timeout_ms: 0,
            ..ExecLimits::default()
        };
        assert!(matches!(limits.validate(), Err(ExecError::InvalidLimits)));
    }

    #[test]
    fn missing_binary() {
        let r = run_tests(Path::new("/no/such/bin"), &[], &ExecLimits::default());
        assert!(matches!(r, Err(ExecError::MissingBinary(_))));
    }

    fn termination() -> impl Strategy<Value = Termination> {
        prop_oneof![
            (-300i32..300).prop_map(Termination::Exited),
            (1i32..64).prop_map(Termination::Signaled),
            Just(Termination::TimedOut),
            Just(Termination::OutputLimit),
        ]
    }

    proptest! {
        #[test]
        fn compare_is_reflexive_and_symmetric(a in "[ a-c1\r\n]{0,20}", b in "[ a-c1\r\n]{0,20}") {
            prop_assert!(compare_output(&a, &a));
            prop_assert_eq!(compare_output(&a, &b), compare_output(&b, &a));
        }

        #[test]
        fn every_termination_gets_exactly_one_verdict(
            t in termination(),
            stdout in "[a-c\n]{0,10}",
            expected in "[a-c\n]{0,10}",
        ) {
            let out = ProcessOutput {
                termination: t,
                stdout: stdout.clone().into_bytes(),
                stderr: Vec::new(),
                duration: Duration::ZERO,
            };
            let case = TestCase { input: String::new(), expected_output: expected.clone() };
            let (verdict, detail) = classify(&out, &case, Duration::from_secs(1));
            let want = match t {
                Termination::TimedOut => Verdict::InfiniteLoop,
                Termination::Exited(0) if compare_output(&stdout, &expected) => Verdict::Pass,
                Termination::Exited(0) => Verdict::TestCaseError,
                _ => Verdict::RuntimeError,
            };
            prop_assert_eq!(verdict, want);
            prop_assert_eq!(detail.is_empty(), verdict == Verdict::Pass);
        }
    }
}
