//! Building the C original and replaying a trigger input against it and the
//! translation.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{io_err, VulnError};
use crate::corpus::SOURCE_FILE;
use crate::exec::{signal_name, ExecLimits};
use crate::process::{self, Limits, ProcessOutput, Termination};

const STDERR_EXCERPT: usize = 2048;
const C_OUTPUT_CAP: usize = 64 << 10;

/// Markers the sanitizer runtimes print when they catch a fault.
const SANITIZER_MARKERS: [&str; 3] = ["runtime error:", "AddressSanitizer", "UndefinedBehaviorSanitizer"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CCompilerConfig {
    /// Compiler and flags shared by both builds; source and output follow.
    pub command: Vec<String>,
    /// Extra flags of the instrumented build.
    pub instrument_flags: Vec<String>,
    /// Flags placed after the source file.
    pub link_flags: Vec<String>,
    pub timeout_secs: u64,
}

impl Default for CCompilerConfig {
    fn default() -> Self {
        CCompilerConfig {
            command: ["gcc", "-O0", "-w"].map(String::from).to_vec(),
            instrument_flags: [
                "-g",
                "-fsanitize=address,undefined",
                "-fno-sanitize-recover=all",
                "-fno-omit-frame-pointer",
            ]
            .map(String::from)
            .to_vec(),
            link_flags: vec!["-lm".into()],
            timeout_secs: 60,
        }
    }
}

/// How a safe panic of the translation shows up from outside the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanicSignature {
    pub exit_code: i32,
    pub stderr_marker: String,
}

impl Default for PanicSignature {
    fn default() -> Self {
        PanicSignature {
            exit_code: 101,
            stderr_marker: "panicked".into(),
        }
    }
}

impl PanicSignature {
    pub fn matches(&self, run: &RunRecord) -> bool {
        run.termination == Termination::Exited(self.exit_code) && run.stderr.contains(&self.stderr_marker)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub c_compiler: CCompilerConfig,
    pub limits: ExecLimits,
    pub panic: PanicSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CBuildKind {
    Plain,
    Instrumented,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CBuilds {
    pub plain: PathBuf,
    /// Absent when the toolchain cannot build the instrumented variant.
    pub instrumented: Option<PathBuf>,
}

fn compile_c(
    workdir: &Path,
    output: &str,
    config: &CCompilerConfig,
    extra: &[String],
) -> Result<Result<PathBuf, String>, VulnError> {
    let (exe, args) = config.command.split_first().ok_or(VulnError::EmptyCommand)?;
    let mut cmd = Command::new(exe);
    cmd.args(args)
        .args(extra)
        .arg(SOURCE_FILE)
        .arg("-o")
        .arg(output)
        .args(&config.link_flags)
        .current_dir(workdir);
    let limits = Limits {
        wall_timeout: Duration::from_secs(config.timeout_secs),
        memory_cap: None,
        output_cap: C_OUTPUT_CAP,
    };
    let out = process::run(cmd, b"", &limits).map_err(|source| match source.kind() {
        ErrorKind::NotFound => VulnError::CCompilerMissing(exe.clone()),
        _ => VulnError::Spawn {
            command: exe.clone(),
            source,
        },
    })?;
    Ok(if out.termination.is_success() {
        Ok(workdir.join(output))
    } else {
        Err(format!("{}{}", out.stderr_lossy(), describe(&out.termination)))
    })
}

/// Builds `source` into `workdir` twice: plain, and instrumented with the
/// sanitizers so silent undefined behaviour becomes observable.
pub fn build_c(
    program: &str,
    source: &str,
    workdir: &Path,
    config: &CCompilerConfig,
) -> Result<CBuilds, VulnError> {
    fs::create_dir_all(workdir).map_err(io_err(workdir))?;
    let path = workdir.join(SOURCE_FILE);
    fs::write(&path, source).map_err(io_err(&path))?;
    let plain = compile_c(workdir, "c-plain", config, &[])?.map_err(|stderr| VulnError::CBuild {
        program: program.to_owned(),
        stderr,
    })?;
    let instrumented = match compile_c(workdir, "c-instrumented", config, &config.instrument_flags)? {
        Ok(p) => Some(p),
        Err(stderr) => {
            tracing::warn!("instrumented build of {program} failed; replaying the plain build only: {stderr}");
            None
        }
    };
    Ok(CBuilds { plain, instrumented })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationKind {
    MitigatedPanic,
    MitigatedGraceful,
    NotTriggered,
    StillVulnerable,
    Inconclusive,
}

impl MitigationKind {
    pub const ALL: [MitigationKind; 5] = [
        MitigationKind::MitigatedPanic,
        MitigationKind::MitigatedGraceful,
        MitigationKind::NotTriggered,
        MitigationKind::StillVulnerable,
        MitigationKind::Inconclusive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MitigationKind::MitigatedPanic => "mitigated_panic",
            MitigationKind::MitigatedGraceful => "mitigated_graceful",
            MitigationKind::NotTriggered => "not_triggered",
            MitigationKind::StillVulnerable => "still_vulnerable",
            MitigationKind::Inconclusive => "inconclusive",
        }
    }

    pub fn is_mitigated(self) -> bool {
        matches!(self, MitigationKind::MitigatedPanic | MitigationKind::MitigatedGraceful)
    }
}

// Ord by declaration order, for stable table columns.
impl PartialOrd for MitigationKind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MitigationKind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

/// One observed execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub termination: Termination,
    pub stdout: String,
    pub stderr: String,
}

fn clip(text: String) -> String {
    if text.len() <= STDERR_EXCERPT {
        return text;
    }
    let mut end = STDERR_EXCERPT;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].to_owned()
}

impl RunRecord {
    fn from_output(out: &ProcessOutput) -> Self {
        RunRecord {
            termination: out.termination,
            stdout: clip(out.stdout_lossy()),
            stderr: clip(out.stderr_lossy()),
        }
    }

    pub fn sanitizer_report(&self) -> bool {
        SANITIZER_MARKERS.iter().any(|m| self.stderr.contains(m))
    }

    /// Fault signal or a sanitizer report.
    pub fn abnormal(&self) -> bool {
        matches!(self.termination, Termination::Signaled(_)) || self.sanitizer_report()
    }

    /// Ran to completion without a fault, whatever the exit status.
    pub fn normal(&self) -> bool {
        matches!(self.termination, Termination::Exited(_)) && !self.sanitizer_report()
    }

    /// One-line summary: termination plus the first stderr line.
    pub fn summary(&self) -> String {
        let first = self.stderr.lines().find(|l| !l.trim().is_empty());
        match first {
            Some(l) => format!("{}; stderr: {}", describe(&self.termination), l.trim()),
            None => describe(&self.termination),
        }
    }
}

fn describe(t: &Termination) -> String {
    match *t {
        Termination::Exited(c) => format!("exited with status {c}"),
        Termination::Signaled(s) => format!("terminated by {} ({s})", signal_name(s)),
        Termination::TimedOut => "timed out".into(),
        Termination::OutputLimit => "output limit exceeded".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationVerdict {
    pub kind: MitigationKind,
    pub c_behavior: String,
    pub translated_behavior: String,
    /// The C build that showed the flaw, plain preferred.
    pub c_trigger_build: Option<CBuildKind>,
    /// Set when the verdict is inconclusive for a reason other than the
    /// recorded behaviors.
    pub reason: Option<String>,
    pub c_runs: Vec<(CBuildKind, RunRecord)>,
    pub translated_run: Option<RunRecord>,
}

impl MitigationVerdict {
    /// Recomputes the verdict from the recorded runs.
    pub fn rederive(&self, sig: &PanicSignature) -> MitigationKind {
        match &self.translated_run {
            Some(t) => decide(&self.c_runs, t, sig).0,
            None => MitigationKind::Inconclusive,
        }
    }
}

/// The classification table. A faulting translation is still vulnerable
/// whatever the C side did; otherwise an abnormal C run is mitigated by a
/// panic or by an orderly error exit of the translation, and a normal C run
/// paired with a normal translation means the trigger did not fire.
pub fn decide(
    c_runs: &[(CBuildKind, RunRecord)],
    translated: &RunRecord,
    sig: &PanicSignature,
) -> (MitigationKind, Option<CBuildKind>) {
    let trigger = c_runs.iter().find(|(_, r)| r.abnormal()).map(|(k, _)| *k);
    let c_abnormal = trigger.is_some();
    let c_normal = !c_runs.is_empty() && c_runs.iter().all(|(_, r)| r.normal());
    let panic = sig.matches(translated);
    let t_exited = matches!(translated.termination, Termination::Exited(_));
    let graceful = match translated.termination {
        Termination::Exited(code) => !panic && (code != 0 || !translated.stderr.trim().is_empty()),
        _ => false,
    };
    let kind = if matches!(translated.termination, Termination::Signaled(_)) {
        MitigationKind::StillVulnerable
    } else if c_abnormal && panic {
        MitigationKind::MitigatedPanic
    } else if c_abnormal && graceful {
        MitigationKind::MitigatedGraceful
    } else if c_normal && t_exited && !panic {
        MitigationKind::NotTriggered
    } else {
        MitigationKind::Inconclusive
    };
    (kind, trigger)
}

fn run_binary(binary: &Path, trigger: &str, limits: Limits, sanitized: bool) -> Result<RunRecord, VulnError> {
    let mut cmd = Command::new(binary);
    cmd.env_remove("RUST_BACKTRACE").env_remove("RUST_LIB_BACKTRACE");
    if sanitized {
        // leak reports at exit are not the flaw being replayed
        cmd.env("ASAN_OPTIONS", "detect_leaks=0:abort_on_error=0")
            .env("UBSAN_OPTIONS", "print_stacktrace=0");
    }
    let out = process::run(cmd, trigger.as_bytes(), &limits).map_err(|source| VulnError::Spawn {
        command: binary.display().to_string(),
        source,
    })?;
    Ok(RunRecord::from_output(&out))
}

/// Feeds `trigger` to every C build and to the translation and classifies
/// the pair of behaviors. Both sides are always run and recorded.
pub fn replay_mitigation(
    c: &CBuilds,
    translated_binary: &Path,
    trigger: Option<&str>,
    config: &MitigationConfig,
) -> Result<MitigationVerdict, VulnError> {
    let Some(trigger) = trigger else {
        return Ok(MitigationVerdict {
            kind: MitigationKind::Inconclusive,
            c_behavior: "not run".into(),
            translated_behavior: "not run".into(),
            c_trigger_build: None,
            reason: Some("no trigger input".into()),
            c_runs: Vec::new(),
            translated_run: None,
        });
    };
    let limits = config.limits.process_limits();
    let mut c_runs = vec![(CBuildKind::Plain, run_binary(&c.plain, trigger, limits, false)?)];
    if let Some(inst) = &c.instrumented {
        // the sanitizer runtime reserves far more address space than it uses
        let uncapped = Limits {
            memory_cap: None,
            ..limits
        };
        c_runs.push((CBuildKind::Instrumented, run_binary(inst, trigger, uncapped, true)?));
    }
    let translated = run_binary(translated_binary, trigger, limits, false)?;
    let (kind, c_trigger_build) = decide(&c_runs, &translated, &config.panic);
    let c_behavior = c_runs
        .iter()
        .map(|(k, r)| {
            let name = match k {
                CBuildKind::Plain => "plain",
                CBuildKind::Instrumented => "instrumented",
            };
            format!("{name}: {}", r.summary())
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(MitigationVerdict {
        kind,
        c_behavior,
        translated_behavior: translated.summary(),
        c_trigger_build,
        reason: None,
        c_runs,
        translated_run: Some(translated),
    })
}
