//! Compiling translations and turning compiler output into structured
//! diagnostics.

mod catalogue;
mod diagnostics;
mod unsafe_scan;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::{self, Limits, Termination};

pub use catalogue::{CodeTally, ErrorCatalogue};
pub use diagnostics::{
    parse_diagnostics, parse_json_diagnostics, render_errors, Diagnostic, ErrorCode, Level,
};
pub use unsafe_scan::count_unsafe_blocks;

pub const SOURCE_NAME: &str = "main.rs";
pub const BINARY_NAME: &str = "main";
pub const COMPILER_TIMEOUT_MESSAGE: &str = "compiler timeout";

/// Compiler output beyond this is dropped; real diagnostics never get close.
const COMPILER_OUTPUT_CAP: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerConfig {
    /// Program and leading arguments; the source file and `-o` are appended.
    pub command: Vec<String>,
    pub timeout_secs: u64,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            command: ["rustc", "--edition", "2021", "--error-format=json", "-O"]
                .map(String::from)
                .to_vec(),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub status: CompileStatus,
    pub binary_path: Option<PathBuf>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip)]
    pub duration: Duration,
}

impl CompileResult {
    pub fn succeeded(&self) -> bool {
        self.status == CompileStatus::Success
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.level == Level::Error)
    }

    /// Error codes in the order they were reported, duplicates kept.
    pub fn error_codes(&self) -> Vec<ErrorCode> {
        self.errors().filter_map(|d| d.code.clone()).collect()
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("compiler command is empty")]
    EmptyCommand,
    #[error("compiler `{0}` not found")]
    CompilerMissing(String),
    #[error("workdir {0} already holds an attempt")]
    WorkdirReused(PathBuf),
    #[error("cannot prepare workdir {path}: {source}")]
    Workdir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot run compiler: {0}")]
    Spawn(#[source] std::io::Error),
}

fn synthesized(message: String) -> Diagnostic {
    Diagnostic {
        code: None,
        level: Level::Error,
        rendered: format!("error: {message}\n"),
        message,
    }
}

/// Reads diagnostics from whichever format the compiler produced.
pub fn parse_compiler_output(raw: &str) -> Vec<Diagnostic> {
    let json = parse_json_diagnostics(raw);
    if json.is_empty() && !raw.lines().any(|l| l.starts_with('{')) {
        parse_diagnostics(raw)
    } else {
        json
    }
}

/// Writes `translation` into the fresh directory `workdir` and compiles it
/// there. Paths in diagnostics are relative to `workdir`.
pub fn compile(
    translation: &str,
    workdir: &Path,
    config: &CompilerConfig,
) -> Result<CompileResult, BuildError> {
    let (program, args) = config.command.split_first().ok_or(BuildError::EmptyCommand)?;
    let workdir_err = |source| BuildError::Workdir {
        path: workdir.to_owned(),
        source,
    };
    if workdir.exists() {
        let occupied = fs::read_dir(workdir)
            .map_err(workdir_err)?
            .next()
            .is_some();
        if occupied {
            return Err(BuildError::WorkdirReused(workdir.to_owned()));
        }
    }
    fs::create_dir_all(workdir).map_err(workdir_err)?;
    fs::write(workdir.join(SOURCE_NAME), translation).map_err(workdir_err)?;

    let mut cmd = Command::new(program);
    cmd.args(args)
        .arg(SOURCE_NAME)
        .arg("-o")
        .arg(BINARY_NAME)
        .current_dir(workdir);
    let limits = Limits {
        wall_timeout: Duration::from_secs(config.timeout_secs),
        memory_cap: None,
        output_cap: COMPILER_OUTPUT_CAP,
    };
    let out = match process::run(cmd, b"", &limits) {
        Ok(out) => out,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(BuildError::CompilerMissing(program.clone()))
        }
        Err(e) => return Err(BuildError::Spawn(e)),
    };

    let mut diagnostics = parse_compiler_output(&out.stderr_lossy());
    let binary = workdir.join(BINARY_NAME);
    let has_error = diagnostics.iter().any(|d| d.level == Level::Error);
    let status = match out.termination {
        Termination::Exited(0) if !has_error && binary.is_file() => CompileStatus::Success,
        Termination::TimedOut => {
            diagnostics.push(synthesized(COMPILER_TIMEOUT_MESSAGE.to_owned()));
            CompileStatus::Failure
        }
        other => {
            if !has_error {
                diagnostics.push(synthesized(format!("compiler crashed ({other:?})")));
            }
            CompileStatus::Failure
        }
    };
    Ok(CompileResult {
        binary_path: (status == CompileStatus::Success).then_some(binary),
        status,
        diagnostics,
        duration: out.duration,
    })
}
