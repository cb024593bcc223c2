//! Append-only per-program records.
//!
//! `transcript.jsonl` holds one JSON record per line: a `start` record, then
//! an `exchange` per backend call, a `check` per compiled attempt, and a
//! final `outcome`. A file without an `outcome` record is incomplete.
//! Wall-clock durations live in a separate `timings.jsonl` so transcripts
//! are reproducible byte for byte.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Outcome, Phase};
use crate::buildcheck::{CompileResult, CompileStatus, Diagnostic, ErrorCode, Level};
use crate::corpus::CodeMetrics;
use crate::exec::ValidationResult;
use crate::llm::{GenerationError, RawResponse};
use crate::prompt::PromptKind;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    Code(String),
    Error(GenerationError),
}

impl Extraction {
    pub fn code(&self) -> Option<&str> {
        match self {
            Extraction::Code(c) => Some(c),
            Extraction::Error(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileRecord {
    pub status: CompileStatus,
    /// Attempt directory, relative to the program's run directory.
    pub workdir: String,
    pub diagnostics: Vec<Diagnostic>,
    pub unsafe_blocks: usize,
}

impl CompileRecord {
    pub fn from_result(result: &CompileResult, workdir: &str, unsafe_blocks: usize) -> Self {
        CompileRecord {
            status: result.status,
            workdir: workdir.to_owned(),
            diagnostics: result.diagnostics.clone(),
            unsafe_blocks,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.status == CompileStatus::Success
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.level == Level::Error)
    }

    pub fn error_codes(&self) -> impl Iterator<Item = &ErrorCode> {
        self.errors().filter_map(|d| d.code.as_ref())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub base: u32,
    pub basic_repair: u32,
    pub guided_repair: u32,
    pub dynamic_repair: u32,
}

impl IterationCounts {
    pub fn total(&self) -> u32 {
        self.base + self.basic_repair + self.guided_repair + self.dynamic_repair
    }

    pub fn bump(&mut self, phase: Phase) {
        match phase {
            Phase::Base => self.base += 1,
            Phase::BasicRepair => self.basic_repair += 1,
            Phase::GuidedRepair => self.guided_repair += 1,
            Phase::DynamicRepair => self.dynamic_repair += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub outcome: Outcome,
    pub iteration_counts: IterationCounts,
    /// Attempt whose records decided the outcome, if any compiled.
    pub decided_by: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Start {
        program_id: String,
        backend: String,
        config_digest: String,
        metrics: CodeMetrics,
        test_cases: usize,
    },
    Exchange {
        attempt: usize,
        phase: Phase,
        prompt_kind: PromptKind,
        prompt: String,
        response: RawResponse,
        extraction: Extraction,
    },
    Check {
        attempt: usize,
        compile: CompileRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        validation: Option<ValidationResult>,
    },
    Outcome(OutcomeRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub index: usize,
    pub phase: Phase,
    pub prompt_kind: PromptKind,
    pub prompt: String,
    pub response: RawResponse,
    pub extraction: Extraction,
    pub compile: Option<CompileRecord>,
    pub validation: Option<ValidationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub program_id: String,
    pub backend: String,
    pub config_digest: String,
    pub metrics: CodeMetrics,
    pub test_cases: usize,
    pub attempts: Vec<Attempt>,
    pub outcome: Option<OutcomeRecord>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot access transcript {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("transcript {path} line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Transcript {
    pub fn is_complete(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome_kind(&self) -> Option<Outcome> {
        self.outcome.as_ref().map(|o| o.outcome)
    }

    pub fn iteration_counts(&self) -> IterationCounts {
        let mut counts = IterationCounts::default();
        for a in &self.attempts {
            counts.bump(a.phase);
        }
        counts
    }

    fn compiles_in(&self, phase: Phase) -> impl Iterator<Item = &CompileRecord> {
        self.attempts
            .iter()
            .filter(move |a| a.phase == phase)
            .filter_map(|a| a.compile.as_ref())
    }

    /// Compile record of the base translation, absent on a generation error.
    pub fn base_compile(&self) -> Option<&CompileRecord> {
        self.compiles_in(Phase::Base).next()
    }

    pub fn initially_failed_to_compile(&self) -> bool {
        self.base_compile().is_some_and(|c| !c.succeeded())
    }

    /// Initially uncompilable and made to compile by basic or guided repair.
    pub fn repaired(&self) -> bool {
        self.initially_failed_to_compile()
            && self
                .compiles_in(Phase::BasicRepair)
                .chain(self.compiles_in(Phase::GuidedRepair))
                .any(CompileRecord::succeeded)
    }

    pub fn entered_guided_phase(&self) -> bool {
        self.attempts.iter().any(|a| a.phase == Phase::GuidedRepair)
    }

    /// Diagnostics still failing once basic repair has run, if it ran and
    /// did not end in a successful compile.
    pub fn after_basic_repair(&self) -> Option<&CompileRecord> {
        let last = self
            .compiles_in(Phase::BasicRepair)
            .last()
            .or_else(|| self.base_compile().filter(|_| {
                self.attempts.iter().any(|a| a.phase == Phase::BasicRepair)
            }))?;
        (!last.succeeded()).then_some(last)
    }

    /// Diagnostics at guided-phase entry and at its end, for programs that
    /// entered it.
    pub fn guided_span(&self) -> Option<(&CompileRecord, &CompileRecord)> {
        if !self.entered_guided_phase() {
            return None;
        }
        let entry = self.after_basic_repair()?;
        let exit = self.compiles_in(Phase::GuidedRepair).last().unwrap_or(entry);
        Some((entry, exit))
    }

    /// Translation of the attempt that decided the outcome.
    pub fn final_translation(&self) -> Option<&str> {
        let idx = self.outcome.as_ref()?.decided_by?;
        self.attempts.get(idx)?.extraction.code()
    }

    fn apply(&mut self, record: Record) -> Result<(), String> {
        match record {
            Record::Start { .. } => return Err("duplicate start record".into()),
            Record::Exchange {
                attempt,
                phase,
                prompt_kind,
                prompt,
                response,
                extraction,
            } => {
                if attempt != self.attempts.len() {
                    return Err(format!("attempt {attempt} out of sequence"));
                }
                self.attempts.push(Attempt {
                    index: attempt,
                    phase,
                    prompt_kind,
                    prompt,
                    response,
                    extraction,
                    compile: None,
                    validation: None,
                });
            }
            Record::Check {
                attempt,
                compile,
                validation,
            } => {
                let a = self
                    .attempts
                    .get_mut(attempt)
                    .ok_or_else(|| format!("check for unknown attempt {attempt}"))?;
                if a.compile.is_some() {
                    return Err(format!("second check for attempt {attempt}"));
                }
                a.compile = Some(compile);
                a.validation = validation;
            }
            Record::Outcome(o) => {
                if self.outcome.is_some() {
                    return Err("duplicate outcome record".into());
                }
                self.outcome = Some(o);
            }
        }
        Ok(())
    }

    /// Reads a transcript file. A torn final line (from an interrupted
    /// write) is ignored; any other malformed line is an error.
    pub fn read(path: &Path) -> Result<Transcript, TranscriptError> {
        let io_err = |source| TranscriptError::Io {
            path: path.to_owned(),
            source,
        };
        let malformed = |line: usize, reason: String| TranscriptError::Malformed {
            path: path.to_owned(),
            line,
            reason,
        };
        let file = File::open(path).map_err(io_err)?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
        let mut transcript: Option<Transcript> = None;
        for (i, line) in lines.iter().enumerate() {
            let record: Record = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(_) if i + 1 == lines.len() => break,
                Err(e) => return Err(malformed(i + 1, e.to_string())),
            };
            match (&mut transcript, record) {
                (
                    None,
                    Record::Start {
                        program_id,
                        backend,
                        config_digest,
                        metrics,
                        test_cases,
                    },
                ) => {
                    transcript = Some(Transcript {
                        program_id,
                        backend,
                        config_digest,
                        metrics,
                        test_cases,
                        attempts: Vec::new(),
                        outcome: None,
                    })
                }
                (None, _) => return Err(malformed(i + 1, "first record is not a start".into())),
                (Some(t), record) => t.apply(record).map_err(|r| malformed(i + 1, r))?,
            }
        }
        transcript.ok_or_else(|| malformed(0, "empty transcript".into()))
    }
}

/// Appends records to a transcript file, flushing each one.
#[derive(Debug)]
pub struct TranscriptWriter {
    path: PathBuf,
    file: File,
    timings: File,
}

impl TranscriptWriter {
    pub fn create(dir: &Path) -> Result<Self, TranscriptError> {
        let path = dir.join(TRANSCRIPT_FILE);
        let open = |p: &Path| {
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(p)
                .map_err(|source| TranscriptError::Io {
                    path: p.to_owned(),
                    source,
                })
        };
        Ok(TranscriptWriter {
            file: open(&path)?,
            timings: open(&dir.join(TIMINGS_FILE))?,
            path,
        })
    }

    fn write_line(file: &mut File, path: &Path, value: &impl Serialize) -> Result<(), TranscriptError> {
        let mut line = serde_json::to_vec(value).expect("records serialize");
        line.push(b'\n');
        file.write_all(&line)
            .and_then(|()| file.flush())
            .map_err(|source| TranscriptError::Io {
                path: path.to_owned(),
                source,
            })
    }

    pub fn append(&mut self, record: &Record) -> Result<(), TranscriptError> {
        Self::write_line(&mut self.file, &self.path, record)
    }

    pub fn timing(&mut self, attempt: usize, step: &str, millis: u128) -> Result<(), TranscriptError> {
        let path = self.path.with_file_name(TIMINGS_FILE);
        Self::write_line(
            &mut self.timings,
            &path,
            &serde_json::json!({ "attempt": attempt, "step": step, "ms": millis }),
        )
    }
}
