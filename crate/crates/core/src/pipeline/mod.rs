//! The per-program translation state machine and resumable campaigns.
//!
//! A program goes through base translation, then up to `max_basic` basic
//! repairs while it fails to compile, then up to `max_guided` guided repairs
//! when the remaining errors include a guided code, then up to `max_dynamic`
//! dynamic repairs while it compiles but fails its tests.

mod campaign;
mod config;
mod transcript;
mod translate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buildcheck::{BuildError, Diagnostic, Level};
use crate::exec::ExecError;
use crate::prompt::{PromptError, GUIDED_CODES};

pub use campaign::{
    load_transcripts, run_campaign, CampaignError, CampaignOptions, CampaignState, CampaignSummary,
    CancelToken, STATE_FILE,
};
pub use config::{ConfigError, PipelineConfig, RunConfig};
pub use transcript::{
    Attempt, CompileRecord, Extraction, IterationCounts, OutcomeRecord, Record, Transcript,
    TranscriptError, TIMINGS_FILE, TRANSCRIPT_FILE,
};
pub use translate::{translate_program, PipelineContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Base,
    BasicRepair,
    GuidedRepair,
    DynamicRepair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    GenerationError,
    CompilationError,
    RuntimeError,
    InfiniteLoop,
    TestCaseError,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Success,
        Outcome::GenerationError,
        Outcome::CompilationError,
        Outcome::RuntimeError,
        Outcome::InfiniteLoop,
        Outcome::TestCaseError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::GenerationError => "generation_error",
            Outcome::CompilationError => "compilation_error",
            Outcome::RuntimeError => "runtime_error",
            Outcome::InfiniteLoop => "infinite_loop",
            Outcome::TestCaseError => "test_case_error",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether compilation errors remaining after basic repair warrant the
/// guided phase: true iff some error carries one of the guided codes.
pub fn select_guided_phase(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| {
        d.level == Level::Error
            && d.code
                .as_ref()
                .is_some_and(|c| GUIDED_CODES.contains(&c.as_str()))
    })
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("program {0} has no test cases")]
    NoTestCases(String),
}
