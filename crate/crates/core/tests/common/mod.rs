//! Builders for synthetic transcripts.
#![allow(dead_code)]

use rustport_core::buildcheck::{CompileStatus, Diagnostic, ErrorCode, Level};
use rustport_core::corpus::CodeMetrics;
use rustport_core::llm::{FinishReason, GenerationError, RawResponse, Usage};
use rustport_core::pipeline::{
    Attempt, CompileRecord, Extraction, Outcome, OutcomeRecord, Phase, Transcript,
};
use rustport_core::prompt::PromptKind;

pub fn diag(code: Option<&str>) -> Diagnostic {
    Diagnostic {
        code: code.map(|c| ErrorCode::new(c).unwrap()),
        level: Level::Error,
        message: "m".into(),
        rendered: format!("error[{}]: m\n", code.unwrap_or("")),
    }
}

pub struct TranscriptBuilder {
    t: Transcript,
}

impl TranscriptBuilder {
    pub fn new(id: &str) -> Self {
        TranscriptBuilder {
            t: Transcript {
                program_id: id.into(),
                backend: "synthetic".into(),
                config_digest: "0".into(),
                metrics: CodeMetrics::default(),
                test_cases: 1,
                attempts: Vec::new(),
                outcome: None,
            },
        }
    }

    pub fn metrics(mut self, loc: u64, pointers: u64, functions: u64) -> Self {
        self.t.metrics = CodeMetrics {
            loc,
            pointers,
            functions,
            ..CodeMetrics::default()
        };
        self
    }

    fn push(mut self, phase: Phase, extraction: Extraction, compile: Option<CompileRecord>) -> Self {
        let index = self.t.attempts.len();
        self.t.attempts.push(Attempt {
            index,
            phase,
            prompt_kind: PromptKind::Base,
            prompt: String::new(),
            response: RawResponse {
                text: String::new(),
                finish_reason: FinishReason::Complete,
                usage: Usage::default(),
                error: None,
                attempts: 1,
            },
            extraction,
            compile,
            validation: None,
        });
        self
    }

    /// An attempt whose code could not be extracted.
    pub fn no_code(self, phase: Phase) -> Self {
        self.push(phase, Extraction::Error(GenerationError::NoFence), None)
    }

    /// A compiled attempt: success when `errors` is empty. `None` entries
    /// are uncoded errors.
    pub fn compiled(self, phase: Phase, errors: &[Option<&str>]) -> Self {
        self.compiled_unsafe(phase, errors, 0)
    }

    pub fn compiled_unsafe(self, phase: Phase, errors: &[Option<&str>], unsafe_blocks: usize) -> Self {
        let index = self.t.attempts.len();
        let record = CompileRecord {
            status: if errors.is_empty() {
                CompileStatus::Success
            } else {
                CompileStatus::Failure
            },
            workdir: format!("attempt-{index}"),
            diagnostics: errors.iter().map(|c| diag(*c)).collect(),
            unsafe_blocks,
        };
        self.push(phase, Extraction::Code("fn main(){}".into()), Some(record))
    }

    pub fn outcome(mut self, outcome: Outcome) -> Transcript {
        let decided_by = self.t.attempts.iter().rposition(|a| a.compile.is_some());
        self.t.outcome = Some(OutcomeRecord {
            outcome,
            iteration_counts: self.t.iteration_counts(),
            decided_by,
        });
        self.t
    }

    pub fn unfinished(self) -> Transcript {
        self.t
    }
}

/// Smallest transcript with the given outcome.
pub fn simple(id: &str, outcome: Outcome) -> Transcript {
    let b = TranscriptBuilder::new(id);
    match outcome {
        Outcome::GenerationError => b.no_code(Phase::Base).outcome(outcome),
        Outcome::CompilationError => b.compiled(Phase::Base, &[Some("E0308")]).outcome(outcome),
        _ => b.compiled(Phase::Base, &[]).outcome(outcome),
    }
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A known-vulnerable C program with a safe translation and an input that
/// triggers the flaw.
pub struct VulnFixture {
    pub name: String,
    pub c_source: String,
    pub translation: String,
    pub trigger: String,
    /// Category key the checker should report.
    pub category: String,
}

pub fn vuln_fixtures() -> Vec<VulnFixture> {
    let root = fixtures_dir().join("vuln");
    let read = |name: &str, file: &str| std::fs::read_to_string(root.join(name).join(file)).unwrap();
    ["oob_index", "arith_overflow", "null_deref", "div_zero", "use_after_free"]
        .into_iter()
        .map(|name| VulnFixture {
            name: name.into(),
            c_source: read(name, "main.c"),
            translation: read(name, "translation.rs"),
            trigger: read(name, "trigger.txt"),
            category: read(name, "category").trim().into(),
        })
        .collect()
}
