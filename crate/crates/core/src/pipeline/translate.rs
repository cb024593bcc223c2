use std::fs;
use std::path::Path;
use std::time::Instant;

use super::transcript::TranscriptWriter;
use super::{
    select_guided_phase, Attempt, CompileRecord, Extraction, IterationCounts, Outcome,
    OutcomeRecord, Phase, PipelineError, Record, RunConfig, Transcript, TranscriptError,
};
use crate::buildcheck::{compile, count_unsafe_blocks, Diagnostic};
use crate::corpus::SourceProgram;
use crate::exec::{run_tests, ValidationResult, Verdict};
use crate::llm::{extract_code, Gateway};
use crate::prompt::{DynamicErrorKind, PromptKind, PromptKit};

/// Shared, read-only inputs for translating programs.
#[derive(Debug, Clone, Copy)]
pub struct PipelineContext<'a> {
    pub gateway: &'a Gateway,
    pub kit: &'a PromptKit,
    pub config: &'a RunConfig,
    pub config_digest: &'a str,
}

/// Where the most recent checked translation stands.
#[derive(Debug, Clone)]
enum Status {
    CompileFailed(Vec<Diagnostic>),
    TestsFailed(ValidationResult),
    Passed,
}

struct Run<'a, 'c> {
    ctx: &'c PipelineContext<'a>,
    program: &'c SourceProgram,
    dir: &'c Path,
    writer: TranscriptWriter,
    transcript: Transcript,
    counts: IterationCounts,
    code: Option<String>,
    status: Option<Status>,
    decided_by: Option<usize>,
}

impl Run<'_, '_> {
    fn record(&mut self, record: Record) -> Result<(), TranscriptError> {
        self.writer.append(&record)
    }

    fn attempt(&mut self, phase: Phase, kind: PromptKind, prompt: String) -> Result<(), PipelineError> {
        let index = self.transcript.attempts.len();
        let params = self.ctx.config.generation.params(phase != Phase::Base);
        let started = Instant::now();
        let response = self.ctx.gateway.complete(&self.program.id, &prompt, params);
        self.writer.timing(index, "backend", started.elapsed().as_millis())?;
        let extraction = match extract_code(&response) {
            Ok(code) => Extraction::Code(code),
            Err(e) => Extraction::Error(e),
        };
        self.counts.bump(phase);
        self.record(Record::Exchange {
            attempt: index,
            phase,
            prompt_kind: kind,
            prompt: prompt.clone(),
            response: response.clone(),
            extraction: extraction.clone(),
        })?;
        self.transcript.attempts.push(Attempt {
            index,
            phase,
            prompt_kind: kind,
            prompt,
            response,
            extraction: extraction.clone(),
            compile: None,
            validation: None,
        });

        let Extraction::Code(code) = extraction else {
            // the iteration is spent; the previous translation stays current
            return Ok(());
        };
        let workdir = format!("attempt-{index}");
        let started = Instant::now();
        let result = compile(&code, &self.dir.join(&workdir), &self.ctx.config.compiler)?;
        self.writer.timing(index, "compile", started.elapsed().as_millis())?;
        let validation = match &result.binary_path {
            Some(binary) => {
                let started = Instant::now();
                let v = run_tests(binary, &self.program.test_cases, &self.ctx.config.exec)?;
                self.writer.timing(index, "tests", started.elapsed().as_millis())?;
                Some(v)
            }
            None => None,
        };
        let compile_record = CompileRecord::from_result(&result, &workdir, count_unsafe_blocks(&code));
        self.record(Record::Check {
            attempt: index,
            compile: compile_record.clone(),
            validation: validation.clone(),
        })?;
        let attempt = self.transcript.attempts.last_mut().expect("attempt just pushed");
        attempt.compile = Some(compile_record);
        attempt.validation = validation.clone();

        self.status = Some(match validation {
            None => Status::CompileFailed(result.diagnostics),
            Some(v) if v.verdict == Verdict::Pass => Status::Passed,
            Some(v) => Status::TestsFailed(v),
        });
        self.code = Some(code);
        self.decided_by = Some(index);
        Ok(())
    }

    fn compile_errors(&self) -> Option<Vec<Diagnostic>> {
        match &self.status {
            Some(Status::CompileFailed(d)) => Some(d.clone()),
            _ => None,
        }
    }

    fn finish(mut self) -> Result<Transcript, PipelineError> {
        let outcome = match &self.status {
            None => Outcome::GenerationError,
            Some(Status::CompileFailed(_)) => Outcome::CompilationError,
            Some(Status::Passed) => Outcome::Success,
            Some(Status::TestsFailed(v)) => match v.verdict {
                Verdict::RuntimeError => Outcome::RuntimeError,
                Verdict::InfiniteLoop => Outcome::InfiniteLoop,
                Verdict::TestCaseError => Outcome::TestCaseError,
                Verdict::Pass => unreachable!("passing validation is Status::Passed"),
            },
        };
        let record = OutcomeRecord {
            outcome,
            iteration_counts: self.counts,
            decided_by: self.decided_by,
        };
        self.record(Record::Outcome(record.clone()))?;
        self.transcript.outcome = Some(record);
        Ok(self.transcript)
    }
}

/// Runs the full translate-and-repair pipeline for one program, writing
/// its transcript and attempt directories under `program_dir`, which must
/// not hold a previous run.
pub fn translate_program(
    program: &SourceProgram,
    ctx: &PipelineContext<'_>,
    program_dir: &Path,
) -> Result<Transcript, PipelineError> {
    if program.test_cases.is_empty() {
        return Err(PipelineError::NoTestCases(program.id.clone()));
    }
    fs::create_dir_all(program_dir).map_err(|source| TranscriptError::Io {
        path: program_dir.to_owned(),
        source,
    })?;
    let mut writer = TranscriptWriter::create(program_dir)?;
    let start = Record::Start {
        program_id: program.id.clone(),
        backend: ctx.gateway.spec().name.clone(),
        config_digest: ctx.config_digest.to_owned(),
        metrics: program.metrics,
        test_cases: program.test_cases.len(),
    };
    writer.append(&start)?;
    let mut run = Run {
        ctx,
        program,
        dir: program_dir,
        writer,
        transcript: Transcript {
            program_id: program.id.clone(),
            backend: ctx.gateway.spec().name.clone(),
            config_digest: ctx.config_digest.to_owned(),
            metrics: program.metrics,
            test_cases: program.test_cases.len(),
            attempts: Vec::new(),
            outcome: None,
        },
        counts: IterationCounts::default(),
        code: None,
        status: None,
        decided_by: None,
    };
    let kit = ctx.kit;
    let caps = &ctx.config.pipeline;
    let src = &program.source_text;

    run.attempt(Phase::Base, PromptKind::Base, kit.base(src)?)?;
    if run.code.is_none() {
        return run.finish();
    }

    while run.counts.basic_repair < caps.max_basic {
        let Some(diags) = run.compile_errors() else { break };
        let prompt = kit.repair(src, run.code.as_deref().unwrap_or_default(), &diags)?;
        run.attempt(Phase::BasicRepair, PromptKind::BasicRepair, prompt)?;
    }

    if run.compile_errors().is_some_and(|d| select_guided_phase(&d)) {
        while run.counts.guided_repair < caps.max_guided {
            let Some(diags) = run.compile_errors() else { break };
            let code = run.code.as_deref().unwrap_or_default();
            let (kind, prompt) = if kit.has_guidance(&diags) {
                (PromptKind::GuidedRepair, kit.guided(src, code, &diags)?)
            } else {
                (PromptKind::BasicRepair, kit.repair(src, code, &diags)?)
            };
            run.attempt(Phase::GuidedRepair, kind, prompt)?;
        }
    }
    if run.compile_errors().is_some() {
        return run.finish();
    }

    while run.counts.dynamic_repair < caps.max_dynamic {
        let code = run.code.as_deref().unwrap_or_default();
        let (kind, prompt) = match run.status.as_ref().expect("a translation was checked") {
            Status::Passed => break,
            Status::CompileFailed(diags) => {
                (PromptKind::BasicRepair, kit.repair(src, code, diags)?)
            }
            Status::TestsFailed(v) => {
                let error_type = match v.verdict {
                    Verdict::RuntimeError => DynamicErrorKind::Runtime,
                    Verdict::InfiniteLoop => DynamicErrorKind::InfiniteLoop,
                    _ => DynamicErrorKind::TestCase,
                };
                (PromptKind::DynamicRepair, kit.dynamic(src, code, error_type, &v.detail)?)
            }
        };
        run.attempt(Phase::DynamicRepair, kind, prompt)?;
    }
    run.finish()
}
