//! Rendering of the translation and repair prompts.
//!
//! Every prompt starts with the base translation prompt, byte for byte.
//! Rendering is pure.

mod kb;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buildcheck::{render_errors, Diagnostic, Level};

pub use kb::{Cause, GuidanceEntry, KnowledgeBase};

/// Error codes that have guidance entries and open the guided phase.
pub const GUIDED_CODES: [&str; 8] = [
    "E0277", "E0308", "E0425", "E0599", "E0384", "E0282", "E0502", "E0499",
];

pub const DEFAULT_FEEDBACK_BUDGET: usize = 16 * 1024;

const TRUNCATION_MARKER: &str = "\n[... truncated]";

const BASE_HEADER: &str = "Given some code written in the C programming language, translate it into \
equivalent Rust code that solves the exact same problem as the original code does. Ensure the following:

- Produce only safe Rust code.
- The translated Rust code can be compiled and executed with all the necessary imports.
- Output only the code without any additional explanation or comments.
- Wrap the code with ```rust
C code:
";
const CODE_CUE: &str = "Rust code:";
const COMPILE_ERRORS_LEAD: &str =
    "Executing your generated code gives the following errors because it is syntactically incorrect:";
const GUIDANCE_LEAD: &str = "Use the following instructions to fix these errors:";
const CORRECTION_REQUEST: &str =
    "Please suggest a corrected version of the complete code wrapped in ```rust";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Base,
    BasicRepair,
    GuidedRepair,
    DynamicRepair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicErrorKind {
    Runtime,
    InfiniteLoop,
    TestCase,
}

impl DynamicErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            DynamicErrorKind::Runtime => "runtime",
            DynamicErrorKind::InfiniteLoop => "infinite loop",
            DynamicErrorKind::TestCase => "test case",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("C source is empty")]
    EmptySource,
    #[error("diagnostics text is empty")]
    EmptyDiagnostics,
    #[error("error message is empty")]
    EmptyMessage,
    #[error("no diagnostic has a guidance entry")]
    NoGuidance,
    #[error("invalid guidance in {origin}: {reason}")]
    InvalidGuidance { origin: String, reason: String },
}

/// Keeps the first `budget` bytes of `text` (on a char boundary) and marks
/// the cut.
pub fn truncate_feedback(text: &str, budget: usize) -> Cow<'_, str> {
    if text.len() <= budget {
        return Cow::Borrowed(text);
    }
    let mut end = budget;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    Cow::Owned(format!("{}{TRUNCATION_MARKER}", &text[..end]))
}

pub fn build_base_prompt(c_source: &str) -> Result<String, PromptError> {
    if c_source.trim().is_empty() {
        return Err(PromptError::EmptySource);
    }
    Ok(format!("{BASE_HEADER}{}\n{CODE_CUE}", c_source.trim_end()))
}

fn with_faulty_code(c_source: &str, bad_translation: &str) -> Result<String, PromptError> {
    let base = build_base_prompt(c_source)?;
    Ok(format!("{base}\n\n{CODE_CUE}\n{}\n\n", bad_translation.trim_end()))
}

fn repair_prompt(
    c_source: &str,
    bad_translation: &str,
    diagnostics_text: &str,
    guidance: &[&GuidanceEntry],
) -> Result<String, PromptError> {
    if diagnostics_text.trim().is_empty() {
        return Err(PromptError::EmptyDiagnostics);
    }
    let mut out = with_faulty_code(c_source, bad_translation)?;
    out.push_str(COMPILE_ERRORS_LEAD);
    out.push('\n');
    out.push_str(diagnostics_text.trim_end());
    out.push_str("\n\n");
    if !guidance.is_empty() {
        out.push_str(GUIDANCE_LEAD);
        out.push('\n');
        for entry in guidance {
            out.push('\n');
            out.push_str(&entry.render());
        }
        out.push('\n');
    }
    out.push_str(CORRECTION_REQUEST);
    Ok(out)
}

pub fn build_repair_prompt(
    c_source: &str,
    bad_translation: &str,
    diagnostics_text: &str,
) -> Result<String, PromptError> {
    repair_prompt(c_source, bad_translation, diagnostics_text, &[])
}

/// Repair prompt extended with the guidance for exactly the error codes
/// present in `diagnostics`.
pub fn build_guided_prompt(
    c_source: &str,
    bad_translation: &str,
    diagnostics: &[Diagnostic],
    kb: &KnowledgeBase,
) -> Result<String, PromptError> {
    guided(c_source, bad_translation, diagnostics, &render_errors(diagnostics), kb)
}

fn guided(
    c_source: &str,
    bad_translation: &str,
    diagnostics: &[Diagnostic],
    diagnostics_text: &str,
    kb: &KnowledgeBase,
) -> Result<String, PromptError> {
    let entries = kb.select(diagnostics);
    if entries.is_empty() {
        return Err(PromptError::NoGuidance);
    }
    repair_prompt(c_source, bad_translation, diagnostics_text, &entries)
}

pub fn build_dynamic_prompt(
    c_source: &str,
    bad_translation: &str,
    error_type: DynamicErrorKind,
    error_message: &str,
) -> Result<String, PromptError> {
    if error_message.trim().is_empty() {
        return Err(PromptError::EmptyMessage);
    }
    let mut out = with_faulty_code(c_source, bad_translation)?;
    out.push_str(&format!(
        "Executing your generated code gives the following {} error:\n\n{}",
        error_type.label(),
        error_message.trim_end()
    ));
    Ok(out)
}

/// Prompt builders bound to a knowledge base and a feedback byte budget.
#[derive(Debug, Clone)]
pub struct PromptKit {
    pub kb: KnowledgeBase,
    pub feedback_budget: usize,
}

impl Default for PromptKit {
    fn default() -> Self {
        PromptKit {
            kb: KnowledgeBase::builtin(),
            feedback_budget: DEFAULT_FEEDBACK_BUDGET,
        }
    }
}

impl PromptKit {
    pub fn base(&self, c_source: &str) -> Result<String, PromptError> {
        build_base_prompt(c_source)
    }

    pub fn repair(
        &self,
        c_source: &str,
        bad_translation: &str,
        diagnostics: &[Diagnostic],
    ) -> Result<String, PromptError> {
        let text = render_errors(diagnostics);
        build_repair_prompt(
            c_source,
            bad_translation,
            &truncate_feedback(&text, self.feedback_budget),
        )
    }

    pub fn guided(
        &self,
        c_source: &str,
        bad_translation: &str,
        diagnostics: &[Diagnostic],
    ) -> Result<String, PromptError> {
        let text = render_errors(diagnostics);
        guided(
            c_source,
            bad_translation,
            diagnostics,
            &truncate_feedback(&text, self.feedback_budget),
            &self.kb,
        )
    }

    pub fn dynamic(
        &self,
        c_source: &str,
        bad_translation: &str,
        error_type: DynamicErrorKind,
        error_message: &str,
    ) -> Result<String, PromptError> {
        build_dynamic_prompt(
            c_source,
            bad_translation,
            error_type,
            &truncate_feedback(error_message, self.feedback_budget),
        )
    }

    /// Whether `diagnostics` contain an error code with guidance.
    pub fn has_guidance(&self, diagnostics: &[Diagnostic]) -> bool {
        diagnostics
            .iter()
            .any(|d| d.level == Level::Error && d.code.as_ref().is_some_and(|c| self.kb.get(c).is_some()))
    }
}
