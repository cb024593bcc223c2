use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FinishReason, RawResponse};

pub const TARGET_LANGUAGE: &str = "rust";

/// The backend produced nothing usable as code.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationError {
    #[error("response contains no fenced code block")]
    NoFence,
    #[error("response ends inside an unterminated code fence")]
    UnterminatedFence,
    #[error("response did not complete: {reason:?}")]
    Incomplete { reason: FinishReason },
}

fn tag_matches(tag: &str, lang: &str) -> bool {
    tag.eq_ignore_ascii_case(lang) || (lang == "rust" && tag.eq_ignore_ascii_case("rs"))
}

/// Extracts the translated program from a backend response.
pub fn extract_code(raw: &RawResponse) -> Result<String, GenerationError> {
    if raw.finish_reason != FinishReason::Complete {
        return Err(GenerationError::Incomplete {
            reason: raw.finish_reason,
        });
    }
    extract_fenced(&raw.text, TARGET_LANGUAGE)
}

/// Returns the body of the first code fence tagged `lang`, or of the first
/// untagged fence when no tagged one exists. Fences with other tags are
/// ignored. Hitting an unterminated fence before a `lang` block is an error.
pub fn extract_fenced(text: &str, lang: &str) -> Result<String, GenerationError> {
    let mut first_untagged: Option<String> = None;
    let mut lines = text.split('\n');
    while let Some(line) = lines.next() {
        let Some(info) = line.trim_start().strip_prefix("```") else {
            continue;
        };
        let tag = info.split_whitespace().next().unwrap_or("");
        let mut body: Vec<&str> = Vec::new();
        let mut closed = false;
        for inner in lines.by_ref() {
            if is_closing_fence(inner) {
                closed = true;
                break;
            }
            body.push(inner);
        }
        if !closed {
            return Err(GenerationError::UnterminatedFence);
        }
        let body = body.join("\n");
        if tag_matches(tag, lang) {
            return Ok(body);
        }
        if tag.is_empty() && first_untagged.is_none() {
            first_untagged = Some(body);
        }
    }
    first_untagged.ok_or(GenerationError::NoFence)
}

fn is_closing_fence(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.bytes().all(|b| b == b'`')
}

pub fn wrap_in_fence(code: &str, lang: &str) -> String {
    format!("```{lang}\n{code}\n```")
}
