//! Parsing rustc output into `Diagnostic` records.
//!
//! Two routes: the JSON stream (`--error-format=json`) and the human
//! rendering. Both drop the trailing summary lines ("aborting due to ...",
//! "N warnings emitted") so they agree on which records exist.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ErrorCode(String);

impl ErrorCode {
    /// Accepts `E` followed by exactly four digits.
    pub fn new(code: &str) -> Option<Self> {
        let b = code.as_bytes();
        (b.len() == 5 && b[0] == b'E' && b[1..].iter().all(u8::is_ascii_digit))
            .then(|| ErrorCode(code.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ErrorCode {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        ErrorCode::new(&s).ok_or_else(|| format!("invalid error code {s:?}"))
    }
}

impl From<ErrorCode> for String {
    fn from(c: ErrorCode) -> String {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Option<ErrorCode>,
    pub level: Level,
    pub message: String,
    pub rendered: String,
}

fn is_summary(message: &str) -> bool {
    static SUMMARY: OnceLock<Regex> = OnceLock::new();
    SUMMARY
        .get_or_init(|| {
            Regex::new(r"^(aborting due to .*|\d+ warnings? emitted|\d+ warnings? and \d+ errors? emitted)$")
                .unwrap()
        })
        .is_match(message.trim())
}

fn header_re() -> &'static Regex {
    static HEADER: OnceLock<Regex> = OnceLock::new();
    HEADER.get_or_init(|| {
        Regex::new(r"^(error|warning)(?:\[([A-Z]\d{4})\])?: (.*)$").unwrap()
    })
}

fn is_trailer(line: &str) -> bool {
    line.starts_with("Some errors have detailed explanations")
        || line.starts_with("For more information about")
}

/// Parses the human-readable compiler rendering. One record per top-level
/// `error`/`warning` header; everything up to the next header belongs to it.
pub fn parse_diagnostics(raw: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    let mut current: Option<(Diagnostic, Vec<&str>)> = None;

    let finish = |cur: Option<(Diagnostic, Vec<&str>)>, out: &mut Vec<Diagnostic>| {
        if let Some((mut d, lines)) = cur {
            let mut text = lines.join("\n");
            text.truncate(text.trim_end().len());
            text.push('\n');
            d.rendered = text;
            if !is_summary(&d.message) {
                out.push(d);
            }
        }
    };

    for line in raw.lines() {
        if let Some(caps) = header_re().captures(line) {
            finish(current.take(), &mut out);
            let level = if &caps[1] == "error" {
                Level::Error
            } else {
                Level::Warning
            };
            let d = Diagnostic {
                code: caps.get(2).and_then(|m| ErrorCode::new(m.as_str())),
                level,
                message: caps[3].to_owned(),
                rendered: String::new(),
            };
            current = Some((d, vec![line]));
        } else if is_trailer(line) {
            finish(current.take(), &mut out);
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    finish(current, &mut out);
    out
}

#[derive(Deserialize)]
struct JsonCode {
    code: String,
}

#[derive(Deserialize)]
struct JsonDiagnostic {
    #[serde(rename = "$message_type", default)]
    message_type: Option<String>,
    message: String,
    #[serde(default)]
    code: Option<JsonCode>,
    level: String,
    #[serde(default)]
    rendered: Option<String>,
}

/// Parses the JSON diagnostic stream, one object per line. Lines that are
/// not diagnostics (artifact notices, stray text) are skipped.
pub fn parse_json_diagnostics(raw: &str) -> Vec<Diagnostic> {
    raw.lines()
        .filter(|l| l.starts_with('{'))
        .filter_map(|l| serde_json::from_str::<JsonDiagnostic>(l).ok())
        .filter(|j| j.message_type.as_deref().is_none_or(|t| t == "diagnostic"))
        .filter_map(|j| {
            let level = match j.level.as_str() {
                "error" | "error: internal compiler error" => Level::Error,
                "warning" => Level::Warning,
                _ => return None,
            };
            if is_summary(&j.message) {
                return None;
            }
            Some(Diagnostic {
                code: j.code.and_then(|c| ErrorCode::new(&c.code)),
                level,
                rendered: j.rendered.unwrap_or_else(|| j.message.clone()),
                message: j.message,
            })
        })
        .collect()
}

/// Text of the error-level diagnostics, as fed to repair prompts.
pub fn render_errors(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .filter(|d| d.level == Level::Error)
        .map(|d| d.rendered.trim_end())
        .collect::<Vec<_>>()
        .join("\n\n")
}
