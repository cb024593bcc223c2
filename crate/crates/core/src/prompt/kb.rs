//! Error-specific repair guidance, one TOML file per error code.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PromptError, GUIDED_CODES};
use crate::buildcheck::{Diagnostic, ErrorCode, Level};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cause {
    pub explanation: String,
    pub bad: String,
    pub fixed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceEntry {
    pub code: ErrorCode,
    pub title: String,
    pub causes: Vec<Cause>,
}

impl GuidanceEntry {
    fn validate(&self, origin: &str) -> Result<(), PromptError> {
        let invalid = |reason: String| PromptError::InvalidGuidance {
            origin: origin.to_owned(),
            reason,
        };
        if !GUIDED_CODES.contains(&self.code.as_str()) {
            return Err(invalid(format!("{} is not a guided-repair code", self.code)));
        }
        if self.causes.is_empty() {
            return Err(invalid("no causes".into()));
        }
        for (i, c) in self.causes.iter().enumerate() {
            if c.explanation.trim().is_empty() || c.bad.trim().is_empty() || c.fixed.trim().is_empty() {
                return Err(invalid(format!("cause {} has an empty field", i + 1)));
            }
        }
        Ok(())
    }

    /// Renders the entry as numbered causes, each with its cause and fix
    /// snippets.
    pub fn render(&self) -> String {
        let mut out = format!("Error {}: {}\n", self.code, self.title);
        for (i, c) in self.causes.iter().enumerate() {
            out.push_str(&format!(
                "\n{}. {} Example:\n//Cause:\n{}\n//Fix:\n{}\n",
                i + 1,
                c.explanation.trim(),
                c.bad.trim_end(),
                c.fixed.trim_end()
            ));
        }
        out
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("E0277", include_str!("../../kb/E0277.toml")),
    ("E0282", include_str!("../../kb/E0282.toml")),
    ("E0308", include_str!("../../kb/E0308.toml")),
    ("E0384", include_str!("../../kb/E0384.toml")),
    ("E0425", include_str!("../../kb/E0425.toml")),
    ("E0499", include_str!("../../kb/E0499.toml")),
    ("E0502", include_str!("../../kb/E0502.toml")),
    ("E0599", include_str!("../../kb/E0599.toml")),
];

fn parse_entry(text: &str, origin: &str) -> Result<GuidanceEntry, PromptError> {
    let entry: GuidanceEntry = toml::from_str(text).map_err(|e| PromptError::InvalidGuidance {
        origin: origin.to_owned(),
        reason: e.to_string(),
    })?;
    entry.validate(origin)?;
    Ok(entry)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    entries: BTreeMap<ErrorCode, GuidanceEntry>,
}

impl KnowledgeBase {
    /// The entries compiled into the library.
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|(name, text)| {
                let e = parse_entry(text, name).expect("built-in guidance is valid");
                (e.code.clone(), e)
            })
            .collect();
        KnowledgeBase { entries }
    }

    /// Built-in entries overridden by every `E????.toml` file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut kb = Self::builtin();
        let read_err = |path: PathBuf, e: std::io::Error| PromptError::InvalidGuidance {
            origin: path.display().to_string(),
            reason: e.to_string(),
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| read_err(dir.to_owned(), e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| read_err(path.clone(), e))?;
            let origin = path.display().to_string();
            let entry = parse_entry(&text, &origin)?;
            if path.file_stem().and_then(|s| s.to_str()) != Some(entry.code.as_str()) {
                return Err(PromptError::InvalidGuidance {
                    origin,
                    reason: format!("file name does not match code {}", entry.code),
                });
            }
            kb.entries.insert(entry.code.clone(), entry);
        }
        Ok(kb)
    }

    pub fn get(&self, code: &ErrorCode) -> Option<&GuidanceEntry> {
        self.entries.get(code)
    }

    pub fn entries(&self) -> impl Iterator<Item = &GuidanceEntry> {
        self.entries.values()
    }

    /// Entries for the error codes present in `diagnostics`, in order of
    /// first occurrence, each at most once.
    pub fn select<'a>(&'a self, diagnostics: &[Diagnostic]) -> Vec<&'a GuidanceEntry> {
        let mut picked: Vec<&GuidanceEntry> = Vec::new();
        for d in diagnostics.iter().filter(|d| d.level == Level::Error) {
            if let Some(e) = d.code.as_ref().and_then(|c| self.entries.get(c)) {
                if !picked.iter().any(|p| p.code == e.code) {
                    picked.push(e);
                }
            }
        }
        picked
    }
}
