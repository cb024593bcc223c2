//! Loading C programs with their I/O test cases.
//!
//! Layout on disk:
//!
//! ```text
//! <root>/<id>/main.c
//! <root>/<id>/tests/<n>.in
//! <root>/<id>/tests/<n>.out
//! <root>/<id>/meta.json      (optional, precomputed coverage)
//! ```

mod clex;
mod dead_code;
mod metrics;
mod toplevel;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dead_code::{strip_dead_functions, StripOutcome, ENTRY_POINT};
pub use metrics::{extract_code_metrics, CodeMetrics};

pub const SOURCE_FILE: &str = "main.c";
pub const TESTS_DIR: &str = "tests";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected_output: String,
}

/// Coverage figures measured by external tooling (e.g. gcov), when available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub line: f64,
    pub function: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub id: String,
    pub source_text: String,
    pub test_cases: Vec<TestCase>,
    pub metrics: CodeMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWarning {
    pub program: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Corpus {
    pub programs: Vec<SourceProgram>,
    pub warnings: Vec<CorpusWarning>,
}

impl Corpus {
    pub fn get(&self, id: &str) -> Option<&SourceProgram> {
        self.programs.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub strip_dead_functions: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            strip_dead_functions: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {source}")]
    UnreadableRoot { path: PathBuf, source: io::Error },
    #[error("cannot write corpus at {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// Loads every program directory under `root`, sorted by id.
///
/// Directories that cannot be used (missing or empty source, no complete
/// test pair, bad meta file) are skipped and reported in `warnings`.
pub fn load_corpus(root: &Path, options: LoadOptions) -> Result<Corpus, CorpusError> {
    let unreadable = |source| CorpusError::UnreadableRoot {
        path: root.to_owned(),
        source,
    };
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(unreadable)? {
        let entry = entry.map_err(unreadable)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !entry.path().is_dir() {
            continue;
        }
        dirs.push((name, entry.path()));
    }
    dirs.sort();

    let mut corpus = Corpus::default();
    for (id, dir) in dirs {
        match load_program(&id, &dir, options, &mut corpus.warnings) {
            Ok(p) => corpus.programs.push(p),
            Err(message) => {
                tracing::warn!(program = %id, "skipping program: {message}");
                corpus.warnings.push(CorpusWarning {
                    program: id,
                    message,
                });
            }
        }
    }
    Ok(corpus)
}

fn load_program(
    id: &str,
    dir: &Path,
    options: LoadOptions,
    warnings: &mut Vec<CorpusWarning>,
) -> Result<SourceProgram, String> {
    let raw = fs::read(dir.join(SOURCE_FILE)).map_err(|e| format!("{SOURCE_FILE}: {e}"))?;
    let mut source_text = String::from_utf8_lossy(&raw).into_owned();
    if source_text.trim().is_empty() {
        return Err(format!("{SOURCE_FILE} is empty"));
    }
    if options.strip_dead_functions {
        let stripped = strip_dead_functions(&source_text);
        if let Some(w) = stripped.warning {
            warnings.push(CorpusWarning {
                program: id.to_owned(),
                message: w,
            });
        }
        source_text = stripped.text;
    }

    let test_cases = load_tests(id, &dir.join(TESTS_DIR), warnings)?;
    if test_cases.is_empty() {
        return Err("no test cases".to_owned());
    }

    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| format!("{META_FILE}: {e}"))?;
        serde_json::from_str::<ProgramMeta>(&text).map_err(|e| format!("{META_FILE}: {e}"))?
    } else {
        ProgramMeta::default()
    };

    Ok(SourceProgram {
        id: id.to_owned(),
        metrics: extract_code_metrics(&source_text),
        source_text,
        test_cases,
        coverage: meta.coverage,
    })
}

/// Orders `1, 2, 10` numerically and anything else after, by name.
fn case_sort_key(stem: &str) -> (u64, String) {
    (stem.parse().unwrap_or(u64::MAX), stem.to_owned())
}

fn load_tests(
    id: &str,
    dir: &Path,
    warnings: &mut Vec<CorpusWarning>,
) -> Result<Vec<TestCase>, String> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(format!("{TESTS_DIR}: {e}")),
    };
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "in") {
            if let Some(stem) = path.file_stem() {
                stems.push(stem.to_string_lossy().into_owned());
            }
        } else if path.extension().is_some_and(|e| e == "out") && !path.with_extension("in").exists()
        {
            warnings.push(CorpusWarning {
                program: id.to_owned(),
                message: format!("{} has no matching .in file", path.display()),
            });
        }
    }
    stems.sort_by_key(|s| case_sort_key(s));

    let mut cases = Vec::new();
    for stem in stems {
        let input = dir.join(format!("{stem}.in"));
        let output = dir.join(format!("{stem}.out"));
        let Ok(expected) = fs::read(&output) else {
            warnings.push(CorpusWarning {
                program: id.to_owned(),
                message: format!("{} has no matching .out file", input.display()),
            });
            continue;
        };
        let input = fs::read(&input).map_err(|e| format!("{}: {e}", input.display()))?;
        cases.push(TestCase {
            input: String::from_utf8_lossy(&input).into_owned(),
            expected_output: String::from_utf8_lossy(&expected).into_owned(),
        });
    }
    Ok(cases)
}

/// Writes programs back out in the corpus layout. Test files are numbered
/// from 1 in their current order.
pub fn write_corpus(root: &Path, programs: &[SourceProgram]) -> Result<(), CorpusError> {
    for p in programs {
        let dir = root.join(&p.id);
        let tests = dir.join(TESTS_DIR);
        let write = |path: PathBuf, data: &[u8]| {
            fs::write(&path, data).map_err(|source| CorpusError::Write { path, source })
        };
        fs::create_dir_all(&tests).map_err(|source| CorpusError::Write {
            path: tests.clone(),
            source,
        })?;
        write(dir.join(SOURCE_FILE), p.source_text.as_bytes())?;
        for (n, case) in p.test_cases.iter().enumerate() {
            write(tests.join(format!("{}.in", n + 1)), case.input.as_bytes())?;
            write(tests.join(format!("{}.out", n + 1)), case.expected_output.as_bytes())?;
        }
        if p.coverage.is_some() {
            let meta = ProgramMeta {
                coverage: p.coverage,
            };
            let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
            write(dir.join(META_FILE), text.as_bytes())?;
        }
    }
    Ok(())
}
