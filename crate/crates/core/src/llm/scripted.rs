//! Deterministic backend that answers from files.
//!
//! Lookup order for a request:
//!
//! 1. `<dir>/<sha256(prompt)>.txt`
//! 2. `<dir>/playlists/<program-id>/<n>.txt`, consumed in numeric order;
//!    once exhausted the last entry is repeated.
//!
//! A response file may start with a directive line
//! `@@finish: length_truncated` (or `backend_error`) to script an
//! incomplete response; the rest of the file is the response text.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{Backend, ChatRequest, FinishReason, RawResponse, TransportError, Usage};

pub const PLAYLISTS_DIR: &str = "playlists";

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug)]
pub struct ScriptedBackend {
    dir: PathBuf,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ScriptedBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ScriptedBackend {
            dir: dir.into(),
            cursors: Mutex::new(HashMap::new()),
        }
    }

    fn playlist(&self, program_id: &str) -> Vec<PathBuf> {
        let dir = self.dir.join(PLAYLISTS_DIR).join(program_id);
        let Ok(entries) = fs::read_dir(&dir) else {
            return Vec::new();
        };
        let mut files: Vec<(u64, PathBuf)> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .filter_map(|p| {
                let n = p.file_stem()?.to_str()?.parse().ok()?;
                Some((n, p))
            })
            .collect();
        files.sort();
        files.into_iter().map(|(_, p)| p).collect()
    }

    fn next_playlist_entry(&self, program_id: &str) -> Option<PathBuf> {
        let files = self.playlist(program_id);
        let last = files.len().checked_sub(1)?;
        let mut cursors = self.cursors.lock().expect("scripted cursors poisoned");
        let cursor = cursors.entry(program_id.to_owned()).or_insert(0);
        let path = files[(*cursor).min(last)].clone();
        *cursor += 1;
        Some(path)
    }
}

fn read_response(path: &Path, prompt: &str) -> Result<RawResponse, TransportError> {
    let content = fs::read_to_string(path)
        .map_err(|e| TransportError::Permanent(format!("{}: {e}", path.display())))?;
    let (finish_reason, text) = match content.strip_prefix("@@finish:") {
        Some(rest) => {
            let (directive, text) = rest.split_once('\n').unwrap_or((rest, ""));
            let reason = match directive.trim() {
                "complete" => FinishReason::Complete,
                "length_truncated" => FinishReason::LengthTruncated,
                "backend_error" => FinishReason::BackendError,
                other => {
                    return Err(TransportError::Permanent(format!(
                        "{}: unknown finish directive {other:?}",
                        path.display()
                    )))
                }
            };
            (reason, text.to_owned())
        }
        None => (FinishReason::Complete, content),
    };
    Ok(RawResponse {
        usage: Usage {
            prompt_tokens: prompt.split_whitespace().count() as u64,
            completion_tokens: text.split_whitespace().count() as u64,
        },
        error: (finish_reason == FinishReason::BackendError)
            .then(|| "scripted backend error".to_owned()),
        text,
        finish_reason,
        attempts: 1,
    })
}

impl Backend for ScriptedBackend {
    fn send(&self, request: &ChatRequest<'_>) -> Result<RawResponse, TransportError> {
        let keyed = self.dir.join(format!("{}.txt", prompt_digest(request.prompt)));
        if keyed.is_file() {
            return read_response(&keyed, request.prompt);
        }
        match self.next_playlist_entry(request.program_id) {
            Some(path) => read_response(&path, request.prompt),
            None => Err(TransportError::Permanent(format!(
                "no scripted response for program {} (prompt digest {})",
                request.program_id,
                prompt_digest(request.prompt)
            ))),
        }
    }
}
