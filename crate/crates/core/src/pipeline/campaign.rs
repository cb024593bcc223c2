use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    translate_program, ConfigError, PipelineContext, PipelineError, RunConfig, Transcript,
    TranscriptError, TRANSCRIPT_FILE,
};
use crate::corpus::SourceProgram;
use crate::llm::Gateway;

pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignState {
    pub run_id: String,
    pub backend: String,
    pub config_digest: String,
    pub completed: BTreeSet<String>,
}

/// Stops a campaign between programs; programs already running finish.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub resume: bool,
    pub workers: usize,
    /// Start at most this many pending programs in this invocation.
    pub limit: Option<usize>,
    pub cancel: CancelToken,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            resume: false,
            workers: 1,
            limit: None,
            cancel: CancelToken::default(),
        }
    }
}

#[derive(Debug)]
pub struct CampaignSummary {
    pub state: CampaignState,
    /// Complete transcripts of every program in the corpus, by id.
    pub transcripts: Vec<Transcript>,
    /// Programs translated by this invocation, in completion order.
    pub ran: Vec<String>,
    /// Programs skipped because an earlier invocation completed them.
    pub skipped: Vec<String>,
    /// Corpus programs still without a complete transcript.
    pub pending: Vec<String>,
}

impl CampaignSummary {
    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0} already holds a run; pass --resume to continue it")]
    AlreadyExists(PathBuf),
    #[error("campaign state {path} is unreadable ({reason}); delete it to rebuild the state from the transcripts")]
    CorruptState { path: PathBuf, reason: String },
    #[error("run {path} was made with a different configuration (digest {found}, now {expected})")]
    ConfigMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("program {program}: {source}")]
    Program {
        program: String,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_state(out: &Path, state: &CampaignState) -> Result<(), CampaignError> {
    let path = out.join(STATE_FILE);
    let tmp = out.join(format!("{STATE_FILE}.tmp"));
    let mut bytes = serde_json::to_vec_pretty(state).expect("state serializes");
    bytes.push(b'\n');
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(&bytes)
        .and_then(|()| f.sync_all())
        .map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

fn program_dirs(out: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .map_err(io_err(out))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(TRANSCRIPT_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Reads every transcript in a run directory, sorted by program id.
pub fn load_transcripts(run_dir: &Path) -> Result<Vec<Transcript>, CampaignError> {
    let mut out = Vec::new();
    for dir in program_dirs(run_dir)? {
        out.push(Transcript::read(&dir.join(TRANSCRIPT_FILE))?);
    }
    out.sort_by(|a, b| a.program_id.cmp(&b.program_id));
    Ok(out)
}

fn rebuild_state(out: &Path, fresh: CampaignState) -> Result<CampaignState, CampaignError> {
    let mut state = fresh;
    for dir in program_dirs(out)? {
        let path = dir.join(TRANSCRIPT_FILE);
        let t = match Transcript::read(&path) {
            Ok(t) => t,
            Err(e) => {
                tracing::warn!("{e}; the program will be translated again");
                continue;
            }
        };
        if t.config_digest != state.config_digest {
            return Err(CampaignError::ConfigMismatch {
                path,
                found: t.config_digest,
                expected: state.config_digest,
            });
        }
        if t.is_complete() {
            state.completed.insert(t.program_id);
        }
    }
    Ok(state)
}

fn prepare_state(out: &Path, fresh: CampaignState, resume: bool) -> Result<CampaignState, CampaignError> {
    let state_path = out.join(STATE_FILE);
    if state_path.exists() {
        if !resume {
            return Err(CampaignError::AlreadyExists(out.to_owned()));
        }
        let text = fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
        let mut state: CampaignState =
            serde_json::from_str(&text).map_err(|e| CampaignError::CorruptState {
                path: state_path.clone(),
                reason: e.to_string(),
            })?;
        if state.config_digest != fresh.config_digest {
            return Err(CampaignError::ConfigMismatch {
                path: state_path,
                found: state.config_digest,
                expected: fresh.config_digest,
            });
        }
        // a completed entry whose transcript is gone or unfinished is redone
        state.completed.retain(|id| {
            Transcript::read(&out.join(id).join(TRANSCRIPT_FILE)).is_ok_and(|t| t.is_complete())
        });
        return Ok(state);
    }
    if out.exists() && !program_dirs(out)?.is_empty() {
        if !resume {
            return Err(CampaignError::AlreadyExists(out.to_owned()));
        }
        return rebuild_state(out, fresh);
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    Ok(fresh)
}

/// Translates every corpus program that the run directory does not already
/// hold a complete transcript for. With one worker and a scripted backend
/// the transcripts are reproducible byte for byte.
pub fn run_campaign(
    programs: &[SourceProgram],
    gateway: &Gateway,
    config: &RunConfig,
    out: &Path,
    options: &CampaignOptions,
) -> Result<CampaignSummary, CampaignError> {
    config.validate()?;
    let kit = config.prompt_kit()?;
    let digest = config.digest(gateway.spec(), &kit);
    let fresh = CampaignState {
        run_id: out
            .file_name()
            .map_or_else(|| "run".to_owned(), |n| n.to_string_lossy().into_owned()),
        backend: gateway.spec().name.clone(),
        config_digest: digest.clone(),
        completed: BTreeSet::new(),
    };
    let state = prepare_state(out, fresh, options.resume)?;
    write_state(out, &state)?;

    let skipped: Vec<String> = programs
        .iter()
        .filter(|p| state.completed.contains(&p.id))
        .map(|p| p.id.clone())
        .collect();
    let mut todo: Vec<&SourceProgram> = programs
        .iter()
        .filter(|p| !state.completed.contains(&p.id))
        .collect();
    if let Some(limit) = options.limit {
        todo.truncate(limit);
    }

    let ctx = PipelineContext {
        gateway,
        kit: &kit,
        config,
        config_digest: &digest,
    };
    let shared = Mutex::new((state, Vec::<String>::new()));
    let failure: Mutex<Option<CampaignError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = options.workers.max(1).min(todo.len().max(1));

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if options.cancel.is_cancelled() || abort.load(Ordering::SeqCst) {
                    break;
                }
                let Some(program) = todo.get(next.fetch_add(1, Ordering::SeqCst)) else {
                    break;
                };
                let dir = out.join(&program.id);
                let result = (|| {
                    if dir.exists() {
                        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
                    }
                    let t = translate_program(program, &ctx, &dir).map_err(|source| {
                        CampaignError::Program {
                            program: program.id.clone(),
                            source,
                        }
                    })?;
                    let mut guard = shared.lock().expect("campaign state poisoned");
                    guard.0.completed.insert(program.id.clone());
                    guard.1.push(program.id.clone());
                    tracing::info!(
                        program = %program.id,
                        outcome = t.outcome_kind().map_or("unfinished", |o| o.as_str()),
                        attempts = t.attempts.len(),
                        done = guard.1.len(),
                        of = todo.len(),
                        "translated"
                    );
                    write_state(out, &guard.0)
                })();
                if let Err(e) = result {
                    abort.store(true, Ordering::SeqCst);
                    failure.lock().expect("failure slot poisoned").get_or_insert(e);
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("failure slot poisoned") {
        return Err(e);
    }
    let (state, ran) = shared.into_inner().expect("campaign state poisoned");
    let mut transcripts = Vec::new();
    let mut pending = Vec::new();
    for p in programs {
        if state.completed.contains(&p.id) {
            transcripts.push(Transcript::read(&out.join(&p.id).join(TRANSCRIPT_FILE))?);
        } else {
            pending.push(p.id.clone());
        }
    }
    Ok(CampaignSummary {
        state,
        transcripts,
        ran,
        skipped,
        pending,
    })
}
