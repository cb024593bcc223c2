use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::buildcheck::CompilerConfig;
use crate::exec::ExecLimits;
use crate::llm::{BackendSpec, GenerationPolicy, LlmError};
use crate::prompt::{KnowledgeBase, PromptError, PromptKit, DEFAULT_FEEDBACK_BUDGET};
use crate::vuln::{CheckerConfig, MitigationConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub max_basic: u32,
    pub max_guided: u32,
    pub max_dynamic: u32,
    /// Byte budget for compiler and runtime feedback embedded in prompts.
    pub feedback_budget: usize,
    /// Directory of guidance files overriding the built-in ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb_dir: Option<PathBuf>,
    /// Worker threads. Does not affect results, so it is not digested.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_basic: 5,
            max_guided: 5,
            max_dynamic: 5,
            feedback_budget: DEFAULT_FEEDBACK_BUDGET,
            kb_dir: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub generation: GenerationPolicy,
    pub compiler: CompilerConfig,
    pub exec: ExecLimits,
    pub backends: Vec<BackendSpec>,
    /// Model-checker settings; not part of the digest.
    pub checker: CheckerConfig,
    /// Replay settings; not part of the digest.
    pub mitigation: MitigationConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("no backend named {0:?} in the config")]
    UnknownBackend(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Guidance(#[from] PromptError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything that determines a program's transcript, in canonical form.
#[derive(Serialize)]
struct DigestInput<'a> {
    max_basic: u32,
    max_guided: u32,
    max_dynamic: u32,
    feedback_budget: usize,
    generation: &'a GenerationPolicy,
    compiler: &'a CompilerConfig,
    exec: &'a ExecLimits,
    backend: &'a BackendSpec,
    guidance: Vec<&'a crate::prompt::GuidanceEntry>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pipeline.workers == 0 {
            return Err(ConfigError::Invalid("pipeline.workers must be positive".into()));
        }
        if self.pipeline.feedback_budget == 0 {
            return Err(ConfigError::Invalid("pipeline.feedback_budget must be positive".into()));
        }
        if self.compiler.command.is_empty() {
            return Err(ConfigError::Invalid("compiler.command is empty".into()));
        }
        self.generation
            .base
            .validate()
            .and(self.generation.repair.validate())?;
        self.exec
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for b in &self.backends {
            b.validate()?;
        }
        if self.checker.command.is_empty() {
            return Err(ConfigError::Invalid("checker.command is empty".into()));
        }
        if self.mitigation.c_compiler.command.is_empty() {
            return Err(ConfigError::Invalid("mitigation.c_compiler.command is empty".into()));
        }
        self.mitigation
            .limits
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Finds a configured backend. `scripted:<dir>` names an ad-hoc
    /// scripted backend reading from `<dir>`.
    pub fn backend(&self, name: &str) -> Result<BackendSpec, ConfigError> {
        if let Some(b) = self.backends.iter().find(|b| b.name == name) {
            return Ok(b.clone());
        }
        match name.strip_prefix("scripted:") {
            Some(dir) if !dir.is_empty() => Ok(BackendSpec::scripted(name, dir)),
            _ => Err(ConfigError::UnknownBackend(name.to_owned())),
        }
    }

    pub fn prompt_kit(&self) -> Result<PromptKit, ConfigError> {
        let kb = match &self.pipeline.kb_dir {
            Some(dir) => KnowledgeBase::with_overrides(dir)?,
            None => KnowledgeBase::builtin(),
        };
        Ok(PromptKit {
            kb,
            feedback_budget: self.pipeline.feedback_budget,
        })
    }

    /// Hex digest over every setting that can change a transcript, plus the
    /// guidance content actually in use.
    pub fn digest(&self, backend: &BackendSpec, kit: &PromptKit) -> String {
        let input = DigestInput {
            max_basic: self.pipeline.max_basic,
            max_guided: self.pipeline.max_guided,
            max_dynamic: self.pipeline.max_dynamic,
            feedback_budget: kit.feedback_budget,
            generation: &self.generation,
            compiler: &self.compiler,
            exec: &self.exec,
            backend,
            guidance: kit.kb.entries().collect(),
        };
        let canonical = serde_json::to_vec(&input).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
