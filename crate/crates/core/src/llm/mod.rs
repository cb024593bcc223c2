//! Chat-completion gateway over remote and scripted backends.

mod extract;
mod openai;
mod scripted;

use std::path::PathBuf;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, extract_fenced, wrap_in_fence, GenerationError, TARGET_LANGUAGE};
pub use openai::OpenAiBackend;
pub use scripted::{prompt_digest, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    4096
}

impl GenerationParams {
    pub fn with_temperature(temperature: f64) -> Self {
        GenerationParams {
            temperature,
            top_p: None,
            top_k: None,
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(LlmError::InvalidParams(format!("top_p {p} outside (0, 1]")));
            }
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Sampling settings per request family: a low temperature for the first
/// translation, a higher one for every repair request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationPolicy {
    pub base: GenerationParams,
    pub repair: GenerationParams,
}

impl Default for GenerationPolicy {
    fn default() -> Self {
        GenerationPolicy {
            base: GenerationParams::with_temperature(0.2),
            repair: GenerationParams::with_temperature(0.6),
        }
    }
}

impl GenerationPolicy {
    pub fn params(&self, repair: bool) -> &GenerationParams {
        if repair {
            &self.repair
        } else {
            &self.base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    LengthTruncated,
    BackendError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
}

impl RawResponse {
    pub fn backend_error(message: impl Into<String>, attempts: u32) -> Self {
        RawResponse {
            text: String::new(),
            finish_reason: FinishReason::BackendError,
            usage: Usage::default(),
            error: Some(message.into()),
            attempts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// OpenAI-compatible `/chat/completions` endpoint.
    #[serde(rename = "openai")]
    OpenAi,
    /// Responses read from a directory of files.
    Scripted,
}

fn default_rate_limit() -> u32 {
    60
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    1000
}

fn default_request_timeout_secs() -> u64 {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    /// Response directory for scripted backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Requests per minute.
    #[serde(default = "default_rate_limit")]
    pub rate_limit: u32,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Delay before the first retry; doubled on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Prompts longer than this many bytes are rejected without a request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context_bytes: Option<usize>,
    #[serde(default = "default_request_timeout_secs")]
    pub request_timeout_secs: u64,
}

impl BackendSpec {
    pub fn scripted(name: &str, dir: impl Into<PathBuf>) -> Self {
        BackendSpec {
            name: name.to_owned(),
            kind: BackendKind::Scripted,
            endpoint: None,
            model: None,
            auth_env: None,
            dir: Some(dir.into()),
            rate_limit: 60_000,
            retries: 0,
            backoff_ms: 0,
            max_context_bytes: None,
            request_timeout_secs: default_request_timeout_secs(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |msg: &str| Err(LlmError::InvalidSpec(format!("{}: {msg}", self.name)));
        if self.rate_limit == 0 {
            return bad("rate_limit must be positive");
        }
        match self.kind {
            BackendKind::OpenAi if self.endpoint.is_none() => bad("endpoint is required"),
            BackendKind::OpenAi if self.model.is_none() => bad("model is required"),
            BackendKind::Scripted if self.dir.is_none() => bad("dir is required"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("cannot build backend: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Permanent(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub program_id: &'a str,
    pub prompt: &'a str,
    pub params: &'a GenerationParams,
}

pub trait Backend: Send + Sync {
    fn send(&self, request: &ChatRequest<'_>) -> Result<RawResponse, TransportError>;
}

/// Spaces request admissions at least `60s / rate` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(rate: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs(60) / rate.max(1),
            next_slot: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

/// A configured backend plus its shared rate limiter and retry policy.
pub struct Gateway {
    spec: BackendSpec,
    backend: Box<dyn Backend>,
    limiter: RateLimiter,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("spec", &self.spec).finish()
    }
}

impl Gateway {
    pub fn from_spec(spec: BackendSpec) -> Result<Self, LlmError> {
        spec.validate()?;
        let backend: Box<dyn Backend> = match spec.kind {
            BackendKind::OpenAi => Box::new(OpenAiBackend::new(&spec)?),
            BackendKind::Scripted => Box::new(ScriptedBackend::new(
                spec.dir.clone().expect("validated scripted spec has a dir"),
            )),
        };
        Ok(Self::with_backend(spec, backend))
    }

    pub fn with_backend(spec: BackendSpec, backend: Box<dyn Backend>) -> Self {
        let limiter = RateLimiter::per_minute(spec.rate_limit);
        Gateway {
            spec,
            backend,
            limiter,
        }
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    /// Sends one prompt. Never fails: every problem is reported as a
    /// response with `finish_reason = BackendError`.
    pub fn complete(&self, program_id: &str, prompt: &str, params: &GenerationParams) -> RawResponse {
        if let Err(e) = params.validate() {
            return RawResponse::backend_error(e.to_string(), 0);
        }
        if let Some(max) = self.spec.max_context_bytes {
            if prompt.len() > max {
                return RawResponse::backend_error(
                    format!("prompt of {} bytes exceeds the context limit of {max}", prompt.len()),
                    0,
                );
            }
        }
        let request = ChatRequest {
            program_id,
            prompt,
            params,
        };
        let max_attempts = self.spec.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let factor = 1u64 << (attempt - 2).min(16);
                thread::sleep(Duration::from_millis(self.spec.backoff_ms.saturating_mul(factor)));
            }
            self.limiter.acquire();
            match self.backend.send(&request) {
                Ok(mut response) => {
                    response.attempts = attempt;
                    return response;
                }
                Err(TransportError::Transient(e)) => {
                    tracing::debug!(backend = %self.spec.name, attempt, "transient failure: {e}");
                    last_error = e;
                }
                Err(TransportError::Permanent(e)) => {
                    return RawResponse::backend_error(e, attempt);
                }
            }
        }
        RawResponse::backend_error(
            format!("retries exhausted after {max_attempts} attempts: {last_error}"),
            max_attempts,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    /// Fails with a transient error a fixed number of times, then answers.
    struct Flaky {
        failures: u32,
        calls: Arc<AtomicU32>,
    }

    impl Backend for Flaky {
        fn send(&self, _: &ChatRequest<'_>) -> Result<RawResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
            if n <= self.failures {
                Err(TransportError::Transient(format!("refused #{n}")))
            } else {
                Ok(RawResponse {
                    text: "```rust\nfn main(){}\n```".into(),
                    finish_reason: FinishReason::Complete,
                    usage: Usage::default(),
                    error: None,
                    attempts: 0,
                })
            }
        }
    }

    fn flaky_gateway(failures: u32, retries: u32) -> (Gateway, Arc<AtomicU32>) {
        let calls = Arc::new(AtomicU32::new(0));
        let mut spec = BackendSpec::scripted("flaky", "/unused");
        spec.retries = retries;
        spec.backoff_ms = 1;
        let gw = Gateway::with_backend(
            spec,
            Box::new(Flaky {
                failures,
                calls: calls.clone(),
            }),
        );
        (gw, calls)
    }

    #[test]
    fn default_policy_temperatures() {
        let p = GenerationPolicy::default();
        assert_eq!(p.params(false).temperature, 0.2);
        assert_eq!(p.params(true).temperature, 0.6);
    }

    #[test]
    fn refuses_twice_then_succeeds_on_third_attempt() {
        let (gw, calls) = flaky_gateway(2, 3);
        let r = gw.complete("p", "prompt", &GenerationParams::with_temperature(0.2));
        assert_eq!(r.finish_reason, FinishReason::Complete);
        assert_eq!(r.attempts, 3);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn exhausted_retries_become_backend_error() {
        let (gw, calls) = flaky_gateway(10, 2);
        let r = gw.complete("p", "prompt", &GenerationParams::with_temperature(0.2));
        assert_eq!(r.finish_reason, FinishReason::BackendError);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert!(r.error.unwrap().contains("exhausted"));
    }

    #[test]
    fn oversized_prompt_is_rejected_without_a_call() {
        let (mut gw, calls) = flaky_gateway(0, 3);
        gw.spec.max_context_bytes = Some(10);
        let r = gw.complete("p", "this prompt is too long", &GenerationParams::with_temperature(0.2));
        assert_eq!(r.finish_reason, FinishReason::BackendError);
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(GenerationParams::with_temperature(2.5).validate().is_err());
        let mut p = GenerationParams::with_temperature(0.6);
        p.top_p = Some(0.0);
        assert!(p.validate().is_err());
        p.top_p = Some(1.0);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn spec_validation() {
        let mut s = BackendSpec::scripted("s", "/tmp");
        assert!(s.validate().is_ok());
        s.rate_limit = 0;
        assert!(s.validate().is_err());
        let s = BackendSpec {
            kind: BackendKind::OpenAi,
            ..BackendSpec::scripted("o", "/tmp")
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn rate_limiter_spaces_admissions() {
        let limiter = RateLimiter::per_minute(1200); // 50 ms apart
        let start = Instant::now();
        for _ in 0..3 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(100));
    }
}
