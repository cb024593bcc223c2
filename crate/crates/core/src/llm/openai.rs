use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    Backend, BackendSpec, ChatRequest, FinishReason, LlmError, RawResponse, TransportError, Usage,
};

/// Client for OpenAI-compatible chat-completion endpoints.
#[derive(Debug)]
pub struct OpenAiBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl OpenAiBackend {
    pub fn new(spec: &BackendSpec) -> Result<Self, LlmError> {
        let api_key = match &spec.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                LlmError::Setup(format!("{}: environment variable {var} is not set", spec.name))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(spec.request_timeout_secs))
            .build()
            .map_err(|e| LlmError::Setup(e.to_string()))?;
        Ok(OpenAiBackend {
            client,
            endpoint: spec.endpoint.clone().unwrap_or_default(),
            model: spec.model.clone().unwrap_or_default(),
            api_key,
        })
    }
}

impl Backend for OpenAiBackend {
    fn send(&self, request: &ChatRequest<'_>) -> Result<RawResponse, TransportError> {
        let p = request.params;
        let mut body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
        });
        if let Some(top_p) = p.top_p {
            body["top_p"] = json!(top_p);
        }
        if let Some(top_k) = p.top_k {
            body["top_k"] = json!(top_k);
        }

        let mut http = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http.send().map_err(|e| {
            // connection problems and timeouts are worth retrying
            TransportError::Transient(e.to_string())
        })?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        let text = resp
            .text()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Permanent(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| TransportError::Permanent(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError::Permanent("response has no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::LengthTruncated,
            _ => FinishReason::Complete,
        };
        let usage = parsed.usage.map_or_else(Usage::default, |u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok(RawResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason,
            usage,
            error: None,
            attempts: 1,
        })
    }
}
