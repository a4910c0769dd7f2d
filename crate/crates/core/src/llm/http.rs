//! OpenAI-style chat-completion adapter.
//!
//! Request: `POST {endpoint}` with `Authorization: Bearer <key>` and body
//!
//! ```json
//! {"model": "...", "messages": [{"role": "user", "content": "..."}],
//!  "temperature": 0.0, "max_tokens": 1024, "seed": 7}
//! ```
//!
//! (`seed` only when set). Reply: the text of `choices[0].message.content`.
//! Status 429 maps to [`LlmError::RateLimited`], 408 and 5xx to
//! [`LlmError::Transport`], other non-2xx statuses to [`LlmError::Rejected`].

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{ChatMessage, CompletionRequest, LlmClient, LlmError};

/// Environment variable read for the API key unless configured otherwise.
pub const DEFAULT_API_KEY_ENV: &str = "TABSYNTH_API_KEY";

pub struct HttpClient {
    agent: Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

impl HttpClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Self {
        Self::with_timeout(endpoint, model, api_key, Duration::from_secs(120))
    }

    pub fn with_timeout(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpClient {
            agent,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
        }
    }

    /// Reads the API key from the environment variable `key_var`.
    pub fn from_env(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        key_var: &str,
    ) -> Result<Self, LlmError> {
        let key = std::env::var(key_var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::MissingCredential(key_var.to_string()))?;
        Ok(Self::new(endpoint, model, key))
    }
}

fn map_error(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::StatusCode(429) => LlmError::RateLimited,
        ureq::Error::StatusCode(code) if code == 408 || code >= 500 => {
            LlmError::Transport(format!("status {code}"))
        }
        ureq::Error::StatusCode(code) => LlmError::Rejected(code),
        ureq::Error::Timeout(_) => LlmError::Timeout,
        ureq::Error::Json(e) => LlmError::Malformed(e.to_string()),
        other => LlmError::Transport(other.to_string()),
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let body = RequestBody {
            model: &self.model,
            messages: request.messages,
            temperature: request.params.temperature,
            max_tokens: request.params.max_output,
            seed: request.params.seed,
        };
        let reply: ResponseBody = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(map_error)?
            .body_mut()
            .read_json()
            .map_err(map_error)?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("reply has no choices[0].message.content".into()))
    }
}
