//! Language-model side of the synthesizer: the client abstraction, prompt
//! construction, candidate extraction and the one-shot / multi-try loops.
//!
//! Candidates are programs in the operator language of [`crate::dsl`], so
//! they run in-process and deterministically. [`CandidateExecutor`] is the
//! seam for other candidate languages.

mod http;
mod mock;
mod prompt;
mod run;

use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpClient, DEFAULT_API_KEY_ENV};
pub use mock::{MockScriptError, ScriptedClient};
pub use prompt::{build_prompt, operator_catalog, verifier_prompt, GRAMMAR};
pub use run::{
    extract_program, last_fenced_block, run_loop, run_loop_with, verify_structural,
    AttemptTranscript, CandidateExecutor, DslExecutor, ExecError, ExecOutcome, ExtractError,
    LoopOutcome, RoundRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionParams {
    pub temperature: f64,
    /// Upper bound on generated tokens.
    pub max_output: u32,
    pub seed: Option<u64>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.0,
            max_output: 1024,
            seed: None,
        }
    }
}

/// Why a completion is requested. Scripted clients key their replies on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Generate,
    Verify,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Generate => "generate",
            Purpose::Verify => "verify",
        })
    }
}

/// One completion call. `scenario` and `round` identify the call for
/// clients that need it (the scripted client, logging); HTTP clients only
/// send the messages and parameters.
#[derive(Clone, Copy, Debug)]
pub struct CompletionRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub params: CompletionParams,
    pub scenario: &'a str,
    /// 1-based loop round.
    pub round: usize,
    pub purpose: Purpose,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited by the endpoint")]
    RateLimited,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint rejected the request with status {0}")]
    Rejected(u16),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("no scripted reply for scenario `{scenario}`, round {round} ({purpose})")]
    Unscripted {
        scenario: String,
        round: usize,
        purpose: Purpose,
    },
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
}

impl LlmError {
    /// Whether trying the same request again may succeed.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            LlmError::Timeout | LlmError::RateLimited | LlmError::Transport(_)
        )
    }
}

/// A chat-completion backend. Implementations must be safe to call from
/// several threads at once.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for Box<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for std::sync::Arc<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Retries transient failures with exponential backoff: the n-th retry
/// waits `base_delay · 2^(n-1)`.
pub struct RetryingClient<C> {
    inner: C,
    retries: u32,
    base_delay: Duration,
}

impl<C: LlmClient> RetryingClient<C> {
    pub fn new(inner: C) -> Self {
        RetryingClient {
            inner,
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_base_delay(mut self, delay: Duration) -> Self {
        self.base_delay = delay;
        self
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: LlmClient> LlmClient for RetryingClient<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Err(e) if e.is_transient() && attempt < self.retries => {
                    let delay = self.base_delay.saturating_mul(1 << attempt);
                    log::warn!(
                        "{} round {}: {e}; retrying in {delay:?}",
                        request.scenario,
                        request.round
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Caps the number of concurrent calls into the wrapped client.
pub struct InFlightLimit<C> {
    inner: C,
    cap: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl<C: LlmClient> InFlightLimit<C> {
    /// `cap` is raised to at least 1.
    pub fn new(inner: C, cap: usize) -> Self {
        InFlightLimit {
            inner,
            cap: cap.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: LlmClient> LlmClient for InFlightLimit<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        {
            let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
            while *active >= self.cap {
                active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
            }
            *active += 1;
        }
        let result = self.inner.complete(request);
        *self.active.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.freed.notify_one();
        result
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OneShot,
    /// Follow-ups show the previous program, its output and the expected
    /// output.
    MultiA,
    /// Follow-ups carry a verifier's description of what went wrong.
    MultiB,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::OneShot => "one_shot",
            Variant::MultiA => "multi_a",
            Variant::MultiB => "multi_b",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one_shot" => Ok(Variant::OneShot),
            "multi_a" => Ok(Variant::MultiA),
            "multi_b" => Ok(Variant::MultiB),
            other => Err(format!(
                "unknown variant `{other}` (expected one_shot, multi_a or multi_b)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopConfig {
    pub variant: Variant,
    /// Include the operator catalog in the first prompt.
    pub knowledge: bool,
    pub max_rounds: usize,
    pub params: CompletionParams,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            variant: Variant::MultiA,
            knowledge: false,
            max_rounds: 10,
            params: CompletionParams::default(),
        }
    }
}

impl LoopConfig {
    pub fn new(variant: Variant) -> Self {
        LoopConfig {
            variant,
            ..Default::default()
        }
    }

    pub fn with_knowledge(mut self, knowledge: bool) -> Self {
        self.knowledge = knowledge;
        self
    }

    pub fn with_max_rounds(mut self, rounds: usize) -> Self {
        self.max_rounds = rounds;
        self
    }

    /// Rounds the loop actually runs: one for one-shot, `max_rounds`
    /// (at least one) otherwise.
    pub fn rounds(&self) -> usize {
        match self.variant {
            Variant::OneShot => 1,
            _ => self.max_rounds.max(1),
        }
    }
}
