use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;
use thiserror::Error;

use super::{CompletionRequest, LlmClient, LlmError, Purpose};

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("cannot read mock script {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("mock script is not valid: {0}")]
    Invalid(#[from] serde_json::Error),
    #[error("mock script entry {index}: rounds start at 1")]
    ZeroRound { index: usize },
}

/// Wildcard scenario name in mock scripts.
const ANY_SCENARIO: &str = "*";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    defaults: BTreeMap<Purpose, String>,
    #[serde(default)]
    responses: Vec<ScriptEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    scenario: String,
    round: usize,
    #[serde(default = "generate")]
    kind: Purpose,
    reply: String,
}

fn generate() -> Purpose {
    Purpose::Generate
}

/// A deterministic client that answers from a script.
///
/// Replies are keyed by `(scenario, round, purpose)`, never by call order,
/// so concurrent use gives the same answers as sequential use. Lookup falls
/// back to the wildcard scenario `"*"` for the same round, then to the
/// per-purpose default; a call with no reply is an
/// [`LlmError::Unscripted`] error.
///
/// Script file format (JSON):
///
/// ```json
/// {
///   "defaults": { "verify": "row count differs" },
///   "responses": [
///     { "scenario": "op01_drop", "round": 1, "reply": "```\ndrop(1)\n```" },
///     { "scenario": "*", "round": 1, "kind": "generate", "reply": "no idea" }
///   ]
/// }
/// ```
///
/// `kind` is `generate` (default) or `verify`.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: HashMap<(String, usize, Purpose), String>,
    defaults: HashMap<Purpose, String>,
    calls: Mutex<BTreeMap<(String, Purpose), usize>>,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply(
        mut self,
        scenario: impl Into<String>,
        round: usize,
        purpose: Purpose,
        text: impl Into<String>,
    ) -> Self {
        self.replies
            .insert((scenario.into(), round, purpose), text.into());
        self
    }

    /// Scripts rounds `1..=n` of `scenario` in order.
    pub fn replies<I, S>(mut self, scenario: &str, purpose: Purpose, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for (i, text) in texts.into_iter().enumerate() {
            self = self.reply(scenario, i + 1, purpose, text);
        }
        self
    }

    pub fn default_reply(mut self, purpose: Purpose, text: impl Into<String>) -> Self {
        self.defaults.insert(purpose, text.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, MockScriptError> {
        let file: ScriptFile = serde_json::from_str(text)?;
        let mut client = ScriptedClient::new();
        client.defaults.extend(file.defaults);
        for (index, e) in file.responses.into_iter().enumerate() {
            if e.round == 0 {
                return Err(MockScriptError::ZeroRound { index });
            }
            client = client.reply(e.scenario, e.round, e.kind, e.reply);
        }
        Ok(client)
    }

    pub fn load(path: &Path) -> Result<Self, MockScriptError> {
        let text = fs::read_to_string(path).map_err(|source| MockScriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Number of calls made so far for one scenario and purpose.
    pub fn calls(&self, scenario: &str, purpose: Purpose) -> usize {
        self.calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&(scenario.to_string(), purpose))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .sum()
    }

    fn lookup(&self, scenario: &str, round: usize, purpose: Purpose) -> Option<&String> {
        self.replies
            .get(&(scenario.to_string(), round, purpose))
            .or_else(|| {
                self.replies
                    .get(&(ANY_SCENARIO.to_string(), round, purpose))
            })
            .or_else(|| self.defaults.get(&purpose))
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        *self
            .calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry((request.scenario.to_string(), request.purpose))
            .or_insert(0) += 1;
        self.lookup(request.scenario, request.round, request.purpose)
            .cloned()
            .ok_or_else(|| LlmError::Unscripted {
                scenario: request.scenario.to_string(),
                round: request.round,
                purpose: request.purpose,
            })
    }
}
