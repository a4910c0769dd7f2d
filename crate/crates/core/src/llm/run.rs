use thiserror::Error;

use crate::dsl::{interpret, parse_program, ParseError, Program};
use crate::table::{Scenario, Table};

use super::prompt::{build_prompt, verifier_prompt};
use super::{
    CompletionParams, CompletionRequest, LlmClient, LlmError, LoopConfig, Purpose, Variant,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecError {
    /// The candidate is not a valid program.
    Parse(String),
    /// The candidate ran and failed.
    Runtime(String),
}

/// Runs candidate program text on a table. The loop only talks to
/// candidates through this trait, so a different candidate language
/// (for example general-purpose code run in a sandboxed child process) can
/// be used without changing it.
pub trait CandidateExecutor: Send + Sync {
    fn execute(&self, candidate: &str, input: &Table) -> Result<Table, ExecError>;
}

/// Parses candidates as operator programs and interprets them.
#[derive(Clone, Copy, Debug, Default)]
pub struct DslExecutor;

impl CandidateExecutor for DslExecutor {
    fn execute(&self, candidate: &str, input: &Table) -> Result<Table, ExecError> {
        let program = parse_program(candidate).map_err(|e| ExecError::Parse(e.to_string()))?;
        interpret(&program, input).map_err(|e| ExecError::Runtime(e.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("reply contains no fenced code block")]
    NoBlock,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Contents of the last complete ```-fenced block. The info string after
/// the opening fence is ignored.
pub fn last_fenced_block(text: &str) -> Option<&str> {
    let mut open: Option<usize> = None;
    let mut last = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        if line.trim_start().starts_with("```") {
            match open.take() {
                None => open = Some(pos),
                Some(content_start) => last = Some(&text[content_start..start]),
            }
        }
    }
    last.map(|block| block.trim_end_matches(['\n', '\r']))
}

pub fn extract_program(response: &str) -> Result<Program, ExtractError> {
    let block = last_fenced_block(response).ok_or(ExtractError::NoBlock)?;
    Ok(parse_program(block)?)
}

/// What running one round's candidate on the example input gave.
#[derive(Clone, Debug, PartialEq)]
pub enum ExecOutcome {
    ParseError(String),
    RuntimeError(String),
    /// The candidate ran but produced this table instead.
    Mismatch(Table),
    Match,
    /// The client failed, so there was nothing to run.
    NoResponse(LlmError),
}

impl ExecOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            ExecOutcome::ParseError(_) => "parse_error",
            ExecOutcome::RuntimeError(_) => "runtime_error",
            ExecOutcome::Mismatch(_) => "mismatch",
            ExecOutcome::Match => "match",
            ExecOutcome::NoResponse(_) => "no_response",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub prompt_messages: Vec<super::ChatMessage>,
    pub raw_response: Option<String>,
    /// Text of the last fenced block of the reply.
    pub candidate: Option<String>,
    pub extracted_program: Option<Program>,
    pub exec_outcome: ExecOutcome,
    pub verifier_feedback: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoopOutcome {
    /// `program` is present when the candidate is an operator program.
    Solved {
        candidate: String,
        program: Option<Program>,
    },
    Failed(ExecOutcome),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttemptTranscript {
    pub scenario: String,
    pub variant: Variant,
    pub rounds: Vec<RoundRecord>,
    pub outcome: LoopOutcome,
}

impl AttemptTranscript {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, LoopOutcome::Solved { .. })
    }

    /// Round in which the example pair was first matched.
    pub fn solved_round(&self) -> Option<usize> {
        self.is_solved().then_some(self.rounds.len())
    }

    pub fn candidate(&self) -> Option<&str> {
        match &self.outcome {
            LoopOutcome::Solved { candidate, .. } => Some(candidate),
            LoopOutcome::Failed(_) => None,
        }
    }

    pub fn program(&self) -> Option<&Program> {
        match &self.outcome {
            LoopOutcome::Solved { program, .. } => program.as_ref(),
            LoopOutcome::Failed(_) => None,
        }
    }
}

/// Asks the client, in a fresh conversation, what is structurally wrong
/// with `actual`; the reply is returned verbatim.
pub fn verify_structural(
    actual: Result<&Table, &str>,
    expected: &Table,
    client: &dyn LlmClient,
    scenario: &str,
    round: usize,
    params: CompletionParams,
) -> Result<String, LlmError> {
    let messages = verifier_prompt(actual, expected);
    client.complete(&CompletionRequest {
        messages: &messages,
        params,
        scenario,
        round,
        purpose: Purpose::Verify,
    })
}

/// Runs the generate / execute / feed back loop on one scenario with
/// operator-program candidates.
pub fn run_loop(s: &Scenario, client: &dyn LlmClient, config: &LoopConfig) -> AttemptTranscript {
    run_loop_with(s, client, config, &DslExecutor)
}

pub fn run_loop_with(
    s: &Scenario,
    client: &dyn LlmClient,
    config: &LoopConfig,
    executor: &dyn CandidateExecutor,
) -> AttemptTranscript {
    let total = config.rounds();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let finish = |rounds, outcome| AttemptTranscript {
        scenario: s.name.clone(),
        variant: config.variant,
        rounds,
        outcome,
    };

    for round in 1..=total {
        let messages = build_prompt(s, config.knowledge, &rounds, config.variant);
        let reply = client.complete(&CompletionRequest {
            messages: &messages,
            params: config.params,
            scenario: &s.name,
            round,
            purpose: Purpose::Generate,
        });
        let reply = match reply {
            Ok(text) => text,
            Err(e) => {
                log::warn!("{} round {round}: {e}", s.name);
                rounds.push(RoundRecord {
                    round,
                    prompt_messages: messages,
                    raw_response: None,
                    candidate: None,
                    extracted_program: None,
                    exec_outcome: ExecOutcome::NoResponse(e.clone()),
                    verifier_feedback: None,
                });
                return finish(rounds, LoopOutcome::Failed(ExecOutcome::NoResponse(e)));
            }
        };

        let candidate = last_fenced_block(&reply).map(str::to_string);
        let program = candidate.as_deref().and_then(|c| parse_program(c).ok());
        let outcome = match &candidate {
            None => ExecOutcome::ParseError(ExtractError::NoBlock.to_string()),
            Some(c) => match executor.execute(c, &s.example_input) {
                Ok(t) if t == s.example_output => ExecOutcome::Match,
                Ok(t) => ExecOutcome::Mismatch(t),
                Err(ExecError::Parse(e)) => ExecOutcome::ParseError(e),
                Err(ExecError::Runtime(e)) => ExecOutcome::RuntimeError(e),
            },
        };
        log::debug!("{} round {round}: {}", s.name, outcome.kind());

        let mut record = RoundRecord {
            round,
            prompt_messages: messages,
            raw_response: Some(reply),
            candidate,
            extracted_program: program,
            exec_outcome: outcome,
            verifier_feedback: None,
        };
        if record.exec_outcome == ExecOutcome::Match {
            let solved = LoopOutcome::Solved {
                candidate: record.candidate.clone().expect("a match has a candidate"),
                program: record.extracted_program.clone(),
            };
            rounds.push(record);
            return finish(rounds, solved);
        }
        if config.variant == Variant::MultiB {
            let actual = match &record.exec_outcome {
                ExecOutcome::Mismatch(t) => Ok(t),
                ExecOutcome::ParseError(e) | ExecOutcome::RuntimeError(e) => Err(e.as_str()),
                ExecOutcome::Match | ExecOutcome::NoResponse(_) => unreachable!("handled above"),
            };
            match verify_structural(
                actual,
                &s.example_output,
                client,
                &s.name,
                round,
                config.params,
            ) {
                Ok(feedback) => record.verifier_feedback = Some(feedback),
                Err(e) => {
                    log::warn!("{} round {round}: verifier: {e}", s.name);
                    rounds.push(record);
                    return finish(rounds, LoopOutcome::Failed(ExecOutcome::NoResponse(e)));
                }
            }
        }
        rounds.push(record);
    }

    let last = rounds
        .last()
        .map(|r| r.exec_outcome.clone())
        .expect("at least one round runs");
    finish(rounds, LoopOutcome::Failed(last))
}
