use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use tabsynth::dsl::{Operator, CATALOG};
use tabsynth::llm::*;
use tabsynth::{interpret, Program, Scenario, Table};

fn t(rows: &[&[&str]]) -> Table {
    Table::from_rows(rows.iter().map(|r| r.to_vec()))
}

fn drop_scenario() -> Scenario {
    Scenario::new("drop_middle", t(&[&["a", "b", "c"]]), t(&[&["a", "c"]]))
        .with_test(t(&[&["x", "y", "z"]]), t(&[&["x", "z"]]))
}

fn fig4() -> Scenario {
    let input = t(&[
        &["001-001", "1", "", "", "", "$-"],
        &["001-001", "2", "", "", "", "$-"],
        &["001-001", "3", "", "", "", "$7,664.25"],
        &["001-001", "4", "", "", "", "$-"],
    ]);
    Scenario::new(
        "fig4",
        input,
        t(&[&["001-001", "$-", "$-", "$7,664.25", "$-"]]),
    )
}

fn fenced(program: &str) -> String {
    format!("Here you go:\n```\n{program}\n```\n")
}

/// Records every request it sees and answers from a fixed list.
struct Recorder {
    replies: Vec<String>,
    seen: Mutex<Vec<(Purpose, usize, Vec<ChatMessage>)>>,
}

impl Recorder {
    fn new(replies: &[&str]) -> Self {
        Recorder {
            replies: replies.iter().map(|s| s.to_string()).collect(),
            seen: Mutex::new(Vec::new()),
        }
    }
}

impl LlmClient for Recorder {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push((request.purpose, request.round, request.messages.to_vec()));
        Ok(self.replies[(seen.len() - 1).min(self.replies.len() - 1)].clone())
    }
}

#[test]
fn first_prompt_without_knowledge() {
    let s = drop_scenario();
    let messages = build_prompt(&s, false, &[], Variant::OneShot);
    let user = &messages.last().unwrap().content;
    assert_eq!(messages.last().unwrap().role, Role::User);
    assert!(user.contains(r#"[["a","b","c"]]"#));
    assert!(user.contains(r#"[["a","c"]]"#));
    assert!(
        user.contains(r#"[["x","y","z"]]"#),
        "test input is part of the prompt"
    );
    assert!(user.contains(GRAMMAR));
    assert!(user.contains("fenced code block"));
    assert!(!user.contains("Operator catalog"));
}

#[test]
fn first_prompt_with_knowledge_lists_every_operator() {
    let s = drop_scenario();
    let user = build_prompt(&s, true, &[], Variant::OneShot)
        .pop()
        .unwrap()
        .content;
    let catalog = &user[user.find("Operator catalog").expect("catalog section")..];
    for op in &CATALOG {
        assert!(
            catalog.contains(&format!("- {}", op.signature)),
            "{}",
            op.name
        );
    }
    assert_eq!(catalog.lines().filter(|l| l.starts_with("- ")).count(), 15);
}

#[test]
fn multi_a_follow_up_quotes_the_error_verbatim() {
    let s = drop_scenario();
    let client = ScriptedClient::new().replies(
        "drop_middle",
        Purpose::Generate,
        [fenced("drop(5)"), fenced("drop(1)")],
    );
    let transcript = run_loop(&s, &client, &LoopConfig::new(Variant::MultiA));
    assert_eq!(transcript.rounds.len(), 2);
    let first = &transcript.rounds[0];
    let ExecOutcome::RuntimeError(err) = &first.exec_outcome else {
        panic!("expected a runtime error, got {:?}", first.exec_outcome)
    };
    assert!(err.contains("column 5 out of range"));
    let follow_up = &transcript.rounds[1].prompt_messages.last().unwrap().content;
    assert!(follow_up.contains(err.as_str()));
    assert!(follow_up.contains("drop(5)"));
    assert!(
        follow_up.contains(r#"[["a","c"]]"#),
        "expected output is repeated"
    );
    assert_eq!(
        transcript.rounds[1].prompt_messages[2].role,
        Role::Assistant
    );
}

#[test]
fn extraction_rules() {
    assert_eq!(
        extract_program(&fenced("drop(1)")).unwrap(),
        Program::new(vec![Operator::Drop { col: 1 }])
    );
    let two = "First try:\n```\ndrop(0)\n```\nBetter:\n```dsl\ndrop(2)\n```\n";
    assert_eq!(
        extract_program(two).unwrap(),
        Program::new(vec![Operator::Drop { col: 2 }])
    );
    assert_eq!(extract_program("drop(1)"), Err(ExtractError::NoBlock));
    assert_eq!(
        extract_program("```\ndrop(1)\n"),
        Err(ExtractError::NoBlock),
        "unclosed fence"
    );
    assert!(matches!(
        extract_program(&fenced("drop(")),
        Err(ExtractError::Parse(_))
    ));
}

#[test]
fn scripted_bad_then_good_solves_in_round_two() {
    let s = drop_scenario();
    let client = ScriptedClient::new().replies(
        "drop_middle",
        Purpose::Generate,
        [fenced("drop(0)"), fenced("drop(1)")],
    );
    let transcript = run_loop(&s, &client, &LoopConfig::new(Variant::MultiA));
    assert!(transcript.is_solved());
    assert_eq!(transcript.solved_round(), Some(2));
    assert_eq!(transcript.rounds.len(), 2);
    assert!(matches!(
        transcript.rounds[0].exec_outcome,
        ExecOutcome::Mismatch(_)
    ));
    assert_eq!(transcript.rounds[1].exec_outcome, ExecOutcome::Match);
    // replayed independently of the loop
    let program = transcript.program().unwrap();
    assert_eq!(
        interpret(program, &s.example_input).unwrap(),
        s.example_output
    );
    assert_eq!(client.calls("drop_middle", Purpose::Generate), 2);
}

#[test]
fn unparsable_replies_fail_after_max_rounds() {
    let s = drop_scenario();
    let client =
        ScriptedClient::new().default_reply(Purpose::Generate, "I would drop the middle column.");
    let config = LoopConfig::new(Variant::MultiA).with_max_rounds(3);
    let transcript = run_loop(&s, &client, &config);
    assert!(!transcript.is_solved());
    assert_eq!(transcript.rounds.len(), 3);
    assert!(transcript
        .rounds
        .iter()
        .all(|r| r.exec_outcome.kind() == "parse_error"));
    assert!(matches!(
        transcript.outcome,
        LoopOutcome::Failed(ExecOutcome::ParseError(_))
    ));
    assert_eq!(client.total_calls(), 3);
}

#[test]
fn multi_b_call_counts_are_exact() {
    let s = drop_scenario();
    let client = ScriptedClient::new()
        .default_reply(Purpose::Generate, fenced("drop(0)"))
        .default_reply(Purpose::Verify, "column 0 should be kept");
    let config = LoopConfig::new(Variant::MultiB).with_max_rounds(4);
    let transcript = run_loop(&s, &client, &config);
    assert_eq!(transcript.rounds.len(), 4);
    assert_eq!(client.calls("drop_middle", Purpose::Generate), 4);
    // one verifier call per failed round, the last one included
    assert_eq!(client.calls("drop_middle", Purpose::Verify), 4);
    assert!(transcript
        .rounds
        .iter()
        .all(|r| r.verifier_feedback.is_some()));
}

#[test]
fn verifier_reply_is_passed_through() {
    let client = ScriptedClient::new().reply("s", 1, Purpose::Verify, "row count differs: 1 vs 2");
    let feedback = verify_structural(
        Ok(&t(&[&["a"]])),
        &t(&[&["a"], &["b"]]),
        &client,
        "s",
        1,
        CompletionParams::default(),
    )
    .unwrap();
    assert_eq!(feedback, "row count differs: 1 vs 2");
}

#[test]
fn verifier_prompt_carries_runtime_error_text() {
    let recorder = Recorder::new(&["ok"]);
    verify_structural(
        Err("column 5 out of range"),
        &t(&[&["a"]]),
        &recorder,
        "s",
        1,
        CompletionParams::default(),
    )
    .unwrap();
    let seen = recorder.seen.lock().unwrap();
    assert_eq!(seen[0].0, Purpose::Verify);
    assert!(seen[0]
        .2
        .iter()
        .any(|m| m.content.contains("column 5 out of range")));
}

#[test]
fn fig4_style_feedback_reaches_the_next_prompt() {
    let s = fig4();
    let feedback =
        "expected 1 row of 5 cells, got 1 row of 4 cells; the value $7,664.25 is missing";
    let client = ScriptedClient::new()
        .reply(
            "fig4",
            1,
            Purpose::Generate,
            fenced("drop(1); drop(1); drop(1); drop(1); unfold(0); drop(3)"),
        )
        .reply("fig4", 1, Purpose::Verify, feedback)
        .reply(
            "fig4",
            2,
            Purpose::Generate,
            fenced("drop(1); drop(1); drop(1); drop(1); unfold(0)"),
        );
    let transcript = run_loop(&s, &client, &LoopConfig::new(Variant::MultiB));
    let ExecOutcome::Mismatch(actual) = &transcript.rounds[0].exec_outcome else {
        panic!()
    };
    assert_eq!(actual.max_width(), 4);
    assert_eq!(
        transcript.rounds[0].verifier_feedback.as_deref(),
        Some(feedback)
    );
    let second_prompt = &transcript.rounds[1].prompt_messages.last().unwrap().content;
    assert!(second_prompt.contains(feedback));
    assert_eq!(transcript.solved_round(), Some(2));
}

#[test]
fn round_one_prompt_does_not_depend_on_the_variant() {
    let s = fig4();
    let run = |variant| {
        let recorder = Recorder::new(&["nothing"]);
        let config = LoopConfig::new(variant).with_max_rounds(1);
        run_loop(&s, &recorder, &config);
        let seen = recorder.seen.lock().unwrap();
        seen[0].2.clone()
    };
    assert_eq!(run(Variant::OneShot), run(Variant::MultiA));
    assert_eq!(run(Variant::OneShot), run(Variant::MultiB));
}

#[test]
fn one_shot_runs_one_round() {
    let s = drop_scenario();
    let client = ScriptedClient::new().default_reply(Purpose::Generate, fenced("drop(0)"));
    let config = LoopConfig::new(Variant::OneShot).with_max_rounds(10);
    let transcript = run_loop(&s, &client, &config);
    assert_eq!(transcript.rounds.len(), 1);
    assert_eq!(client.total_calls(), 1);
}

#[test]
fn transcripts_are_reproducible() {
    let s = fig4();
    let client = ScriptedClient::new()
        .default_reply(Purpose::Generate, fenced("drop(1)"))
        .default_reply(Purpose::Verify, "too many rows");
    let config = LoopConfig::new(Variant::MultiB)
        .with_max_rounds(3)
        .with_knowledge(true);
    assert_eq!(
        run_loop(&s, &client, &config),
        run_loop(&s, &client, &config)
    );
}

struct Flaky {
    failures: Vec<LlmError>,
    calls: AtomicUsize,
}

impl LlmClient for Flaky {
    fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match self.failures.get(n) {
            Some(e) => Err(e.clone()),
            None => Ok(fenced("drop(1)")),
        }
    }
}

fn flaky(failures: Vec<LlmError>) -> RetryingClient<Flaky> {
    RetryingClient::new(Flaky {
        failures,
        calls: AtomicUsize::new(0),
    })
    .with_base_delay(Duration::ZERO)
}

#[test]
fn transient_errors_are_retried() {
    let s = drop_scenario();
    let client = flaky(vec![
        LlmError::RateLimited,
        LlmError::Timeout,
        LlmError::Transport("reset".into()),
    ]);
    let transcript = run_loop(&s, &client, &LoopConfig::new(Variant::OneShot));
    assert!(transcript.is_solved());
    assert_eq!(client.inner().calls.load(Ordering::SeqCst), 4);
}

#[test]
fn persistent_failure_stops_the_loop_with_its_reason() {
    let s = drop_scenario();
    let client = flaky(vec![LlmError::Transport("reset".into()); 4]);
    let transcript = run_loop(&s, &client, &LoopConfig::new(Variant::MultiA));
    assert_eq!(
        client.inner().calls.load(Ordering::SeqCst),
        4,
        "one call plus three retries"
    );
    assert_eq!(transcript.rounds.len(), 1);
    assert_eq!(
        transcript.outcome,
        LoopOutcome::Failed(ExecOutcome::NoResponse(LlmError::Transport("reset".into())))
    );
}

#[test]
fn rejected_requests_are_not_retried() {
    let client = flaky(vec![LlmError::Rejected(401)]);
    let transcript = run_loop(&drop_scenario(), &client, &LoopConfig::default());
    assert_eq!(client.inner().calls.load(Ordering::SeqCst), 1);
    assert!(!transcript.is_solved());
}

#[test]
fn retry_backoff_doubles() {
    let client = RetryingClient::new(Flaky {
        failures: vec![LlmError::Timeout; 2],
        calls: AtomicUsize::new(0),
    })
    .with_base_delay(Duration::from_millis(20));
    let started = std::time::Instant::now();
    run_loop(
        &drop_scenario(),
        &client,
        &LoopConfig::new(Variant::OneShot),
    );
    assert!(
        started.elapsed() >= Duration::from_millis(60),
        "20 ms + 40 ms"
    );
}

struct Slow {
    active: AtomicUsize,
    peak: AtomicUsize,
}

impl LlmClient for Slow {
    fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(20));
        self.active.fetch_sub(1, Ordering::SeqCst);
        Ok(String::new())
    }
}

#[test]
fn in_flight_cap_is_respected() {
    let client = InFlightLimit::new(
        Slow {
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        },
        2,
    );
    let s = drop_scenario();
    std::thread::scope(|scope| {
        for _ in 0..6 {
            scope.spawn(|| run_loop(&s, &client, &LoopConfig::new(Variant::OneShot)));
        }
    });
    assert_eq!(client.inner().peak.load(Ordering::SeqCst), 2);
}

#[test]
fn http_adapter_maps_request_and_reply() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut headers = Vec::new();
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            headers.push(line.trim_end().to_string());
        }
        let length: usize = headers
            .iter()
            .find_map(|h| {
                h.to_ascii_lowercase()
                    .strip_prefix("content-length:")
                    .map(|v| v.trim().parse().unwrap())
            })
            .unwrap();
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let reply =
            r#"{"choices":[{"message":{"role":"assistant","content":"```\ndrop(1)\n```"}}]}"#;
        write!(
            reader.get_mut(),
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        (headers, String::from_utf8(body).unwrap())
    });

    let client = HttpClient::new(
        format!("http://{addr}/v1/chat/completions"),
        "test-model",
        "secret",
    );
    let messages = [ChatMessage::system("sys"), ChatMessage::user("hi")];
    let reply = client
        .complete(&CompletionRequest {
            messages: &messages,
            params: CompletionParams {
                temperature: 0.0,
                max_output: 64,
                seed: Some(7),
            },
            scenario: "s",
            round: 1,
            purpose: Purpose::Generate,
        })
        .unwrap();
    assert_eq!(reply, "```\ndrop(1)\n```");

    let (headers, body) = server.join().unwrap();
    assert!(headers[0].starts_with("POST /v1/chat/completions"));
    assert!(headers
        .iter()
        .any(|h| h.eq_ignore_ascii_case("authorization: Bearer secret")));
    let body: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "hi");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["seed"], 7);
}
