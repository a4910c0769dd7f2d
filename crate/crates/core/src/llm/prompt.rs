use std::fmt::Write;

use crate::dsl::CATALOG;
use crate::table::{Scenario, Table};

use super::run::{ExecOutcome, RoundRecord};
use super::{ChatMessage, Variant};

/// The program syntax, as shown to the model.
pub const GRAMMAR: &str = r#"program := (op (";" | newline))*
op      := name "(" args? ")"
args    := arg ("," arg)*
arg     := integer | "double-quoted string"

Strings accept only the escapes \" and \\. `#` starts a comment that runs
to the end of the line. Indices are zero-based. Regex arguments use Rust
`regex` crate syntax (no lookaround, no backreferences).
Operators: drop, copy, move, merge, split, fold, unfold, fill, delete_row,
delete_empty, delete_match, extract, divide, transpose, wrap."#;

const SYSTEM: &str = "You write programs in a small table-transformation language. \
A program is applied to a table given as a JSON array of rows, each row an array of strings.";

const ANSWER_FORMAT: &str = "Answer with exactly one fenced code block (```) containing the program and nothing else inside the fence.";

/// One line per operator: signature and meaning.
pub fn operator_catalog() -> String {
    let mut out = String::from("Operator catalog:\n");
    for op in &CATALOG {
        let _ = writeln!(out, "- {}: {}", op.signature, op.summary);
    }
    out
}

fn first_request(s: &Scenario, knowledge: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Write a program that transforms the example input table into the example output table. \
The same program will then be applied to the test input tables.\n"
    );
    let _ = writeln!(out, "Example input:\n{}\n", s.example_input.to_json());
    let _ = writeln!(out, "Example output:\n{}\n", s.example_output.to_json());
    if !s.tests.is_empty() {
        let _ = writeln!(out, "Test inputs:");
        for t in &s.tests {
            let _ = writeln!(out, "{}", t.input.to_json());
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Grammar:\n{GRAMMAR}\n");
    if knowledge {
        let _ = writeln!(out, "{}", operator_catalog());
    }
    out.push_str(ANSWER_FORMAT);
    out
}

fn describe_result(outcome: &ExecOutcome) -> String {
    match outcome {
        ExecOutcome::ParseError(e) => format!("could not be read as a program: {e}"),
        ExecOutcome::RuntimeError(e) => format!("failed with the error: {e}"),
        ExecOutcome::Mismatch(actual) => format!("produced:\n{}", actual.to_json()),
        ExecOutcome::Match => "produced the expected output.".into(),
        ExecOutcome::NoResponse(e) => format!("got no reply: {e}"),
    }
}

fn follow_up(s: &Scenario, round: &RoundRecord, variant: Variant) -> String {
    let mut out = String::new();
    match variant {
        Variant::MultiB => {
            let _ = writeln!(
                out,
                "A reviewer compared the output of your program with the expected output and reported:\n{}\n",
                round.verifier_feedback.as_deref().unwrap_or("(no report)")
            );
        }
        Variant::OneShot | Variant::MultiA => {
            let program = round.candidate.as_deref().unwrap_or("(none)");
            let _ = writeln!(out, "Your previous program:\n```\n{program}\n```");
            let _ = writeln!(
                out,
                "On the example input it {}\n",
                describe_result(&round.exec_outcome)
            );
            let _ = writeln!(out, "Expected output:\n{}\n", s.example_output.to_json());
        }
    }
    let _ = write!(out, "Write a corrected program. {ANSWER_FORMAT}");
    out
}

/// Messages for the next round. Without history this is the first-round
/// prompt, which does not depend on the variant; with history every earlier
/// reply is replayed as an assistant turn followed by feedback in the style
/// of `variant`.
pub fn build_prompt(
    s: &Scenario,
    knowledge: bool,
    history: &[RoundRecord],
    variant: Variant,
) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::system(SYSTEM),
        ChatMessage::user(first_request(s, knowledge)),
    ];
    for round in history {
        messages.push(ChatMessage::assistant(
            round.raw_response.clone().unwrap_or_default(),
        ));
        messages.push(ChatMessage::user(follow_up(s, round, variant)));
    }
    messages
}

/// Messages asking the verifier to list structural differences.
pub fn verifier_prompt(actual: Result<&Table, &str>, expected: &Table) -> Vec<ChatMessage> {
    let actual = match actual {
        Ok(t) => t.to_json(),
        Err(e) => format!("(no table; the program failed with: {e})"),
    };
    vec![
        ChatMessage::system(
            "You review the output of a table transformation. Point out structural errors: \
row and column counts, values in the wrong place, missing or extra values. Do not write a program.",
        ),
        ChatMessage::user(format!(
            "Expected output:\n{}\n\nActual output:\n{actual}\n\nList the discrepancies, one per line.",
            expected.to_json()
        )),
    ]
}
