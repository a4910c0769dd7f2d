use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use tabsynth::eval::{self, Approach, EvalConfig};
use tabsynth::hybrid;
use tabsynth::llm::{
    self, HttpClient, InFlightLimit, LlmClient, LoopConfig, LoopOutcome, RetryingClient,
    ScriptedClient, Variant,
};
use tabsynth::search::{synthesize, SearchBudget, SearchOutcome};
use tabsynth::table::{import_legacy_scenario, load_scenario_file};
use tabsynth::{interpret, tables_equal, Program, Scenario, ScenarioSet, Table};

/// Synthesizes table transformation programs from input/output examples.
#[derive(Parser, Debug)]
#[command(name = "tabsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and replay the program on its tests.
    Synth {
        /// Scenario file (canonical JSON, or a legacy list-literal file).
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve and score every scenario below a corpus directory.
    Eval {
        corpus: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Directory the report files are written to.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Convert a legacy list-literal scenario into the canonical format.
    Import {
        legacy: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the accuracy table from one or more scores files.
    Report {
        #[arg(required = true)]
        scores: Vec<PathBuf>,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// search, llm_one_shot, llm_multi_a, llm_multi_b or hybrid.
    #[arg(long, default_value = "search")]
    approach: Approach,
    /// Include the operator catalog in prompts.
    #[arg(long)]
    knowledge: bool,
    #[arg(long, default_value_t = 10)]
    max_rounds: usize,
    /// Loop variant used by the hybrid after the search gives up.
    #[arg(long, default_value = "multi_a")]
    variant: Variant,
    #[arg(long)]
    max_expansions: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Search wall-clock limit per scenario, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Chat-completions endpoint URL.
    #[arg(long, requires = "model", conflicts_with = "mock_script")]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = llm::DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Scripted responses to use instead of a live endpoint.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Worker threads (0: one per core); also caps concurrent model calls.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Sampling seed forwarded to the model.
    #[arg(long)]
    seed: Option<u64>,
}

/// Failure categories, one per nonzero exit status.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Ingestion(anyhow::Error),
    /// synth only: no program, or a test output did not match.
    Unsolved,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Ingestion(_) => 2,
            Failure::Unsolved => 3,
        }
    }
}

type CliResult = Result<(), Failure>;

impl RunArgs {
    fn budget(&self) -> Result<SearchBudget, Failure> {
        let mut budget = SearchBudget::default();
        if let Some(n) = self.max_expansions {
            budget = budget.with_max_expansions(n);
        }
        if let Some(n) = self.max_depth {
            budget = budget.with_max_depth(n);
        }
        if let Some(secs) = self.timeout {
            let d = Duration::try_from_secs_f64(secs).map_err(|_| {
                Failure::Config(anyhow!(
                    "--timeout must be a non-negative number of seconds"
                ))
            })?;
            budget = budget.with_wall_clock(d);
        }
        Ok(budget)
    }

    fn eval_config(&self) -> Result<EvalConfig, Failure> {
        let mut loop_config = LoopConfig::new(self.variant).with_max_rounds(self.max_rounds);
        loop_config.params.seed = self.seed;
        Ok(EvalConfig {
            approach: self.approach,
            knowledge: self.knowledge,
            budget: self.budget()?,
            loop_config,
            jobs: self.jobs,
        })
    }

    /// The model client, if the approach needs one.
    fn client(&self) -> Result<Option<Box<dyn LlmClient>>, Failure> {
        if !self.approach.uses_client() {
            if self.endpoint.is_some() || self.mock_script.is_some() {
                log::warn!(
                    "approach {} does not use a model; ignoring client flags",
                    self.approach.as_str()
                );
            }
            return Ok(None);
        }
        match (&self.endpoint, &self.mock_script) {
            (Some(endpoint), None) => {
                let model = self.model.as_deref().unwrap_or_default();
                let http = HttpClient::from_env(endpoint.as_str(), model, &self.api_key_env)
                    .map_err(|e| Failure::Config(e.into()))?;
                let cap = match self.jobs {
                    0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
                    n => n,
                };
                Ok(Some(Box::new(InFlightLimit::new(
                    RetryingClient::new(http),
                    cap,
                ))))
            }
            (None, Some(path)) => {
                let mock = ScriptedClient::load(path).map_err(|e| Failure::Config(e.into()))?;
                Ok(Some(Box::new(mock)))
            }
            _ => Err(Failure::Config(anyhow!(
                "approach {} needs exactly one of --endpoint or --mock-script",
                self.approach.as_str()
            ))),
        }
    }
}

fn solve(
    s: &Scenario,
    config: &EvalConfig,
    client: Option<&dyn LlmClient>,
) -> (Option<Program>, String) {
    let mut loop_cfg = config.loop_config;
    loop_cfg.knowledge = config.knowledge;
    if let Some(v) = config.approach.variant() {
        loop_cfg.variant = v;
    }
    let describe_loop = |outcome: &LoopOutcome| match outcome {
        LoopOutcome::Solved { .. } => "solved".to_string(),
        LoopOutcome::Failed(last) => format!(
            "model gave no working program (last round: {})",
            last.kind()
        ),
    };
    match (config.approach, client) {
        (Approach::Search, _) => {
            let result = synthesize(&s.example_input, &s.example_output, config.budget);
            let reason = match &result.outcome {
                SearchOutcome::Solved(_) => "solved by search".to_string(),
                SearchOutcome::Exhausted(kind) => format!("search stopped: {}", kind.as_str()),
            };
            (result.program().cloned(), reason)
        }
        (Approach::Hybrid, Some(client)) => {
            let outcome = hybrid::solve(s, config.budget, &loop_cfg, client);
            let reason = match &outcome.transcript {
                None => "solved by search".to_string(),
                Some(t) => format!("search gave up; {}", describe_loop(&t.outcome)),
            };
            (outcome.program, reason)
        }
        (_, Some(client)) => {
            let transcript = llm::run_loop(s, client, &loop_cfg);
            let reason = describe_loop(&transcript.outcome);
            (transcript.program().cloned(), reason)
        }
        (_, None) => unreachable!("client presence is checked when building it"),
    }
}

fn cmd_synth(path: &Path, run: &RunArgs) -> CliResult {
    let scenario = load_scenario_file(path).map_err(|e| Failure::Ingestion(e.into()))?;
    let config = run.eval_config()?;
    let client = run.client()?;
    let (program, reason) = solve(&scenario, &config, client.as_deref());

    println!("scenario: {} ({})", scenario.name, scenario.source_dataset);
    let Some(program) = program else {
        println!("no program: {reason}");
        return Err(Failure::Unsolved);
    };
    println!("program: {program}");

    let cases: Vec<(String, &Table, &Table)> = if scenario.tests.is_empty() {
        vec![(
            "example".to_string(),
            &scenario.example_input,
            &scenario.example_output,
        )]
    } else {
        scenario
            .tests
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("test {}", i + 1), &t.input, &t.expected_output))
            .collect()
    };
    let mut all_match = true;
    for (label, input, expected) in cases {
        match interpret(&program, input) {
            Ok(actual) if tables_equal(&actual, expected) => println!("{label}: match"),
            Ok(actual) => {
                all_match = false;
                println!("{label}: mismatch");
                println!("  expected: {}", expected.to_json());
                println!("  actual:   {}", actual.to_json());
            }
            Err(e) => {
                all_match = false;
                println!("{label}: error: {e}");
            }
        }
    }
    if all_match {
        Ok(())
    } else {
        Err(Failure::Unsolved)
    }
}

fn cmd_eval(corpus: &Path, run: &RunArgs, out: &Path) -> CliResult {
    let corpus = ScenarioSet::load_dir(corpus).map_err(|e| Failure::Ingestion(e.into()))?;
    let config = run.eval_config()?;
    let client = run.client()?;
    let output = eval::run_eval(&corpus, &config, client.as_deref())
        .map_err(|e| Failure::Config(e.into()))?;
    let written = eval::write_reports(out, &output).map_err(|e| Failure::Config(e.into()))?;
    print!("{}", eval::format_summary(output.approach, &output.report));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Config),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_import(legacy: &Path, out: Option<&Path>) -> CliResult {
    let text = fs::read_to_string(legacy)
        .with_context(|| format!("cannot read {}", legacy.display()))
        .map_err(Failure::Ingestion)?;
    let scenario = import_legacy_scenario(&text)
        .with_context(|| format!("cannot import {}", legacy.display()))
        .map_err(Failure::Ingestion)?;
    let mut doc = scenario.to_document();
    doc.push('\n');
    emit(&doc, out)
}

fn cmd_report(scores: &[PathBuf], out: Option<&Path>) -> CliResult {
    let mut sources = Vec::with_capacity(scores.len());
    for path in scores {
        let file = fs::File::open(path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(Failure::Ingestion)?;
        sources.push(file);
    }
    let rows =
        eval::accuracy_rows_from_scores(sources).map_err(|e| Failure::Ingestion(e.into()))?;
    emit(&eval::format_accuracy_table(&rows), out)
}

/// The error and its causes, skipping causes the message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    for cause in e.chain().skip(1) {
        let cause = cause.to_string();
        if !text.contains(&cause) {
            text = format!("{text}: {cause}");
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Synth { scenario, run } => cmd_synth(scenario, run),
        Command::Eval { corpus, run, out } => cmd_eval(corpus, run, out),
        Command::Import { legacy, out } => cmd_import(legacy, out.as_deref()),
        Command::Report { scores, out } => cmd_report(scores, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Config(e) | Failure::Ingestion(e) => eprintln!("error: {}", describe(e)),
                Failure::Unsolved => {}
            }
            ExitCode::from(failure.code())
        }
    }
}
