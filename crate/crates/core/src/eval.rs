//! Scoring and reporting.
//!
//! A produced table is compared with the expected one row by row, rows
//! aligned by index. A row scores the fraction of expected cells reproduced
//! at the same column; expected rows with no counterpart score 0, extra
//! produced rows are flagged but not scored. A dataset's accuracy is the
//! mean over all scored rows of its scenarios, and the overall accuracy is
//! the average of dataset accuracies weighted by scenario count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{interpret, Program};
use crate::hybrid::{self, RoutingStats};
use crate::llm::{run_loop, AttemptTranscript, LlmClient, LoopConfig, Variant};
use crate::search::{synthesize, SearchBudget};
use crate::table::{Scenario, ScenarioSet, Table};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to aggregate: the corpus is empty")]
    EmptyCorpus,
    #[error("approach `{0}` needs a language-model client")]
    MissingClient(&'static str),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write scores: {0}")]
    Csv(#[from] csv::Error),
    #[error("scores file, record {record}: {detail}")]
    BadScores { record: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableScore {
    /// One entry per expected row.
    pub row_accuracies: Vec<f64>,
    pub table_accuracy: f64,
    /// The produced table has a different number of rows.
    pub row_count_mismatch: bool,
    /// No table was produced.
    pub execution_failed: bool,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn row_accuracy(actual: Option<&[String]>, expected: &[String]) -> f64 {
    let Some(actual) = actual else { return 0.0 };
    if expected.is_empty() {
        return if actual.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = expected.iter().zip(actual).filter(|(e, a)| e == a).count();
    hits as f64 / expected.len() as f64
}

/// Scores `actual` (or the error that prevented producing it) against
/// `expected`. An expected table without rows scores 1 when the produced
/// table has no rows either.
pub fn score_table(actual: Result<&Table, &str>, expected: &Table) -> TableScore {
    let Ok(actual) = actual else {
        return TableScore {
            row_accuracies: vec![0.0; expected.row_count()],
            table_accuracy: 0.0,
            row_count_mismatch: false,
            execution_failed: true,
        };
    };
    let row_accuracies: Vec<f64> = expected
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| row_accuracy(actual.rows().get(i).map(Vec::as_slice), row))
        .collect();
    let row_count_mismatch = actual.row_count() != expected.row_count();
    let table_accuracy =
        mean(&row_accuracies).unwrap_or(if row_count_mismatch { 0.0 } else { 1.0 });
    TableScore {
        row_accuracies,
        table_accuracy,
        row_count_mismatch,
        execution_failed: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    Search,
    LlmOneShot,
    LlmMultiA,
    LlmMultiB,
    Hybrid,
}

impl Approach {
    pub const ALL: [Approach; 5] = [
        Approach::Search,
        Approach::LlmOneShot,
        Approach::LlmMultiA,
        Approach::LlmMultiB,
        Approach::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Search => "search",
            Approach::LlmOneShot => "llm_one_shot",
            Approach::LlmMultiA => "llm_multi_a",
            Approach::LlmMultiB => "llm_multi_b",
            Approach::Hybrid => "hybrid",
        }
    }

    pub fn uses_client(self) -> bool {
        self != Approach::Search
    }

    /// The loop variant the approach runs, if it runs the loop directly.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Approach::LlmOneShot => Some(Variant::OneShot),
            Approach::LlmMultiA => Some(Variant::MultiA),
            Approach::LlmMultiB => Some(Variant::MultiB),
            Approach::Search | Approach::Hybrid => None,
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown approach `{s}`"))
    }
}

/// The result of one scenario under one approach.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub dataset: String,
    pub program: Option<Program>,
    /// One score per test case (or for the example pair when the scenario
    /// has no tests).
    pub scores: Vec<TableScore>,
    pub transcript: Option<AttemptTranscript>,
    pub hybrid: Option<hybrid::Solver>,
}

impl ScenarioResult {
    pub fn row_accuracies(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores
            .iter()
            .flat_map(|s| s.row_accuracies.iter().copied())
    }

    pub fn table_accuracy(&self) -> f64 {
        let rows: Vec<f64> = self.row_accuracies().collect();
        mean(&rows).unwrap_or_else(|| {
            mean(
                &self
                    .scores
                    .iter()
                    .map(|s| s.table_accuracy)
                    .collect::<Vec<_>>(),
            )
            .unwrap_or(0.0)
        })
    }

    pub fn row_count(&self) -> usize {
        self.scores.iter().map(|s| s.row_accuracies.len()).sum()
    }

    pub fn flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if self.program.is_none() {
            flags.push("no_program");
        }
        if self.scores.iter().any(|s| s.execution_failed) {
            flags.push("execution_failed");
        }
        if self.scores.iter().any(|s| s.row_count_mismatch) {
            flags.push("row_count_mismatch");
        }
        flags
    }
}

/// Replays `program` on every test case of `s` (the example pair if there
/// are none) and scores the outputs.
pub fn score_scenario(s: &Scenario, program: Option<&Program>) -> Vec<TableScore> {
    let pairs: Vec<(&Table, &Table)> = if s.tests.is_empty() {
        vec![(&s.example_input, &s.example_output)]
    } else {
        s.tests
            .iter()
            .map(|t| (&t.input, &t.expected_output))
            .collect()
    };
    pairs
        .into_iter()
        .map(|(input, expected)| match program {
            None => score_table(Err("no program"), expected),
            Some(p) => match interpret(p, input) {
                Ok(actual) => score_table(Ok(&actual), expected),
                Err(e) => score_table(Err(&e.to_string()), expected),
            },
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DatasetReport {
    pub dataset: String,
    pub scenarios: Vec<ScenarioResult>,
    pub accuracy: f64,
}

impl DatasetReport {
    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }
}

#[derive(Clone, Debug)]
pub struct OverallReport {
    /// Ordered by dataset label.
    pub datasets: Vec<DatasetReport>,
    pub overall: f64,
}

/// `Σ count·accuracy / Σ count`, or `None` when the counts sum to zero.
pub fn weighted_average(parts: &[(usize, f64)]) -> Option<f64> {
    let total: usize = parts.iter().map(|(n, _)| n).sum();
    (total > 0).then(|| parts.iter().map(|&(n, acc)| n as f64 * acc).sum::<f64>() / total as f64)
}

/// Groups results by dataset and computes dataset and overall accuracy.
pub fn aggregate(results: Vec<ScenarioResult>) -> Result<OverallReport, EvalError> {
    let mut grouped: BTreeMap<String, Vec<ScenarioResult>> = BTreeMap::new();
    for r in results {
        grouped.entry(r.dataset.clone()).or_default().push(r);
    }
    let datasets: Vec<DatasetReport> = grouped
        .into_iter()
        .map(|(dataset, mut scenarios)| {
            scenarios.sort_by(|a, b| a.name.cmp(&b.name));
            let rows: Vec<f64> = scenarios.iter().flat_map(|s| s.row_accuracies()).collect();
            let accuracy = mean(&rows).unwrap_or_else(|| {
                mean(
                    &scenarios
                        .iter()
                        .map(ScenarioResult::table_accuracy)
                        .collect::<Vec<_>>(),
                )
                .unwrap_or(0.0)
            });
            DatasetReport {
                dataset,
                scenarios,
                accuracy,
            }
        })
        .collect();
    let parts: Vec<(usize, f64)> = datasets
        .iter()
        .map(|d| (d.scenario_count(), d.accuracy))
        .collect();
    let overall = weighted_average(&parts).ok_or(EvalError::EmptyCorpus)?;
    Ok(OverallReport { datasets, overall })
}

/// How many scenarios are still unsolved after each round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundFailureSeries {
    /// `counts[r - 1]` is the number failing after round `r`.
    pub counts: Vec<usize>,
}

impl RoundFailureSeries {
    /// `solved_in[i]` is the round scenario `i` was solved in, if any.
    pub fn from_solved_rounds(solved_in: &[Option<usize>], max_rounds: usize) -> Self {
        let counts = (1..=max_rounds)
            .map(|r| {
                solved_in
                    .iter()
                    .filter(|s| s.is_none_or(|round| round > r))
                    .count()
            })
            .collect();
        RoundFailureSeries { counts }
    }

    pub fn from_transcripts<'a>(
        transcripts: impl IntoIterator<Item = &'a AttemptTranscript>,
        max_rounds: usize,
    ) -> Self {
        let solved: Vec<Option<usize>> = transcripts
            .into_iter()
            .map(AttemptTranscript::solved_round)
            .collect();
        Self::from_solved_rounds(&solved, max_rounds)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,failures\n");
        for (i, n) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{n}", i + 1);
        }
        out
    }
}

/// One line of an accuracy summary.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub approach: String,
    /// `(dataset label, accuracy)` in column order.
    pub datasets: Vec<(String, f64)>,
    pub overall: f64,
}

impl AccuracyRow {
    pub fn from_report(approach: impl Into<String>, report: &OverallReport) -> Self {
        AccuracyRow {
            approach: approach.into(),
            datasets: report
                .datasets
                .iter()
                .map(|d| (d.dataset.clone(), d.accuracy))
                .collect(),
            overall: report.overall,
        }
    }
}

const OVERALL_HEADER: &str = "Overall (Weighted Avg.)";

/// An approaches-by-datasets accuracy table with a weighted overall column.
/// Columns come from the first row; values have three decimals.
pub fn format_accuracy_table(rows: &[AccuracyRow]) -> String {
    let columns: Vec<&str> = rows
        .first()
        .map(|r| r.datasets.iter().map(|(d, _)| d.as_str()).collect())
        .unwrap_or_default();
    let first = rows
        .iter()
        .map(|r| r.approach.len())
        .chain(["Approach".len()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|c| c.len().max(5)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:first$}", "Approach");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {c:>w$}");
    }
    let _ = writeln!(out, "  {OVERALL_HEADER}");
    for row in rows {
        let _ = write!(out, "{:first$}", row.approach);
        for (c, w) in columns.iter().zip(&widths) {
            let value = row
                .datasets
                .iter()
                .find(|(d, _)| d == c)
                .map(|(_, acc)| format!("{acc:.3}"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "  {value:>w$}");
        }
        let _ = writeln!(out, "  {:>w$.3}", row.overall, w = OVERALL_HEADER.len());
    }
    out
}

/// Human-readable summary of one evaluation run.
pub fn format_summary(approach: Approach, report: &OverallReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Accuracy ({})", approach.as_str());
    let _ = writeln!(
        out,
        "Rows are compared by index; a row scores the share of its expected cells reproduced at the same column.\n"
    );
    out.push_str(&format_accuracy_table(&[AccuracyRow::from_report(
        approach.as_str(),
        report,
    )]));
    let _ = writeln!(out, "\nWeights (scenario counts):");
    for d in &report.datasets {
        let _ = writeln!(out, "  {}: {}", d.dataset, d.scenario_count());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub approach: Approach,
    pub knowledge: bool,
    pub budget: SearchBudget,
    /// Loop settings; the variant is taken from the approach except for
    /// the hybrid, which uses the one given here.
    pub loop_config: LoopConfig,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl EvalConfig {
    pub fn new(approach: Approach) -> Self {
        EvalConfig {
            approach,
            knowledge: false,
            budget: SearchBudget::default(),
            loop_config: LoopConfig::default(),
            jobs: 0,
        }
    }

    fn effective_loop(&self) -> LoopConfig {
        let mut cfg = self.loop_config;
        cfg.knowledge = self.knowledge;
        if let Some(variant) = self.approach.variant() {
            cfg.variant = variant;
        }
        cfg
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub approach: Approach,
    pub report: OverallReport,
    /// For approaches that run the loop (over routed scenarios for the hybrid).
    pub failure_series: Option<RoundFailureSeries>,
    pub routing: Option<RoutingStats>,
}

fn evaluate_one(
    s: &Scenario,
    config: &EvalConfig,
    client: Option<&dyn LlmClient>,
) -> ScenarioResult {
    let loop_cfg = config.effective_loop();
    let (program, transcript, solver) = match (config.approach, client) {
        (Approach::Search, _) => {
            let result = synthesize(&s.example_input, &s.example_output, config.budget);
            (result.program().cloned(), None, None)
        }
        (Approach::Hybrid, Some(client)) => {
            let outcome = hybrid::solve(s, config.budget, &loop_cfg, client);
            (outcome.program, outcome.transcript, Some(outcome.solver))
        }
        (_, Some(client)) => {
            let transcript = run_loop(s, client, &loop_cfg);
            (transcript.program().cloned(), Some(transcript), None)
        }
        (_, None) => unreachable!("checked before the run"),
    };
    ScenarioResult {
        name: s.name.clone(),
        dataset: s.source_dataset.clone(),
        scores: score_scenario(s, program.as_ref()),
        program,
        transcript,
        hybrid: solver,
    }
}

/// Solves and scores every scenario of `corpus`, `config.jobs` at a time.
/// The output does not depend on the number of workers.
pub fn run_eval(
    corpus: &ScenarioSet,
    config: &EvalConfig,
    client: Option<&dyn LlmClient>,
) -> Result<EvalOutput, EvalError> {
    if config.approach.uses_client() && client.is_none() {
        return Err(EvalError::MissingClient(config.approach.as_str()));
    }
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    let results: Vec<ScenarioResult> = pool.install(|| {
        corpus
            .scenarios()
            .par_iter()
            .map(|s| evaluate_one(s, config, client))
            .collect()
    });

    let rounds = config.effective_loop().rounds();
    let failure_series = match config.approach {
        Approach::Search => None,
        _ => Some(RoundFailureSeries::from_transcripts(
            results.iter().filter_map(|r| r.transcript.as_ref()),
            rounds,
        )),
    };
    let routing = (config.approach == Approach::Hybrid).then(|| {
        let mut stats = RoutingStats::default();
        for r in &results {
            stats.datasets.entry(r.dataset.clone()).or_default().record(
                r.transcript.is_some(),
                r.hybrid == Some(hybrid::Solver::Llm),
            );
        }
        stats
    });
    Ok(EvalOutput {
        approach: config.approach,
        report: aggregate(results)?,
        failure_series,
        routing,
    })
}

/// Report file names written by [`write_reports`].
pub const SCORES_FILE: &str = "scores.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const FAILURE_SERIES_FILE: &str = "failure_series.csv";
pub const ROUTING_FILE: &str = "routing.txt";

/// Per-scenario scores as CSV, ordered by dataset then name.
pub fn scores_csv(output: &EvalOutput) -> Result<String, EvalError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "name",
        "dataset",
        "approach",
        "table_accuracy",
        "rows",
        "flags",
    ])?;
    for d in &output.report.datasets {
        for s in &d.scenarios {
            writer.write_record([
                s.name.as_str(),
                s.dataset.as_str(),
                output.approach.as_str(),
                &s.table_accuracy().to_string(),
                &s.row_count().to_string(),
                &s.flags().join("|"),
            ])?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Writes the report files into `dir` (created if needed) and returns
/// their paths.
pub fn write_reports(dir: &Path, output: &EvalOutput) -> Result<Vec<PathBuf>, EvalError> {
    let write = |name: &str, contents: &str| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|source| EvalError::Write {
            path: path.clone(),
            source,
        })?;
        Ok::<_, EvalError>(path)
    };
    fs::create_dir_all(dir).map_err(|source| EvalError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![
        write(SCORES_FILE, &scores_csv(output)?)?,
        write(
            SUMMARY_FILE,
            &format_summary(output.approach, &output.report),
        )?,
    ];
    if let Some(series) = &output.failure_series {
        written.push(write(FAILURE_SERIES_FILE, &series.to_csv())?);
    }
    if let Some(routing) = &output.routing {
        written.push(write(ROUTING_FILE, &routing.format_table())?);
    }
    Ok(written)
}

/// Rebuilds one accuracy row per approach from score files written by
/// [`scores_csv`]. Dataset accuracy is recomputed as the row-weighted mean
/// of scenario accuracies, which equals the mean over rows.
pub fn accuracy_rows_from_scores<R: std::io::Read>(
    sources: Vec<R>,
) -> Result<Vec<AccuracyRow>, EvalError> {
    // per dataset: scenario count, rows, Σ accuracy·rows, Σ accuracy
    type Sums = (usize, usize, f64, f64);
    let mut acc: BTreeMap<String, BTreeMap<String, Sums>> = BTreeMap::new();
    let mut record = 0;
    for source in sources {
        let mut reader = csv::Reader::from_reader(source);
        for row in reader.records() {
            record += 1;
            let row = row?;
            let bad = |detail: &str| EvalError::BadScores {
                record,
                detail: detail.to_string(),
            };
            if row.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let accuracy: f64 = row[3]
                .parse()
                .map_err(|_| bad("table_accuracy is not a number"))?;
            if !(0.0..=1.0).contains(&accuracy) {
                return Err(bad("table_accuracy outside [0, 1]"));
            }
            let rows: usize = row[4].parse().map_err(|_| bad("rows is not a count"))?;
            let entry = acc
                .entry(row[2].to_string())
                .or_default()
                .entry(row[1].to_string())
                .or_insert((0, 0, 0.0, 0.0));
            entry.0 += 1;
            entry.1 += rows;
            entry.2 += accuracy * rows as f64;
            entry.3 += accuracy;
        }
    }
    if acc.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(acc
        .into_iter()
        .map(|(approach, datasets)| {
            let datasets: Vec<(String, usize, f64)> = datasets
                .into_iter()
                .map(|(d, (n, rows, weighted, plain))| {
                    let accuracy = if rows > 0 {
                        weighted / rows as f64
                    } else {
                        plain / n as f64
                    };
                    (d, n, accuracy)
                })
                .collect();
            let parts: Vec<(usize, f64)> = datasets.iter().map(|&(_, n, a)| (n, a)).collect();
            AccuracyRow {
                approach,
                overall: weighted_average(&parts).unwrap_or(0.0),
                datasets: datasets.into_iter().map(|(d, _, a)| (d, a)).collect(),
            }
        })
        .collect())
}
