//! Search first, model second: scenarios the search cannot solve within its
//! budget are handed to the LLM loop.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::dsl::Program;
use crate::llm::{run_loop, AttemptTranscript, LlmClient, LoopConfig};
use crate::search::{synthesize, SearchBudget, SearchOutcome, SearchStats};
use crate::table::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Search,
    Llm,
    Failed,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Search => "search",
            Solver::Llm => "llm",
            Solver::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct HybridOutcome {
    pub solver: Solver,
    pub program: Option<Program>,
    pub routed_to_llm: bool,
    pub search_stats: SearchStats,
    /// Present exactly when the scenario was routed to the model.
    pub transcript: Option<AttemptTranscript>,
}

/// Runs the search on the example pair and, if it gives up, the LLM loop.
/// The client is not called at all when the search succeeds.
pub fn solve(
    s: &Scenario,
    budget: SearchBudget,
    llm_cfg: &LoopConfig,
    client: &dyn LlmClient,
) -> HybridOutcome {
    let result = synthesize(&s.example_input, &s.example_output, budget);
    match result.outcome {
        SearchOutcome::Solved(program) => HybridOutcome {
            solver: Solver::Search,
            program: Some(program),
            routed_to_llm: false,
            search_stats: result.stats,
            transcript: None,
        },
        SearchOutcome::Exhausted(kind) => {
            log::info!(
                "{}: search stopped ({}), asking the model",
                s.name,
                kind.as_str()
            );
            let transcript = run_loop(s, client, llm_cfg);
            let program = transcript.program().cloned();
            HybridOutcome {
                solver: if program.is_some() {
                    Solver::Llm
                } else {
                    Solver::Failed
                },
                program,
                routed_to_llm: true,
                search_stats: result.stats,
                transcript: Some(transcript),
            }
        }
    }
}

/// Routing counts for one dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoutingCounts {
    pub total: usize,
    pub routed: usize,
    /// Routed scenarios the model solved.
    pub solved_by_llm: usize,
}

impl RoutingCounts {
    pub fn record(&mut self, routed: bool, solved_by_llm: bool) {
        self.total += 1;
        if routed {
            self.routed += 1;
            self.solved_by_llm += usize::from(solved_by_llm);
        }
    }
}

/// Per-dataset routing counts, keyed by dataset label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingStats {
    pub datasets: BTreeMap<String, RoutingCounts>,
}

/// `num / den` as a percentage with two decimals, or `n/a` when `den` is 0.
pub fn percent(num: usize, den: usize) -> String {
    if den == 0 {
        "n/a".to_string()
    } else {
        format!("{:.2}%", 100.0 * num as f64 / den as f64)
    }
}

impl RoutingStats {
    pub fn record(&mut self, dataset: &str, outcome: &HybridOutcome) {
        self.datasets
            .entry(dataset.to_string())
            .or_default()
            .record(outcome.routed_to_llm, outcome.solver == Solver::Llm);
    }

    /// Two-row table: share of scenarios passed to the model, and share of
    /// those the model solved, one column per dataset.
    pub fn format_table(&self) -> String {
        let passed: Vec<String> = self
            .datasets
            .values()
            .map(|c| percent(c.routed, c.total))
            .collect();
        let solved: Vec<String> = self
            .datasets
            .values()
            .map(|c| percent(c.solved_by_llm, c.routed))
            .collect();
        let labels = ["% test cases passed to LLM", "% test cases solved by LLM"];
        let first = labels.iter().map(|l| l.len()).max().unwrap_or(0);
        let widths: Vec<usize> = self
            .datasets
            .keys()
            .zip(passed.iter().zip(&solved))
            .map(|(name, (p, s))| name.len().max(p.len()).max(s.len()))
            .collect();

        let mut out = String::new();
        let _ = write!(out, "{:first$}", "");
        for (name, w) in self.datasets.keys().zip(&widths) {
            let _ = write!(out, "  {name:>w$}");
        }
        out.push('\n');
        for (label, cells) in labels.iter().zip([&passed, &solved]) {
            let _ = write!(out, "{label:first$}");
            for (cell, w) in cells.iter().zip(&widths) {
                let _ = write!(out, "  {cell:>w$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out);
        for (name, c) in &self.datasets {
            let _ = writeln!(
                out,
                "{name}: {} scenarios, {} passed to the model, {} solved by it",
                c.total, c.routed, c.solved_by_llm
            );
        }
        out
    }
}
