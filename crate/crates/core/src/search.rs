//! Best-first synthesis of operator programs from one example pair.
//!
//! Nodes are ordered by `f = g + w·h`, where `g` is the program length so
//! far and `h` is a table-edit-distance estimate from the node's table to
//! the target (`w = 1` by default). Ties go to the smaller `h`, then to the
//! node generated first. The estimate is not admissible, so the returned
//! program is short but not guaranteed shortest.
//!
//! Only expanded nodes keep their table. Frontier nodes store the operator
//! that produced them and are re-materialized from their parent when popped.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::dsl::{apply_operator, interpret, Operator, Pattern, Program};
use crate::table::{tables_equal, Table};
use crate::ted::{ted_batch, ted_greedy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_expansions: usize,
    /// Longest program considered.
    pub max_depth: usize,
    pub wall_clock: Duration,
    /// Cap on generated nodes, which bounds memory.
    pub max_generated: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_expansions: 200_000,
            max_depth: 8,
            wall_clock: Duration::from_secs(30),
            max_generated: 2_000_000,
        }
    }
}

impl SearchBudget {
    pub fn with_max_expansions(mut self, n: usize) -> Self {
        self.max_expansions = n;
        self
    }

    pub fn with_max_depth(mut self, n: usize) -> Self {
        self.max_depth = n;
        self
    }

    pub fn with_wall_clock(mut self, d: Duration) -> Self {
        self.wall_clock = d;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Heuristic {
    #[default]
    TedBatch,
    TedGreedy,
    /// Always 0: plain uniform-cost search. Diagnostic only.
    Zero,
}

impl Heuristic {
    pub fn estimate(self, state: &Table, target: &Table) -> u32 {
        match self {
            Heuristic::TedBatch => ted_batch(state, target),
            Heuristic::TedGreedy => ted_greedy(state, target),
            Heuristic::Zero => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub budget: SearchBudget,
    pub heuristic: Heuristic,
    /// Multiplier on `h`.
    pub weight: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: SearchBudget::default(),
            heuristic: Heuristic::TedBatch,
            weight: 1.0,
        }
    }
}

impl SearchConfig {
    pub fn new(budget: SearchBudget) -> Self {
        SearchConfig {
            budget,
            ..Default::default()
        }
    }
}

/// Which limit stopped an unsuccessful search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetKind {
    Expansions,
    WallClock,
    Generated,
    /// Every reachable program up to `max_depth` was tried.
    Depth,
    /// Every reachable table was visited before any limit applied.
    SearchSpace,
}

impl BudgetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BudgetKind::Expansions => "expansions",
            BudgetKind::WallClock => "wall_clock",
            BudgetKind::Generated => "generated",
            BudgetKind::Depth => "depth",
            BudgetKind::SearchSpace => "search_space",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Solved(Program),
    Exhausted(BudgetKind),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub duplicates: usize,
    /// Children dropped because they lost target characters or values.
    pub pruned: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

impl SynthesisResult {
    pub fn program(&self) -> Option<&Program> {
        match &self.outcome {
            SearchOutcome::Solved(p) => Some(p),
            SearchOutcome::Exhausted(_) => None,
        }
    }
}

/// Generates the candidate operators for a state.
///
/// Column arguments range over the widest row of the state. Text arguments
/// are target-informed: merge glue comes from separator characters (ASCII
/// punctuation and whitespace) found in target cells, plus the empty string;
/// split delimiters are separators present in the state; regex arguments come
/// from a fixed template library instantiated with the separators of the
/// example input and target.
pub struct Enumerator {
    glues: Vec<String>,
    separators: Vec<char>,
    patterns: Vec<Pattern>,
    example_rows: usize,
}

fn is_separator(ch: char) -> bool {
    ch.is_ascii_punctuation() || ch.is_whitespace()
}

fn separators_of(t: &Table) -> BTreeSet<char> {
    t.cells()
        .flat_map(|(_, _, v)| v.chars())
        .filter(|&c| is_separator(c))
        .collect()
}

const MAX_WRAP: usize = 6;

impl Enumerator {
    pub fn new(example_input: &Table, target: &Table) -> Self {
        let target_seps = separators_of(target);
        let mut glues = vec![String::new()];
        glues.extend(target_seps.iter().map(|c| c.to_string()));

        let all_seps: BTreeSet<char> = separators_of(example_input)
            .union(&target_seps)
            .copied()
            .collect();
        let mut templates: Vec<String> =
            vec!["[0-9]+".into(), "[0-9]{4}".into(), "[A-Za-z]+".into()];
        for &sep in &all_seps {
            let esc = regex::escape(&sep.to_string());
            templates.push(format!("^[^{esc}]+"));
            templates.push(format!("[^{esc}]+$"));
            templates.push(esc);
        }
        let patterns = templates
            .into_iter()
            .map(Pattern::new)
            .filter(|p| p.regex().is_ok())
            .collect();

        Enumerator {
            glues,
            separators: all_seps.into_iter().collect(),
            patterns,
            example_rows: example_input.row_count(),
        }
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn candidates(&self, state: &Table) -> Vec<Operator> {
        let width = state.max_width();
        let rows = state.row_count();
        let mut out = Vec::new();
        let state_seps = separators_of(state);

        out.extend((0..width).map(|col| Operator::Drop { col }));
        out.extend((0..width).map(|col| Operator::Copy { col }));
        for from in 0..width {
            for to in 0..width {
                if from != to {
                    out.push(Operator::Move { from, to });
                }
            }
        }
        for left in 0..width {
            for right in 0..width {
                if left != right {
                    for glue in &self.glues {
                        out.push(Operator::Merge {
                            left,
                            right,
                            glue: glue.clone(),
                        });
                    }
                }
            }
        }
        for col in 0..width {
            for sep in self.separators.iter().filter(|s| state_seps.contains(s)) {
                out.push(Operator::Split {
                    col,
                    delim: sep.to_string(),
                });
            }
        }
        out.extend((0..width).map(|start| Operator::Fold { start }));
        out.extend((0..width).map(|key| Operator::Unfold { key }));
        out.extend((0..width).map(|col| Operator::Fill { col }));
        out.extend((0..rows.min(self.example_rows)).map(|row| Operator::DeleteRow { row }));
        out.extend((0..width).map(|col| Operator::DeleteEmpty { col }));
        for col in 0..width {
            for p in &self.patterns {
                out.push(Operator::DeleteMatch {
                    col,
                    pattern: p.clone(),
                });
            }
        }
        for col in 0..width {
            for p in &self.patterns {
                out.push(Operator::Extract {
                    col,
                    pattern: p.clone(),
                });
            }
        }
        for col in 0..width {
            for p in &self.patterns {
                out.push(Operator::Divide {
                    col,
                    pattern: p.clone(),
                });
            }
        }
        if rows > 0 {
            out.push(Operator::Transpose);
        }
        out.extend((2..=rows.min(MAX_WRAP)).map(|k| Operator::Wrap { k }));
        out
    }
}

/// Alphanumeric characters present anywhere in a table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct CharSet {
    ascii: u128,
    other: BTreeSet<char>,
}

impl CharSet {
    fn of(t: &Table) -> Self {
        let mut set = CharSet::default();
        for (_, _, v) in t.cells() {
            for ch in v.chars().filter(|c| c.is_alphanumeric()) {
                if ch.is_ascii() {
                    set.ascii |= 1u128 << (ch as u32);
                } else {
                    set.other.insert(ch);
                }
            }
        }
        set
    }

    fn is_subset(&self, other: &CharSet) -> bool {
        self.ascii & !other.ascii == 0 && self.other.is_subset(&other.other)
    }
}

/// Which distinct target cell values occur somewhere in a table.
struct ValueSet {
    index: HashMap<String, usize>,
}

impl ValueSet {
    fn new(target: &Table) -> Self {
        let mut index = HashMap::new();
        for (_, _, v) in target.cells() {
            let next = index.len();
            index.entry(v.to_string()).or_insert(next);
        }
        ValueSet { index }
    }

    fn present(&self, t: &Table) -> Vec<u64> {
        let mut bits = vec![0u64; self.index.len().div_ceil(64)];
        for (_, _, v) in t.cells() {
            if let Some(&i) = self.index.get(v) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        bits
    }
}

fn bits_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

/// Candidate operators for `state` when searching towards `target`.
pub fn enumerate_instantiations(state: &Table, target: &Table) -> Vec<Operator> {
    Enumerator::new(state, target).candidates(state)
}

struct Node {
    /// Present once the node has been expanded (always for the root).
    table: Option<Rc<Table>>,
    parent: u32,
    op: Option<Operator>,
    g: u32,
}

struct Entry {
    f: f64,
    h: u32,
    seq: u64,
    node: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn table_hash(t: &Table) -> u64 {
    let mut h = DefaultHasher::new();
    t.hash(&mut h);
    h.finish()
}

struct Arena {
    nodes: Vec<Node>,
}

impl Arena {
    fn materialize(&self, idx: u32) -> Rc<Table> {
        let node = &self.nodes[idx as usize];
        if let Some(t) = &node.table {
            return Rc::clone(t);
        }
        let parent = self.nodes[node.parent as usize]
            .table
            .as_ref()
            .expect("parents are expanded");
        Rc::new(
            apply_operator(node.op.as_ref().expect("non-root"), parent)
                .expect("operator succeeded when the node was generated"),
        )
    }

    fn program(&self, mut idx: u32) -> Program {
        let mut ops = Vec::new();
        while let Some(op) = &self.nodes[idx as usize].op {
            ops.push(op.clone());
            idx = self.nodes[idx as usize].parent;
        }
        ops.reverse();
        Program::new(ops)
    }
}

/// Searches for a program turning `example_input` into `example_output`
/// with the default heuristic.
pub fn synthesize(
    example_input: &Table,
    example_output: &Table,
    budget: SearchBudget,
) -> SynthesisResult {
    synthesize_with(example_input, example_output, &SearchConfig::new(budget))
}

pub fn synthesize_with(
    example_input: &Table,
    example_output: &Table,
    config: &SearchConfig,
) -> SynthesisResult {
    let started = Instant::now();
    let budget = config.budget;
    let mut stats = SearchStats::default();
    let enumerator = Enumerator::new(example_input, example_output);
    let target_chars = CharSet::of(example_output);
    let target_values = ValueSet::new(example_output);

    let mut arena = Arena {
        nodes: vec![Node {
            table: Some(Rc::new(example_input.clone())),
            parent: u32::MAX,
            op: None,
            g: 0,
        }],
    };
    let mut seen: HashMap<u64, Vec<u32>> = HashMap::new();
    seen.entry(table_hash(example_input)).or_default().push(0);

    let root_h = config.heuristic.estimate(example_input, example_output);
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        f: config.weight * root_h as f64,
        h: root_h,
        seq: 0,
        node: 0,
    });
    let mut seq = 1u64;
    let mut depth_limited = false;

    let finish = |outcome, mut stats: SearchStats| {
        stats.elapsed = started.elapsed();
        if let SearchOutcome::Solved(p) = &outcome {
            debug_assert_eq!(interpret(p, example_input).as_ref(), Ok(example_output));
        }
        SynthesisResult { outcome, stats }
    };

    while let Some(entry) = heap.pop() {
        let idx = entry.node;
        let table = arena.materialize(idx);
        if tables_equal(&table, example_output) {
            return finish(SearchOutcome::Solved(arena.program(idx)), stats);
        }
        if stats.expanded >= budget.max_expansions {
            return finish(SearchOutcome::Exhausted(BudgetKind::Expansions), stats);
        }
        if started.elapsed() >= budget.wall_clock {
            return finish(SearchOutcome::Exhausted(BudgetKind::WallClock), stats);
        }
        let g = arena.nodes[idx as usize].g;
        if g as usize >= budget.max_depth {
            depth_limited = true;
            continue;
        }

        stats.expanded += 1;
        arena.nodes[idx as usize].table = Some(Rc::clone(&table));
        let parent_values = target_values.present(&table);
        for op in enumerator.candidates(&table) {
            let Ok(child) = apply_operator(&op, &table) else {
                continue;
            };
            // Two pruning rules: no operator can bring back a character the
            // target needs, and a target value that disappears is treated as
            // lost for good.
            if !target_chars.is_subset(&CharSet::of(&child))
                || !bits_subset(&parent_values, &target_values.present(&child))
            {
                stats.pruned += 1;
                continue;
            }
            let hash = table_hash(&child);
            let bucket = seen.entry(hash).or_default();
            if bucket
                .iter()
                .any(|&other| *arena.materialize(other) == child)
            {
                stats.duplicates += 1;
                continue;
            }
            if stats.generated >= budget.max_generated {
                return finish(SearchOutcome::Exhausted(BudgetKind::Generated), stats);
            }
            stats.generated += 1;
            let child_idx = arena.nodes.len() as u32;
            bucket.push(child_idx);
            let h = config.heuristic.estimate(&child, example_output);
            arena.nodes.push(Node {
                table: None,
                parent: idx,
                op: Some(op),
                g: g + 1,
            });
            heap.push(Entry {
                f: (g + 1) as f64 + config.weight * h as f64,
                h,
                seq,
                node: child_idx,
            });
            seq += 1;
        }
    }

    let kind = if depth_limited {
        BudgetKind::Depth
    } else {
        BudgetKind::SearchSpace
    };
    finish(SearchOutcome::Exhausted(kind), stats)
}
