//! Tables, scenarios and the scenario file formats.
//!
//! Every cell is plain text. Nothing is trimmed, case-folded or parsed as a
//! number: `"$-"` and `""` are different values, and a row `["a"]` is not
//! equal to `["a", ""]`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// A grid of text cells. Rows may have different lengths.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(rows: Vec<Vec<String>>) -> Self {
        Table { rows }
    }

    pub fn empty() -> Self {
        Table { rows: Vec::new() }
    }

    /// Builds a table from string slices; mostly useful in tests and fixtures.
    pub fn from_rows<R, C>(rows: R) -> Self
    where
        R: IntoIterator<Item = C>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        Table {
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(Into::into).collect())
                .collect(),
        }
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<String>> {
        self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Length of the longest row.
    pub fn max_width(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Length of the shortest row, 0 for an empty table.
    pub fn min_width(&self) -> usize {
        self.rows.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&str> {
        self.rows
            .get(row)
            .and_then(|r| r.get(col))
            .map(String::as_str)
    }

    pub fn is_rectangular(&self) -> bool {
        self.min_width() == self.max_width()
    }

    /// Copy of the table with short rows padded by empty cells.
    pub fn padded(&self) -> Table {
        let width = self.max_width();
        Table {
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.resize(width, String::new());
                    r
                })
                .collect(),
        }
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &str)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, v)| (r, c, v.as_str())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.rows).expect("string grid always serializes")
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl From<Vec<Vec<String>>> for Table {
    fn from(rows: Vec<Vec<String>>) -> Self {
        Table::new(rows)
    }
}

/// Exact equality: same row count, same row lengths, byte-equal cells.
pub fn tables_equal(a: &Table, b: &Table) -> bool {
    a.rows == b.rows
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: Table,
    pub expected_output: Table,
}

/// One benchmark task: an example pair used for synthesis plus held-out tests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub source_dataset: String,
    pub example_input: Table,
    pub example_output: Table,
    #[serde(default)]
    pub tests: Vec<TestCase>,
}

pub const DEFAULT_DATASET: &str = "unlabeled";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario document: {0}")]
    Malformed(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{key}` is not a list of lists of text: {detail}")]
    BadTable { key: String, detail: String },
    #[error("example_output must contain at least one row")]
    EmptyExampleOutput,
    #[error("legacy literal error at byte {offset}: {detail}")]
    Legacy { offset: usize, detail: String },
    #[error("duplicate scenario name `{0}`")]
    DuplicateName(String),
    #[error("no scenario files found in {0}")]
    EmptyCorpus(PathBuf),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<ScenarioError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Scenario {
    pub fn new(name: impl Into<String>, example_input: Table, example_output: Table) -> Self {
        Scenario {
            name: name.into(),
            source_dataset: DEFAULT_DATASET.to_string(),
            example_input,
            example_output,
            tests: Vec::new(),
        }
    }

    pub fn with_dataset(mut self, dataset: impl Into<String>) -> Self {
        self.source_dataset = dataset.into();
        self
    }

    pub fn with_test(mut self, input: Table, expected_output: Table) -> Self {
        self.tests.push(TestCase {
            input,
            expected_output,
        });
        self
    }

    /// Canonical scenario document (pretty JSON).
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario always serializes")
    }
}

fn table_from_value(key: &str, value: &Value) -> Result<Table, ScenarioError> {
    let bad = |detail: String| ScenarioError::BadTable {
        key: key.to_string(),
        detail,
    };
    let rows = value
        .as_array()
        .ok_or_else(|| bad("expected a list of rows".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .ok_or_else(|| bad(format!("row {r} is not a list")))?;
        let mut out_row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            match cell {
                Value::String(s) => out_row.push(s.clone()),
                other => return Err(bad(format!("cell ({r},{c}) is not text: {other}"))),
            }
        }
        out.push(out_row);
    }
    Ok(Table::new(out))
}

fn required<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
) -> Result<&'a Value, ScenarioError> {
    obj.get(key)
        .ok_or_else(|| ScenarioError::MissingKey(key.to_string()))
}

/// Parses a canonical scenario document. Unknown top-level keys are ignored.
pub fn parse_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let root: Value =
        serde_json::from_str(document).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| ScenarioError::Malformed("top level must be an object".into()))?;

    let name = required(obj, "name")?
        .as_str()
        .ok_or_else(|| ScenarioError::Malformed("`name` must be text".into()))?
        .to_string();
    let source_dataset = match obj.get("source_dataset") {
        None => DEFAULT_DATASET.to_string(),
        Some(v) => v
            .as_str()
            .ok_or_else(|| ScenarioError::Malformed("`source_dataset` must be text".into()))?
            .to_string(),
    };
    let example_input = table_from_value("example_input", required(obj, "example_input")?)?;
    let example_output = table_from_value("example_output", required(obj, "example_output")?)?;
    if example_output.is_empty() {
        return Err(ScenarioError::EmptyExampleOutput);
    }

    let mut tests = Vec::new();
    if let Some(v) = obj.get("tests") {
        let list = v
            .as_array()
            .ok_or_else(|| ScenarioError::Malformed("`tests` must be a list".into()))?;
        for (i, t) in list.iter().enumerate() {
            let t = t
                .as_object()
                .ok_or_else(|| ScenarioError::Malformed(format!("tests[{i}] must be an object")))?;
            let input = table_from_value(
                &format!("tests[{i}].input"),
                t.get("input")
                    .ok_or_else(|| ScenarioError::MissingKey(format!("tests[{i}].input")))?,
            )?;
            let expected_output = table_from_value(
                &format!("tests[{i}].expected_output"),
                t.get("expected_output").ok_or_else(|| {
                    ScenarioError::MissingKey(format!("tests[{i}].expected_output"))
                })?,
            )?;
            tests.push(TestCase {
                input,
                expected_output,
            });
        }
    }

    Ok(Scenario {
        name,
        source_dataset,
        example_input,
        example_output,
        tests,
    })
}

/// A corpus of scenarios with per-dataset counts.
#[derive(Clone, Debug, Default)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
    counts: BTreeMap<String, usize>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, ScenarioError> {
        let mut counts = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for s in &scenarios {
            if !seen.insert(s.name.as_str()) {
                return Err(ScenarioError::DuplicateName(s.name.clone()));
            }
            *counts.entry(s.source_dataset.clone()).or_insert(0) += 1;
        }
        Ok(ScenarioSet { scenarios, counts })
    }

    /// Loads every `*.json` file below a directory, ordered by path.
    pub fn load_dir(dir: &Path) -> Result<Self, ScenarioError> {
        let mut paths = Vec::new();
        collect_json_files(dir, &mut paths)?;
        paths.sort();
        if paths.is_empty() {
            return Err(ScenarioError::EmptyCorpus(dir.to_path_buf()));
        }
        let scenarios = paths
            .iter()
            .map(|p| load_scenario_file(p))
            .collect::<Result<Vec<_>, _>>()?;
        ScenarioSet::new(scenarios)
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Scenario count per source dataset.
    pub fn dataset_counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }
}

/// Every `*.json` file under `dir`, subdirectories included.
fn collect_json_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ScenarioError> {
    let io_err = |source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    };
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_dir() {
            collect_json_files(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        parse_scenario(&text)
    } else {
        import_legacy_scenario(&text)
    };
    parsed.map_err(|e| ScenarioError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

// ---------------------------------------------------------------------------
// Legacy list-literal scenarios
//
//   name: fig4
//   source_dataset: foofah
//   example_input: [['001-001', '1', '', '$-'], ...]
//   example_output: [['001-001', '$-']]
//   test_input: [[...]]
//   test_output: [[...]]
//
// A literal may continue over several lines until its brackets balance.
// `test_input` / `test_output` sections pair up in order. Lines starting with
// `#` outside a literal are skipped.
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum Literal {
    Text(String),
    List(Vec<Literal>),
}

struct LiteralParser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    base: usize,
}

impl<'a> LiteralParser<'a> {
    fn err(&self, detail: impl Into<String>) -> ScenarioError {
        ScenarioError::Legacy {
            offset: self.base + self.pos,
            detail: detail.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn value(&mut self) -> Result<Literal, ScenarioError> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'[') => self.list(),
            Some(b'\'') | Some(b'"') => self.string().map(Literal::Text),
            Some(_) => Err(self.err("expected a quoted string or a list")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn list(&mut self) -> Result<Literal, ScenarioError> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.src.get(self.pos) {
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Literal::List(items));
                }
                None => return Err(self.err("unbalanced brackets")),
                _ => {}
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.src.get(self.pos) {
                Some(b',') => self.pos += 1,
                Some(b']') => {}
                None => return Err(self.err("unbalanced brackets")),
                Some(_) => return Err(self.err("expected `,` or `]`")),
            }
        }
    }

    fn string(&mut self) -> Result<String, ScenarioError> {
        let quote = self.src[self.pos];
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.text[self.pos..];
            let mut chars = rest.chars();
            match chars.next() {
                None => return Err(self.err("unterminated string")),
                Some('\\') => {
                    let esc = chars
                        .next()
                        .ok_or_else(|| self.err("unterminated escape"))?;
                    let mapped = match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        other => other,
                    };
                    out.push(mapped);
                    self.pos += 1 + esc.len_utf8();
                }
                Some(ch) if ch as u32 == quote as u32 => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(ch) => {
                    out.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
    }
}

fn literal_to_table(lit: Literal, base: usize) -> Result<Table, ScenarioError> {
    let err = |detail: &str| ScenarioError::Legacy {
        offset: base,
        detail: detail.to_string(),
    };
    let Literal::List(rows) = lit else {
        return Err(err("table literal must be a list of rows"));
    };
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let Literal::List(cells) = row else {
            return Err(err("row must be a list"));
        };
        let mut out_row = Vec::with_capacity(cells.len());
        for cell in cells {
            match cell {
                Literal::Text(s) => out_row.push(s),
                Literal::List(_) => return Err(err("non-text leaf value")),
            }
        }
        out.push(out_row);
    }
    Ok(Table::new(out))
}

/// Parses one list-of-lists literal (single or double quoted strings).
pub fn parse_legacy_table(literal: &str) -> Result<Table, ScenarioError> {
    parse_legacy_table_at(literal, 0)
}

fn parse_legacy_table_at(literal: &str, base: usize) -> Result<Table, ScenarioError> {
    let mut p = LiteralParser {
        src: literal.as_bytes(),
        text: literal,
        pos: 0,
        base,
    };
    let lit = p.value()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters after literal"));
    }
    literal_to_table(lit, base)
}

/// Returns the byte length of a bracketed literal at the start of `s`, or
/// `None` when the brackets never balance.
fn balanced_extent(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, ch) in s.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == q {
                quote = None;
            }
            continue;
        }
        match ch {
            '\'' | '"' => quote = Some(ch),
            '[' => depth += 1,
            ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Imports a legacy list-literal scenario file.
pub fn import_legacy_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut name = None;
    let mut dataset = None;
    let mut example_input = None;
    let mut example_output = None;
    let mut test_inputs = Vec::new();
    let mut test_outputs = Vec::new();

    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let line_end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        let line = rest[..line_end].trim();
        if line.is_empty() || line.starts_with('#') {
            pos += line_end;
            continue;
        }
        let colon = rest[..line_end]
            .find(':')
            .ok_or_else(|| ScenarioError::Legacy {
                offset: pos,
                detail: "expected `key: value`".into(),
            })?;
        let key = rest[..colon].trim().to_string();
        let after = colon + 1;
        let value_start = after + (rest[after..].len() - rest[after..].trim_start().len());
        let value = &rest[value_start..];

        if value.starts_with('[') {
            let extent = balanced_extent(value).ok_or(ScenarioError::Legacy {
                offset: pos + value_start,
                detail: "unbalanced brackets".into(),
            })?;
            let table = parse_legacy_table_at(&value[..extent], pos + value_start)?;
            match key.as_str() {
                "example_input" => example_input = Some(table),
                "example_output" => example_output = Some(table),
                "test_input" => test_inputs.push(table),
                "test_output" => test_outputs.push(table),
                _ => {}
            }
            let consumed = value_start + extent;
            let tail = &rest[consumed..];
            let tail_end = tail.find('\n').map_or(tail.len(), |i| i + 1);
            if !tail[..tail_end].trim().is_empty() {
                return Err(ScenarioError::Legacy {
                    offset: pos + consumed,
                    detail: "trailing characters after literal".into(),
                });
            }
            pos += consumed + tail_end;
        } else {
            let v = rest[value_start..line_end].trim();
            let v = v
                .strip_prefix('\'')
                .and_then(|x| x.strip_suffix('\''))
                .or_else(|| v.strip_prefix('"').and_then(|x| x.strip_suffix('"')))
                .unwrap_or(v)
                .to_string();
            match key.as_str() {
                "name" => name = Some(v),
                "source_dataset" => dataset = Some(v),
                _ => {}
            }
            pos += line_end;
        }
    }

    let example_input =
        example_input.ok_or_else(|| ScenarioError::MissingKey("example_input".into()))?;
    let example_output =
        example_output.ok_or_else(|| ScenarioError::MissingKey("example_output".into()))?;
    if example_output.is_empty() {
        return Err(ScenarioError::EmptyExampleOutput);
    }
    if test_inputs.len() != test_outputs.len() {
        return Err(ScenarioError::Malformed(format!(
            "{} test_input sections but {} test_output sections",
            test_inputs.len(),
            test_outputs.len()
        )));
    }
    Ok(Scenario {
        name: name.ok_or_else(|| ScenarioError::MissingKey("name".into()))?,
        source_dataset: dataset.unwrap_or_else(|| DEFAULT_DATASET.to_string()),
        example_input,
        example_output,
        tests: test_inputs
            .into_iter()
            .zip(test_outputs)
            .map(|(input, expected_output)| TestCase {
                input,
                expected_output,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig4_doc() -> &'static str {
        r#"{
          "name": "fig4",
          "source_dataset": "foofah",
          "example_input": [
            ["001-001","1","","","","$-"],
            ["001-001","2","","","","$-"],
            ["001-001","3","","","","$7,664.25"],
            ["001-001","4","","","","$-"]
          ],
          "example_output": [["001-001","$-","$-","$7,664.25","$-"]],
          "tests": [],
          "notes": "ignored"
        }"#
    }

    #[test]
    fn identity_scenario() {
        let s = parse_scenario(r#"{"name":"id","example_input":[["a"]],"example_output":[["a"]]}"#)
            .unwrap();
        assert_eq!(s.example_input, Table::from_rows([["a"]]));
        assert!(tables_equal(&s.example_input, &s.example_output));
        assert!(s.tests.is_empty());
        assert_eq!(s.source_dataset, DEFAULT_DATASET);
    }

    #[test]
    fn fig4_tables_verbatim() {
        let s = parse_scenario(fig4_doc()).unwrap();
        assert_eq!(s.example_input.row_count(), 4);
        assert_eq!(s.example_input.rows()[2][5], "$7,664.25");
        assert_eq!(s.example_input.rows()[0][2], "");
        assert_eq!(
            s.example_output,
            Table::from_rows([["001-001", "$-", "$-", "$7,664.25", "$-"]])
        );
    }

    #[test]
    fn missing_example_output() {
        let err = parse_scenario(r#"{"name":"x","example_input":[["a"]]}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::MissingKey(k) if k == "example_output"));
    }

    #[test]
    fn non_text_cells_rejected() {
        let err =
            parse_scenario(r#"{"name":"x","example_input":[["a", 3]],"example_output":[["a"]]}"#)
                .unwrap_err();
        assert!(matches!(err, ScenarioError::BadTable { .. }));
        let err = parse_scenario(r#"{"name":"x","example_input":["a"],"example_output":[["a"]]}"#)
            .unwrap_err();
        assert!(matches!(err, ScenarioError::BadTable { .. }));
        assert!(matches!(
            parse_scenario("{not json").unwrap_err(),
            ScenarioError::Malformed(_)
        ));
    }

    #[test]
    fn empty_example_output_rejected() {
        let err =
            parse_scenario(r#"{"name":"x","example_input":[],"example_output":[]}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::EmptyExampleOutput));
    }

    #[test]
    fn equality_is_exact() {
        let t = Table::from_rows(vec![vec!["a", "b"], vec!["c"]]);
        assert!(tables_equal(&t, &t.clone()));
        assert!(!tables_equal(
            &Table::from_rows([["a"]]),
            &Table::from_rows([["a", ""]])
        ));
        assert!(!tables_equal(
            &Table::from_rows([["a "]]),
            &Table::from_rows([["a"]])
        ));
        assert!(tables_equal(&Table::empty(), &Table::empty()));
    }

    #[test]
    fn fig4_shifted_value_is_not_equal() {
        let truth = Table::from_rows([["001-001", "$-", "$-", "$-", "$-", "$7,664.25"]]);
        let mut shifted = truth.clone().into_rows();
        shifted[0].swap(4, 5);
        let shifted = Table::new(shifted);
        let cellwise_same = truth.cells().zip(shifted.cells()).all(|(a, b)| a == b);
        assert!(!cellwise_same);
        assert!(!tables_equal(&truth, &shifted));
    }

    #[test]
    fn legacy_basic_and_embedded_comma() {
        assert_eq!(
            parse_legacy_table("[['a','b']]").unwrap(),
            Table::from_rows([["a", "b"]])
        );
        assert_eq!(
            parse_legacy_table("[['$7,664.25']]").unwrap(),
            Table::from_rows([["$7,664.25"]])
        );
        assert_eq!(
            parse_legacy_table(r#"[['it\'s', "q\"d"],]"#).unwrap(),
            Table::from_rows([["it's", "q\"d"]])
        );
    }

    #[test]
    fn legacy_errors() {
        assert!(matches!(
            parse_legacy_table("[['a', ['b']]]").unwrap_err(),
            ScenarioError::Legacy { .. }
        ));
        assert!(matches!(
            parse_legacy_table("[['a'").unwrap_err(),
            ScenarioError::Legacy { .. }
        ));
        assert!(import_legacy_scenario(
            "name: x\nexample_input: [['a']\nexample_output: [['a']]\n"
        )
        .is_err());
        assert!(
            import_legacy_scenario("name: x\nexample_input: [[1]]\nexample_output: [['a']]\n")
                .is_err()
        );
    }

    #[test]
    fn legacy_and_canonical_agree() {
        let legacy = "\
# exported from an older benchmark
name: fig4
source_dataset: foofah
example_input: [['001-001','1','','','','$-'],
                ['001-001','2','','','','$-'],
                ['001-001','3','','','','$7,664.25'],
                ['001-001','4','','','','$-']]
example_output: [['001-001','$-','$-','$7,664.25','$-']]
";
        let a = import_legacy_scenario(legacy).unwrap();
        let b = parse_scenario(fig4_doc()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn legacy_tests_pair_in_order() {
        let s = import_legacy_scenario(
            "name: t\nexample_input: [['a']]\nexample_output: [['b']]\n\
             test_input: [['c']]\ntest_output: [['d']]\ntest_input: [['e']]\ntest_output: [['f']]\n",
        )
        .unwrap();
        assert_eq!(s.tests.len(), 2);
        assert_eq!(s.tests[1].expected_output, Table::from_rows([["f"]]));
    }

    #[test]
    fn duplicate_names_rejected() {
        let s = Scenario::new("x", Table::empty(), Table::from_rows([["a"]]));
        assert!(matches!(
            ScenarioSet::new(vec![s.clone(), s]).unwrap_err(),
            ScenarioError::DuplicateName(_)
        ));
    }

    #[test]
    fn dataset_counts() {
        let mk = |n: &str, d: &str| {
            Scenario::new(n, Table::empty(), Table::from_rows([["a"]])).with_dataset(d)
        };
        let set = ScenarioSet::new(vec![mk("a", "x"), mk("b", "y"), mk("c", "x")]).unwrap();
        assert_eq!(set.dataset_counts()["x"], 2);
        assert_eq!(set.dataset_counts()["y"], 1);
    }

    fn arb_table() -> impl Strategy<Value = Table> {
        prop::collection::vec(prop::collection::vec(".{0,4}", 0..4), 0..4).prop_map(Table::new)
    }

    fn arb_nonempty_table() -> impl Strategy<Value = Table> {
        prop::collection::vec(prop::collection::vec(".{0,4}", 0..4), 1..4).prop_map(Table::new)
    }

    proptest! {
        #[test]
        fn scenario_round_trip(
            name in "[a-z]{1,8}",
            ds in "[a-z]{0,5}",
            input in arb_table(),
            output in arb_nonempty_table(),
            tests in prop::collection::vec((arb_table(), arb_table()), 0..3),
        ) {
            let mut s = Scenario::new(name, input, output).with_dataset(ds);
            for (i, o) in tests {
                s = s.with_test(i, o);
            }
            prop_assert_eq!(parse_scenario(&s.to_document()).unwrap(), s);
        }

        #[test]
        fn equality_is_an_equivalence(a in arb_table(), b in arb_table(), c in arb_table()) {
            prop_assert!(tables_equal(&a, &a));
            prop_assert_eq!(tables_equal(&a, &b), tables_equal(&b, &a));
            if tables_equal(&a, &b) && tables_equal(&b, &c) {
                prop_assert!(tables_equal(&a, &c));
            }
        }
    }
}
