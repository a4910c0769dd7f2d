//! The table-edit operator language.
//!
//! A [`Program`] is a sequence of [`Operator`]s applied left to right by
//! [`interpret`]. Programs have a textual form ([`parse_program`] /
//! [`print_program`]) that is shared by the search engine, the reports and
//! the LLM prompts:
//!
//! ```text
//! program := (op (";" | newline))*
//! op      := name "(" args? ")"
//! args    := arg ("," arg)*
//! arg     := integer | "double-quoted string"
//! ```
//!
//! Strings accept `\"` and `\\` escapes; `#` starts a comment that runs to
//! the end of the line. Column and row indices are zero-based. Regex
//! arguments use the syntax of the `regex` crate (no backreferences or
//! lookaround) and are matched against cell text only.

mod grammar;
mod interp;

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use regex::Regex;

pub use grammar::{parse_program, print_program, ParseError, ParseErrorKind};
pub use interp::{apply_operator, interpret, InterpretError, InterpretErrorKind};

/// A regex argument. Kept exactly as written; compiled on first use and
/// shared between clones.
#[derive(Clone)]
pub struct Pattern(Arc<PatternInner>);

struct PatternInner {
    text: String,
    compiled: OnceLock<Result<Regex, String>>,
}

impl Pattern {
    pub fn new(text: impl Into<String>) -> Self {
        Pattern(Arc::new(PatternInner {
            text: text.into(),
            compiled: OnceLock::new(),
        }))
    }

    pub fn as_str(&self) -> &str {
        &self.0.text
    }

    pub fn regex(&self) -> Result<&Regex, &str> {
        self.0
            .compiled
            .get_or_init(|| Regex::new(&self.0.text).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(String::as_str)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}

impl Eq for Pattern {}

impl Hash for Pattern {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.as_str().hash(state);
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl From<&str> for Pattern {
    fn from(s: &str) -> Self {
        Pattern::new(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    /// Remove a column from every row that has it.
    Drop {
        col: usize,
    },
    /// Duplicate a column immediately to its right.
    Copy {
        col: usize,
    },
    /// Remove column `from` and reinsert it at `to`.
    Move {
        from: usize,
        to: usize,
    },
    /// `cell(left) + glue + cell(right)` placed at `min(left, right)`.
    Merge {
        left: usize,
        right: usize,
        glue: String,
    },
    /// Split a cell at the first occurrence of `delim` into two cells.
    Split {
        col: usize,
        delim: String,
    },
    /// Turn each cell from `start` onwards into its own row, keeping the prefix.
    Fold {
        start: usize,
    },
    /// Collapse runs of rows sharing the key cell into a single row.
    Unfold {
        key: usize,
    },
    /// Fill empty cells from the nearest non-empty cell above.
    Fill {
        col: usize,
    },
    DeleteRow {
        row: usize,
    },
    /// Remove rows whose cell is empty or absent.
    DeleteEmpty {
        col: usize,
    },
    /// Remove rows whose cell contains a match.
    DeleteMatch {
        col: usize,
        pattern: Pattern,
    },
    /// Replace a cell by its first match, or empty text.
    Extract {
        col: usize,
        pattern: Pattern,
    },
    /// Spread a column in two depending on whether the cell matches.
    Divide {
        col: usize,
        pattern: Pattern,
    },
    Transpose,
    /// Concatenate each group of `k` consecutive rows.
    Wrap {
        k: usize,
    },
}

/// Signature information used by the parser, the printer and the prompt
/// catalog.
pub struct OperatorInfo {
    pub name: &'static str,
    pub signature: &'static str,
    pub summary: &'static str,
}

/// The fifteen operators, in catalog order.
pub const CATALOG: [OperatorInfo; 15] = [
    OperatorInfo { name: "drop", signature: "drop(col)", summary: "remove column col from every row that has it" },
    OperatorInfo { name: "copy", signature: "copy(col)", summary: "duplicate column col immediately to its right" },
    OperatorInfo { name: "move", signature: "move(from, to)", summary: "remove column from and reinsert it at position to" },
    OperatorInfo { name: "merge", signature: "merge(col1, col2, \"glue\")", summary: "replace the two cells by cell(col1) + glue + cell(col2) at the smaller index" },
    OperatorInfo { name: "split", signature: "split(col, \"delim\")", summary: "split the cell at the first delim into two adjacent cells (no delim: cell, then empty cell)" },
    OperatorInfo { name: "fold", signature: "fold(start)", summary: "each row becomes one row per cell at index >= start, each prefixed by the cells before start" },
    OperatorInfo { name: "unfold", signature: "unfold(key)", summary: "consecutive rows with equal cell at key collapse into [key] followed by the other cells of each row" },
    OperatorInfo { name: "fill", signature: "fill(col)", summary: "empty cells in col take the nearest non-empty value above" },
    OperatorInfo { name: "delete_row", signature: "delete_row(row)", summary: "remove the row with index row" },
    OperatorInfo { name: "delete_empty", signature: "delete_empty(col)", summary: "remove rows whose cell in col is empty or missing" },
    OperatorInfo { name: "delete_match", signature: "delete_match(col, \"regex\")", summary: "remove rows whose cell in col contains a match of regex" },
    OperatorInfo { name: "extract", signature: "extract(col, \"regex\")", summary: "replace the cell by its first match of regex (empty if none)" },
    OperatorInfo { name: "divide", signature: "divide(col, \"regex\")", summary: "matching cells stay at col with an empty cell after; others move to col+1 behind an empty cell" },
    OperatorInfo { name: "transpose", signature: "transpose()", summary: "swap rows and columns, padding short rows with empty cells first" },
    OperatorInfo { name: "wrap", signature: "wrap(k)", summary: "concatenate each group of k consecutive rows into one row" },
];

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::Drop { .. } => "drop",
            Operator::Copy { .. } => "copy",
            Operator::Move { .. } => "move",
            Operator::Merge { .. } => "merge",
            Operator::Split { .. } => "split",
            Operator::Fold { .. } => "fold",
            Operator::Unfold { .. } => "unfold",
            Operator::Fill { .. } => "fill",
            Operator::DeleteRow { .. } => "delete_row",
            Operator::DeleteEmpty { .. } => "delete_empty",
            Operator::DeleteMatch { .. } => "delete_match",
            Operator::Extract { .. } => "extract",
            Operator::Divide { .. } => "divide",
            Operator::Transpose => "transpose",
            Operator::Wrap { .. } => "wrap",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        grammar::write_operator(f, self)
    }
}

/// An operator sequence; the empty program is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub ops: Vec<Operator>,
}

impl Program {
    pub fn new(ops: Vec<Operator>) -> Self {
        Program { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn then(&self, op: Operator) -> Program {
        let mut ops = self.ops.clone();
        ops.push(op);
        Program { ops }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

impl From<Vec<Operator>> for Program {
    fn from(ops: Vec<Operator>) -> Self {
        Program { ops }
    }
}
