use std::fmt;

use thiserror::Error;

use super::{Operator, Program};
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InterpretErrorKind {
    #[error("column {col} out of range for row {row} of width {width}")]
    ColumnOutOfRange {
        col: usize,
        row: usize,
        width: usize,
    },
    #[error("column {col} out of range (widest row has {width} cells)")]
    ColumnMissing { col: usize, width: usize },
    #[error("row {row} out of range for table of {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("invalid pattern: {0}")]
    Pattern(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A failed operator, located by its zero-based position in the program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterpretError {
    pub position: usize,
    pub operator: String,
    pub kind: InterpretErrorKind,
}

impl fmt::Display for InterpretError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "operator {} (`{}`): {}",
            self.position, self.operator, self.kind
        )
    }
}

impl std::error::Error for InterpretError {}

/// Runs `program` on `table`. The first failing operator aborts the run.
pub fn interpret(program: &Program, table: &Table) -> Result<Table, InterpretError> {
    let mut current = table.clone();
    for (position, op) in program.ops.iter().enumerate() {
        current = apply_operator(op, &current).map_err(|kind| InterpretError {
            position,
            operator: op.to_string(),
            kind,
        })?;
    }
    Ok(current)
}

type Rows = Vec<Vec<String>>;

/// Every row must have column `col`.
fn require_all(rows: &Rows, col: usize) -> Result<(), InterpretErrorKind> {
    for (r, row) in rows.iter().enumerate() {
        if col >= row.len() {
            return Err(InterpretErrorKind::ColumnOutOfRange {
                col,
                row: r,
                width: row.len(),
            });
        }
    }
    Ok(())
}

/// At least one row must have column `col` (vacuous on an empty table).
fn require_any(rows: &Rows, col: usize) -> Result<(), InterpretErrorKind> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    if !rows.is_empty() && col >= width {
        return Err(InterpretErrorKind::ColumnMissing { col, width });
    }
    Ok(())
}

fn compiled(pattern: &super::Pattern) -> Result<&regex::Regex, InterpretErrorKind> {
    pattern
        .regex()
        .map_err(|e| InterpretErrorKind::Pattern(e.to_string()))
}

/// Applies a single operator.
pub fn apply_operator(op: &Operator, table: &Table) -> Result<Table, InterpretErrorKind> {
    let rows = table.rows();
    let mut out: Rows = rows.to_vec();
    match op {
        Operator::Drop { col } => {
            require_any(&out, *col)?;
            for row in &mut out {
                if *col < row.len() {
                    row.remove(*col);
                }
            }
        }
        Operator::Copy { col } => {
            require_all(&out, *col)?;
            for row in &mut out {
                let v = row[*col].clone();
                row.insert(col + 1, v);
            }
        }
        Operator::Move { from, to } => {
            require_all(&out, *from)?;
            require_all(&out, *to)?;
            for row in &mut out {
                let v = row.remove(*from);
                row.insert(*to, v);
            }
        }
        Operator::Merge { left, right, glue } => {
            require_all(&out, *left)?;
            require_all(&out, *right)?;
            let at = (*left).min(*right);
            let other = (*left).max(*right);
            for row in &mut out {
                let merged = format!("{}{}{}", row[*left], glue, row[*right]);
                if left != right {
                    row.remove(other);
                }
                row[at] = merged;
            }
        }
        Operator::Split { col, delim } => {
            require_all(&out, *col)?;
            for row in &mut out {
                let cell = std::mem::take(&mut row[*col]);
                let (head, tail) = match (!delim.is_empty())
                    .then(|| cell.find(delim.as_str()))
                    .flatten()
                {
                    Some(i) => (cell[..i].to_string(), cell[i + delim.len()..].to_string()),
                    None => (cell, String::new()),
                };
                row[*col] = head;
                row.insert(col + 1, tail);
            }
        }
        Operator::Fold { start } => {
            require_any(&out, *start)?;
            let mut folded = Vec::new();
            for row in out {
                if row.len() <= *start {
                    folded.push(row);
                    continue;
                }
                let prefix = &row[..*start];
                for cell in &row[*start..] {
                    let mut new_row = prefix.to_vec();
                    new_row.push(cell.clone());
                    folded.push(new_row);
                }
            }
            out = folded;
        }
        Operator::Unfold { key } => {
            require_all(&out, *key)?;
            let mut unfolded: Rows = Vec::new();
            let mut current_key: Option<String> = None;
            for row in out {
                let k = row[*key].clone();
                if current_key.as_ref() != Some(&k) {
                    unfolded.push(vec![k.clone()]);
                    current_key = Some(k);
                }
                let target = unfolded.last_mut().expect("run started above");
                target.extend(
                    row.into_iter()
                        .enumerate()
                        .filter(|(i, _)| i != key)
                        .map(|(_, v)| v),
                );
            }
            out = unfolded;
        }
        Operator::Fill { col } => {
            require_all(&out, *col)?;
            let mut last: Option<String> = None;
            for row in &mut out {
                if row[*col].is_empty() {
                    if let Some(v) = &last {
                        row[*col] = v.clone();
                    }
                } else {
                    last = Some(row[*col].clone());
                }
            }
        }
        Operator::DeleteRow { row } => {
            if *row >= out.len() {
                return Err(InterpretErrorKind::RowOutOfRange {
                    row: *row,
                    rows: out.len(),
                });
            }
            out.remove(*row);
        }
        Operator::DeleteEmpty { col } => {
            require_any(&out, *col)?;
            out.retain(|row| row.get(*col).is_some_and(|v| !v.is_empty()));
        }
        Operator::DeleteMatch { col, pattern } => {
            require_any(&out, *col)?;
            let re = compiled(pattern)?;
            out.retain(|row| !row.get(*col).is_some_and(|v| re.is_match(v)));
        }
        Operator::Extract { col, pattern } => {
            require_all(&out, *col)?;
            let re = compiled(pattern)?;
            for row in &mut out {
                row[*col] = re
                    .find(&row[*col])
                    .map(|m| m.as_str().to_string())
                    .unwrap_or_default();
            }
        }
        Operator::Divide { col, pattern } => {
            require_all(&out, *col)?;
            let re = compiled(pattern)?;
            for row in &mut out {
                if re.is_match(&row[*col]) {
                    row.insert(col + 1, String::new());
                } else {
                    row.insert(*col, String::new());
                }
            }
        }
        Operator::Transpose => {
            let width = table.max_width();
            let mut t: Rows = vec![Vec::with_capacity(out.len()); width];
            for row in &out {
                for (c, column) in t.iter_mut().enumerate() {
                    column.push(row.get(c).cloned().unwrap_or_default());
                }
            }
            out = t;
        }
        Operator::Wrap { k } => {
            if *k == 0 {
                return Err(InterpretErrorKind::InvalidArgument(
                    "wrap needs a positive group size".into(),
                ));
            }
            out = out.chunks(*k).map(|group| group.concat()).collect();
        }
    }
    Ok(Table::new(out))
}
