use std::fmt;

use thiserror::Error;

use super::{Operator, Pattern, Program};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} argument(s), found {found}")]
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("`{op}` argument {index} must be a non-negative integer, found `{found}`")]
    NonIntegerIndex {
        op: String,
        index: usize,
        found: String,
    },
    #[error("`{op}` argument {index} must be a quoted string")]
    ExpectedString { op: String, index: usize },
}

/// Parse failure with a 1-based line and column.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Str(String),
    /// Anything else that is not punctuation, kept for error messages.
    Bare(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Newline,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let ch = chars.next();
            if ch == Some('\n') {
                line += 1;
                column = 1;
            } else if ch.is_some() {
                column += 1;
            }
            ch
        }};
    }

    while let Some(&ch) = chars.peek() {
        let (l, c) = (line, column);
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: l,
                column: c,
            })
        };
        match ch {
            '\n' => {
                bump!();
                push(&mut out, Tok::Newline);
            }
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump!();
                }
            }
            '(' => {
                bump!();
                push(&mut out, Tok::LParen);
            }
            ')' => {
                bump!();
                push(&mut out, Tok::RParen);
            }
            ',' => {
                bump!();
                push(&mut out, Tok::Comma);
            }
            ';' => {
                bump!();
                push(&mut out, Tok::Semi);
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None => {
                            return Err(ParseError {
                                line: l,
                                column: c,
                                kind: ParseErrorKind::Syntax("unterminated string".into()),
                            })
                        }
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            other => {
                                return Err(ParseError {
                                    line,
                                    column: column.saturating_sub(1),
                                    kind: ParseErrorKind::Syntax(format!(
                                        "unsupported escape `\\{}`",
                                        other.map(String::from).unwrap_or_default()
                                    )),
                                })
                            }
                        },
                        Some(other) => s.push(other),
                    }
                }
                push(&mut out, Tok::Str(s));
            }
            _ => {
                let mut word = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_whitespace() || "(),;#\"".contains(c2) {
                        break;
                    }
                    word.push(c2);
                    bump!();
                }
                let tok = if word.chars().all(|c| c.is_ascii_digit()) {
                    Tok::Int(word)
                } else if word
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    Tok::Ident(word)
                } else {
                    Tok::Bare(word)
                };
                push(&mut out, tok);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum ArgKind {
    Index,
    Text,
}

fn signature(name: &str) -> Option<&'static [ArgKind]> {
    use ArgKind::*;
    Some(match name {
        "drop" | "copy" | "fold" | "unfold" | "fill" | "delete_row" | "delete_empty" | "wrap" => {
            &[Index]
        }
        "move" => &[Index, Index],
        "merge" => &[Index, Index, Text],
        "split" | "delete_match" | "extract" | "divide" => &[Index, Text],
        "transpose" => &[],
        _ => return None,
    })
}

enum Arg {
    Index(usize),
    Text(String),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.column))
    }

    fn err_at(&self, at: (usize, usize), kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: at.0,
            column: at.1,
            kind,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.err_at(self.here(), ParseErrorKind::Syntax(msg.into()))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected {what}"))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut ops = Vec::new();
        loop {
            while matches!(self.peek().map(|t| &t.tok), Some(Tok::Semi | Tok::Newline)) {
                self.pos += 1;
            }
            if self.peek().is_none() {
                return Ok(Program::new(ops));
            }
            ops.push(self.operator()?);
            match self.peek().map(|t| &t.tok) {
                None | Some(Tok::Semi | Tok::Newline) => {}
                Some(_) => return Err(self.syntax("expected `;` or a newline between operators")),
            }
        }
    }

    fn operator(&mut self) -> Result<Operator, ParseError> {
        let start = self.here();
        let name = match self.peek().map(|t| &t.tok) {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(self.syntax("expected an operator name")),
        };
        self.pos += 1;
        let sig = signature(&name)
            .ok_or_else(|| self.err_at(start, ParseErrorKind::UnknownOperator(name.clone())))?;
        self.expect(Tok::LParen, "`(`")?;

        let mut raw: Vec<(Tok, (usize, usize))> = Vec::new();
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
            loop {
                let at = self.here();
                match self.peek().map(|t| t.tok.clone()) {
                    Some(tok @ (Tok::Int(_) | Tok::Str(_) | Tok::Ident(_) | Tok::Bare(_))) => {
                        raw.push((tok, at));
                        self.pos += 1;
                    }
                    _ => return Err(self.syntax("expected an argument")),
                }
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => break,
                    _ => return Err(self.syntax("expected `,` or `)`")),
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;

        if raw.len() != sig.len() {
            return Err(self.err_at(
                start,
                ParseErrorKind::Arity {
                    op: name,
                    expected: sig.len(),
                    found: raw.len(),
                },
            ));
        }
        let mut args = Vec::with_capacity(raw.len());
        for (index, ((tok, at), kind)) in raw.into_iter().zip(sig).enumerate() {
            let arg = match (kind, tok) {
                (ArgKind::Index, Tok::Int(digits)) => match digits.parse::<usize>() {
                    Ok(v) => Arg::Index(v),
                    Err(_) => {
                        return Err(self.err_at(
                            at,
                            ParseErrorKind::NonIntegerIndex {
                                op: name,
                                index,
                                found: digits,
                            },
                        ))
                    }
                },
                (ArgKind::Index, other) => {
                    let found = match other {
                        Tok::Str(s) => format!("\"{s}\""),
                        Tok::Ident(s) | Tok::Bare(s) | Tok::Int(s) => s,
                        _ => String::new(),
                    };
                    return Err(self.err_at(
                        at,
                        ParseErrorKind::NonIntegerIndex {
                            op: name,
                            index,
                            found,
                        },
                    ));
                }
                (ArgKind::Text, Tok::Str(s)) => Arg::Text(s),
                (ArgKind::Text, _) => {
                    return Err(self.err_at(at, ParseErrorKind::ExpectedString { op: name, index }))
                }
            };
            args.push(arg);
        }
        Ok(build(&name, args))
    }
}

fn build(name: &str, args: Vec<Arg>) -> Operator {
    let mut idx = Vec::new();
    let mut text = String::new();
    for a in args {
        match a {
            Arg::Index(v) => idx.push(v),
            Arg::Text(s) => text = s,
        }
    }
    match name {
        "drop" => Operator::Drop { col: idx[0] },
        "copy" => Operator::Copy { col: idx[0] },
        "fold" => Operator::Fold { start: idx[0] },
        "unfold" => Operator::Unfold { key: idx[0] },
        "fill" => Operator::Fill { col: idx[0] },
        "delete_row" => Operator::DeleteRow { row: idx[0] },
        "delete_empty" => Operator::DeleteEmpty { col: idx[0] },
        "wrap" => Operator::Wrap { k: idx[0] },
        "transpose" => Operator::Transpose,
        "move" => Operator::Move {
            from: idx[0],
            to: idx[1],
        },
        "merge" => Operator::Merge {
            left: idx[0],
            right: idx[1],
            glue: text,
        },
        "split" => Operator::Split {
            col: idx[0],
            delim: text,
        },
        "delete_match" => Operator::DeleteMatch {
            col: idx[0],
            pattern: Pattern::new(text),
        },
        "extract" => Operator::Extract {
            col: idx[0],
            pattern: Pattern::new(text),
        },
        "divide" => Operator::Divide {
            col: idx[0],
            pattern: Pattern::new(text),
        },
        _ => unreachable!("signature() accepted `{name}`"),
    }
}

/// Parses program text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let (line, column) = text
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(i, l)| (i + 1, l.chars().count() + 1));
    let mut p = Parser {
        toks,
        pos: 0,
        end: (line, column),
    };
    p.program()
}

fn write_str_lit(out: &mut impl fmt::Write, s: &str) -> fmt::Result {
    out.write_char('"')?;
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            out.write_char('\\')?;
        }
        out.write_char(ch)?;
    }
    out.write_char('"')
}

pub(super) fn write_operator(out: &mut impl fmt::Write, op: &Operator) -> fmt::Result {
    write!(out, "{}(", op.name())?;
    match op {
        Operator::Drop { col }
        | Operator::Copy { col }
        | Operator::Fill { col }
        | Operator::DeleteEmpty { col } => write!(out, "{col}")?,
        Operator::Fold { start } => write!(out, "{start}")?,
        Operator::Unfold { key } => write!(out, "{key}")?,
        Operator::DeleteRow { row } => write!(out, "{row}")?,
        Operator::Wrap { k } => write!(out, "{k}")?,
        Operator::Move { from, to } => write!(out, "{from}, {to}")?,
        Operator::Merge { left, right, glue } => {
            write!(out, "{left}, {right}, ")?;
            write_str_lit(out, glue)?;
        }
        Operator::Split { col, delim } => {
            write!(out, "{col}, ")?;
            write_str_lit(out, delim)?;
        }
        Operator::DeleteMatch { col, pattern }
        | Operator::Extract { col, pattern }
        | Operator::Divide { col, pattern } => {
            write!(out, "{col}, ")?;
            write_str_lit(out, pattern.as_str())?;
        }
        Operator::Transpose => {}
    }
    out.write_char(')')
}

/// Canonical text: operators separated by `"; "`.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for (i, op) in program.ops.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        write_operator(&mut out, op).expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sequences() {
        let p = parse_program("drop(1); unfold(0)").unwrap();
        assert_eq!(
            p.ops,
            vec![Operator::Drop { col: 1 }, Operator::Unfold { key: 0 }]
        );
        let p2 = parse_program("drop(1)\n# trailing comment\nunfold(0)\n").unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn parses_strings() {
        assert_eq!(
            parse_program(r#"merge(0, 1, "-")"#).unwrap().ops,
            vec![Operator::Merge {
                left: 0,
                right: 1,
                glue: "-".into()
            }]
        );
        assert_eq!(
            parse_program(r#"split(0, "a\"b\\c")"#).unwrap().ops,
            vec![Operator::Split {
                col: 0,
                delim: "a\"b\\c".into()
            }]
        );
    }

    #[test]
    fn printing() {
        assert_eq!(print_program(&Program::default()), "");
        let p = Program::new(vec![Operator::Split {
            col: 2,
            delim: ",".into(),
        }]);
        assert_eq!(print_program(&p), r#"split(2, ",")"#);
        let p = parse_program("transpose( ) ;wrap( 3 )").unwrap();
        assert_eq!(print_program(&p), "transpose(); wrap(3)");
    }

    #[test]
    fn non_integer_index() {
        let err = parse_program("drop(x)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::NonIntegerIndex { .. }));
        assert_eq!((err.line, err.column), (1, 6));
        assert!(matches!(
            parse_program("drop(-1)").unwrap_err().kind,
            ParseErrorKind::NonIntegerIndex { .. }
        ));
        assert!(matches!(
            parse_program("drop(1.5)").unwrap_err().kind,
            ParseErrorKind::NonIntegerIndex { .. }
        ));
        assert!(matches!(
            parse_program(r#"drop("1")"#).unwrap_err().kind,
            ParseErrorKind::NonIntegerIndex { .. }
        ));
    }

    #[test]
    fn other_errors() {
        let err = parse_program("drop(1)\nfrobnicate(2)").unwrap_err();
        assert_eq!(
            err.kind,
            ParseErrorKind::UnknownOperator("frobnicate".into())
        );
        assert_eq!((err.line, err.column), (2, 1));
        assert!(matches!(
            parse_program("merge(0, 1)").unwrap_err().kind,
            ParseErrorKind::Arity {
                expected: 3,
                found: 2,
                ..
            }
        ));
        assert!(matches!(
            parse_program("split(0, 1)").unwrap_err().kind,
            ParseErrorKind::ExpectedString { index: 1, .. }
        ));
        assert!(matches!(
            parse_program("drop(1) drop(2)").unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            parse_program("drop(1").unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            parse_program(r#"split(0, "x)"#).unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            parse_program(r#"split(0, "\n")"#).unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
    }

    pub(crate) fn arb_operator() -> impl Strategy<Value = Operator> {
        let idx = 0usize..12;
        let text = "[ -~\\n\u{e9}]{0,6}";
        prop_oneof![
            idx.clone().prop_map(|col| Operator::Drop { col }),
            idx.clone().prop_map(|col| Operator::Copy { col }),
            (idx.clone(), idx.clone()).prop_map(|(from, to)| Operator::Move { from, to }),
            (idx.clone(), idx.clone(), text).prop_map(|(left, right, glue)| Operator::Merge {
                left,
                right,
                glue
            }),
            (idx.clone(), text).prop_map(|(col, delim)| Operator::Split { col, delim }),
            idx.clone().prop_map(|start| Operator::Fold { start }),
            idx.clone().prop_map(|key| Operator::Unfold { key }),
            idx.clone().prop_map(|col| Operator::Fill { col }),
            idx.clone().prop_map(|row| Operator::DeleteRow { row }),
            idx.clone().prop_map(|col| Operator::DeleteEmpty { col }),
            (idx.clone(), text).prop_map(|(col, p)| Operator::DeleteMatch {
                col,
                pattern: Pattern::new(p)
            }),
            (idx.clone(), text).prop_map(|(col, p)| Operator::Extract {
                col,
                pattern: Pattern::new(p)
            }),
            (idx.clone(), text).prop_map(|(col, p)| Operator::Divide {
                col,
                pattern: Pattern::new(p)
            }),
            Just(Operator::Transpose),
            idx.prop_map(|k| Operator::Wrap { k }),
        ]
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(ops in prop::collection::vec(arb_operator(), 0..=6)) {
            let p = Program::new(ops);
            let text = print_program(&p);
            prop_assert_eq!(parse_program(&text).unwrap(), p);
        }

        #[test]
        fn printing_is_idempotent(ops in prop::collection::vec(arb_operator(), 0..=6)) {
            let text = print_program(&Program::new(ops));
            let again = print_program(&parse_program(&text).unwrap());
            prop_assert_eq!(again, text);
        }
    }
}
