//! Text form of predicates.
//!
//! ```text
//! predicate := "NOT" "(" body ")" | body ;
//! body      := conj { "OR" conj } ;
//! conj      := clause { "&" clause } ;
//! clause    := ["("] atom [")"] ;
//! atom      := name "=" literal | name "in" "[" literal {"," literal} "]"
//!            | number relop name relop number | name relop number | number relop name ;
//! relop     := "<" | "<=" | ">" | ">=" ;
//! ```
//!
//! Strings are single-quoted. A quoted ISO-8601 timestamp in a bound
//! position is read as epoch seconds. Feature names that are not plain
//! identifiers are double-quoted. Keywords are case-insensitive.

use crate::dataset::parse_datetime;
use crate::error::{Error, Result};
use crate::predicate::{Clause, Conjunction, Interval, Predicate};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Amp,
    Eq,
    Rel(Rel),
    Not,
    Or,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    fn is_less(self) -> bool {
        matches!(self, Rel::Lt | Rel::Le)
    }

    fn inclusive(self) -> bool {
        matches!(self, Rel::Le | Rel::Ge)
    }
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let next = bytes.get(i + 1).copied();
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b'[' => out.push((start, Tok::LBracket)),
            b']' => out.push((start, Tok::RBracket)),
            b',' => out.push((start, Tok::Comma)),
            b'&' if next == Some(b'&') => return Err(syntax(start, "unknown operator `&&`")),
            b'&' => out.push((start, Tok::Amp)),
            b'=' if next == Some(b'=') => return Err(syntax(start, "unknown operator `==`")),
            b'=' => out.push((start, Tok::Eq)),
            b'<' | b'>' => {
                let inclusive = next == Some(b'=');
                let rel = match (c, inclusive) {
                    (b'<', false) => Rel::Lt,
                    (b'<', true) => Rel::Le,
                    (_, false) => Rel::Gt,
                    (_, true) => Rel::Ge,
                };
                if c == b'<' && next == Some(b'>') {
                    return Err(syntax(start, "unknown operator `<>`"));
                }
                out.push((start, Tok::Rel(rel)));
                i += 1 + usize::from(inclusive);
                continue;
            }
            b'\'' | b'"' => {
                let (s, end) = quoted(text, i)?;
                out.push((start, if c == b'\'' { Tok::Str(s) } else { Tok::Name(s) }));
                i = end;
                continue;
            }
            b'-' | b'+' | b'.' | b'0'..=b'9' => {
                let end = number_end(bytes, i);
                let lexeme = &text[i..end];
                let value = if end == i + 1 && !c.is_ascii_digit() {
                    None
                } else {
                    lexeme.parse::<f64>().ok()
                };
                match value {
                    Some(v) => out.push((start, Tok::Num(v))),
                    None if text[i..].starts_with("-inf") => {
                        out.push((start, Tok::Num(f64::NEG_INFINITY)));
                        i += 4;
                        continue;
                    }
                    None => return Err(syntax(start, format!("unknown operator `{}`", &text[i..=i]))),
                }
                i = end;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = i + 1;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || matches!(bytes[end], b'_' | b'-' | b'.'))
                {
                    end += 1;
                }
                let word = &text[i..end];
                let tok = if word.eq_ignore_ascii_case("not") {
                    Tok::Not
                } else if word.eq_ignore_ascii_case("or") {
                    Tok::Or
                } else if word.eq_ignore_ascii_case("in") {
                    Tok::In
                } else {
                    Tok::Name(word.to_string())
                };
                out.push((start, tok));
                i = end;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                let op: String = text[i..]
                    .chars()
                    .take_while(|c| "!|^~=<>".contains(*c) || *c == ch)
                    .take(2)
                    .collect();
                return Err(syntax(start, format!("unknown operator `{op}`")));
            }
        }
        i += 1;
    }
    Ok(out)
}

fn number_end(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    if matches!(bytes[i], b'-' | b'+') {
        i += 1;
    }
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if j < bytes.len() && matches!(bytes[j], b'-' | b'+') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

/// Quoted string starting at `start`; returns the unescaped content and the
/// index just past the closing quote.
fn quoted(text: &str, start: usize) -> Result<(String, usize)> {
    let quote = text.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = text[start + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, e)) => out.push(e),
                None => break,
            },
            c if c == quote => return Ok((out, start + 1 + off + 1)),
            c => out.push(c),
        }
    }
    Err(syntax(start, "unterminated quoted string"))
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let at = self.offset();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(syntax(at, format!("expected {what}, found {}", describe(&t)))),
            None => Err(syntax(at, format!("expected {what}, found end of input"))),
        }
    }

    fn predicate(&mut self) -> Result<Predicate> {
        if self.peek().is_none() {
            return Err(syntax(0, "empty predicate"));
        }
        let negated = if self.peek() == Some(&Tok::Not) {
            self.next();
            self.expect(Tok::LParen, "`(` after NOT")?;
            true
        } else {
            false
        };
        let terms = self.body()?;
        if negated {
            self.expect(Tok::RParen, "`)` closing NOT")?;
        }
        if let Some(t) = self.peek().cloned() {
            return Err(syntax(self.offset(), format!("unexpected {}", describe(&t))));
        }
        Predicate::new(terms, negated)
    }

    fn body(&mut self) -> Result<Vec<Conjunction>> {
        let mut terms = vec![self.conj()?];
        while self.peek() == Some(&Tok::Or) {
            self.next();
            terms.push(self.conj()?);
        }
        Ok(terms)
    }

    fn conj(&mut self) -> Result<Conjunction> {
        let at = self.offset();
        let mut clauses = vec![self.clause()?];
        while self.peek() == Some(&Tok::Amp) {
            self.next();
            clauses.push(self.clause()?);
        }
        Conjunction::new(clauses).map_err(|e| syntax(at, e.to_string()))
    }

    fn clause(&mut self) -> Result<Clause> {
        let paren = self.peek() == Some(&Tok::LParen);
        if paren {
            self.next();
        }
        let clause = self.atom()?;
        if paren {
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(clause)
    }

    fn atom(&mut self) -> Result<Clause> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Not) => Err(syntax(at, "NOT is only allowed around the whole predicate")),
            Some(Tok::Name(name)) => {
                let op_at = self.offset();
                match self.next() {
                    Some(Tok::Eq) => self.equality(name),
                    Some(Tok::In) => self.membership(name),
                    Some(Tok::Rel(rel)) => {
                        let (v, temporal) = self.bound()?;
                        let iv = if rel.is_less() {
                            Interval::new(f64::NEG_INFINITY, v, false, rel.inclusive())
                        } else {
                            Interval::new(v, f64::INFINITY, rel.inclusive(), false)
                        };
                        Ok(Clause::range(name, interval(iv, temporal, op_at)?))
                    }
                    Some(t) => Err(syntax(
                        op_at,
                        format!("expected `=`, `in` or a comparison, found {}", describe(&t)),
                    )),
                    None => Err(syntax(op_at, "expected an operator after the feature name")),
                }
            }
            Some(Tok::Num(_)) | Some(Tok::Str(_)) => {
                self.pos -= 1;
                let (lo, lo_temporal) = self.bound()?;
                let rel1 = self.relop()?;
                let name = self.name()?;
                match self.peek() {
                    Some(Tok::Rel(_)) => {
                        let rel_at = self.offset();
                        let rel2 = self.relop()?;
                        let (hi, hi_temporal) = self.bound()?;
                        if rel1.is_less() != rel2.is_less() {
                            return Err(syntax(rel_at, "comparison directions do not agree"));
                        }
                        let iv = if rel1.is_less() {
                            Interval::new(lo, hi, rel1.inclusive(), rel2.inclusive())
                        } else {
                            Interval::new(hi, lo, rel2.inclusive(), rel1.inclusive())
                        };
                        Ok(Clause::range(name, interval(iv, lo_temporal || hi_temporal, at)?))
                    }
                    _ => {
                        // `v < x` reads as `x > v`
                        let iv = if rel1.is_less() {
                            Interval::new(lo, f64::INFINITY, rel1.inclusive(), false)
                        } else {
                            Interval::new(f64::NEG_INFINITY, lo, false, rel1.inclusive())
                        };
                        Ok(Clause::range(name, interval(iv, lo_temporal, at)?))
                    }
                }
            }
            Some(t) => Err(syntax(at, format!("expected a clause, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a clause, found end of input")),
        }
    }

    fn equality(&mut self, name: String) -> Result<Clause> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Str(s)) => Ok(Clause::equals(name, s)),
            Some(Tok::Num(v)) if v.is_finite() => Ok(Clause::range(name, Interval::point(v))),
            Some(t) => Err(syntax(at, format!("expected a literal, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a literal, found end of input")),
        }
    }

    fn membership(&mut self, name: String) -> Result<Clause> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut values = vec![self.literal()?];
        while self.peek() == Some(&Tok::Comma) {
            self.next();
            values.push(self.literal()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        Clause::member_of(name, values)
    }

    fn literal(&mut self) -> Result<String> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Str(s)) => Ok(s),
            Some(Tok::Num(v)) => Ok(crate::predicate::format_number(v)),
            Some(t) => Err(syntax(at, format!("expected a literal, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a literal, found end of input")),
        }
    }

    fn name(&mut self) -> Result<String> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Name(n)) => Ok(n),
            Some(t) => Err(syntax(at, format!("expected a feature name, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a feature name, found end of input")),
        }
    }

    fn relop(&mut self) -> Result<Rel> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Rel(r)) => Ok(r),
            Some(t) => Err(syntax(at, format!("expected a comparison, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a comparison, found end of input")),
        }
    }

    /// A numeric bound; quoted timestamps become epoch seconds.
    fn bound(&mut self) -> Result<(f64, bool)> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Num(v)) => Ok((v, false)),
            Some(Tok::Name(n)) if n.eq_ignore_ascii_case("inf") => Ok((f64::INFINITY, false)),
            Some(Tok::Str(s)) => parse_datetime(&s)
                .map(|secs| (secs as f64, true))
                .ok_or_else(|| syntax(at, format!("`{s}` is not a number or ISO-8601 timestamp"))),
            Some(t) => Err(syntax(at, format!("expected a number, found {}", describe(&t)))),
            None => Err(syntax(at, "expected a number, found end of input")),
        }
    }
}

fn interval(iv: Result<Interval>, temporal: bool, at: usize) -> Result<Interval> {
    iv.map(|i| i.with_temporal(temporal))
        .map_err(|e| syntax(at, e.to_string()))
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("name `{n}`"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::Num(v) => format!("number {v}"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Rel(_) => "comparison".into(),
        Tok::Not => "NOT".into(),
        Tok::Or => "OR".into(),
        Tok::In => "`in`".into(),
    }
}

pub fn parse(text: &str) -> Result<Predicate> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    p.predicate()
}
