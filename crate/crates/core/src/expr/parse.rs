//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := NUMBER | IDENT | IDENT '[' expr (',' expr)* ']' | '(' expr ')'
//!           | '-' factor | 'sum' '(' expr comp+ ')'
//! comp     := 'for' IDENT 'in' iterable
//! iterable := 'range' '(' expr (',' expr)? ')' | IDENT
//! relation := expr ('=='|'<='|'>=') expr comp*
//! ```

use std::fmt;

use thiserror::Error;

use super::ast::{Comprehension, Expr, Iterable, QuantifiedRelation, RelOp, Relation};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at byte {}: expected one of [{}], found {}",
            self.offset,
            self.expected.join(", "),
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sum,
    For,
    In,
    Range,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    EqEq,
    Le,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sum => "`sum`".into(),
            Tok::For => "`for`".into(),
            Tok::In => "`in`".into(),
            Tok::Range => "`range`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = if i + 1 < bytes.len() { &bytes[i..i + 2] } else { &bytes[i..i + 1] };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'=' | b'<' | b'>' => {
                let op = match two {
                    b"==" => Tok::EqEq,
                    b"<=" => Tok::Le,
                    b">=" => Tok::Ge,
                    _ => {
                        return Err(ParseError {
                            offset: start,
                            expected: vec!["`==`".into(), "`<=`".into(), "`>=`".into()],
                            found: format!("`{}`", c as char),
                        })
                    }
                };
                i += 2;
                out.push((op, start));
                continue;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    expected: vec!["number".into()],
                    found: format!("`{text}`"),
                })?;
                i = j;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &src[i..j];
                i = j;
                let tok = match word {
                    "sum" => Tok::Sum,
                    "for" => Tok::For,
                    "in" => Tok::In,
                    "range" => Tok::Range,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((tok, start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    expected: vec!["expression".into()],
                    found: format!("`{ch}`"),
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&tok.describe()]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LBracket {
                    self.bump();
                    let mut idx = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        idx.push(self.expr()?);
                    }
                    if *self.peek() != Tok::RBracket {
                        return Err(self.error(&["`,`", "`]`"]));
                    }
                    self.bump();
                    Ok(Expr::Index(name, idx))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Sum => {
                self.bump();
                self.expect(Tok::LParen)?;
                let body = self.expr()?;
                let comps = self.comprehensions()?;
                if comps.is_empty() {
                    return Err(self.error(&["`for`"]));
                }
                self.expect(Tok::RParen)?;
                Ok(Expr::Sum(Box::new(body), comps))
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`", "`sum`"])),
        }
    }

    fn comprehensions(&mut self) -> Result<Vec<Comprehension>, ParseError> {
        let mut comps = Vec::new();
        while *self.peek() == Tok::For {
            self.bump();
            let var = self.ident()?;
            self.expect(Tok::In)?;
            let iterable = match self.peek().clone() {
                Tok::Range => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let first = self.expr()?;
                    let it = if *self.peek() == Tok::Comma {
                        self.bump();
                        let second = self.expr()?;
                        Iterable::Range { start: Some(Box::new(first)), end: Box::new(second) }
                    } else {
                        Iterable::Range { start: None, end: Box::new(first) }
                    };
                    if *self.peek() != Tok::RParen {
                        return Err(self.error(&["`,`", "`)`"]));
                    }
                    self.bump();
                    it
                }
                Tok::Ident(name) => {
                    self.bump();
                    Iterable::Param(name)
                }
                _ => return Err(self.error(&["`range`", "identifier"])),
            };
            comps.push(Comprehension { var, iterable });
        }
        Ok(comps)
    }

    fn relation(&mut self) -> Result<QuantifiedRelation, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::EqEq => RelOp::Eq,
            Tok::Le => RelOp::Le,
            Tok::Ge => RelOp::Ge,
            _ => return Err(self.error(&["`+`", "`-`", "`*`", "`/`", "`==`", "`<=`", "`>=`"])),
        };
        self.bump();
        let rhs = self.expr()?;
        let comprehensions = self.comprehensions()?;
        Ok(QuantifiedRelation { relation: Relation { lhs, op, rhs }, comprehensions })
    }

    fn finish(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }
}

fn non_empty(text: &str) -> Result<(), ParseError> {
    if text.trim().is_empty() {
        Err(ParseError { offset: 0, expected: vec!["expression".into()], found: "end of input".into() })
    } else {
        Ok(())
    }
}

/// Parses an arithmetic expression (objectives, sides of relations).
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    non_empty(text)?;
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a relation with optional trailing comprehension clauses.
pub fn parse_relation(text: &str) -> Result<QuantifiedRelation, ParseError> {
    non_empty(text)?;
    let mut p = Parser::new(text)?;
    let r = p.relation()?;
    p.finish()?;
    Ok(r)
}

/// Parses a decision-variable iteration space such as
/// `for i in range(n) for j in range(m)`.
///
/// LLM output often wraps the clauses in a list comprehension head
/// (`[(i, j) for i in ... ]`); a surrounding bracket pair and any head
/// before the first `for` are ignored.
pub fn parse_iteration_space(text: &str) -> Result<Vec<Comprehension>, ParseError> {
    non_empty(text)?;
    let trimmed = text.trim();
    let (body, base) = match trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        Some(inner) => (inner, text.find('[').unwrap_or(0) + 1),
        None => (trimmed, text.len() - text.trim_start().len()),
    };
    let start = find_for_keyword(body).ok_or_else(|| ParseError {
        offset: base,
        expected: vec!["`for`".into()],
        found: "no comprehension clause".into(),
    })?;
    let clauses = &body[start..];
    let mut p = Parser::new(clauses).map_err(|e| shift(e, base + start))?;
    let comps = p.comprehensions().map_err(|e| shift(e, base + start))?;
    p.finish().map_err(|e| shift(e, base + start))?;
    Ok(comps)
}

fn shift(mut e: ParseError, by: usize) -> ParseError {
    e.offset += by;
    e
}

fn find_for_keyword(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(pos) = text[i..].find("for") {
        let at = i + pos;
        let before_ok = at == 0 || !(bytes[at - 1].is_ascii_alphanumeric() || bytes[at - 1] == b'_');
        let after = at + 3;
        let after_ok = after >= bytes.len() || !(bytes[after].is_ascii_alphanumeric() || bytes[after] == b'_');
        if before_ok && after_ok {
            return Some(at);
        }
        i = at + 3;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: f64) -> Box<Expr> {
        Box::new(Expr::Number(v))
    }
    fn id(s: &str) -> Box<Expr> {
        Box::new(Expr::ident(s))
    }

    #[test]
    fn three_term_sum() {
        let e = parse_expression("2*x + 3*y - 4").unwrap();
        let expected = Expr::Sub(
            Box::new(Expr::Add(Box::new(Expr::Mul(n(2.0), id("x"))), Box::new(Expr::Mul(n(3.0), id("y"))))),
            n(4.0),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn sum_comprehension() {
        let e = parse_expression("sum(c[i]*x[i] for i in range(n))").unwrap();
        let body = Expr::Mul(
            Box::new(Expr::index("c", vec![Expr::ident("i")])),
            Box::new(Expr::index("x", vec![Expr::ident("i")])),
        );
        let comp = Comprehension { var: "i".into(), iterable: Iterable::Range { start: None, end: id("n") } };
        assert_eq!(e, Expr::Sum(Box::new(body), vec![comp]));
    }

    #[test]
    fn quantified_relation() {
        let r = parse_relation("x[i] <= capacity[i] for i in range(2)").unwrap();
        assert_eq!(r.relation.op, RelOp::Le);
        assert_eq!(r.comprehensions.len(), 1);
        assert_eq!(r.comprehensions[0].var, "i");
    }

    #[test]
    fn error_reports_offset_and_expected() {
        let err = parse_expression("2*x + ").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.expected.iter().any(|e| e == "identifier"));

        let err = parse_relation("x < 3").unwrap_err();
        assert_eq!(err.offset, 2);

        let err = parse_expression("x.join()").unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn relation_requires_operator() {
        assert!(parse_relation("x + y").is_err());
        assert!(parse_expression("x <= y").is_err());
    }

    #[test]
    fn iteration_space_forms() {
        let a = parse_iteration_space("for i in range(n) for j in range(1, m)").unwrap();
        assert_eq!(a.len(), 2);
        let b = parse_iteration_space("[(i, j) for i in range(n) for j in range(1, m)]").unwrap();
        assert_eq!(a, b);
        let c = parse_iteration_space("for p in products").unwrap();
        assert_eq!(c[0].iterable, Iterable::Param("products".into()));
        assert!(parse_iteration_space("range(n)").is_err());
        assert!(parse_iteration_space("").is_err());
    }

    #[test]
    fn unparse_round_trip() {
        for src in [
            "2*x + 3*y - 4",
            "-(a + b)*c/d",
            "sum(sum(a[i, j]*x[i, j] for j in range(m)) for i in range(1, n))",
            "1.5e-7*x - -y",
            "(x)",
        ] {
            let e = parse_expression(src).unwrap();
            let again = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src}");
        }
        let r = parse_relation("x[i] + 2 >= y for i in items for k in range(3)").unwrap();
        assert_eq!(parse_relation(&r.to_string()).unwrap(), r);
    }
}
