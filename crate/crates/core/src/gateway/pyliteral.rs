//! Python literal syntax as it appears in model responses: dicts, lists,
//! tuples, strings, numbers, `None`/`True`/`False`, and dotted names such as
//! `GRB.INTEGER`. `#` comments in front of (or trailing) a dict entry are
//! kept on that entry.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum PyValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    /// A bare, possibly dotted, identifier.
    Name(String),
    List(Vec<PyValue>),
    Tuple(Vec<PyValue>),
    Dict(Vec<DictEntry>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub key: PyValue,
    pub value: PyValue,
    pub comment: Option<String>,
}

impl DictEntry {
    pub fn new(key: PyValue, value: PyValue) -> Self {
        DictEntry { key, value, comment: None }
    }

    pub fn commented(key: PyValue, value: PyValue, comment: impl Into<String>) -> Self {
        let c: String = comment.into();
        DictEntry { key, value, comment: (!c.is_empty()).then_some(c) }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("at byte {offset}: {message}")]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
}

impl PyValue {
    pub fn str(s: impl Into<String>) -> PyValue {
        PyValue::Str(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            PyValue::Int(i) => Some(*i as f64),
            PyValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PyValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&[DictEntry]> {
        match self {
            PyValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    /// Looks up a string key.
    pub fn get(&self, key: &str) -> Option<&PyValue> {
        self.as_dict()?.iter().find(|e| e.key.as_str() == Some(key)).map(|e| &e.value)
    }

    /// Whether this is the `{None: None}` sentinel.
    pub fn is_none_sentinel(&self) -> bool {
        matches!(self.as_dict(), Some([DictEntry { key: PyValue::None, value: PyValue::None, .. }]))
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, LiteralError> {
        Err(LiteralError { offset: self.pos, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and comments, returning the comment text seen.
    fn skip_trivia(&mut self) -> Vec<String> {
        let mut comments = Vec::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                comments.push(self.line_comment());
            } else {
                break;
            }
        }
        comments
    }

    fn line_comment(&mut self) -> String {
        let rest = &self.src[self.pos..];
        let end = rest.find('\n').unwrap_or(rest.len());
        let text = rest[1..end].trim().to_string();
        self.pos += end;
        text
    }

    /// A comment on the same line, after optional spaces.
    fn trailing_comment(&mut self) -> Option<String> {
        let save = self.pos;
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.bump();
        }
        if self.peek() == Some('#') {
            Some(self.line_comment())
        } else {
            self.pos = save;
            None
        }
    }

    fn expect(&mut self, c: char) -> Result<(), LiteralError> {
        self.skip_trivia();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn value(&mut self) -> Result<PyValue, LiteralError> {
        self.skip_trivia();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some('{') => self.dict(),
            Some('[') => {
                self.bump();
                Ok(PyValue::List(self.sequence(']')?.0))
            }
            Some('(') => {
                self.bump();
                let (items, trailing_comma) = self.sequence(')')?;
                // `(x)` is just a parenthesized value; `(x,)` is a tuple.
                if items.len() == 1 && !trailing_comma {
                    Ok(items.into_iter().next().expect("one item"))
                } else {
                    Ok(PyValue::Tuple(items))
                }
            }
            Some('"' | '\'') => self.string(),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let name = self.name();
                // String prefixes such as r"..." are accepted.
                if matches!(name.as_str(), "r" | "R" | "u" | "U") && matches!(self.peek(), Some('"' | '\'')) {
                    return self.string();
                }
                Ok(match name.as_str() {
                    "None" => PyValue::None,
                    "True" => PyValue::Bool(true),
                    "False" => PyValue::Bool(false),
                    _ => PyValue::Name(name),
                })
            }
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '.' {
                self.bump();
            } else {
                break;
            }
        }
        self.src[start..self.pos].to_string()
    }

    fn sequence(&mut self, close: char) -> Result<(Vec<PyValue>, bool), LiteralError> {
        let mut items = Vec::new();
        let mut trailing_comma = false;
        loop {
            self.skip_trivia();
            if self.peek() == Some(close) {
                self.bump();
                return Ok((items, trailing_comma));
            }
            items.push(self.value()?);
            self.skip_trivia();
            match self.peek() {
                Some(',') => {
                    self.bump();
                    trailing_comma = true;
                }
                Some(c) if c == close => {
                    self.bump();
                    return Ok((items, false));
                }
                _ => return self.err(format!("expected `,` or `{close}`")),
            }
        }
    }

    fn dict(&mut self) -> Result<PyValue, LiteralError> {
        self.bump();
        let mut entries = Vec::new();
        loop {
            let mut comments = self.skip_trivia();
            if self.peek() == Some('}') {
                self.bump();
                return Ok(PyValue::Dict(entries));
            }
            let key = self.value()?;
            self.expect(':')?;
            let value = self.value()?;
            self.skip_trivia_same_line();
            let mut done = false;
            match self.peek() {
                Some(',') => {
                    self.bump();
                }
                Some('}') => done = true,
                _ => {
                    // A comment may sit between the value and the comma.
                    comments.extend(self.skip_trivia());
                    match self.peek() {
                        Some(',') => {
                            self.bump();
                        }
                        Some('}') => done = true,
                        _ => return self.err("expected `,` or `}`"),
                    }
                }
            }
            if let Some(c) = self.trailing_comment() {
                comments.push(c);
            }
            let comment = (!comments.is_empty()).then(|| comments.join(" "));
            entries.push(DictEntry { key, value, comment });
            if done {
                self.bump();
                return Ok(PyValue::Dict(entries));
            }
        }
    }

    fn skip_trivia_same_line(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.bump();
        }
    }

    fn string(&mut self) -> Result<PyValue, LiteralError> {
        let mut out = String::new();
        // Adjacent literals concatenate, as in Python.
        loop {
            out.push_str(&self.one_string()?);
            let save = self.pos;
            self.skip_trivia();
            if !matches!(self.peek(), Some('"' | '\'')) {
                self.pos = save;
                return Ok(PyValue::Str(out));
            }
        }
    }

    fn one_string(&mut self) -> Result<String, LiteralError> {
        let quote = self.bump().expect("caller saw a quote");
        let triple = self.src[self.pos..].starts_with(&format!("{quote}{quote}"));
        if triple {
            self.pos += 2;
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else { return self.err("unterminated string") };
            if c == quote {
                if !triple {
                    return Ok(out);
                }
                if self.src[self.pos..].starts_with(&format!("{quote}{quote}")) {
                    self.pos += 2;
                    return Ok(out);
                }
                out.push(c);
            } else if c == '\\' {
                match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('\n') => {}
                    Some(e @ ('\\' | '\'' | '"')) => out.push(e),
                    Some(e) => {
                        out.push('\\');
                        out.push(e);
                    }
                    None => return self.err("unterminated string"),
                }
            } else if c == '\n' && !triple {
                return self.err("newline in string");
            } else {
                out.push(c);
            }
        }
    }

    fn number(&mut self) -> Result<PyValue, LiteralError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.bump();
            self.skip_trivia_same_line();
            // Negated constants such as `-GRB.INFINITY`.
            if self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
                let sign = &self.src[start..start + 1];
                let sign = if sign == "-" { "-" } else { "" };
                return Ok(PyValue::Name(format!("{sign}{}", self.name())));
            }
        }
        let digits_start = self.pos;
        let mut float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => {}
                '.' => float = true,
                'e' | 'E' => {
                    float = true;
                    self.bump();
                    if matches!(self.peek(), Some('-' | '+')) {
                        self.bump();
                    }
                    continue;
                }
                _ => break,
            }
            self.bump();
        }
        let sign = if self.src[start..digits_start].starts_with('-') { "-" } else { "" };
        let text: String = self.src[digits_start..self.pos].chars().filter(|&c| c != '_').collect();
        if text.is_empty() || text == "." {
            self.pos = start;
            return self.err("malformed number");
        }
        let text = format!("{sign}{text}");
        if !float {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(PyValue::Int(i));
            }
        }
        match text.parse::<f64>() {
            Ok(f) => Ok(PyValue::Float(f)),
            Err(_) => {
                self.pos = start;
                self.err("malformed number")
            }
        }
    }
}

/// Parses one literal at the start of `text` (after trivia). Returns the
/// value and the byte offset just past it.
pub fn parse_literal_prefix(text: &str) -> Result<(PyValue, usize), LiteralError> {
    let mut p = Parser { src: text, pos: 0 };
    let v = p.value()?;
    Ok((v, p.pos))
}

/// Parses `text` as exactly one literal.
pub fn parse_literal(text: &str) -> Result<PyValue, LiteralError> {
    let mut p = Parser { src: text, pos: 0 };
    let v = p.value()?;
    p.skip_trivia();
    if p.pos != text.len() {
        return p.err("trailing input");
    }
    Ok(v)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Finds every `lhs = <literal>` in `text`, where `lhs` is one of `targets`
/// written out exactly, and returns the parsed literals in text order.
/// Occurrences whose literal fails to parse are skipped.
pub fn assignments(text: &str, targets: &[String]) -> Vec<(usize, PyValue)> {
    let mut found = Vec::new();
    for target in targets {
        let mut from = 0;
        while let Some(rel) = text[from..].find(target.as_str()) {
            let at = from + rel;
            from = at + target.len();
            let before_ok = text[..at].chars().next_back().is_none_or(|c| !is_ident_char(c));
            let rest = &text[from..];
            let trimmed = rest.trim_start_matches([' ', '\t']);
            if !before_ok || !trimmed.starts_with('=') || trimmed.starts_with("==") {
                continue;
            }
            if let Ok((value, _)) = parse_literal_prefix(&trimmed[1..]) {
                found.push((at, value));
            }
        }
    }
    found.sort_by_key(|(at, _)| *at);
    found
}

/// The last `name = <literal>` in `text`.
pub fn last_assignment(text: &str, targets: &[String]) -> Option<PyValue> {
    assignments(text, targets).pop().map(|(_, v)| v)
}

// ---------------------------------------------------------------------------
// Writing

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_float(out: &mut String, f: f64) {
    if f.fract() == 0.0 && f.abs() < 1e15 {
        let _ = write!(out, "{}", f as i64);
    } else {
        let _ = write!(out, "{f:?}");
    }
}

/// Single-line rendering.
pub fn to_python(v: &PyValue) -> String {
    let mut out = String::new();
    write_inline(&mut out, v);
    out
}

fn write_inline(out: &mut String, v: &PyValue) {
    match v {
        PyValue::None => out.push_str("None"),
        PyValue::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        PyValue::Int(i) => {
            let _ = write!(out, "{i}");
        }
        PyValue::Float(f) => write_float(out, *f),
        PyValue::Str(s) => write_str(out, s),
        PyValue::Name(n) => out.push_str(n),
        PyValue::List(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_inline(out, item);
            }
            out.push(']');
        }
        PyValue::Tuple(items) => {
            out.push('(');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_inline(out, item);
            }
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        PyValue::Dict(entries) => {
            out.push('{');
            for (k, e) in entries.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_inline(out, &e.key);
                out.push_str(": ");
                write_inline(out, &e.value);
            }
            out.push('}');
        }
    }
}

/// Multi-line rendering: dicts nested up to `depth` levels break one entry
/// per line, with comments on their own line above the entry; anything
/// deeper stays inline.
pub fn to_python_pretty(v: &PyValue, depth: usize) -> String {
    let mut out = String::new();
    write_pretty(&mut out, v, depth, 0);
    out
}

fn write_pretty(out: &mut String, v: &PyValue, depth: usize, indent: usize) {
    let PyValue::Dict(entries) = v else {
        write_inline(out, v);
        return;
    };
    if depth == 0 || entries.is_empty() {
        write_inline(out, v);
        return;
    }
    let pad = "    ".repeat(indent + 1);
    out.push_str("{\n");
    for e in entries {
        if let Some(c) = &e.comment {
            let _ = writeln!(out, "{pad}# {c}");
        }
        out.push_str(&pad);
        write_inline(out, &e.key);
        out.push_str(": ");
        write_pretty(out, &e.value, depth - 1, indent + 1);
        out.push_str(",\n");
    }
    out.push_str(&"    ".repeat(indent));
    out.push('}');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_and_containers() {
        assert_eq!(parse_literal("None").unwrap(), PyValue::None);
        assert_eq!(parse_literal("-3").unwrap(), PyValue::Int(-3));
        assert_eq!(parse_literal("1_000").unwrap(), PyValue::Int(1000));
        assert_eq!(parse_literal("2.5e1").unwrap(), PyValue::Float(25.0));
        assert_eq!(parse_literal("GRB.INTEGER").unwrap(), PyValue::Name("GRB.INTEGER".into()));
        assert_eq!(parse_literal("'a' \"b\"").unwrap(), PyValue::str("ab"));
        assert_eq!(parse_literal("(1, 2)").unwrap(), PyValue::Tuple(vec![PyValue::Int(1), PyValue::Int(2)]));
        assert_eq!(parse_literal("(1)").unwrap(), PyValue::Int(1));
        assert_eq!(parse_literal("[1, [2.0,],]").unwrap(), PyValue::List(vec![PyValue::Int(1), PyValue::List(vec![PyValue::Float(2.0)])]));
        assert_eq!(parse_literal(r#""x[i] <= \"cap\"""#).unwrap(), PyValue::str("x[i] <= \"cap\""));
    }

    #[test]
    fn dict_comments_attach_to_entries() {
        let text = r#"{
            # Units of raw material per product
            "usage": [2, 3],  # per unit
            "cap": 10
            # last
            , (0, 1): 4,
        }"#;
        let v = parse_literal(text).unwrap();
        let d = v.as_dict().unwrap();
        assert_eq!(d[0].comment.as_deref(), Some("Units of raw material per product per unit"));
        assert_eq!(d[1].comment.as_deref(), Some("last"));
        assert_eq!(d[2].key, PyValue::Tuple(vec![PyValue::Int(0), PyValue::Int(1)]));
        assert_eq!(d[2].comment, None);
    }

    #[test]
    fn sentinel() {
        assert!(parse_literal("{None: None}").unwrap().is_none_sentinel());
        assert!(!parse_literal("{}").unwrap().is_none_sentinel());
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse_literal("{'a': }").unwrap_err();
        assert_eq!(e.offset, 6);
        assert!(parse_literal("[1, 2").is_err());
        assert!(parse_literal("'abc").is_err());
    }

    #[test]
    fn last_assignment_wins() {
        let text = r#"First I restate: formalization_dict["objective"] = {"max": "x"}
        Actually the better one is
        ```python
        formalization_dict["objective"] = {
            # profit
            "max": "3*x + 2*y"
        }
        ```
        and formalization_dict["objective"] == {"bad": 1} is not an assignment."#;
        let targets = vec![r#"formalization_dict["objective"]"#.to_string()];
        let v = last_assignment(text, &targets).unwrap();
        assert_eq!(v.get("max"), Some(&PyValue::str("3*x + 2*y")));
        let rank = "rank = {1: solution_2, 2: 'solution_1'}";
        let v = last_assignment(rank, &["rank".to_string()]).unwrap();
        assert_eq!(v.as_dict().unwrap()[0].value, PyValue::Name("solution_2".into()));
        assert!(last_assignment("frank = {1: 2}", &["rank".to_string()]).is_none());
    }

    #[test]
    fn pretty_round_trip() {
        let v = PyValue::Dict(vec![
            DictEntry::commented(PyValue::str("cost"), PyValue::List(vec![PyValue::Float(1.5), PyValue::Int(2)]), "unit cost"),
            DictEntry::new(PyValue::None, PyValue::None),
            DictEntry::new(PyValue::Tuple(vec![PyValue::Int(0)]), PyValue::Dict(vec![DictEntry::new(PyValue::str("a"), PyValue::Bool(true))])),
        ]);
        for depth in 0..3 {
            let text = to_python_pretty(&v, depth);
            let back = parse_literal(&text).unwrap();
            if depth > 0 {
                assert_eq!(back, v, "{text}");
            }
        }
        assert_eq!(to_python(&v), r#"{"cost": [1.5, 2], None: None, (0,): {"a": True}}"#);
    }
}
