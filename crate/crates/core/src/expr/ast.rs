use std::fmt;

use serde::{Deserialize, Serialize};

/// Expression tree for objective and constraint strings.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ident(String),
    Index(String, Vec<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sum(Box<Expr>, Vec<Comprehension>),
    Paren(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub var: String,
    pub iterable: Iterable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Iterable {
    /// `range(end)` or `range(start, end)`.
    Range { start: Option<Box<Expr>>, end: Box<Expr> },
    /// A list-valued parameter.
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "==",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            RelOp::Eq => (lhs - rhs).abs() <= tol,
            RelOp::Le => lhs <= rhs + tol,
            RelOp::Ge => lhs + tol >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub lhs: Expr,
    pub op: RelOp,
    pub rhs: Expr,
}

/// A relation optionally repeated over trailing comprehension clauses,
/// e.g. `x[i] <= cap[i] for i in range(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantifiedRelation {
    pub relation: Relation,
    pub comprehensions: Vec<Comprehension>,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Number(v)
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn index(name: impl Into<String>, idx: Vec<Expr>) -> Expr {
        Expr::Index(name.into(), idx)
    }

    /// Visits every identifier that is free in this expression, i.e. not bound
    /// by an enclosing `sum(... for v in ...)`. `bound` holds the names bound by
    /// outer scopes.
    pub fn free_identifiers(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Ident(name) => {
                if !bound.iter().any(|b| b == name) {
                    out.push(name.clone());
                }
            }
            Expr::Index(name, idx) => {
                if !bound.iter().any(|b| b == name) {
                    out.push(name.clone());
                }
                for e in idx {
                    e.free_identifiers(bound, out);
                }
            }
            Expr::Neg(e) | Expr::Paren(e) => e.free_identifiers(bound, out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.free_identifiers(bound, out);
                b.free_identifiers(bound, out);
            }
            Expr::Sum(body, comps) => {
                let depth = bound.len();
                for c in comps {
                    c.iterable.free_identifiers(bound, out);
                    bound.push(c.var.clone());
                }
                body.free_identifiers(bound, out);
                bound.truncate(depth);
            }
        }
    }
}

impl Iterable {
    pub fn free_identifiers(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Iterable::Range { start, end } => {
                if let Some(s) = start {
                    s.free_identifiers(bound, out);
                }
                end.free_identifiers(bound, out);
            }
            Iterable::Param(name) => {
                if !bound.iter().any(|b| b == name) {
                    out.push(name.clone());
                }
            }
        }
    }
}

impl QuantifiedRelation {
    pub fn free_identifiers(&self) -> Vec<String> {
        let mut bound = Vec::new();
        let mut out = Vec::new();
        for c in &self.comprehensions {
            c.iterable.free_identifiers(&mut bound, &mut out);
            bound.push(c.var.clone());
        }
        self.relation.lhs.free_identifiers(&mut bound, &mut out);
        self.relation.rhs.free_identifiers(&mut bound, &mut out);
        out
    }
}

fn fmt_number(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        // `{:?}` is the shortest representation that round-trips.
        write!(f, "{:?}", v)
    }
}

// Unparsing keeps the tree shape: explicit Paren nodes are the only
// parentheses emitted, except where precedence forces extra grouping
// (which the parser then records as Paren, so only trees produced by the
// parser are guaranteed to round-trip exactly).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => fmt_number(*v, f),
            Expr::Ident(n) => write!(f, "{n}"),
            Expr::Index(n, idx) => {
                write!(f, "{n}[")?;
                for (k, e) in idx.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
            Expr::Sub(a, b) => write!(f, "{a} - {b}"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Sum(body, comps) => {
                write!(f, "sum({body}")?;
                for c in comps {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            Expr::Paren(e) => write!(f, "({e})"),
        }
    }
}

impl fmt::Display for Comprehension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "for {} in {}", self.var, self.iterable)
    }
}

impl fmt::Display for Iterable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Iterable::Range { start: None, end } => write!(f, "range({end})"),
            Iterable::Range { start: Some(s), end } => write!(f, "range({s}, {end})"),
            Iterable::Param(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

impl fmt::Display for QuantifiedRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.relation)?;
        for c in &self.comprehensions {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}
