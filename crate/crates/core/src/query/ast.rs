use std::fmt;

use super::error::Pos;
use super::value::Step;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub distinct: bool,
    pub projection: Projection,
    pub from: FromClause,
    pub joins: Vec<Join>,
    pub predicate: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Items(Vec<SelectItem>),
    /// `SELECT VALUE expr`
    Value(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<Ident>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FromClause {
    /// `FROM papers p`: each stored document bound to `alias`.
    Collection { name: Ident, alias: Ident },
    /// `FROM x IN p.entities`: each element of an array bound to `alias`.
    In { alias: Ident, path: Path },
}

impl FromClause {
    pub fn alias(&self) -> &Ident {
        match self {
            FromClause::Collection { alias, .. } | FromClause::In { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub alias: Ident,
    pub path: Path,
}

/// A name with its source position. Equality ignores the position.
#[derive(Debug, Clone, Eq)]
pub struct Ident {
    pub name: String,
    pub pos: Pos,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), pos: Pos::default() }
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

/// `alias.field[0].field`
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub head: Ident,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn new(head: &str, fields: &[&str]) -> Self {
        Self { head: Ident::new(head), steps: fields.iter().map(|f| Step::Field((*f).to_string())).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Number(f64),
    String(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Path(Path),
    Literal(Literal),
    Eq(Box<Expr>, Box<Expr>),
    /// LIKE pattern is always a string literal.
    Like(Box<Expr>, String),
    And(Box<Expr>, Box<Expr>),
    /// `ARRAY(subquery)`
    Array(Box<Query>),
    /// Postfix steps on a non-path expression, e.g. `ARRAY(...)[0]`.
    Access(Box<Expr>, Vec<Step>),
}

impl Expr {
    pub fn path(head: &str, fields: &[&str]) -> Self {
        Expr::Path(Path::new(head, fields))
    }

    pub fn string(s: &str) -> Self {
        Expr::Literal(Literal::String(s.to_string()))
    }

    pub fn eq(a: Expr, b: Expr) -> Self {
        Expr::Eq(Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn like(a: Expr, pattern: &str) -> Self {
        Expr::Like(Box::new(a), pattern.to_string())
    }

    fn is_binary(&self) -> bool {
        matches!(self, Expr::Eq(..) | Expr::Like(..) | Expr::And(..))
    }
}

pub(crate) const RESERVED: &[&str] = &[
    "SELECT",
    "DISTINCT",
    "VALUE",
    "FROM",
    "JOIN",
    "IN",
    "WHERE",
    "AND",
    "OR",
    "NOT",
    "LIKE",
    "AS",
    "ARRAY",
    "TRUE",
    "FALSE",
    "NULL",
    "UNDEFINED",
    "ORDER",
    "GROUP",
    "BY",
    "TOP",
    "LIMIT",
    "OFFSET",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

fn write_steps(f: &mut fmt::Formatter<'_>, steps: &[Step]) -> fmt::Result {
    for step in steps {
        match step {
            Step::Field(name) if is_plain_ident(name) => write!(f, ".{name}")?,
            Step::Field(name) => {
                f.write_str("[")?;
                write_string(f, name)?;
                f.write_str("]")?;
            }
            Step::Index(i) => write!(f, "[{i}]")?,
        }
    }
    Ok(())
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        write_steps(f, &self.steps)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("null"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Number(n) => write!(f, "{n:?}"),
            Literal::String(s) => write_string(f, s),
        }
    }
}

struct Operand<'a>(&'a Expr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_binary() {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Path(p) => write!(f, "{p}"),
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Eq(a, b) => write!(f, "{} = {}", Operand(a), Operand(b)),
            Expr::Like(a, pat) => {
                write!(f, "{} LIKE ", Operand(a))?;
                write_string(f, pat)
            }
            Expr::And(a, b) => {
                // AND is left-associative: only a right-hand AND needs parentheses
                if matches!(**b, Expr::And(..)) {
                    write!(f, "{a} AND ({b})")
                } else {
                    write!(f, "{a} AND {b}")
                }
            }
            Expr::Array(q) => write!(f, "ARRAY({q})"),
            Expr::Access(base, steps) => {
                write!(f, "{}", Operand(base))?;
                write_steps(f, steps)
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        match &self.projection {
            Projection::Value(e) => write!(f, "VALUE {e}")?,
            Projection::Items(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", item.expr)?;
                    if let Some(a) = &item.alias {
                        write!(f, " AS {a}")?;
                    }
                }
            }
        }
        match &self.from {
            FromClause::Collection { name, alias } => write!(f, " FROM {name} {alias}")?,
            FromClause::In { alias, path } => write!(f, " FROM {alias} IN {path}")?,
        }
        for j in &self.joins {
            write!(f, " JOIN {} IN {}", j.alias, j.path)?;
        }
        if let Some(p) = &self.predicate {
            write!(f, " WHERE {p}")?;
        }
        Ok(())
    }
}
