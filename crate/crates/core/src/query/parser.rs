use super::ast::*;
use super::error::{Pos, QueryError};
use super::lexer::{tokenize, Tok, Token};
use super::value::Step;

/// Parses and semantically checks a query.
pub fn parse_query(src: &str) -> Result<Query, QueryError> {
    let mut p = Parser { toks: tokenize(src)?, at: 0, expected: Vec::new() };
    let q = p.query()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected());
    }
    validate(&q, &[])?;
    Ok(q)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    expected: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        self.expected.clear();
        t
    }

    fn expect_note(&mut self, what: &str) {
        if !self.expected.iter().any(|e| e == what) {
            self.expected.push(what.to_string());
        }
    }

    fn at_kw(&mut self, kw: &str) -> bool {
        if matches!(&self.peek().tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw)) {
            true
        } else {
            self.expect_note(kw);
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.advance();
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek().tok == tok {
            self.advance();
            true
        } else {
            self.expect_note(&tok.describe());
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn unexpected(&self) -> QueryError {
        let found = self.peek();
        let mut expected = self.expected.clone();
        expected.sort();
        let message = match expected.len() {
            0 => format!("unexpected {}", found.tok.describe()),
            1 => format!("expected {}, found {}", expected[0], found.tok.describe()),
            _ => format!("expected one of {}, found {}", expected.join(", "), found.tok.describe()),
        };
        QueryError::syntax(found.pos, message, expected)
    }

    fn at_alias(&mut self) -> bool {
        if matches!(&self.peek().tok, Tok::Word(w) if !is_reserved(w)) {
            true
        } else {
            self.expect_note("identifier");
            false
        }
    }

    fn ident(&mut self) -> Result<Ident, QueryError> {
        if self.at_alias() {
            let t = self.advance();
            let Tok::Word(name) = t.tok else { unreachable!() };
            Ok(Ident { name, pos: t.pos })
        } else {
            Err(self.unexpected())
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        let projection = if self.eat_kw("VALUE") {
            Projection::Value(self.expr()?)
        } else {
            let mut items = Vec::new();
            loop {
                let expr = self.expr()?;
                let alias = if self.eat_kw("AS") || self.at_alias() { Some(self.ident()?) } else { None };
                items.push(SelectItem { expr, alias });
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
            Projection::Items(items)
        };
        self.expect_kw("FROM")?;
        let first = self.ident()?;
        let from = if self.eat_kw("IN") {
            FromClause::In { alias: first, path: self.path()? }
        } else {
            let alias = if self.eat_kw("AS") || self.at_alias() { self.ident()? } else { first.clone() };
            FromClause::Collection { name: first, alias }
        };
        let mut joins = Vec::new();
        while self.eat_kw("JOIN") {
            let alias = self.ident()?;
            self.expect_kw("IN")?;
            joins.push(Join { alias, path: self.path()? });
        }
        let predicate = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        Ok(Query { distinct, projection, from, joins, predicate })
    }

    fn path(&mut self) -> Result<Path, QueryError> {
        let head = self.ident()?;
        let steps = self.steps()?;
        Ok(Path { head, steps })
    }

    fn steps(&mut self) -> Result<Vec<Step>, QueryError> {
        let mut steps = Vec::new();
        loop {
            if self.eat(Tok::Dot) {
                match self.peek().tok.clone() {
                    Tok::Word(w) => {
                        self.advance();
                        steps.push(Step::Field(w));
                    }
                    _ => {
                        self.expect_note("field name");
                        return Err(self.unexpected());
                    }
                }
            } else if self.eat(Tok::LBracket) {
                let t = self.peek().clone();
                match t.tok {
                    Tok::Num(n) if n >= 0.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                        self.advance();
                        steps.push(Step::Index(n as usize));
                    }
                    Tok::Num(_) => {
                        return Err(QueryError::syntax(t.pos, "array index must be a non-negative integer", vec![]));
                    }
                    Tok::Str(s) => {
                        self.advance();
                        steps.push(Step::Field(s));
                    }
                    _ => {
                        self.expect_note("array index");
                        self.expect_note("string literal");
                        return Err(self.unexpected());
                    }
                }
                self.expect(Tok::RBracket)?;
            } else {
                return Ok(steps);
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.comparison()?;
        while self.eat_kw("AND") {
            let right = self.comparison()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn comparison(&mut self) -> Result<Expr, QueryError> {
        let left = self.postfix()?;
        if self.eat(Tok::Eq) {
            let right = self.postfix()?;
            Ok(Expr::Eq(Box::new(left), Box::new(right)))
        } else if self.eat_kw("LIKE") {
            match self.peek().tok.clone() {
                Tok::Str(pattern) => {
                    self.advance();
                    Ok(Expr::Like(Box::new(left), pattern))
                }
                _ => {
                    self.expect_note("string literal");
                    Err(self.unexpected())
                }
            }
        } else {
            Ok(left)
        }
    }

    fn postfix(&mut self) -> Result<Expr, QueryError> {
        let base = self.primary()?;
        let steps = self.steps()?;
        if steps.is_empty() {
            return Ok(base);
        }
        Ok(match base {
            Expr::Path(mut p) => {
                p.steps.extend(steps);
                Expr::Path(p)
            }
            Expr::Access(inner, mut prior) => {
                prior.extend(steps);
                Expr::Access(inner, prior)
            }
            other => Expr::Access(Box::new(other), steps),
        })
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Word(w) if w.eq_ignore_ascii_case("true") => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(true)))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("false") => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(false)))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("null") => {
                self.advance();
                Ok(Expr::Literal(Literal::Null))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("array") => {
                self.advance();
                self.expect(Tok::LParen)?;
                let q = self.query()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Array(Box::new(q)))
            }
            Tok::Word(w) if !is_reserved(w) => {
                self.advance();
                Ok(Expr::Path(Path { head: Ident { name: w.clone(), pos: t.pos }, steps: Vec::new() }))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(*n)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::String(s.clone())))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => {
                for what in ["identifier", "string literal", "number", "`(`", "ARRAY", "true", "false", "null"] {
                    self.expect_note(what);
                }
                Err(self.unexpected())
            }
        }
    }
}

/// Output field names of a select list, in order.
pub fn projection_names(items: &[SelectItem]) -> Vec<String> {
    let mut positional = 0;
    items
        .iter()
        .map(|item| {
            if let Some(a) = &item.alias {
                return a.name.clone();
            }
            let last = match &item.expr {
                Expr::Path(p) => match p.steps.last() {
                    Some(Step::Field(f)) => Some(f.clone()),
                    Some(Step::Index(_)) => None,
                    None => Some(p.head.name.clone()),
                },
                Expr::Access(_, steps) => match steps.last() {
                    Some(Step::Field(f)) => Some(f.clone()),
                    _ => None,
                },
                _ => None,
            };
            last.unwrap_or_else(|| {
                positional += 1;
                format!("${positional}")
            })
        })
        .collect()
}

fn validate(q: &Query, outer: &[&Ident]) -> Result<(), QueryError> {
    let mut scope: Vec<&Ident> = outer.to_vec();
    match &q.from {
        FromClause::Collection { name, alias } => {
            if !outer.is_empty() {
                return Err(QueryError::semantic(name.pos, "a subquery must iterate a path of an enclosing alias (FROM x IN alias.field)"));
            }
            declare(&scope, outer, alias)?;
            scope.push(alias);
        }
        FromClause::In { alias, path } => {
            if outer.is_empty() {
                return Err(QueryError::semantic(alias.pos, "the outermost FROM must name a collection"));
            }
            check_head(&path.head, &scope)?;
            declare(&scope, outer, alias)?;
            scope.push(alias);
        }
    }
    for j in &q.joins {
        check_head(&j.path.head, &scope)?;
        declare(&scope, outer, &j.alias)?;
        scope.push(&j.alias);
    }
    match &q.projection {
        Projection::Value(e) => check_expr(e, &scope)?,
        Projection::Items(items) => {
            for item in items {
                check_expr(&item.expr, &scope)?;
            }
            let names = projection_names(items);
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    let pos = items[i].alias.as_ref().map(|a| a.pos).unwrap_or_else(|| expr_pos(&items[i].expr));
                    return Err(QueryError::semantic(pos, format!("duplicate output field `{n}`; add an alias")));
                }
            }
        }
    }
    if let Some(p) = &q.predicate {
        check_expr(p, &scope)?;
    }
    Ok(())
}

fn declare(scope: &[&Ident], outer: &[&Ident], alias: &Ident) -> Result<(), QueryError> {
    if scope.iter().any(|a| a.name == alias.name) {
        let what = if outer.iter().any(|a| a.name == alias.name) { "shadows an enclosing alias" } else { "is already defined" };
        return Err(QueryError::semantic(alias.pos, format!("alias `{}` {what}", alias.name)));
    }
    Ok(())
}

fn check_head(head: &Ident, scope: &[&Ident]) -> Result<(), QueryError> {
    if scope.iter().any(|a| a.name == head.name) {
        Ok(())
    } else {
        Err(QueryError::semantic(head.pos, format!("unknown alias `{}`", head.name)))
    }
}

fn check_expr(e: &Expr, scope: &[&Ident]) -> Result<(), QueryError> {
    match e {
        Expr::Path(p) => check_head(&p.head, scope),
        Expr::Literal(_) => Ok(()),
        Expr::Eq(a, b) | Expr::And(a, b) => {
            check_expr(a, scope)?;
            check_expr(b, scope)
        }
        Expr::Like(a, _) | Expr::Access(a, _) => check_expr(a, scope),
        Expr::Array(q) => validate(q, scope),
    }
}

fn expr_pos(e: &Expr) -> Pos {
    match e {
        Expr::Path(p) => p.head.pos,
        Expr::Eq(a, _) | Expr::And(a, _) | Expr::Like(a, _) | Expr::Access(a, _) => expr_pos(a),
        _ => Pos::default(),
    }
}
