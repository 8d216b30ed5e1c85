use std::borrow::Cow;
use std::collections::HashSet;

use indexmap::IndexMap;

use super::ast::*;
use super::like::like_match;
use super::parser::projection_names;
use super::value::{resolve_cow, resolve_path, Value, UNDEFINED};

type Env<'q, 'a> = Vec<(&'q str, &'a Value)>;

/// Evaluates `query` over `docs` (the root collection, in scan order).
///
/// Rows are objects for a select list and bare values for `SELECT VALUE`.
pub fn evaluate<'a, I>(query: &Query, docs: I) -> Vec<Value>
where
    I: IntoIterator<Item = &'a Value>,
{
    let mut rows = Vec::new();
    evaluate_into(query, docs, &mut |row| {
        rows.push(row);
        true
    });
    rows
}

/// Like [`evaluate`] but stops after `limit` rows; the flag reports
/// whether more rows were available.
pub fn evaluate_limited<'a, I>(query: &Query, docs: I, limit: usize) -> (Vec<Value>, bool)
where
    I: IntoIterator<Item = &'a Value>,
{
    let mut rows = Vec::new();
    let mut truncated = false;
    evaluate_into(query, docs, &mut |row| {
        if rows.len() == limit {
            truncated = true;
            return false;
        }
        rows.push(row);
        true
    });
    (rows, truncated)
}

/// Streams rows into `sink` until it returns `false`.
pub fn evaluate_into<'q, 'a, I>(query: &'q Query, docs: I, sink: &mut dyn FnMut(Value) -> bool)
where
    I: IntoIterator<Item = &'a Value>,
{
    let names = match &query.projection {
        Projection::Items(items) => projection_names(items),
        Projection::Value(_) => Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut emit = |row: Value| -> bool {
        if query.distinct && !seen.insert(row.canonical_key()) {
            return true;
        }
        sink(row)
    };
    let alias = query.from.alias().name.as_str();
    for doc in docs {
        let mut env: Env<'q, 'a> = vec![(alias, doc)];
        if !bind_joins(query, &names, 0, &mut env, &mut emit) {
            return;
        }
    }
}

/// Sub-environments in join order; returns `false` when the sink is done.
fn bind_joins<'a, 'q>(query: &'q Query, names: &[String], j: usize, env: &mut Env<'q, 'a>, emit: &mut dyn FnMut(Value) -> bool) -> bool {
    if j == query.joins.len() {
        if let Some(pred) = &query.predicate {
            if !truthy(&eval_expr(pred, env)) {
                return true;
            }
        }
        return match project(query, names, env) {
            Some(row) => emit(row),
            None => true,
        };
    }
    let join = &query.joins[j];
    let Some(items) = lookup_path(&join.path, env).as_array() else {
        return true;
    };
    for item in items {
        env.push((join.alias.name.as_str(), item));
        let go_on = bind_joins(query, names, j + 1, env, emit);
        env.pop();
        if !go_on {
            return false;
        }
    }
    true
}

fn project<'q>(query: &'q Query, names: &[String], env: &Env<'q, '_>) -> Option<Value> {
    match &query.projection {
        Projection::Value(e) => {
            let v = eval_expr(e, env);
            (!v.is_undefined()).then(|| v.into_owned())
        }
        Projection::Items(items) => {
            let mut row = IndexMap::with_capacity(items.len());
            for (item, name) in items.iter().zip(names) {
                let v = eval_expr(&item.expr, env);
                if !v.is_undefined() {
                    row.insert(name.clone(), v.into_owned());
                }
            }
            Some(Value::Object(row))
        }
    }
}

fn lookup_path<'a>(path: &Path, env: &Env<'_, 'a>) -> &'a Value {
    let base = env.iter().rev().find(|(name, _)| *name == path.head.name).map(|(_, v)| *v).unwrap_or(&UNDEFINED);
    resolve_path(base, &path.steps)
}

fn truthy(v: &Value) -> bool {
    matches!(v, Value::Bool(true))
}

/// Equality without coercion; anything involving `Undefined` is false.
pub(crate) fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Undefined, _) | (_, Value::Undefined) => false,
        (Value::Null, Value::Null) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Number(x), Value::Number(y)) => x == y,
        (Value::String(x), Value::String(y)) => x == y,
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| values_equal(a, b)),
        (Value::Object(x), Value::Object(y)) => x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| values_equal(v, w))),
        _ => false,
    }
}

fn eval_expr<'q, 'a>(e: &'q Expr, env: &Env<'q, 'a>) -> Cow<'a, Value> {
    match e {
        Expr::Path(p) => Cow::Borrowed(lookup_path(p, env)),
        Expr::Literal(l) => Cow::Owned(match l {
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Number(n) => Value::Number(*n),
            Literal::String(s) => Value::String(s.clone()),
        }),
        Expr::Eq(a, b) => Cow::Owned(Value::Bool(values_equal(&eval_expr(a, env), &eval_expr(b, env)))),
        Expr::Like(a, pattern) => {
            let v = eval_expr(a, env);
            Cow::Owned(Value::Bool(v.as_str().is_some_and(|s| like_match(pattern, s))))
        }
        Expr::And(a, b) => {
            let l = eval_expr(a, env);
            if matches!(*l, Value::Bool(false)) {
                return Cow::Owned(Value::Bool(false));
            }
            let r = eval_expr(b, env);
            Cow::Owned(match (&*l, &*r) {
                (Value::Bool(true), Value::Bool(x)) => Value::Bool(*x),
                (_, Value::Bool(false)) => Value::Bool(false),
                _ => Value::Undefined,
            })
        }
        Expr::Array(sub) => Cow::Owned(Value::Array(eval_subquery(sub, env))),
        Expr::Access(base, steps) => resolve_cow(eval_expr(base, env), steps),
    }
}

fn eval_subquery<'q, 'a>(q: &'q Query, outer: &Env<'q, 'a>) -> Vec<Value> {
    let FromClause::In { alias, path } = &q.from else { unreachable!("validated: subqueries iterate a path") };
    let Some(items) = lookup_path(path, outer).as_array() else {
        return Vec::new();
    };
    let names = match &q.projection {
        Projection::Items(items) => projection_names(items),
        Projection::Value(_) => Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut emit = |row: Value| -> bool {
        if !q.distinct || seen.insert(row.canonical_key()) {
            out.push(row);
        }
        true
    };
    for item in items {
        let mut env = outer.clone();
        env.push((alias.name.as_str(), item));
        bind_joins(q, &names, 0, &mut env, &mut emit);
    }
    out
}
