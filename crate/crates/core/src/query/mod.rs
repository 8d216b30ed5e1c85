//! Document-SQL dialect over the store.
//!
//! Supported surface: `SELECT [DISTINCT] items | VALUE expr FROM papers p
//! [JOIN x IN path]* [WHERE expr]` with `=`, `LIKE`, `AND`, paths,
//! `[n]` indexing and correlated `ARRAY(SELECT ...)` subqueries. Missing
//! fields evaluate to `Undefined`, which compares false and is omitted
//! from projections.

mod ast;
mod error;
mod eval;
mod format;
mod lexer;
mod like;
mod parser;
mod value;


pub use ast::{Expr, FromClause, Ident, Join, Literal, Path, Projection, Query, SelectItem};
pub use error::{ErrorKind, Pos, QueryError};
pub use eval::{evaluate, evaluate_into, evaluate_limited};
pub use format::{columns, render, OutputFormat, VALUE_COLUMN};
pub use like::like_match;
pub use parser::{parse_query, projection_names};
pub use value::{resolve_path, Step, Value};

use crate::store::{Store, StoreError};

/// Loads all live documents of `store` as query values, in scan order.
pub fn documents(store: &Store) -> Result<Vec<Value>, StoreError> {
    store.scan().map(|doc| doc.map(|d| Value::from(d.to_json_value()))).collect()
}

/// Parses `sql` and runs it over the live documents of `store`.
pub fn run(sql: &str, store: &Store) -> Result<Vec<Value>, RunError> {
    let query = parse_query(sql)?;
    let docs = documents(store)?;
    Ok(evaluate(&query, &docs))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Store(#[from] StoreError),
}
