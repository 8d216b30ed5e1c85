use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} error at {pos}: {message}", match .kind { ErrorKind::Syntax => "syntax", ErrorKind::Semantic => "semantic" })]
pub struct QueryError {
    pub kind: ErrorKind,
    pub pos: Pos,
    pub message: String,
    /// What the parser would have accepted at `pos` (syntax errors only).
    pub expected: Vec<String>,
}

impl QueryError {
    pub fn syntax(pos: Pos, message: impl Into<String>, expected: Vec<String>) -> Self {
        Self { kind: ErrorKind::Syntax, pos, message: message.into(), expected }
    }

    pub fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Semantic, pos, message: message.into(), expected: Vec::new() }
    }

    /// Multi-line diagnostic: the message, the offending source line and a
    /// caret under the error column.
    pub fn render(&self, source: &str) -> String {
        let mut out = format!("{self}\n");
        if let Some(line) = source.lines().nth(self.pos.line.saturating_sub(1)) {
            out.push_str(&format!("  {line}\n"));
            let pad: String = line.chars().take(self.pos.column.saturating_sub(1)).map(|c| if c == '\t' { '\t' } else { ' ' }).collect();
            out.push_str(&format!("  {pad}^\n"));
        }
        out
    }
}
