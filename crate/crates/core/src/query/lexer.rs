use super::error::{Pos, QueryError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Bare word; keywords are recognised by the parser, case-insensitively.
    Word(String),
    Str(String),
    Num(f64),
    Dot,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eq,
    Star,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Num(_) => "number".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Char offset of the token start.
    pub offset: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let pos = Pos { line, column: col };
        let start = i;
        let tok = match c {
            '.' if !chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                bump!();
                Tok::Dot
            }
            ',' => {
                bump!();
                Tok::Comma
            }
            '(' => {
                bump!();
                Tok::LParen
            }
            ')' => {
                bump!();
                Tok::RParen
            }
            '[' => {
                bump!();
                Tok::LBracket
            }
            ']' => {
                bump!();
                Tok::RBracket
            }
            '=' => {
                bump!();
                Tok::Eq
            }
            '*' => {
                bump!();
                Tok::Star
            }
            '\'' | '"' => {
                let quote = c;
                bump!();
                let mut s = String::new();
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(QueryError::syntax(pos, "unterminated string literal", vec![]));
                    };
                    if ch == quote {
                        bump!();
                        if chars.get(i) == Some(&quote) {
                            s.push(quote);
                            bump!();
                            continue;
                        }
                        break;
                    }
                    if ch == '\\' {
                        let esc_pos = Pos { line, column: col };
                        bump!();
                        let Some(&e) = chars.get(i) else {
                            return Err(QueryError::syntax(pos, "unterminated string literal", vec![]));
                        };
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '\\' | '\'' | '"' | '/' => e,
                            other => {
                                return Err(QueryError::syntax(esc_pos, format!("unknown escape `\\{other}`"), vec![]));
                            }
                        });
                        bump!();
                        continue;
                    }
                    s.push(ch);
                    bump!();
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || c == '.' || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) => {
                let mut text = String::new();
                if c == '-' {
                    text.push('-');
                    bump!();
                }
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    text.push(chars[i]);
                    bump!();
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let save = (i, line, col, text.len());
                    text.push('e');
                    bump!();
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        text.push(chars[i]);
                        bump!();
                    }
                    let digits_start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        text.push(chars[i]);
                        bump!();
                    }
                    if i == digits_start {
                        (i, line, col) = (save.0, save.1, save.2);
                        text.truncate(save.3);
                    }
                }
                match text.parse::<f64>() {
                    Ok(n) if n.is_finite() => Tok::Num(n),
                    _ => return Err(QueryError::syntax(pos, format!("malformed number `{text}`"), vec![])),
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut w = String::new();
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    w.push(chars[i]);
                    bump!();
                }
                Tok::Word(w)
            }
            other => return Err(QueryError::syntax(pos, format!("unexpected character `{other}`"), vec![])),
        };
        out.push(Token { tok, pos, offset: start });
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, column: col }, offset: chars.len() });
    Ok(out)
}
