//! Tokenizer shared by all textual formats.
//!
//! Whitespace-insensitive; `#` starts a comment running to end of line.
//! Identifiers may contain letters, digits, `_`, `'` and `□`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    DotDot,
    Colon,
    Arrow,     // ->
    Implies,   // =>
    AndOp,     // /\
    OrOp,      // \/
    Tilde,     // ~
    Eq,        // =
    Ne,        // !=
    Le,        // <=
    Lt,        // <
    Ge,        // >=
    Gt,        // >
    Plus,
    Minus,
    Star,
    Slash,
    Bang, // !
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "{s}"),
            Token::Int(v) => write!(f, "{v}"),
            Token::Str(s) => write!(f, "{s:?}"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
            Token::Comma => write!(f, ","),
            Token::Dot => write!(f, "."),
            Token::DotDot => write!(f, ".."),
            Token::Colon => write!(f, ":"),
            Token::Arrow => write!(f, "->"),
            Token::Implies => write!(f, "=>"),
            Token::AndOp => write!(f, "/\\"),
            Token::OrOp => write!(f, "\\/"),
            Token::Tilde => write!(f, "~"),
            Token::Eq => write!(f, "="),
            Token::Ne => write!(f, "!="),
            Token::Le => write!(f, "<="),
            Token::Lt => write!(f, "<"),
            Token::Ge => write!(f, ">="),
            Token::Gt => write!(f, ">"),
            Token::Plus => write!(f, "+"),
            Token::Minus => write!(f, "-"),
            Token::Star => write!(f, "*"),
            Token::Slash => write!(f, "/"),
            Token::Bang => write!(f, "!"),
        }
    }
}

/// A token with its source position (1-based line and column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '□'
}

pub fn tokenize(input: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned {
                token: $tok,
                line,
                col,
            });
            col += $len;
        }};
    }
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '"' => {
                let start_col = col;
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            col += 1;
                            match chars.next() {
                                Some('"') => {
                                    s.push('"');
                                    col += 1;
                                }
                                Some('\\') => {
                                    s.push('\\');
                                    col += 1;
                                }
                                Some('n') => {
                                    s.push('\n');
                                    col += 1;
                                }
                                other => {
                                    return Err(ParseError::new(
                                        line,
                                        col,
                                        format!("bad escape {other:?}"),
                                    ))
                                }
                            }
                        }
                        Some('\n') | None => {
                            return Err(ParseError::new(
                                line,
                                start_col,
                                "unterminated string",
                            ))
                        }
                        Some(c) => {
                            s.push(c);
                            col += 1;
                        }
                    }
                }
                out.push(Spanned {
                    token: Token::Str(s),
                    line,
                    col: start_col,
                });
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let value: i64 = s
                    .parse()
                    .map_err(|_| ParseError::new(line, col, "integer literal too large"))?;
                push!(Token::Int(value), s.len());
            }
            c if is_ident_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if is_ident_char(c) {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = s.chars().count();
                push!(Token::Ident(s), len);
            }
            _ => {
                chars.next();
                let two = chars.peek().copied();
                let tok = match (c, two) {
                    ('-', Some('>')) => {
                        chars.next();
                        Some((Token::Arrow, 2))
                    }
                    ('=', Some('>')) => {
                        chars.next();
                        Some((Token::Implies, 2))
                    }
                    ('/', Some('\\')) => {
                        chars.next();
                        Some((Token::AndOp, 2))
                    }
                    ('\\', Some('/')) => {
                        chars.next();
                        Some((Token::OrOp, 2))
                    }
                    ('!', Some('=')) => {
                        chars.next();
                        Some((Token::Ne, 2))
                    }
                    ('<', Some('=')) => {
                        chars.next();
                        Some((Token::Le, 2))
                    }
                    ('>', Some('=')) => {
                        chars.next();
                        Some((Token::Ge, 2))
                    }
                    ('.', Some('.')) => {
                        chars.next();
                        Some((Token::DotDot, 2))
                    }
                    _ => None,
                };
                let (tok, len) = match tok {
                    Some(t) => t,
                    None => {
                        let t = match c {
                            '(' => Token::LParen,
                            ')' => Token::RParen,
                            ',' => Token::Comma,
                            '.' => Token::Dot,
                            ':' => Token::Colon,
                            '~' => Token::Tilde,
                            '=' => Token::Eq,
                            '<' => Token::Lt,
                            '>' => Token::Gt,
                            '+' => Token::Plus,
                            '-' => Token::Minus,
                            '*' => Token::Star,
                            '/' => Token::Slash,
                            '!' => Token::Bang,
                            other => {
                                return Err(ParseError::new(
                                    line,
                                    col,
                                    format!("unexpected character `{other}`"),
                                ))
                            }
                        };
                        (t, 1)
                    }
                };
                push!(tok, len);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_rule_line() {
        let toks = tokenize("rule count : cfg(s, i) /\\ i > 0 => cfg(s + i, i - 1)").unwrap();
        let kinds: Vec<Token> = toks.into_iter().map(|s| s.token).collect();
        assert!(kinds.contains(&Token::Ident("rule".into())));
        assert!(kinds.contains(&Token::AndOp));
        assert!(kinds.contains(&Token::Implies));
        assert!(kinds.contains(&Token::Gt));
    }

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("a # comment\nb").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[1].line, 2);
        assert_eq!(toks[1].col, 1);
    }

    #[test]
    fn strings_and_ranges() {
        let toks = tokenize("\"he\\\"llo\" 0..25").unwrap();
        assert_eq!(toks[0].token, Token::Str("he\"llo".into()));
        assert_eq!(toks[1].token, Token::Int(0));
        assert_eq!(toks[2].token, Token::DotDot);
        assert_eq!(toks[3].token, Token::Int(25));
    }

    #[test]
    fn primed_identifiers() {
        let toks = tokenize("n' Cfg'").unwrap();
        assert_eq!(toks[0].token, Token::Ident("n'".into()));
        assert_eq!(toks[1].token, Token::Ident("Cfg'".into()));
    }
}
