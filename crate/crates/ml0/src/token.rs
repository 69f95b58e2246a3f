//! Lexer for ML0 source text.
//!
//! The alphabet is ASCII letters, digits, underscore, the operator and
//! punctuation characters, and whitespace. Anything else is a lexical error.

/// Token classes produced by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Ident,
    Int,
    Op,
    Punct,
}

/// One lexed token with its byte span in the original source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// Byte range `[start, end)` into the source.
    pub span: (usize, usize),
}

/// Default cap on source length accepted by [`tokenize`], in bytes.
pub const DEFAULT_SOURCE_CAP: usize = 4096;

pub const KEYWORDS: [&str; 5] = ["if", "else", "while", "print", "read"];

/// Compilation failure: either the lexer rejected a character or the parser
/// rejected the token stream.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("lexical error at byte {at}: {msg}")]
    Lexical { msg: String, at: usize },
    #[error("parse error at tokens {span:?}: {msg}")]
    Parse { msg: String, span: (usize, usize) },
}

impl CompileError {
    pub fn is_lexical(&self) -> bool {
        matches!(self, CompileError::Lexical { .. })
    }
}

/// Lex `source` with the default length cap.
pub fn tokenize(source: &str) -> Result<Vec<Token>, CompileError> {
    tokenize_with_cap(source, DEFAULT_SOURCE_CAP)
}

/// Lex `source`, rejecting inputs longer than `cap` bytes.
pub fn tokenize_with_cap(source: &str, cap: usize) -> Result<Vec<Token>, CompileError> {
    if source.len() > cap {
        return Err(CompileError::Lexical {
            msg: format!("source length {} exceeds cap {}", source.len(), cap),
            at: cap,
        });
    }
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let lexeme = &source[start..i];
                if lexeme.parse::<i64>().is_err() {
                    return Err(CompileError::Lexical {
                        msg: format!("integer literal `{lexeme}` out of range"),
                        at: start,
                    });
                }
                tokens.push(Token {
                    kind: TokenKind::Int,
                    lexeme: lexeme.to_string(),
                    span: (start, i),
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let lexeme = &source[start..i];
                let kind = if KEYWORDS.contains(&lexeme) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Ident
                };
                tokens.push(Token {
                    kind,
                    lexeme: lexeme.to_string(),
                    span: (start, i),
                });
            }
            b'<' | b'>' | b'=' | b'!' => {
                let start = i;
                let two = i + 1 < bytes.len() && bytes[i + 1] == b'=';
                if two {
                    i += 2;
                } else {
                    if b == b'!' {
                        return Err(CompileError::Lexical {
                            msg: "`!` must be followed by `=`".to_string(),
                            at: start,
                        });
                    }
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Op,
                    lexeme: source[start..i].to_string(),
                    span: (start, i),
                });
            }
            b'+' | b'-' | b'*' | b'/' | b'%' => {
                tokens.push(Token {
                    kind: TokenKind::Op,
                    lexeme: (b as char).to_string(),
                    span: (i, i + 1),
                });
                i += 1;
            }
            b';' | b'{' | b'}' | b'(' | b')' => {
                tokens.push(Token {
                    kind: TokenKind::Punct,
                    lexeme: (b as char).to_string(),
                    span: (i, i + 1),
                });
                i += 1;
            }
            _ => {
                let ch = source[i..].chars().next().unwrap_or('?');
                return Err(CompileError::Lexical {
                    msg: format!("illegal character {ch:?}"),
                    at: i,
                });
            }
        }
    }
    Ok(tokens)
}
