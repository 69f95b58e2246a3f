//! Closed token vocabulary shared by the policy, the corpus, and the
//! prompt builder.
//!
//! Code is represented at the granularity of ML0 lexemes except integer
//! literals, which are split into single-digit pieces so the vocabulary
//! stays closed. `decode` joins pieces with single spaces, gluing adjacent
//! digit pieces back into one literal; `encode_source` inverts that, so
//! `encode(decode(pieces)) == pieces` for any sequence of code pieces.
//!
//! Descriptor tokens (`<task:...>`) spell out the task head of a prompt.
//! Their surface forms are deliberately not lexable as ML0, so a sampled
//! program that contains one is a compile error rather than silently
//! becoming code.

use std::collections::HashMap;

use ml0::{tokenize, TokenKind};

pub type TokId = u32;

/// Identifiers the corpus templates draw from; also the only identifiers
/// representable by the policy.
pub const IDENTS: [&str; 11] = ["a", "b", "c", "d", "i", "m", "n", "r", "s", "v", "x"];

pub const KEYWORDS: [&str; 5] = ["if", "else", "while", "print", "read"];

pub const OPERATORS: [&str; 12] = [
    "+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "=",
];

pub const PUNCT: [&str; 5] = [";", "{", "}", "(", ")"];

pub const TASK_TOKENS: [&str; 8] = [
    "<task:sum>",
    "<task:max>",
    "<task:count_above>",
    "<task:abs_diff>",
    "<task:clamp>",
    "<task:parity>",
    "<task:run_min>",
    "<task:gated>",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("source does not lex: {0}")]
    Lex(#[from] ml0::CompileError),
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
}

/// Bijective id <-> string table with special-token handles.
#[derive(Debug, Clone)]
pub struct Vocab {
    entries: Vec<String>,
    index: HashMap<String, TokId>,
    pub bos: TokId,
    pub eos: TokId,
    pub pad: TokId,
    digit_base: TokId,
}

/// A source program encoded into vocabulary pieces, with the alignment
/// back to lexer tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSource {
    pub pieces: Vec<TokId>,
    /// For each piece, the index of the lexer token it belongs to.
    pub piece_token: Vec<u32>,
}

impl Vocab {
    /// The one vocabulary used throughout: specials, ML0 terminals, digits,
    /// and task descriptor tokens, in a fixed order.
    pub fn standard() -> Vocab {
        let mut entries: Vec<String> = Vec::new();
        entries.push("<bos>".into());
        entries.push("<eos>".into());
        entries.push("<pad>".into());
        for kw in KEYWORDS {
            entries.push(kw.into());
        }
        for id in IDENTS {
            entries.push(id.into());
        }
        let digit_base = entries.len() as TokId;
        for d in 0..10u8 {
            entries.push(((b'0' + d) as char).to_string());
        }
        for op in OPERATORS {
            entries.push(op.into());
        }
        for p in PUNCT {
            entries.push(p.into());
        }
        for t in TASK_TOKENS {
            entries.push(t.into());
        }
        let index: HashMap<String, TokId> = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as TokId))
            .collect();
        assert_eq!(index.len(), entries.len(), "vocabulary entries collide");
        Vocab {
            bos: index["<bos>"],
            eos: index["<eos>"],
            pad: index["<pad>"],
            digit_base,
            entries,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, s: &str) -> Option<TokId> {
        self.index.get(s).copied()
    }

    pub fn string(&self, id: TokId) -> &str {
        &self.entries[id as usize]
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_digit(&self, id: TokId) -> bool {
        id >= self.digit_base && id < self.digit_base + 10
    }

    pub fn is_special(&self, id: TokId) -> bool {
        id == self.bos || id == self.eos || id == self.pad
    }

    /// Encode ML0 source text into pieces plus the piece -> lexer-token map.
    pub fn encode_source(&self, source: &str) -> Result<EncodedSource, EncodeError> {
        let tokens = tokenize(source)?;
        let mut pieces = Vec::new();
        let mut piece_token = Vec::new();
        for (ti, tok) in tokens.iter().enumerate() {
            if tok.kind == TokenKind::Int {
                for ch in tok.lexeme.chars() {
                    let id = self
                        .id(&ch.to_string())
                        .ok_or_else(|| EncodeError::UnknownToken(ch.to_string()))?;
                    pieces.push(id);
                    piece_token.push(ti as u32);
                }
            } else {
                let id = self
                    .id(&tok.lexeme)
                    .ok_or_else(|| EncodeError::UnknownToken(tok.lexeme.clone()))?;
                pieces.push(id);
                piece_token.push(ti as u32);
            }
        }
        Ok(EncodedSource {
            pieces,
            piece_token,
        })
    }

    /// Render pieces as source text: single spaces between pieces except
    /// between adjacent digit pieces, which concatenate into one literal.
    pub fn decode_pieces(&self, pieces: &[TokId]) -> String {
        let mut out = String::new();
        let mut prev_digit = false;
        for &id in pieces {
            let s = self.string(id);
            let is_digit = self.is_digit(id);
            if !out.is_empty() && !(prev_digit && is_digit) {
                out.push(' ');
            }
            out.push_str(s);
            prev_digit = is_digit;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_strings_are_bijective() {
        let v = Vocab::standard();
        for id in 0..v.len() as TokId {
            assert_eq!(v.id(v.string(id)), Some(id));
        }
        assert_ne!(v.eos, v.pad);
    }

    #[test]
    fn encode_decode_roundtrip_with_multidigit_literal() {
        let v = Vocab::standard();
        let src = "x = 42 ; print x % 10 ;";
        let enc = v.encode_source(src).unwrap();
        assert_eq!(v.decode_pieces(&enc.pieces), src);
        // "42" is two pieces mapping to one lexer token.
        let count_42_pieces = enc
            .piece_token
            .iter()
            .filter(|&&t| t == 2)
            .count();
        assert_eq!(count_42_pieces, 2);
    }

    #[test]
    fn decode_then_encode_is_identity_on_code_pieces() {
        let v = Vocab::standard();
        let src = "n = read ( ) ; while n > 0 { print n ; n = n - 1 ; }";
        let enc = v.encode_source(src).unwrap();
        let text = v.decode_pieces(&enc.pieces);
        let enc2 = v.encode_source(&text).unwrap();
        assert_eq!(enc.pieces, enc2.pieces);
    }

    #[test]
    fn adjacent_digits_merge_into_one_literal() {
        let v = Vocab::standard();
        let pieces = vec![v.id("4").unwrap(), v.id("2").unwrap()];
        assert_eq!(v.decode_pieces(&pieces), "42");
        // And the inverse splits it back.
        let enc = v.encode_source("42").unwrap();
        assert_eq!(enc.pieces, pieces);
    }

    #[test]
    fn unknown_identifier_rejected() {
        let v = Vocab::standard();
        assert!(matches!(
            v.encode_source("q = 1 ;"),
            Err(EncodeError::UnknownToken(_))
        ));
    }

    #[test]
    fn specials_render_unlexable() {
        let v = Vocab::standard();
        let pieces = vec![v.id("<task:sum>").unwrap(), v.id("7").unwrap()];
        let text = v.decode_pieces(&pieces);
        assert!(ml0::tokenize(&text).is_err());
    }
}
