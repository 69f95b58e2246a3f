//! Checks the lexer against a throwaway character-class scanner that only
//! understands "runs of digits", "runs of word characters", "known symbol",
//! and "whitespace".

use ml0::{tokenize, TokenKind};

/// Independent scan: returns byte spans of the tokens a character-class
/// pass would produce, with no keyword or operator knowledge beyond the
/// two-character comparison forms.
fn scan_spans(src: &str) -> Result<Vec<(usize, usize)>, usize> {
    let b = src.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            spans.push((s, i));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            spans.push((s, i));
        } else if matches!(c, b'<' | b'>' | b'=' | b'!') {
            let s = i;
            i += 1;
            if i < b.len() && b[i] == b'=' {
                i += 1;
            }
            spans.push((s, i));
        } else if matches!(c, b'+' | b'-' | b'*' | b'/' | b'%' | b';' | b'{' | b'}' | b'(' | b')')
        {
            spans.push((i, i + 1));
            i += 1;
        } else {
            return Err(i);
        }
    }
    Ok(spans)
}

const SOURCES: [&str; 6] = [
    "x = 1 ;",
    "n = read ( ) ; m = read ( ) ; n = n - 1 ; while n > 0 { v = read ( ) ; if v > m { m = v ; } n = n - 1 ; } print m ;",
    "if a >= 10 { b = a % 3 ; } else { b = ( a + 1 ) * 2 ; }",
    "print 007 ; print 42 ;",
    "x=1;y=2;print x!=y;",
    "  while   t<=9 {t=t+1;}  ",
];

#[test]
fn token_spans_match_scanner() {
    for src in SOURCES {
        let toks = tokenize(src).unwrap();
        let spans: Vec<(usize, usize)> = toks.iter().map(|t| t.span).collect();
        assert_eq!(spans, scan_spans(src).unwrap(), "span mismatch on {src:?}");
    }
}

#[test]
fn token_count_matches_scanner_on_canonical_solution() {
    // A full max-of-list solution.
    let src = SOURCES[1];
    let toks = tokenize(src).unwrap();
    assert_eq!(toks.len(), scan_spans(src).unwrap().len());
}

#[test]
fn scanner_and_lexer_reject_the_same_bytes() {
    for src in ["a # b", "x = 1 ? ;", "print [ ;"] {
        let scan = scan_spans(src);
        assert!(scan.is_err());
        assert!(tokenize(src).is_err());
        // The failure points agree.
        let ml0::CompileError::Lexical { at, .. } = tokenize(src).unwrap_err() else {
            panic!("expected lexical error");
        };
        assert_eq!(at, scan.unwrap_err());
    }
}

#[test]
fn classification_sanity() {
    let toks = tokenize("while x_1 >= 09 { print x_1 ; }").unwrap();
    let kinds: Vec<TokenKind> = toks.iter().map(|t| t.kind).collect();
    assert_eq!(
        kinds,
        vec![
            TokenKind::Keyword,
            TokenKind::Ident,
            TokenKind::Op,
            TokenKind::Int,
            TokenKind::Punct,
            TokenKind::Keyword,
            TokenKind::Ident,
            TokenKind::Punct,
            TokenKind::Punct,
        ]
    );
}
