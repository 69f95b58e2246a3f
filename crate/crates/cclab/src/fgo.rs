//! Coverage-derived token masks: a generated token participates in the
//! update only if the statement it belongs to was entered by at least one
//! unit-test execution.

use ml0::{executed_token_flags, CoverageTrace, Program};

use crate::vocab::{TokId, Vocab};

/// Per-token include/exclude flags over a generated piece sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    pub flags: Vec<bool>,
}

impl TokenMask {
    pub fn all_ones(n: usize) -> TokenMask {
        TokenMask {
            flags: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn included(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn or_with(&self, other: &TokenMask) -> TokenMask {
        assert_eq!(self.len(), other.len());
        TokenMask {
            flags: self
                .flags
                .iter()
                .zip(&other.flags)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }
}

/// Union all traces of one program.
pub fn union_traces(program: &Program, traces: &[CoverageTrace]) -> CoverageTrace {
    let mut acc = CoverageTrace::empty(program.stmt_count());
    for t in traces {
        acc.union_with(t);
    }
    acc
}

/// Mask over the pieces of a full generated program.
///
/// `program` is the parse of `vocab.decode_pieces(pieces)`; pass `None`
/// when the text did not compile, in which case every token is kept (the
/// whole attempt earned the compile-error reward). Otherwise a piece is
/// kept iff the innermost statement containing its lexer token was entered
/// in the union of the given traces.
pub fn fgo_mask(
    vocab: &Vocab,
    pieces: &[TokId],
    program: Option<&Program>,
    traces: &[CoverageTrace],
) -> TokenMask {
    let program = match program {
        None => return TokenMask::all_ones(pieces.len()),
        Some(p) => p,
    };
    let enc = vocab
        .encode_source(&program.source)
        .expect("parsed program re-encodes");
    assert_eq!(
        enc.pieces, pieces,
        "pieces do not match the program they were parsed into"
    );
    let union = union_traces(program, traces);
    let token_flags = executed_token_flags(program, &union);
    TokenMask {
        flags: enc
            .piece_token
            .iter()
            .map(|&ti| token_flags[ti as usize])
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ml0::{compile, execute};

    const BRANCHY: &str = "x = read ( ) ; if x > 0 { print x ; } else { print 0 - x ; }";

    fn mask_for(src: &str, inputs: &[&[i64]]) -> (TokenMask, Vec<TokId>) {
        let vocab = Vocab::standard();
        let program = compile(src).unwrap();
        let traces: Vec<CoverageTrace> = inputs
            .iter()
            .map(|input| execute(&program, input, 10_000).1)
            .collect();
        let pieces = vocab.encode_source(src).unwrap().pieces;
        let mask = fgo_mask(&vocab, &pieces, Some(&program), &traces);
        (mask, pieces)
    }

    #[test]
    fn then_branch_only_masks_else_tokens() {
        let vocab = Vocab::standard();
        let (mask, pieces) = mask_for(BRANCHY, &[&[5], &[9]]);
        // The else-branch print tokens are excluded; everything else kept.
        let text_pieces: Vec<&str> = pieces.iter().map(|&p| vocab.string(p)).collect();
        // Locate the second `print` (inside else).
        let else_print_start = text_pieces
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == "print")
            .nth(1)
            .unwrap()
            .0;
        // `print 0 - x ;` is five pieces.
        for j in else_print_start..else_print_start + 5 {
            assert!(!mask.flags[j], "piece {j} should be masked");
        }
        for j in 0..else_print_start {
            assert!(mask.flags[j], "piece {j} should be kept");
        }
        // Closing brace of the else block belongs to the if statement,
        // which executed.
        assert!(mask.flags[mask.len() - 1]);
    }

    #[test]
    fn straight_line_complete_is_all_ones() {
        let (mask, _) = mask_for("a = 1 ; b = a + 2 ; print a * b ;", &[&[]]);
        assert!(mask.flags.iter().all(|&f| f));
    }

    #[test]
    fn compile_error_gets_all_ones() {
        let vocab = Vocab::standard();
        let pieces = vocab.encode_source("print ( 1 ;").map(|e| e.pieces);
        // `print ( 1 ;` lexes but does not parse.
        let pieces = pieces.unwrap();
        let mask = fgo_mask(&vocab, &pieces, None, &[]);
        assert_eq!(mask.included(), pieces.len());
    }

    #[test]
    fn union_equals_or_of_per_trace_masks() {
        let vocab = Vocab::standard();
        let program = compile(BRANCHY).unwrap();
        let pieces = vocab.encode_source(BRANCHY).unwrap().pieces;
        let t_pos = execute(&program, &[3], 10_000).1;
        let t_neg = execute(&program, &[-3], 10_000).1;
        let m_pos = fgo_mask(&vocab, &pieces, Some(&program), &[t_pos.clone()]);
        let m_neg = fgo_mask(&vocab, &pieces, Some(&program), &[t_neg.clone()]);
        let m_union = fgo_mask(&vocab, &pieces, Some(&program), &[t_pos, t_neg]);
        assert_eq!(m_union, m_pos.or_with(&m_neg));
        // Both branches ran, so the union masks nothing.
        assert_eq!(m_union.included(), pieces.len());
    }

    #[test]
    fn multidigit_literal_pieces_share_their_statement_flag() {
        let src = "x = read ( ) ; if x > 10 { print 42 ; }";
        let (mask, pieces) = mask_for(src, &[&[3]]);
        let vocab = Vocab::standard();
        // `print 42 ;` never ran: both digit pieces of 42 masked.
        let idx42 = pieces
            .iter()
            .position(|&p| vocab.string(p) == "4")
            .unwrap();
        assert!(!mask.flags[idx42] && !mask.flags[idx42 + 1]);
        // `10` sits in the if header, which ran: both pieces kept.
        let idx10 = pieces
            .iter()
            .position(|&p| vocab.string(p) == "1")
            .unwrap();
        assert!(mask.flags[idx10] && mask.flags[idx10 + 1]);
    }
}
