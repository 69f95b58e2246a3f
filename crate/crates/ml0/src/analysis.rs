//! Static analysis over parsed programs: conditional-statement spans,
//! executed-token flags derived from coverage traces, and the curriculum
//! cut offset.

use crate::ast::{Program, StmtId};
use crate::interp::CoverageTrace;

/// Token range of one `if` or `while` statement in a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondSpan {
    /// Token index of the statement's first token.
    pub st: u32,
    /// One past the statement's last token.
    pub en: u32,
    /// The statement's ordinal id.
    pub stmt_id: StmtId,
}

/// All conditional statements (`if` and `while` nodes) of a program, in
/// ascending order of start token. Nested spans are contained in their
/// enclosing span. The length of the result is the program's conditional
/// count E.
pub fn extract_conditionals(program: &Program) -> Vec<CondSpan> {
    // Statement ids are pre-order, which is ascending source order, so a
    // single pass yields the required ordering.
    let spans: Vec<CondSpan> = program
        .stmts
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind.is_conditional())
        .map(|(id, s)| CondSpan {
            st: s.tokens.0,
            en: s.tokens.1,
            stmt_id: id as StmtId,
        })
        .collect();
    debug_assert!(spans.windows(2).all(|w| w[0].st < w[1].st));
    spans
}

/// For each token, the innermost statement containing it.
///
/// Every token of a parseable program belongs to exactly one innermost
/// statement: block braces and condition tokens belong to their `if`/`while`
/// header, body tokens to the body statement itself.
pub fn token_owners(program: &Program) -> Vec<StmtId> {
    let mut owners = vec![0 as StmtId; program.tokens.len()];
    // Pre-order: parents are visited before children, so children overwrite
    // the parent's claim on their own token range.
    for (id, stmt) in program.stmts.iter().enumerate() {
        let (st, en) = stmt.tokens;
        for slot in &mut owners[st as usize..en as usize] {
            *slot = id as StmtId;
        }
    }
    owners
}

/// Per-token executed flags for a program under a (union) coverage trace:
/// a token is flagged executed iff its innermost enclosing statement was
/// entered. A completed straight-line program therefore flags every token.
pub fn executed_token_flags(program: &Program, trace: &CoverageTrace) -> Vec<bool> {
    assert_eq!(trace.stmt_count(), program.stmt_count());
    token_owners(program)
        .into_iter()
        .map(|owner| trace.contains(owner))
        .collect()
}

/// Token offset at which the curriculum prompt ends for stage `c` with
/// stride `s`: stage 0 means full generation (offset 0); otherwise the
/// start of the `min(s*c, E-1)`-th conditional statement.
///
/// Calling this with `c > 0` on a program without conditionals is a
/// contract violation.
pub fn cut_offset(spans: &[CondSpan], stage: u32, stride: u32) -> u32 {
    if stage == 0 {
        return 0;
    }
    assert!(
        !spans.is_empty(),
        "cut_offset with stage > 0 requires at least one conditional"
    );
    assert!(stride >= 1, "stride must be at least 1");
    let idx = (stride as usize * stage as usize).min(spans.len() - 1);
    spans[idx].st
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::execute;
    use crate::parser::compile;

    #[test]
    fn straight_line_has_no_conditionals() {
        let p = compile("x = read ( ) ; print x ;").unwrap();
        assert!(extract_conditionals(&p).is_empty());
    }

    #[test]
    fn nested_ifs_ordered_outer_first() {
        let p = compile("if a > 0 { if b > 0 { print 1 ; } }").unwrap();
        let spans = extract_conditionals(&p);
        assert_eq!(spans.len(), 2);
        assert!(spans[0].st < spans[1].st);
        assert!(spans[1].st > spans[0].st && spans[1].en < spans[0].en);
    }

    #[test]
    fn three_conditionals_counted() {
        let p = compile(
            "v = read ( ) ; if v > 1 { print 1 ; } while v > 0 { v = v - 1 ; } if v == 0 { print 0 ; }",
        )
        .unwrap();
        assert_eq!(extract_conditionals(&p).len(), 3);
    }

    #[test]
    fn owners_assign_else_tokens_to_inner_statements() {
        let src = "x = read ( ) ; if x > 0 { print x ; } else { print 0 - x ; }";
        let p = compile(src).unwrap();
        let owners = token_owners(&p);
        // Statements: read(0), if(1), then-print(2), else-print(3).
        // The then-print tokens are owned by stmt 2, the else-print by 3,
        // and the if header/braces/else keyword by 1.
        let then_print = p.stmt(2).tokens;
        let else_print = p.stmt(3).tokens;
        for t in then_print.0..then_print.1 {
            assert_eq!(owners[t as usize], 2);
        }
        for t in else_print.0..else_print.1 {
            assert_eq!(owners[t as usize], 3);
        }
        // `else` keyword sits between the two branches and belongs to the if.
        assert_eq!(owners[else_print.0 as usize - 2], 1);
    }

    #[test]
    fn executed_flags_exclude_untaken_branch() {
        let src = "x = read ( ) ; if x > 0 { print x ; } else { print 0 - x ; }";
        let p = compile(src).unwrap();
        let (_, trace) = execute(&p, &[5], 1000);
        let flags = executed_token_flags(&p, &trace);
        let else_print = p.stmt(3).tokens;
        for t in else_print.0..else_print.1 {
            assert!(!flags[t as usize]);
        }
        let then_print = p.stmt(2).tokens;
        for t in then_print.0..then_print.1 {
            assert!(flags[t as usize]);
        }
        // Header tokens of the if are executed.
        assert!(flags[p.stmt(1).tokens.0 as usize]);
    }

    #[test]
    fn straight_line_completion_flags_all_tokens() {
        let p = compile("a = 1 ; b = a * 3 ; print b ;").unwrap();
        let (status, trace) = execute(&p, &[], 1000);
        assert!(status.is_completed());
        assert!(executed_token_flags(&p, &trace).iter().all(|&f| f));
    }

    #[test]
    fn cut_offset_examples() {
        // Nine sibling conditionals; stride 3.
        let mut src = String::from("v = read ( ) ; ");
        for _ in 0..9 {
            src.push_str("if v > 0 { v = v - 1 ; } ");
        }
        let p = compile(src.trim()).unwrap();
        let spans = extract_conditionals(&p);
        assert_eq!(spans.len(), 9);
        let c2 = cut_offset(&spans, 2, 3);
        let c1 = cut_offset(&spans, 1, 3);
        let c0 = cut_offset(&spans, 0, 3);
        assert_eq!(c2, spans[6].st);
        assert_eq!(c1, spans[3].st);
        assert_eq!(c0, 0);
        assert!(c2 > c1 && c1 > c0);
    }

    #[test]
    fn cut_offset_clamps_to_last_span() {
        let p = compile("if a > 0 { print 1 ; } if a > 1 { print 2 ; } if a > 2 { print 3 ; }")
            .unwrap();
        let spans = extract_conditionals(&p);
        // E = 3, stride 2: stage 1 indexes min(2, 2) = 2.
        assert_eq!(cut_offset(&spans, 1, 2), spans[2].st);
        // Stage beyond range clamps to the final span.
        assert_eq!(cut_offset(&spans, 5, 2), spans[2].st);
    }

    #[test]
    fn single_conditional_stage_zero() {
        let p = compile("if a > 0 { print 1 ; }").unwrap();
        let spans = extract_conditionals(&p);
        assert_eq!(spans.len(), 1);
        assert_eq!(cut_offset(&spans, 0, 1), 0);
    }
}
