//! AST for ML0 programs.
//!
//! Statements live in a flat arena ordered by pre-order traversal of the
//! tree, so the arena index doubles as the statement's ordinal id. Every
//! node records its half-open token range into [`Program::tokens`].

use crate::token::Token;

/// Ordinal id of a statement; equals its index in [`Program::stmts`].
pub type StmtId = u32;

/// Interned identifier; indexes [`Program::idents`].
pub type IdentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn from_lexeme(s: &str) -> Option<BinOp> {
        Some(match s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            "<" => BinOp::Lt,
            ">" => BinOp::Gt,
            "<=" => BinOp::Le,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    /// Half-open token range `[st, en)`.
    pub tokens: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Var(IdentId),
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Half-open token range `[st, en)` covering the whole statement,
    /// including block braces and an `else` arm if present.
    pub tokens: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign { target: IdentId, value: Expr },
    Read { target: IdentId },
    Print { value: Expr },
    If {
        cond: Expr,
        then_body: Vec<StmtId>,
        else_body: Option<Vec<StmtId>>,
    },
    While { cond: Expr, body: Vec<StmtId> },
}

impl StmtKind {
    pub fn is_conditional(&self) -> bool {
        matches!(self, StmtKind::If { .. } | StmtKind::While { .. })
    }
}

/// A parsed ML0 program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub source: String,
    pub tokens: Vec<Token>,
    pub idents: Vec<String>,
    /// Statement arena in pre-order; index = [`StmtId`].
    pub stmts: Vec<Stmt>,
    /// Top-level statement ids, in source order.
    pub body: Vec<StmtId>,
}

impl Program {
    pub fn stmt_count(&self) -> usize {
        self.stmts.len()
    }

    pub fn stmt(&self, id: StmtId) -> &Stmt {
        &self.stmts[id as usize]
    }

    pub fn ident_name(&self, id: IdentId) -> &str {
        &self.idents[id as usize]
    }

    /// Canonical text form: lexemes joined by single spaces. Reparsing the
    /// result yields an identical statement arena.
    pub fn unparse(&self) -> String {
        let lexemes: Vec<&str> = self.tokens.iter().map(|t| t.lexeme.as_str()).collect();
        lexemes.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use crate::parser::compile;

    #[test]
    fn stmt_ids_are_preorder_and_nested_spans_contained() {
        let p = compile("if a > 0 { b = 1 ; while b > 0 { b = b - 1 ; } } print a ;").unwrap();
        // Pre-order: if(0), assign(1), while(2), inner assign(3), print(4).
        assert_eq!(p.stmt_count(), 5);
        let spans: Vec<(u32, u32)> = p.stmts.iter().map(|s| s.tokens).collect();
        // if span contains assign and while spans; while contains inner assign.
        assert!(spans[0].0 <= spans[1].0 && spans[1].1 <= spans[0].1);
        assert!(spans[0].0 <= spans[2].0 && spans[2].1 <= spans[0].1);
        assert!(spans[2].0 <= spans[3].0 && spans[3].1 <= spans[2].1);
        // print is outside the if.
        assert!(spans[4].0 >= spans[0].1);
    }

    #[test]
    fn unparse_roundtrip_identity() {
        let src = "n = read ( ) ; while n > 0 { print n ; n = n - 1 ; }";
        let p = compile(src).unwrap();
        assert_eq!(p.unparse(), src);
        let p2 = compile(&p.unparse()).unwrap();
        assert_eq!(p.stmts, p2.stmts);
        assert_eq!(p.body, p2.body);
    }
}
