//! Recursive-descent parser for ML0.
//!
//! Grammar:
//!
//! ```text
//! program  := stmt* ;
//! stmt     := ident "=" expr ";" | ident "=" "read" "(" ")" ";" | "print" expr ";"
//!           | "if" expr block ("else" block)? | "while" expr block ;
//! block    := "{" stmt* "}" ;
//! expr     := term (("+"|"-"|"*"|"/"|"%") term)* | term (("<"|">"|"<="|">="|"=="|"!=") term) ;
//! term     := integer-literal | ident | "(" expr ")" ;
//! ```
//!
//! Arithmetic chains are left-associative. A comparison takes exactly two
//! terms; chained or mixed comparison/arithmetic requires parentheses.
//! Statement ids are assigned in pre-order, which for this grammar is also
//! ascending source order.

use std::collections::HashMap;

use crate::ast::*;
use crate::token::{tokenize, CompileError, Token, TokenKind};

/// Tokenize and parse in one step.
pub fn compile(source: &str) -> Result<Program, CompileError> {
    let tokens = tokenize(source)?;
    parse(source.to_string(), tokens)
}

/// Parse a token stream produced by [`tokenize`].
pub fn parse(source: String, tokens: Vec<Token>) -> Result<Program, CompileError> {
    let (body, stmts, idents) = {
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            stmts: Vec::new(),
            idents: Vec::new(),
            ident_map: HashMap::new(),
        };
        let mut body = Vec::new();
        while !p.at_end() {
            body.push(p.stmt()?);
        }
        (body, p.stmts, p.idents)
    };
    let stmts = stmts
        .into_iter()
        .map(|s| s.expect("all statement slots filled"))
        .collect();
    Ok(Program {
        source,
        tokens,
        idents,
        stmts,
        body,
    })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    /// Pre-order arena; a slot is reserved when a statement starts and
    /// filled once its children are parsed.
    stmts: Vec<Option<Stmt>>,
    idents: Vec<String>,
    ident_map: HashMap<String, IdentId>,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn err_here(&self, msg: impl Into<String>) -> CompileError {
        let span = match self.peek() {
            Some(_) => (self.pos as usize, self.pos + 1),
            None => (self.tokens.len(), self.tokens.len()),
        };
        CompileError::Parse {
            msg: msg.into(),
            span,
        }
    }

    fn advance(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn expect(&mut self, lexeme: &str) -> Result<(), CompileError> {
        match self.peek() {
            Some(t) if t.lexeme == lexeme => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err_here(format!("expected `{lexeme}`, found `{}`", t.lexeme))),
            None => Err(self.err_here(format!("expected `{lexeme}`, found end of input"))),
        }
    }

    fn intern(&mut self, name: &str) -> IdentId {
        if let Some(&id) = self.ident_map.get(name) {
            return id;
        }
        let id = self.idents.len() as IdentId;
        self.idents.push(name.to_string());
        self.ident_map.insert(name.to_string(), id);
        id
    }

    fn stmt(&mut self) -> Result<StmtId, CompileError> {
        let start = self.pos as u32;
        let id = self.stmts.len() as StmtId;
        self.stmts.push(None);
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.err_here("expected statement, found end of input")),
        };
        let kind = match (tok.kind, tok.lexeme.as_str()) {
            (TokenKind::Keyword, "print") => {
                self.advance();
                let value = self.expr()?;
                self.expect(";")?;
                StmtKind::Print { value }
            }
            (TokenKind::Keyword, "if") => {
                self.advance();
                let cond = self.expr()?;
                let then_body = self.block()?;
                let else_body = if matches!(self.peek(), Some(t) if t.lexeme == "else") {
                    self.advance();
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            (TokenKind::Keyword, "while") => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            (TokenKind::Ident, name) => {
                let target = self.intern(name);
                self.advance();
                self.expect("=")?;
                if matches!(self.peek(), Some(t) if t.kind == TokenKind::Keyword && t.lexeme == "read")
                {
                    self.advance();
                    self.expect("(")?;
                    self.expect(")")?;
                    self.expect(";")?;
                    StmtKind::Read { target }
                } else {
                    let value = self.expr()?;
                    self.expect(";")?;
                    StmtKind::Assign { target, value }
                }
            }
            _ => {
                return Err(self.err_here(format!(
                    "expected statement, found `{}`",
                    tok.lexeme
                )))
            }
        };
        self.stmts[id as usize] = Some(Stmt {
            kind,
            tokens: (start, self.pos as u32),
        });
        Ok(id)
    }

    fn block(&mut self) -> Result<Vec<StmtId>, CompileError> {
        self.expect("{")?;
        let mut body = Vec::new();
        while !matches!(self.peek(), Some(t) if t.lexeme == "}") {
            if self.at_end() {
                return Err(self.err_here("expected `}`, found end of input"));
            }
            body.push(self.stmt()?);
        }
        self.expect("}")?;
        Ok(body)
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        let start = self.pos as u32;
        let first = self.term()?;
        let op = match self.peek() {
            Some(t) if t.kind == TokenKind::Op => match BinOp::from_lexeme(&t.lexeme) {
                Some(op) => op,
                None => return Ok(first), // `=` ends the expression
            },
            _ => return Ok(first),
        };
        if op.is_comparison() {
            self.advance();
            let rhs = self.term()?;
            return Ok(Expr {
                kind: ExprKind::Bin {
                    op,
                    lhs: Box::new(first),
                    rhs: Box::new(rhs),
                },
                tokens: (start, self.pos as u32),
            });
        }
        // Left-associative arithmetic chain.
        let mut acc = first;
        loop {
            let op = match self.peek() {
                Some(t) if t.kind == TokenKind::Op => match BinOp::from_lexeme(&t.lexeme) {
                    Some(op) if !op.is_comparison() => op,
                    _ => break,
                },
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            acc = Expr {
                kind: ExprKind::Bin {
                    op,
                    lhs: Box::new(acc),
                    rhs: Box::new(rhs),
                },
                tokens: (start, self.pos as u32),
            };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, CompileError> {
        let start = self.pos as u32;
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.err_here("expected expression, found end of input")),
        };
        match tok.kind {
            TokenKind::Int => {
                self.advance();
                let value: i64 = tok
                    .lexeme
                    .parse()
                    .map_err(|_| self.err_here("integer literal out of range"))?;
                Ok(Expr {
                    kind: ExprKind::Int(value),
                    tokens: (start, self.pos as u32),
                })
            }
            TokenKind::Ident => {
                let id = self.intern(&tok.lexeme);
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Var(id),
                    tokens: (start, self.pos as u32),
                })
            }
            TokenKind::Punct if tok.lexeme == "(" => {
                self.advance();
                let inner = self.expr()?;
                self.expect(")")?;
                Ok(Expr {
                    kind: inner.kind,
                    tokens: (start, self.pos as u32),
                })
            }
            _ => Err(self.err_here(format!("expected expression, found `{}`", tok.lexeme))),
        }
    }
}
