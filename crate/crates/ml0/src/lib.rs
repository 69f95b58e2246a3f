//! ML0: a tiny imperative integer language built for training experiments
//! that need a fully deterministic compile/execute/trace loop.
//!
//! The pipeline is `tokenize` -> `parse` -> `execute`, with statement-level
//! coverage tracing, a fuel budget that turns non-termination into a
//! classified runtime error, and span analysis for conditional statements.

pub mod analysis;
pub mod ast;
pub mod interp;
pub mod parser;
pub mod token;

pub use analysis::{cut_offset, executed_token_flags, extract_conditionals, token_owners, CondSpan};
pub use ast::{BinOp, Expr, ExprKind, IdentId, Program, Stmt, StmtId, StmtKind};
pub use interp::{execute, CoverageTrace, ExecStatus, RuntimeErrorKind, DEFAULT_FUEL};
pub use parser::{compile, parse};
pub use token::{tokenize, tokenize_with_cap, CompileError, Token, TokenKind, DEFAULT_SOURCE_CAP};
