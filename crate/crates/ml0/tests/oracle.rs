//! Cross-checks the interpreter against an independently written naive
//! evaluator: same AST in, execution status / output / executed-statement
//! set compared. The naive evaluator resolves variables by name through a
//! string map and collects coverage in a hash set, sharing no code with
//! `ml0::interp` beyond the AST types.

use std::collections::{HashMap, HashSet};

use ml0::ast::{BinOp, Expr, ExprKind, Program, StmtId, StmtKind};
use ml0::{compile, execute, ExecStatus};

#[derive(Debug, PartialEq)]
enum NaiveResult {
    Done(Vec<i64>),
    Err(&'static str),
}

struct Naive<'a> {
    program: &'a Program,
    vars: HashMap<String, i64>,
    input: Vec<i64>,
    output: Vec<i64>,
    fuel: i128,
    seen: HashSet<StmtId>,
}

impl<'a> Naive<'a> {
    fn run(program: &'a Program, input: &[i64], fuel: u64) -> (NaiveResult, HashSet<StmtId>) {
        let mut n = Naive {
            program,
            vars: HashMap::new(),
            input: input.to_vec(),
            output: Vec::new(),
            fuel: fuel as i128,
            seen: HashSet::new(),
        };
        let mut input_pos = 0usize;
        let result = n.body(&program.body.clone(), &mut input_pos);
        let out = match result {
            Ok(()) => NaiveResult::Done(n.output.clone()),
            Err(e) => NaiveResult::Err(e),
        };
        (out, n.seen)
    }

    fn body(&mut self, ids: &[StmtId], input_pos: &mut usize) -> Result<(), &'static str> {
        for &id in ids {
            self.stmt(id, input_pos)?;
        }
        Ok(())
    }

    fn tick(&mut self, id: StmtId) -> Result<(), &'static str> {
        if self.fuel <= 0 {
            return Err("fuel");
        }
        self.fuel -= 1;
        self.seen.insert(id);
        Ok(())
    }

    fn stmt(&mut self, id: StmtId, input_pos: &mut usize) -> Result<(), &'static str> {
        let kind = self.program.stmt(id).kind.clone();
        match kind {
            StmtKind::Assign { target, value } => {
                self.tick(id)?;
                let v = self.expr(&value)?;
                let name = self.program.ident_name(target).to_string();
                self.vars.insert(name, v);
            }
            StmtKind::Read { target } => {
                self.tick(id)?;
                if *input_pos >= self.input.len() {
                    return Err("read");
                }
                let v = self.input[*input_pos];
                *input_pos += 1;
                let name = self.program.ident_name(target).to_string();
                self.vars.insert(name, v);
            }
            StmtKind::Print { value } => {
                self.tick(id)?;
                let v = self.expr(&value)?;
                self.output.push(v);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.tick(id)?;
                if self.expr(&cond)? != 0 {
                    self.body(&then_body, input_pos)?;
                } else if let Some(e) = else_body {
                    self.body(&e, input_pos)?;
                }
            }
            StmtKind::While { cond, body } => loop {
                self.tick(id)?;
                if self.expr(&cond)? == 0 {
                    break;
                }
                self.body(&body, input_pos)?;
            },
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<i64, &'static str> {
        Ok(match &e.kind {
            ExprKind::Int(v) => *v,
            ExprKind::Var(id) => *self
                .vars
                .get(self.program.ident_name(*id))
                .ok_or("undef")?,
            ExprKind::Bin { op, lhs, rhs } => {
                let a = self.expr(lhs)?;
                let b = self.expr(rhs)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or("overflow")?,
                    BinOp::Sub => a.checked_sub(b).ok_or("overflow")?,
                    BinOp::Mul => a.checked_mul(b).ok_or("overflow")?,
                    BinOp::Div => {
                        if b == 0 {
                            return Err("div0");
                        }
                        a.checked_div(b).ok_or("overflow")?
                    }
                    BinOp::Mod => {
                        if b == 0 {
                            return Err("div0");
                        }
                        a.checked_rem(b).ok_or("overflow")?
                    }
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                }
            }
        })
    }
}

const PROGRAMS: [&str; 8] = [
    "x = read ( ) ; if x > 0 { print x ; } else { print 0 - x ; }",
    "n = read ( ) ; s = 0 ; while n > 0 { v = read ( ) ; s = s + v ; n = n - 1 ; } print s ;",
    "n = read ( ) ; m = read ( ) ; n = n - 1 ; while n > 0 { v = read ( ) ; if v > m { m = v ; } n = n - 1 ; } print m ;",
    "a = read ( ) ; b = read ( ) ; d = a - b ; if d < 0 { d = 0 - d ; } print d ;",
    "x = read ( ) ; if x < 2 { x = 2 ; } if x > 8 { x = 8 ; } print x ;",
    "n = read ( ) ; while n > 0 { v = read ( ) ; r = v % 2 ; if r == 0 { print v ; } n = n - 1 ; }",
    "x = read ( ) ; y = read ( ) ; print x / y ; print x % y ;",
    "i = 3 ; s = 0 ; while i > 0 { j = i ; while j > 0 { s = s + j ; j = j - 1 ; } i = i - 1 ; } print s ;",
];

fn check_agreement(src: &str, input: &[i64], fuel: u64) {
    let p = compile(src).unwrap();
    let (status, trace) = execute(&p, input, fuel);
    let (naive_result, naive_seen) = Naive::run(&p, input, fuel);
    match (&status, &naive_result) {
        (ExecStatus::Completed { output }, NaiveResult::Done(out2)) => {
            assert_eq!(output, out2, "output mismatch on {src:?} input {input:?}");
        }
        (ExecStatus::RuntimeError { .. }, NaiveResult::Err(_)) => {}
        other => panic!("status mismatch on {src:?} input {input:?}: {other:?}"),
    }
    let ids: HashSet<StmtId> = trace.executed_ids().into_iter().collect();
    assert_eq!(ids, naive_seen, "coverage mismatch on {src:?} input {input:?}");
}

#[test]
fn interpreter_agrees_with_naive_evaluator() {
    let inputs: [&[i64]; 7] = [
        &[],
        &[0],
        &[5],
        &[-3],
        &[3, 1, 4, 1],
        &[2, 10, -10],
        &[4, 7, 0, -2, 9],
    ];
    for src in PROGRAMS {
        for input in inputs {
            check_agreement(src, input, 500);
        }
    }
}

#[test]
fn agreement_holds_under_tight_fuel() {
    for src in PROGRAMS {
        for fuel in [1, 2, 3, 5, 8, 13] {
            check_agreement(src, &[3, 1, 4, 1, 5], fuel);
        }
    }
}

#[test]
fn coverage_soundness_under_shadow_counter() {
    // The naive evaluator is the shadow: a statement is in the trace iff
    // the shadow entered it.
    let src = "n = read ( ) ; while n > 3 { n = n - 1 ; print n ; } if n == 2 { print 0 ; } else { print 1 ; }";
    for n in -2..8 {
        check_agreement(src, &[n], 200);
    }
}
