//! Tree-walking interpreter with statement-level coverage tracing and a
//! fuel budget.
//!
//! Each statement execution costs one unit of fuel; a `while` is charged
//! once per condition evaluation so an empty loop body still burns fuel.
//! A statement's id is added to the trace when it begins executing.
//! Arithmetic is 64-bit and checked: overflow is a runtime error, division
//! and modulo truncate toward zero, and division by zero is a runtime
//! error. Comparisons yield 1/0 and any nonzero value is true.

use crate::ast::*;

/// Default statement-execution budget.
pub const DEFAULT_FUEL: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    UndefinedVar(String),
    DivisionByZero,
    ReadPastEnd,
    FuelExhausted,
    Overflow,
}

impl std::fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuntimeErrorKind::UndefinedVar(name) => write!(f, "undefined variable `{name}`"),
            RuntimeErrorKind::DivisionByZero => write!(f, "division by zero"),
            RuntimeErrorKind::ReadPastEnd => write!(f, "read past end of input"),
            RuntimeErrorKind::FuelExhausted => write!(f, "fuel exhausted"),
            RuntimeErrorKind::Overflow => write!(f, "integer overflow"),
        }
    }
}

/// Outcome of executing a parsed program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecStatus {
    Completed { output: Vec<i64> },
    RuntimeError { kind: RuntimeErrorKind },
}

impl ExecStatus {
    pub fn output(&self) -> Option<&[i64]> {
        match self {
            ExecStatus::Completed { output } => Some(output),
            ExecStatus::RuntimeError { .. } => None,
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, ExecStatus::Completed { .. })
    }
}

/// Set of statement ids entered at least once during one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageTrace {
    executed: Vec<bool>,
}

impl CoverageTrace {
    pub fn empty(stmt_count: usize) -> Self {
        CoverageTrace {
            executed: vec![false; stmt_count],
        }
    }

    pub fn stmt_count(&self) -> usize {
        self.executed.len()
    }

    pub fn contains(&self, id: StmtId) -> bool {
        self.executed.get(id as usize).copied().unwrap_or(false)
    }

    pub fn mark(&mut self, id: StmtId) {
        self.executed[id as usize] = true;
    }

    /// Executed ids in ascending order.
    pub fn executed_ids(&self) -> Vec<StmtId> {
        self.executed
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| i as StmtId)
            .collect()
    }

    pub fn executed_count(&self) -> usize {
        self.executed.iter().filter(|&&e| e).count()
    }

    /// Merge another trace of the same program into this one.
    pub fn union_with(&mut self, other: &CoverageTrace) {
        assert_eq!(self.executed.len(), other.executed.len());
        for (a, b) in self.executed.iter_mut().zip(&other.executed) {
            *a |= *b;
        }
    }
}

/// Execute `program` against an input stream with a fuel budget.
///
/// Deterministic: identical `(program, input, fuel)` always yields identical
/// results. The trace is returned for error outcomes too and covers every
/// statement that began executing before the error.
pub fn execute(program: &Program, input: &[i64], fuel: u64) -> (ExecStatus, CoverageTrace) {
    assert!(fuel >= 1, "fuel must be at least 1");
    let mut interp = Interp {
        program,
        vars: vec![None; program.idents.len()],
        input,
        cursor: 0,
        output: Vec::new(),
        fuel,
        trace: CoverageTrace::empty(program.stmt_count()),
    };
    let status = match interp.run_body(&program.body) {
        Ok(()) => ExecStatus::Completed {
            output: interp.output,
        },
        Err(kind) => ExecStatus::RuntimeError { kind },
    };
    (status, interp.trace)
}

struct Interp<'a> {
    program: &'a Program,
    vars: Vec<Option<i64>>,
    input: &'a [i64],
    cursor: usize,
    output: Vec<i64>,
    fuel: u64,
    trace: CoverageTrace,
}

impl<'a> Interp<'a> {
    fn run_body(&mut self, body: &[StmtId]) -> Result<(), RuntimeErrorKind> {
        for &id in body {
            self.exec_stmt(id)?;
        }
        Ok(())
    }

    /// Charge one fuel unit and mark the statement as entered.
    fn charge(&mut self, id: StmtId) -> Result<(), RuntimeErrorKind> {
        if self.fuel == 0 {
            return Err(RuntimeErrorKind::FuelExhausted);
        }
        self.fuel -= 1;
        self.trace.mark(id);
        Ok(())
    }

    fn exec_stmt(&mut self, id: StmtId) -> Result<(), RuntimeErrorKind> {
        // Borrow the statement through the program reference, not through
        // self, so eval can take &mut self.
        let program = self.program;
        match &program.stmt(id).kind {
            StmtKind::Assign { target, value } => {
                self.charge(id)?;
                let v = self.eval(value)?;
                self.vars[*target as usize] = Some(v);
            }
            StmtKind::Read { target } => {
                self.charge(id)?;
                if self.cursor >= self.input.len() {
                    return Err(RuntimeErrorKind::ReadPastEnd);
                }
                self.vars[*target as usize] = Some(self.input[self.cursor]);
                self.cursor += 1;
            }
            StmtKind::Print { value } => {
                self.charge(id)?;
                let v = self.eval(value)?;
                self.output.push(v);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.charge(id)?;
                if self.eval(cond)? != 0 {
                    self.run_body(then_body)?;
                } else if let Some(els) = else_body {
                    self.run_body(els)?;
                }
            }
            StmtKind::While { cond, body } => {
                loop {
                    // One fuel unit per condition evaluation.
                    self.charge(id)?;
                    if self.eval(cond)? == 0 {
                        break;
                    }
                    self.run_body(body)?;
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, expr: &Expr) -> Result<i64, RuntimeErrorKind> {
        match &expr.kind {
            ExprKind::Int(v) => Ok(*v),
            ExprKind::Var(id) => self.vars[*id as usize].ok_or_else(|| {
                RuntimeErrorKind::UndefinedVar(self.program.ident_name(*id).to_string())
            }),
            ExprKind::Bin { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(RuntimeErrorKind::Overflow),
                    BinOp::Sub => a.checked_sub(b).ok_or(RuntimeErrorKind::Overflow),
                    BinOp::Mul => a.checked_mul(b).ok_or(RuntimeErrorKind::Overflow),
                    BinOp::Div => {
                        if b == 0 {
                            Err(RuntimeErrorKind::DivisionByZero)
                        } else {
                            a.checked_div(b).ok_or(RuntimeErrorKind::Overflow)
                        }
                    }
                    BinOp::Mod => {
                        if b == 0 {
                            Err(RuntimeErrorKind::DivisionByZero)
                        } else {
                            a.checked_rem(b).ok_or(RuntimeErrorKind::Overflow)
                        }
                    }
                    BinOp::Lt => Ok((a < b) as i64),
                    BinOp::Gt => Ok((a > b) as i64),
                    BinOp::Le => Ok((a <= b) as i64),
                    BinOp::Ge => Ok((a >= b) as i64),
                    BinOp::Eq => Ok((a == b) as i64),
                    BinOp::Ne => Ok((a != b) as i64),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::compile;

    const BRANCHY: &str = "x = read ( ) ; if x > 0 { print x ; } else { print 0 - x ; }";

    #[test]
    fn then_branch_executes_and_else_is_untraced() {
        let p = compile(BRANCHY).unwrap();
        let (status, trace) = execute(&p, &[5], DEFAULT_FUEL);
        assert_eq!(status, ExecStatus::Completed { output: vec![5] });
        // Statements: read(0), if(1), then-print(2), else-print(3).
        assert!(trace.contains(0) && trace.contains(1) && trace.contains(2));
        assert!(!trace.contains(3));
    }

    #[test]
    fn else_branch_on_negative_input() {
        let p = compile(BRANCHY).unwrap();
        let (status, trace) = execute(&p, &[-7], DEFAULT_FUEL);
        assert_eq!(status, ExecStatus::Completed { output: vec![7] });
        assert!(!trace.contains(2));
        assert!(trace.contains(3));
    }

    #[test]
    fn empty_input_read_errors() {
        let p = compile(BRANCHY).unwrap();
        let (status, _) = execute(&p, &[], DEFAULT_FUEL);
        assert_eq!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::ReadPastEnd
            }
        );
    }

    #[test]
    fn infinite_loop_exhausts_fuel() {
        let p = compile("while 1 > 0 { x = 1 ; }").unwrap();
        let (status, trace) = execute(&p, &[], 100);
        assert_eq!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::FuelExhausted
            }
        );
        assert!(trace.contains(0) && trace.contains(1));
    }

    #[test]
    fn empty_body_loop_still_burns_fuel() {
        let p = compile("while 1 > 0 { }").unwrap();
        let (status, _) = execute(&p, &[], 1000);
        assert_eq!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::FuelExhausted
            }
        );
    }

    #[test]
    fn division_semantics() {
        let p = compile("print 7 / 2 ; print 0 - 7 / 2 ; print 7 % 3 ; print 0 - 7 % 3 ;").unwrap();
        let (status, _) = execute(&p, &[], DEFAULT_FUEL);
        // Flat left-associative chains: `0 - 7 / 2` is ((0-7)/2) = -3 and
        // `0 - 7 % 3` is ((0-7)%3) = -1, both truncating toward zero.
        assert_eq!(
            status,
            ExecStatus::Completed {
                output: vec![3, -3, 1, -1]
            }
        );
    }

    #[test]
    fn negative_dividend_truncates_toward_zero() {
        let p = compile("a = 0 - 7 ; print a / 2 ; print a % 3 ;").unwrap();
        let (status, _) = execute(&p, &[], DEFAULT_FUEL);
        assert_eq!(
            status,
            ExecStatus::Completed {
                output: vec![-3, -1]
            }
        );
    }

    #[test]
    fn division_by_zero_errors() {
        let p = compile("x = read ( ) ; print 1 / x ;").unwrap();
        let (status, _) = execute(&p, &[0], DEFAULT_FUEL);
        assert_eq!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::DivisionByZero
            }
        );
    }

    #[test]
    fn overflow_is_runtime_error() {
        let p = compile("a = 9223372036854775807 ; b = a + 1 ; print b ;").unwrap();
        let (status, _) = execute(&p, &[], DEFAULT_FUEL);
        assert_eq!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::Overflow
            }
        );
    }

    #[test]
    fn undefined_variable_errors() {
        let p = compile("print q ;").unwrap();
        let (status, _) = execute(&p, &[], DEFAULT_FUEL);
        assert!(matches!(
            status,
            ExecStatus::RuntimeError {
                kind: RuntimeErrorKind::UndefinedVar(_)
            }
        ));
    }

    #[test]
    fn determinism_bit_identical() {
        let p = compile("n = read ( ) ; s = 0 ; while n > 0 { s = s + n ; n = n - 1 ; } print s ;")
            .unwrap();
        let a = execute(&p, &[5], DEFAULT_FUEL);
        let b = execute(&p, &[5], DEFAULT_FUEL);
        assert_eq!(a, b);
    }

    #[test]
    fn straight_line_completion_covers_every_statement() {
        let p = compile("a = 1 ; b = a + 2 ; print a * b ;").unwrap();
        let (status, trace) = execute(&p, &[], DEFAULT_FUEL);
        assert!(status.is_completed());
        assert_eq!(trace.executed_count(), p.stmt_count());
    }

    #[test]
    fn fuel_monotonicity_on_completion() {
        let p = compile("n = read ( ) ; while n > 0 { n = n - 1 ; } print n ;").unwrap();
        // Find the minimal completing fuel, then confirm identity above it.
        let mut min_fuel = None;
        for f in 1..200 {
            let (status, _) = execute(&p, &[6], f);
            if status.is_completed() {
                min_fuel = Some(f);
                break;
            }
        }
        let f = min_fuel.expect("program completes within 200 fuel");
        let base = execute(&p, &[6], f);
        for extra in [1, 7, 1000] {
            assert_eq!(execute(&p, &[6], f + extra), base);
        }
    }
}
