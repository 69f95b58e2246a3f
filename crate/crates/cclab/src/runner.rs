//! Execute generated code against a task's unit tests, classify the
//! outcome, map it to the scalar reward, and estimate pass@k.
//!
//! Classification precedence: compile error (the text does not parse)
//! dominates everything; otherwise any test with a runtime error dominates
//! any wrong output; only a program whose output matches every test passes.
//! All tests run even after an early failure so coverage unions stay
//! complete for masking.

use serde::{Deserialize, Serialize};

use ml0::{compile, execute, CoverageTrace, ExecStatus, Program};

use crate::corpus::UnitTest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    PassedAll,
    Failed,
    RuntimeError,
    CompileError,
}

pub const CATEGORIES: [Category; 4] = [
    Category::PassedAll,
    Category::Failed,
    Category::RuntimeError,
    Category::CompileError,
];

impl Category {
    pub fn index(self) -> usize {
        match self {
            Category::PassedAll => 0,
            Category::Failed => 1,
            Category::RuntimeError => 2,
            Category::CompileError => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::PassedAll => "passed-all",
            Category::Failed => "failed",
            Category::RuntimeError => "runtime-error",
            Category::CompileError => "compile-error",
        }
    }
}

/// Scalar reward for an outcome category.
pub fn reward_of(category: Category) -> f64 {
    match category {
        Category::PassedAll => 1.0,
        Category::Failed => -0.3,
        Category::RuntimeError => -0.6,
        Category::CompileError => -1.0,
    }
}

/// Result of running one unit test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRun {
    pub status: ExecStatus,
    pub trace: CoverageTrace,
}

impl TestRun {
    pub fn output(&self) -> Option<&[i64]> {
        self.status.output()
    }
}

/// Outcome of running a candidate program against all unit tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecReport {
    pub category: Category,
    /// One entry per unit test; empty iff the program did not compile.
    pub per_test: Vec<TestRun>,
    pub reward: f64,
}

/// Run `code` against every test and classify. Never fails: all failure
/// modes are categories.
pub fn run_tests(code: &str, tests: &[UnitTest], fuel: u64) -> ExecReport {
    run_tests_detailed(code, tests, fuel).0
}

/// Like [`run_tests`] but also hands back the parsed program when the code
/// compiled, so callers can reuse it for mask construction.
pub fn run_tests_detailed(
    code: &str,
    tests: &[UnitTest],
    fuel: u64,
) -> (ExecReport, Option<Program>) {
    let program = match compile(code) {
        Ok(p) => p,
        Err(_) => {
            return (
                ExecReport {
                    category: Category::CompileError,
                    per_test: Vec::new(),
                    reward: reward_of(Category::CompileError),
                },
                None,
            )
        }
    };

    let mut per_test = Vec::with_capacity(tests.len());
    let mut any_error = false;
    let mut any_mismatch = false;
    for test in tests {
        let (status, trace) = execute(&program, &test.input, fuel);
        match status.output() {
            Some(out) => {
                if out != test.expected.as_slice() {
                    any_mismatch = true;
                }
            }
            None => any_error = true,
        }
        per_test.push(TestRun { status, trace });
    }

    let category = if any_error {
        Category::RuntimeError
    } else if any_mismatch {
        Category::Failed
    } else {
        Category::PassedAll
    };
    (
        ExecReport {
            category,
            per_test,
            reward: reward_of(category),
        },
        Some(program),
    )
}

/// Unbiased pass@k estimate from `n` samples with `c` passing:
/// `1 - C(n-c, k) / C(n, k)`, computed in product form.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> f64 {
    assert!(c <= n, "c must not exceed n");
    assert!(k >= 1 && k <= n, "k must be in 1..=n");
    if n - c < k {
        return 1.0;
    }
    let mut ratio = 1.0f64;
    for i in 0..k {
        ratio *= (n - c - i) as f64 / (n - i) as f64;
    }
    1.0 - ratio
}
