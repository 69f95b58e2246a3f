//! Synthetic task corpus: generation from a closed template library,
//! validation, serialization, and the train/val/test split.
//!
//! Each task pairs a descriptor token sequence `x` (template id plus digit
//! parameters) with a canonical ML0 solution `y`, unit tests whose expected
//! outputs are computed by executing `y`, and the token spans of `y`'s
//! conditional statements.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ml0::{compile, execute, extract_conditionals};

/// One input/expected-output pair for a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTest {
    pub input: Vec<i64>,
    pub expected: Vec<i64>,
}

/// E-bucket difficulty label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difficulty {
    #[serde(rename = "0-1")]
    Low,
    #[serde(rename = "2-3")]
    Mid,
    #[serde(rename = "4+")]
    High,
}

impl Difficulty {
    pub fn from_cond_count(e: usize) -> Difficulty {
        match e {
            0 | 1 => Difficulty::Low,
            2 | 3 => Difficulty::Mid,
            _ => Difficulty::High,
        }
    }
}

/// One training sample: descriptor, canonical solution, unit tests, and
/// conditional-statement token spans of the solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub x: Vec<String>,
    pub y: String,
    pub tests: Vec<UnitTest>,
    pub cond_spans: Vec<SpanRec>,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRec {
    pub st: u32,
    pub en: u32,
}

impl TaskInstance {
    pub fn cond_count(&self) -> usize {
        self.cond_spans.len()
    }
}

/// The eight templates of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Sum,
    Max,
    CountAbove,
    AbsDiff,
    Clamp,
    Parity,
    RunMin,
    Gated,
}

pub const TEMPLATE_KINDS: [TemplateKind; 8] = [
    TemplateKind::Sum,
    TemplateKind::Max,
    TemplateKind::CountAbove,
    TemplateKind::AbsDiff,
    TemplateKind::Clamp,
    TemplateKind::Parity,
    TemplateKind::RunMin,
    TemplateKind::Gated,
];

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Sum => "sum",
            TemplateKind::Max => "max",
            TemplateKind::CountAbove => "count_above",
            TemplateKind::AbsDiff => "abs_diff",
            TemplateKind::Clamp => "clamp",
            TemplateKind::Parity => "parity",
            TemplateKind::RunMin => "run_min",
            TemplateKind::Gated => "gated",
        }
    }

    pub fn task_token(self) -> String {
        format!("<task:{}>", self.name())
    }
}

/// Generator settings; the file form is flat `key = value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Relative draw weight per template, in `TEMPLATE_KINDS` order.
    pub weights: [f64; 8],
    /// Unit tests per instance; values below 3 are raised to 3.
    pub tests_per_instance: usize,
    /// Inclusive range for drawn data values.
    pub value_min: i64,
    pub value_max: i64,
    /// Inclusive bounds on the conditional count E of generated solutions.
    pub min_cond: u32,
    pub max_cond: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            weights: [1.0; 8],
            tests_per_instance: 3,
            value_min: -9,
            value_max: 20,
            min_cond: 0,
            max_cond: 8,
        }
    }
}

/// A drawn template with concrete parameters.
#[derive(Debug, Clone)]
struct TemplateInstance {
    kind: TemplateKind,
    /// Digit parameters, meaning depends on the template.
    params: Vec<u8>,
}

impl TemplateInstance {
    fn draw(kind: TemplateKind, rng: &mut ChaCha8Rng, cfg: &GenConfig) -> TemplateInstance {
        let params = match kind {
            TemplateKind::Sum => vec![rng.gen_range(0..=9)],
            TemplateKind::Max => vec![rng.gen_range(0..=9)],
            TemplateKind::CountAbove => vec![rng.gen_range(0..=9)],
            TemplateKind::AbsDiff => vec![rng.gen_range(1..=9)],
            TemplateKind::Clamp => {
                let lo = rng.gen_range(0..=4);
                let hi = rng.gen_range(5..=9);
                vec![lo, hi]
            }
            TemplateKind::Parity => vec![rng.gen_range(0..=1)],
            TemplateKind::RunMin => vec![rng.gen_range(0..=9)],
            TemplateKind::Gated => {
                let lo = cfg.min_cond.min(8) as u8;
                let hi = cfg.max_cond.min(8) as u8;
                let stages = rng.gen_range(lo..=hi);
                let mut params = vec![stages];
                for j in 1..=stages {
                    if j % 2 == 1 {
                        params.push(rng.gen_range(1..=5)); // while-loop bound
                    } else {
                        params.push(rng.gen_range(0..=9)); // if-gate threshold
                    }
                }
                params
            }
        };
        TemplateInstance { kind, params }
    }

    fn descriptor(&self) -> Vec<String> {
        let mut x = vec![self.kind.task_token()];
        x.extend(self.params.iter().map(|p| p.to_string()));
        x
    }

    fn source(&self) -> String {
        let p = &self.params;
        match self.kind {
            TemplateKind::Sum => {
                "n = read ( ) ; s = 0 ; while n > 0 { v = read ( ) ; s = s + v ; n = n - 1 ; } print s + K ;"
                    .replace('K', &p[0].to_string())
            }
            TemplateKind::Max => {
                "n = read ( ) ; m = read ( ) ; n = n - 1 ; while n > 0 { v = read ( ) ; if v > m { m = v ; } n = n - 1 ; } print m + K ;"
                    .replace('K', &p[0].to_string())
            }
            TemplateKind::CountAbove => {
                "n = read ( ) ; c = 0 ; while n > 0 { v = read ( ) ; if v > T { c = c + 1 ; } n = n - 1 ; } print c ;"
                    .replace('T', &p[0].to_string())
            }
            TemplateKind::AbsDiff => {
                "a = read ( ) ; b = read ( ) ; d = a - b ; if d < 0 { d = 0 - d ; } print d * K ;"
                    .replace('K', &p[0].to_string())
            }
            TemplateKind::Clamp => {
                "x = read ( ) ; if x < L { x = L ; } if x > H { x = H ; } print x ;"
                    .replace('L', &p[0].to_string())
                    .replace('H', &p[1].to_string())
            }
            TemplateKind::Parity => {
                "n = read ( ) ; while n > 0 { v = read ( ) ; r = v % 2 ; if r == P { print v ; } n = n - 1 ; }"
                    .replace('P', &p[0].to_string())
            }
            TemplateKind::RunMin => {
                "n = read ( ) ; m = read ( ) ; print m + K ; n = n - 1 ; while n > 0 { v = read ( ) ; if v < m { m = v ; } print m + K ; n = n - 1 ; }"
                    .replace('K', &p[0].to_string())
            }
            TemplateKind::Gated => {
                let mut src = String::from("s = read ( ) ; ");
                for (j, &t) in p[1..].iter().enumerate() {
                    let stage = j + 1;
                    if stage % 2 == 1 {
                        src.push_str(&format!(
                            "i = {t} ; while i > 0 {{ v = read ( ) ; s = s + v ; i = i - 1 ; }} "
                        ));
                    } else {
                        src.push_str(&format!(
                            "v = read ( ) ; if v > {t} {{ s = s + v ; }} "
                        ));
                    }
                }
                src.push_str("print s ;");
                src
            }
        }
    }

    fn gen_input(&self, rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Vec<i64> {
        let val = |rng: &mut ChaCha8Rng| rng.gen_range(cfg.value_min..=cfg.value_max);
        match self.kind {
            TemplateKind::Sum | TemplateKind::CountAbove | TemplateKind::Max
            | TemplateKind::RunMin => {
                let n = rng.gen_range(1..=5i64);
                let mut input = vec![n];
                for _ in 0..n {
                    input.push(val(rng));
                }
                input
            }
            TemplateKind::AbsDiff => vec![val(rng), val(rng)],
            TemplateKind::Clamp => vec![rng.gen_range(-5..=15)],
            TemplateKind::Parity => {
                let n = rng.gen_range(1..=5i64);
                let mut input = vec![n];
                for _ in 0..n {
                    input.push(rng.gen_range(0..=cfg.value_max.max(1)));
                }
                input
            }
            TemplateKind::Gated => {
                let mut input = vec![val(rng)];
                for (j, &t) in self.params[1..].iter().enumerate() {
                    let stage = j + 1;
                    let reads = if stage % 2 == 1 { t as usize } else { 1 };
                    for _ in 0..reads {
                        input.push(val(rng));
                    }
                }
                input
            }
        }
    }
}

/// Deterministic weighted draw of a template kind.
fn draw_kind(rng: &mut ChaCha8Rng, weights: &[f64; 8]) -> TemplateKind {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "template weights must not all be zero");
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return TEMPLATE_KINDS[i];
        }
    }
    TEMPLATE_KINDS[7]
}

fn bucket_reachable(bucket: Difficulty, cfg: &GenConfig) -> bool {
    let gated = cfg.weights[7] > 0.0;
    match bucket {
        Difficulty::Low => {
            cfg.min_cond <= 1
                && (cfg.weights[0] > 0.0 || cfg.weights[3] > 0.0 || gated)
        }
        Difficulty::Mid => {
            cfg.min_cond <= 3
                && cfg.max_cond >= 2
                && (cfg.weights[1] > 0.0
                    || cfg.weights[2] > 0.0
                    || cfg.weights[4] > 0.0
                    || cfg.weights[5] > 0.0
                    || cfg.weights[6] > 0.0
                    || gated)
        }
        Difficulty::High => cfg.max_cond >= 4 && gated,
    }
}

/// Generate a deterministic corpus of `size` tasks.
///
/// Descriptors are unique while the template/parameter pool allows it.
/// When `size >= 3`, one instance per reachable difficulty bucket is
/// guaranteed so stratified experiments never come up empty.
pub fn generate_corpus(seed: u64, size: usize, cfg: &GenConfig) -> Vec<TaskInstance> {
    assert!(size >= 1);
    assert!(cfg.min_cond <= cfg.max_cond);
    let tests_per_instance = cfg.tests_per_instance.max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen_descriptors: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::with_capacity(size);

    let mut wanted_buckets: Vec<Difficulty> = Vec::new();
    if size >= 3 {
        for b in [Difficulty::Low, Difficulty::Mid, Difficulty::High] {
            if bucket_reachable(b, cfg) {
                wanted_buckets.push(b);
            }
        }
    }

    for idx in 0..size {
        let forced_bucket = wanted_buckets.get(idx).copied();
        let mut attempt = 0;
        let chosen = loop {
            attempt += 1;
            let kind = draw_kind(&mut rng, &cfg.weights);
            let ti = TemplateInstance::draw(kind, &mut rng, cfg);
            let program = compile(&ti.source()).expect("template renders valid ML0");
            let e = extract_conditionals(&program).len() as u32;
            if e < cfg.min_cond || e > cfg.max_cond {
                if attempt > 1000 {
                    break ti; // range unsatisfiable by weights; keep last draw
                }
                continue;
            }
            if let Some(b) = forced_bucket {
                if Difficulty::from_cond_count(e as usize) != b && attempt <= 1000 {
                    continue;
                }
            }
            if seen_descriptors.contains(&ti.descriptor()) && attempt <= 50 {
                continue;
            }
            break ti;
        };

        let source = chosen.source();
        let program = compile(&source).expect("template renders valid ML0");
        let spans = extract_conditionals(&program);
        let mut tests = Vec::with_capacity(tests_per_instance);
        for _ in 0..tests_per_instance {
            let input = chosen.gen_input(&mut rng, cfg);
            let (status, _) = execute(&program, &input, ml0::DEFAULT_FUEL);
            let expected = status
                .output()
                .expect("canonical solutions complete on generated inputs")
                .to_vec();
            tests.push(UnitTest { input, expected });
        }
        seen_descriptors.insert(chosen.descriptor());
        out.push(TaskInstance {
            id: format!("t{idx:04}_{}", chosen.kind.name()),
            x: chosen.descriptor(),
            y: source,
            tests,
            cond_spans: spans
                .iter()
                .map(|s| SpanRec { st: s.st, en: s.en })
                .collect(),
            difficulty: Difficulty::from_cond_count(spans.len()),
        });
    }
    out
}

/// Named validation checks, in reporting order.
pub const CHECK_NAMES: [&str; 5] = [
    "parses",
    "executes-within-fuel",
    "has-tests",
    "outputs-match",
    "spans-consistent",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject { reason: String },
}

/// Outcome of the mechanical cleaning checks for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `(check name, passed)` in `CHECK_NAMES` order.
    pub checks: Vec<(String, bool)>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }

    pub fn reject_reason(&self) -> Option<&str> {
        match &self.verdict {
            Verdict::Accept => None,
            Verdict::Reject { reason } => Some(reason),
        }
    }
}

/// Run the cleaning checks on one instance. Failures are report entries,
/// never errors. Checks that depend on a parsed solution fail when the
/// solution does not parse.
pub fn validate_instance(instance: &TaskInstance, fuel: u64) -> ValidationReport {
    let program = compile(&instance.y).ok();

    let parses = program.is_some();
    let has_tests = !instance.tests.is_empty();

    let mut executes = parses;
    let mut outputs_match = parses;
    if let Some(p) = &program {
        for test in &instance.tests {
            let (status, _) = execute(p, &test.input, fuel);
            match status.output() {
                Some(out) => {
                    if out != test.expected.as_slice() {
                        outputs_match = false;
                    }
                }
                None => {
                    executes = false;
                    outputs_match = false;
                }
            }
        }
    }

    let spans_consistent = match &program {
        Some(p) => {
            let fresh: Vec<SpanRec> = extract_conditionals(p)
                .iter()
                .map(|s| SpanRec { st: s.st, en: s.en })
                .collect();
            fresh == instance.cond_spans
        }
        None => false,
    };

    let results = [parses, executes, has_tests, outputs_match, spans_consistent];
    let checks: Vec<(String, bool)> = CHECK_NAMES
        .iter()
        .zip(results)
        .map(|(n, r)| (n.to_string(), r))
        .collect();
    let verdict = match checks.iter().find(|(_, ok)| !ok) {
        None => Verdict::Accept,
        Some((name, _)) => Verdict::Reject {
            reason: name.clone(),
        },
    };
    ValidationReport { checks, verdict }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
}

/// Write one JSON record per line.
pub fn save_corpus(instances: &[TaskInstance], path: &Path) -> Result<(), CorpusError> {
    let mut f = fs::File::create(path)?;
    for inst in instances {
        let line = serde_json::to_string(inst).expect("task instances serialize");
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Read a corpus written by [`save_corpus`]; malformed lines name their
/// line number.
pub fn load_corpus(path: &Path) -> Result<Vec<TaskInstance>, CorpusError> {
    let f = fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: TaskInstance =
            serde_json::from_str(&line).map_err(|e| CorpusError::Line {
                line: i + 1,
                msg: e.to_string(),
            })?;
        out.push(inst);
    }
    Ok(out)
}

/// Seeded 50/25/25 split.
pub fn split_corpus(
    instances: &[TaskInstance],
    seed: u64,
) -> (Vec<TaskInstance>, Vec<TaskInstance>, Vec<TaskInstance>) {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n = instances.len();
    let train_n = n / 2;
    let val_n = n / 4;
    let pick = |range: std::ops::Range<usize>| {
        range
            .map(|i| instances[order[i]].clone())
            .collect::<Vec<_>>()
    };
    (
        pick(0..train_n),
        pick(train_n..train_n + val_n),
        pick(train_n + val_n..n),
    )
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Difficulty::Low => write!(f, "0-1"),
            Difficulty::Mid => write!(f, "2-3"),
            Difficulty::High => write!(f, "4+"),
        }
    }
}
