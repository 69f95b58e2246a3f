//! Per-sample completion curriculum: stage initialization from the
//! conditional count, prompt construction that prepends a shrinking prefix
//! of the canonical solution, and threshold-gated advancement driven by a
//! moving pass rate.
//!
//! A sample with E conditionals gets ceil(sqrt(E)) stages with stride
//! ceil(E / ceil(sqrt(E))). Stage c cuts the solution at the start of
//! conditional `min(s*c, E-1)`; stage 0 is full generation from the
//! descriptor alone and is absorbing.

use serde::{Deserialize, Serialize};

use ml0::{compile, cut_offset, extract_conditionals, CondSpan, Program};

use crate::corpus::TaskInstance;
use crate::vocab::{TokId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    /// Conditional count E of the sample's canonical solution.
    pub cond_count: u32,
    /// Stage decrement granularity in conditional statements.
    pub stride: u32,
    /// Current stage; 0 = full generation.
    pub stage: u32,
    /// Moving pass rate in [0, 1].
    pub pass_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CccsConfig {
    /// Moving-average weight of a new outcome.
    pub alpha: f64,
    /// Advancement threshold on the pass rate.
    pub threshold: f64,
}

impl Default for CccsConfig {
    fn default() -> Self {
        CccsConfig {
            alpha: 0.5,
            threshold: 0.8,
        }
    }
}

/// Smallest k with k*k >= e.
pub fn ceil_sqrt(e: u32) -> u32 {
    let mut k = 0u32;
    while k * k < e {
        k += 1;
    }
    k
}

/// Number of curriculum stages for a sample with `e` conditionals.
pub fn stage_count(e: u32) -> u32 {
    if e == 0 {
        1
    } else {
        ceil_sqrt(e)
    }
}

/// Initial curriculum state: start at the last stage (closest to the goal)
/// with pass rate zero.
pub fn init_state(e: u32) -> CurriculumState {
    if e == 0 {
        return CurriculumState {
            cond_count: 0,
            stride: 1,
            stage: 0,
            pass_rate: 0.0,
        };
    }
    let stages = ceil_sqrt(e);
    let stride = e.div_ceil(stages);
    CurriculumState {
        cond_count: e,
        stride,
        stage: stages - 1,
        pass_rate: 0.0,
    }
}

/// Fold one rollout outcome into the moving pass rate, advancing a stage
/// (and resetting the rate) when the threshold is crossed. Stage 0 is
/// absorbing.
pub fn record_outcome(state: &mut CurriculumState, passed: bool, cfg: &CccsConfig) {
    state.pass_rate = if passed {
        cfg.alpha + (1.0 - cfg.alpha) * state.pass_rate
    } else {
        (1.0 - cfg.alpha) * state.pass_rate
    };
    if state.pass_rate > cfg.threshold {
        state.pass_rate = 0.0;
        state.stage = state.stage.saturating_sub(1);
    }
}

/// A task with everything precomputed for prompt building and rollout
/// scoring.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub instance: TaskInstance,
    pub program: Program,
    pub spans: Vec<CondSpan>,
    /// Descriptor token ids (without BOS).
    pub x_ids: Vec<TokId>,
    /// The canonical solution as vocabulary pieces.
    pub y_pieces: Vec<TokId>,
    /// Lexer-token index of each solution piece.
    pub y_piece_token: Vec<u32>,
}

impl PreparedTask {
    pub fn new(vocab: &Vocab, instance: TaskInstance) -> PreparedTask {
        let program = compile(&instance.y).expect("canonical solution parses");
        let spans = extract_conditionals(&program);
        assert_eq!(
            spans.len(),
            instance.cond_spans.len(),
            "instance {} carries stale spans",
            instance.id
        );
        let x_ids: Vec<TokId> = instance
            .x
            .iter()
            .map(|tok| {
                vocab
                    .id(tok)
                    .unwrap_or_else(|| panic!("descriptor token `{tok}` not in vocabulary"))
            })
            .collect();
        let enc = vocab
            .encode_source(&instance.y)
            .expect("canonical solution encodes");
        PreparedTask {
            instance,
            program,
            spans,
            x_ids,
            y_pieces: enc.pieces,
            y_piece_token: enc.piece_token,
        }
    }

    pub fn cond_count(&self) -> u32 {
        self.spans.len() as u32
    }
}

/// A built prompt: `[bos] x y-prefix`, plus how many solution pieces the
/// prefix contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub ids: Vec<TokId>,
    pub code_prefix_pieces: usize,
}

impl Prompt {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Build the stage prompt: descriptor plus the canonical solution up to
/// the stage's cut offset. At stage 0 the prompt is the descriptor alone.
pub fn build_prompt(vocab: &Vocab, task: &PreparedTask, state: &CurriculumState) -> Prompt {
    let offset = if state.stage == 0 {
        0
    } else {
        cut_offset(&task.spans, state.stage, state.stride)
    };
    let mut ids = Vec::with_capacity(1 + task.x_ids.len() + task.y_pieces.len());
    ids.push(vocab.bos);
    ids.extend_from_slice(&task.x_ids);
    let mut code_prefix_pieces = 0;
    for (piece_idx, &tok_idx) in task.y_piece_token.iter().enumerate() {
        if tok_idx < offset {
            ids.push(task.y_pieces[piece_idx]);
            code_prefix_pieces += 1;
        } else {
            break;
        }
    }
    Prompt {
        ids,
        code_prefix_pieces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GenConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_examples() {
        let s3 = init_state(3);
        assert_eq!((s3.stride, s3.stage, s3.pass_rate), (2, 1, 0.0));
        let s1 = init_state(1);
        assert_eq!((s1.stride, s1.stage), (1, 0));
        let s9 = init_state(9);
        assert_eq!((s9.stride, s9.stage), (3, 2));
        let s0 = init_state(0);
        assert_eq!((s0.stride, s0.stage), (1, 0));
    }

    #[test]
    fn formulas_hold_for_small_e() {
        for e in 1..=16u32 {
            let stages = ceil_sqrt(e);
            let state = init_state(e);
            assert_eq!(state.stride, e.div_ceil(stages));
            assert_eq!(state.stage, stages - 1);
        }
        assert_eq!(ceil_sqrt(16), 4);
        assert_eq!(ceil_sqrt(10), 4);
        assert_eq!(ceil_sqrt(9), 3);
    }

    #[test]
    fn moving_average_fixtures() {
        let cfg = CccsConfig::default();
        let mut s = init_state(4);
        record_outcome(&mut s, true, &cfg);
        assert!((s.pass_rate - 0.5).abs() < 1e-12);
        record_outcome(&mut s, false, &cfg);
        assert!((s.pass_rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn three_consecutive_passes_advance_a_stage() {
        let cfg = CccsConfig::default();
        let mut s = init_state(9); // stages 3, start at stage 2
        record_outcome(&mut s, true, &cfg);
        assert_eq!(s.stage, 2);
        record_outcome(&mut s, true, &cfg);
        assert_eq!(s.stage, 2); // 0.75 not yet over 0.8
        record_outcome(&mut s, true, &cfg);
        assert_eq!(s.stage, 1); // 0.875 crosses
        assert_eq!(s.pass_rate, 0.0);
    }

    #[test]
    fn visited_stage_count_is_ceil_sqrt_e() {
        let cfg = CccsConfig::default();
        for e in 1..=16u32 {
            let mut s = init_state(e);
            let mut visited = std::collections::HashSet::new();
            visited.insert(s.stage);
            for _ in 0..1000 {
                record_outcome(&mut s, true, &cfg);
                visited.insert(s.stage);
            }
            assert_eq!(visited.len() as u32, ceil_sqrt(e), "E={e}");
            assert_eq!(s.stage, 0);
        }
    }

    #[test]
    fn stage_never_increases_and_zero_absorbs() {
        let cfg = CccsConfig::default();
        let mut s = init_state(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut last = s.stage;
        for _ in 0..500 {
            record_outcome(&mut s, rng.gen_bool(0.7), &cfg);
            assert!(s.stage <= last);
            last = s.stage;
        }
        // Force to zero, then keep passing; it must stay at zero.
        for _ in 0..100 {
            record_outcome(&mut s, true, &cfg);
        }
        assert_eq!(s.stage, 0);
    }

    #[test]
    fn pass_rate_stays_in_unit_interval() {
        let cfg = CccsConfig {
            alpha: 0.3,
            threshold: 0.9,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut s = init_state(5);
        for _ in 0..2000 {
            record_outcome(&mut s, rng.gen_bool(0.5), &cfg);
            assert!((0.0..=1.0).contains(&s.pass_rate));
        }
    }

    fn gated_task(stages: u32, seed: u64) -> PreparedTask {
        let vocab = Vocab::standard();
        let mut cfg = GenConfig::default();
        cfg.weights = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        cfg.min_cond = stages;
        cfg.max_cond = stages;
        let inst = generate_corpus(seed, 1, &cfg).remove(0);
        PreparedTask::new(&vocab, inst)
    }

    #[test]
    fn stage_zero_prompt_is_descriptor_alone() {
        let vocab = Vocab::standard();
        let task = gated_task(3, 1);
        let state = CurriculumState {
            stage: 0,
            ..init_state(task.cond_count())
        };
        let prompt = build_prompt(&vocab, &task, &state);
        assert_eq!(prompt.code_prefix_pieces, 0);
        assert_eq!(prompt.len(), 1 + task.x_ids.len());
        assert_eq!(prompt.ids[0], vocab.bos);
        assert_eq!(&prompt.ids[1..], task.x_ids.as_slice());
    }

    #[test]
    fn prompt_ends_exactly_at_cut_conditional() {
        let vocab = Vocab::standard();
        let task = gated_task(3, 2);
        // E = 3: stages 2, stride 2; stage 1 cuts at spans[min(2,2)].st.
        let state = init_state(3);
        assert_eq!(state.stage, 1);
        let prompt = build_prompt(&vocab, &task, &state);
        let offset = task.spans[2].st;
        // Every prefix piece maps to a token before the cut; the next piece
        // would map to the cut token itself.
        let n = prompt.code_prefix_pieces;
        assert!(n > 0);
        assert!(task.y_piece_token[n - 1] < offset);
        assert_eq!(task.y_piece_token[n], offset);
    }

    #[test]
    fn prompt_code_prefix_reparses_standalone() {
        let vocab = Vocab::standard();
        for seed in 0..5 {
            let task = gated_task(4, seed);
            let state = init_state(task.cond_count());
            let prompt = build_prompt(&vocab, &task, &state);
            let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
            let text = vocab.decode_pieces(prefix);
            assert!(
                text.is_empty() || ml0::compile(&text).is_ok(),
                "prefix does not reparse: {text}"
            );
        }
    }

    #[test]
    fn prompt_prefix_shrinks_as_stages_advance() {
        let vocab = Vocab::standard();
        let task = gated_task(8, 3);
        let base = init_state(8);
        // Walk stages from start (highest) down to zero.
        let prefixes: Vec<usize> = (0..=base.stage)
            .rev()
            .map(|stage| {
                build_prompt(&vocab, &task, &CurriculumState { stage, ..base }).code_prefix_pieces
            })
            .collect();
        for w in prefixes.windows(2) {
            assert!(w[1] <= w[0], "prefixes {prefixes:?}");
        }
        assert_eq!(*prefixes.last().unwrap(), 0);
    }
}
