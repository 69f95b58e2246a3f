//! End-to-end training orchestration: corpus validation, SFT warm start,
//! frozen reference copy, rollout collection with curriculum prompts and
//! coverage masks, PPO updates, curriculum bookkeeping, periodic
//! evaluation, metrics emission, and checkpointing.
//!
//! Everything stochastic draws from seeds derived from
//! `(config.seed, purpose, indices)`, so runs are bit-reproducible and a
//! resumed run continues the exact stream of the uninterrupted one.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ml0::CoverageTrace;

use crate::checkpoint::{self, Checkpoint};
use crate::corpus::{load_corpus, validate_instance, TaskInstance};
use crate::curriculum::{
    build_prompt, init_state, record_outcome, CccsConfig, CurriculumState, PreparedTask,
};
use crate::fgo::{fgo_mask, TokenMask};
use crate::metrics::{MetricsRecord, MetricsWriter};
use crate::optim::{AdamConfig, AdamState};
use crate::policy::{ModelConfig, PolicyParams, SampleConfig};
use crate::rl::{ppo_update, prepare_rollout, PpoConfig, Rollout};
use crate::rng::derive_seed;
use crate::runner::{pass_at_k, run_tests_detailed, Category};
use crate::sft::{sft_train, SftConfig};
use crate::vocab::{TokId, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus_train: PathBuf,
    pub corpus_eval: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub sft_epochs: usize,
    pub sft_lr: f64,
    pub sft_batch: usize,
    /// RL updates to run.
    pub updates: u64,
    /// Tasks sampled per update (the mini-batch M).
    pub batch_tasks: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub eval_temperature: f64,
    pub eval_top_p: f64,
    /// Samples per task during evaluation.
    pub eval_n: usize,
    pub eval_k: usize,
    /// Evaluate every this many updates; 0 = only at the end.
    pub eval_every: u64,
    /// Checkpoint every this many updates; 0 = only at the end.
    pub checkpoint_every: u64,
    pub ppo: PpoConfig,
    pub cccs: CccsConfig,
    pub disable_cccs: bool,
    pub disable_fgo: bool,
    pub fuel: u64,
    pub model_embed: usize,
    pub model_hidden: usize,
    pub lr_policy: f64,
    pub lr_critic: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            corpus_train: PathBuf::from("train.jsonl"),
            corpus_eval: None,
            out_dir: PathBuf::from("run"),
            sft_epochs: 3,
            sft_lr: 1e-3,
            sft_batch: 8,
            updates: 300,
            batch_tasks: 8,
            temperature: 0.8,
            top_p: 0.9,
            max_new_tokens: 64,
            eval_temperature: 0.2,
            eval_top_p: 0.95,
            eval_n: 4,
            eval_k: 1,
            eval_every: 25,
            checkpoint_every: 100,
            ppo: PpoConfig::default(),
            cccs: CccsConfig::default(),
            disable_cccs: false,
            disable_fgo: false,
            fuel: ml0::DEFAULT_FUEL,
            model_embed: 48,
            model_hidden: 96,
            lr_policy: 3e-4,
            lr_critic: 9e-4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("corpus error: {0}")]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("corpus validation failed: instance {id} rejected ({reason})")]
    Validation { id: String, reason: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] crate::checkpoint::CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

type Result<T> = std::result::Result<T, TrainError>;

/// Aggregate evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pass_at_k: f64,
    pub k: usize,
    pub n: usize,
    /// Per task: (samples, passes).
    pub per_task: Vec<(u64, u64)>,
    /// Rollout counts by category over all eval samples.
    pub histogram: [u64; 4],
}

pub struct TrainOutcome {
    pub metrics_path: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub final_eval: Option<EvalReport>,
    pub params: PolicyParams,
}

/// Validate every instance, aborting on the first rejection.
pub fn validate_corpus(tasks: &[TaskInstance], fuel: u64) -> Result<()> {
    for inst in tasks {
        let report = validate_instance(inst, fuel);
        if !report.accepted() {
            return Err(TrainError::Validation {
                id: inst.id.clone(),
                reason: report.reject_reason().unwrap_or("unknown").to_string(),
            });
        }
    }
    Ok(())
}

/// One assembled rollout plus collection-order bookkeeping.
struct Collected {
    rollouts: Vec<Rollout>,
}

/// Sample `batch_tasks` distinct task indices for an update.
fn sample_task_indices(seed: u64, update: u64, n_tasks: usize, batch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_tasks).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "tasks", &[update]));
    let take = batch.min(n_tasks);
    for i in 0..take {
        let j = rng.gen_range(i..n_tasks);
        order.swap(i, j);
    }
    order.truncate(take);
    order
}

/// Decode a sampled completion into the full program pieces and the
/// coverage mask aligned to completion tokens.
#[allow(clippy::too_many_arguments)]
fn score_rollout(
    vocab: &Vocab,
    task: &PreparedTask,
    prefix_pieces: &[TokId],
    completion: &[TokId],
    fuel: u64,
    disable_fgo: bool,
) -> (f64, Category, TokenMask) {
    // Completion code = generated tokens up to (not including) EOS.
    let has_eos = completion.last() == Some(&vocab.eos);
    let code: &[TokId] = if has_eos {
        &completion[..completion.len() - 1]
    } else {
        completion
    };
    let mut full: Vec<TokId> = Vec::with_capacity(prefix_pieces.len() + code.len());
    full.extend_from_slice(prefix_pieces);
    full.extend_from_slice(code);
    let source = vocab.decode_pieces(&full);
    let (report, program) = run_tests_detailed(&source, &task.instance.tests, fuel);

    let mask = if disable_fgo {
        TokenMask::all_ones(completion.len())
    } else {
        let traces: Vec<CoverageTrace> =
            report.per_test.iter().map(|t| t.trace.clone()).collect();
        let full_mask = fgo_mask(vocab, &full, program.as_ref(), &traces);
        let mut flags: Vec<bool> = full_mask.flags[prefix_pieces.len()..].to_vec();
        if has_eos {
            // The stop decision is always reward-relevant.
            flags.push(true);
        }
        TokenMask { flags }
    };
    debug_assert_eq!(mask.len(), completion.len());
    (report.reward, report.category, mask)
}

/// Collect `rollouts_per_sample` completions for each selected task.
#[allow(clippy::too_many_arguments)]
fn collect_rollouts(
    params: &PolicyParams,
    ref_params: &PolicyParams,
    vocab: &Vocab,
    tasks: &[PreparedTask],
    states: &[CurriculumState],
    chosen: &[usize],
    cfg: &RunConfig,
    update: u64,
) -> Collected {
    let mut raw: Vec<(usize, crate::policy::Trajectory, f64, Category, TokenMask)> = Vec::new();
    for &task_idx in chosen {
        let task = &tasks[task_idx];
        let prompt = build_prompt(vocab, task, &states[task_idx]);
        let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
        for j in 0..cfg.ppo.rollouts_per_sample {
            let sample_cfg = SampleConfig {
                temperature: cfg.temperature,
                top_p: cfg.top_p,
                max_new_tokens: cfg.max_new_tokens,
                seed: derive_seed(cfg.seed, "rollout", &[update, task_idx as u64, j as u64]),
            };
            let traj = params.sample(&prompt.ids, &sample_cfg, vocab.eos);
            let (reward, category, mask) = score_rollout(
                vocab,
                task,
                prefix,
                traj.completion(),
                cfg.fuel,
                cfg.disable_fgo,
            );
            raw.push((task_idx, traj, reward, category, mask));
        }
    }

    // Teacher-forced log-probs and values under the collection policy and
    // the frozen reference, batched over all rollouts.
    let seqs: Vec<Vec<TokId>> = raw.iter().map(|(_, t, _, _, _)| t.ids.clone()).collect();
    let (old_lp, old_v) = params.logprobs_values_batch(&seqs, vocab.pad);
    let (ref_lp, _) = ref_params.logprobs_values_batch(&seqs, vocab.pad);

    let mut rollouts = Vec::with_capacity(raw.len());
    for (i, (task_idx, traj, reward, category, mask)) in raw.into_iter().enumerate() {
        let p = traj.prompt_len;
        let n = traj.ids.len() - p;
        // Position p-1+j scores completion token j.
        let lp_old: Vec<f64> = (0..n).map(|j| old_lp[i][p - 1 + j]).collect();
        let lp_ref: Vec<f64> = (0..n).map(|j| ref_lp[i][p - 1 + j]).collect();
        let values: Vec<f64> = (0..n).map(|j| old_v[i][p - 1 + j]).collect();
        let mut rollout = Rollout {
            task_idx,
            ids: traj.ids,
            prompt_len: p,
            logprobs_old: lp_old,
            ref_logprobs: lp_ref,
            values,
            mask,
            terminal_reward: reward,
            category,
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        prepare_rollout(&mut rollout, &cfg.ppo);
        rollouts.push(rollout);
    }
    Collected { rollouts }
}

/// Evaluate without touching the params: sample `n` completions per task
/// at stage-zero prompts and report mean pass@k plus the category
/// histogram.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    params: &PolicyParams,
    vocab: &Vocab,
    tasks: &[PreparedTask],
    n: usize,
    k: usize,
    cfg: &RunConfig,
    seed_tag: u64,
) -> EvalReport {
    assert!(k >= 1 && k <= n, "eval needs n >= k >= 1");
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut histogram = [0u64; 4];
    let mut pass_sum = 0.0;
    for (ti, task) in tasks.iter().enumerate() {
        let mut prompt_ids = vec![vocab.bos];
        prompt_ids.extend_from_slice(&task.x_ids);
        let mut correct = 0u64;
        for s in 0..n {
            let sample_cfg = SampleConfig {
                temperature: cfg.eval_temperature,
                top_p: cfg.eval_top_p,
                max_new_tokens: cfg.max_new_tokens,
                seed: derive_seed(cfg.seed, "eval", &[seed_tag, ti as u64, s as u64]),
            };
            let traj = params.sample(&prompt_ids, &sample_cfg, vocab.eos);
            let (reward, category, _) =
                score_rollout(vocab, task, &[], traj.completion(), cfg.fuel, true);
            let _ = reward;
            histogram[category.index()] += 1;
            if category == Category::PassedAll {
                correct += 1;
            }
        }
        pass_sum += pass_at_k(n as u64, correct, k as u64);
        per_task.push((n as u64, correct));
    }
    EvalReport {
        pass_at_k: pass_sum / tasks.len() as f64,
        k,
        n,
        per_task,
        histogram,
    }
}

/// Run training from scratch.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let train_tasks = load_corpus(&cfg.corpus_train)?;
    if train_tasks.is_empty() {
        return Err(TrainError::Other("training corpus is empty".into()));
    }
    validate_corpus(&train_tasks, cfg.fuel)?;
    let eval_tasks = match &cfg.corpus_eval {
        Some(path) => {
            let tasks = load_corpus(path)?;
            validate_corpus(&tasks, cfg.fuel)?;
            Some(tasks)
        }
        None => None,
    };

    let vocab = Vocab::standard();
    let model_cfg = ModelConfig {
        vocab: vocab.len(),
        embed: cfg.model_embed,
        hidden: cfg.model_hidden,
    };
    let mut params = PolicyParams::init(model_cfg, derive_seed(cfg.seed, "init", &[]));

    // Supervised warm start, then freeze the reference.
    if cfg.sft_epochs > 0 {
        let sft_cfg = SftConfig {
            epochs: cfg.sft_epochs,
            lr: cfg.sft_lr,
            batch_size: cfg.sft_batch,
            seed: derive_seed(cfg.seed, "sft", &[]),
        };
        let losses = sft_train(
            &mut params,
            &train_tasks,
            &vocab,
            &sft_cfg,
            &AdamConfig::default(),
        );
        eprintln!("sft epochs: nll {losses:?}");
    }
    let ref_params = params.clone();
    let adam = AdamState::new(&params);

    let mut states: Vec<CurriculumState> = train_tasks
        .iter()
        .map(|t| {
            let mut s = init_state(t.cond_count() as u32);
            if cfg.disable_cccs {
                s.stage = 0;
            }
            s
        })
        .collect();

    std::fs::create_dir_all(&cfg.out_dir)?;
    let metrics_path = cfg.out_dir.join("metrics.jsonl");
    let writer = MetricsWriter::create(&metrics_path)?;
    run_loop(
        cfg,
        vocab,
        train_tasks,
        eval_tasks,
        params,
        ref_params,
        adam,
        &mut states,
        writer,
        0,
        metrics_path,
    )
}

/// Resume a checkpointed run and continue to `config.updates`.
pub fn resume(checkpoint_dir: &std::path::Path) -> Result<TrainOutcome> {
    let Checkpoint {
        params,
        ref_params,
        adam,
        curriculum,
        config,
        manifest,
    } = checkpoint::load_checkpoint(checkpoint_dir)?;
    let train_tasks = load_corpus(&config.corpus_train)?;
    validate_corpus(&train_tasks, config.fuel)?;
    let eval_tasks = match &config.corpus_eval {
        Some(path) => {
            let tasks = load_corpus(path)?;
            validate_corpus(&tasks, config.fuel)?;
            Some(tasks)
        }
        None => None,
    };
    if curriculum.len() != train_tasks.len() {
        return Err(TrainError::Other(
            "checkpoint curriculum does not match corpus size".into(),
        ));
    }
    let vocab = Vocab::standard();
    let metrics_path = config.out_dir.join("metrics.jsonl");
    let writer = MetricsWriter::append(&metrics_path)?;
    let mut states = curriculum;
    let cfg = config.clone();
    run_loop(
        &cfg,
        vocab,
        train_tasks,
        eval_tasks,
        params,
        ref_params,
        adam,
        &mut states,
        writer,
        manifest.update,
        metrics_path,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    cfg: &RunConfig,
    vocab: Vocab,
    train_tasks: Vec<TaskInstance>,
    eval_tasks: Option<Vec<TaskInstance>>,
    mut params: PolicyParams,
    ref_params: PolicyParams,
    mut adam: AdamState,
    states: &mut Vec<CurriculumState>,
    mut writer: MetricsWriter,
    start_update: u64,
    metrics_path: PathBuf,
) -> Result<TrainOutcome> {
    let prepared: Vec<PreparedTask> = train_tasks
        .iter()
        .map(|t| PreparedTask::new(&vocab, t.clone()))
        .collect();
    let prepared_eval: Option<Vec<PreparedTask>> = eval_tasks.as_ref().map(|tasks| {
        tasks
            .iter()
            .map(|t| PreparedTask::new(&vocab, t.clone()))
            .collect()
    });
    let ckpt_dir = checkpoint::checkpoint_dir(&cfg.out_dir);
    let started = Instant::now();

    for update in start_update..cfg.updates {
        let chosen = sample_task_indices(cfg.seed, update, prepared.len(), cfg.batch_tasks);
        let mut collected = collect_rollouts(
            &params, &ref_params, &vocab, &prepared, states, &chosen, cfg, update,
        );
        let stats = ppo_update(
            &mut params,
            &mut adam,
            &AdamConfig::default(),
            &mut collected.rollouts,
            &cfg.ppo,
            cfg.lr_policy,
            cfg.lr_critic,
            vocab.pad,
            derive_seed(cfg.seed, "ppo", &[update]),
        );

        // Curriculum bookkeeping, one outcome per rollout in collection
        // order.
        if !cfg.disable_cccs {
            for rollout in &collected.rollouts {
                record_outcome(
                    &mut states[rollout.task_idx],
                    rollout.category == Category::PassedAll,
                    &cfg.cccs,
                );
            }
        }

        // pass@1 on this update's rollouts, per task then averaged.
        let mut pass1_train = 0.0;
        for &task_idx in &chosen {
            let mut n = 0u64;
            let mut c = 0u64;
            for r in &collected.rollouts {
                if r.task_idx == task_idx {
                    n += 1;
                    if r.category == Category::PassedAll {
                        c += 1;
                    }
                }
            }
            pass1_train += pass_at_k(n, c, 1);
        }
        pass1_train /= chosen.len() as f64;

        let is_last = update + 1 == cfg.updates;
        let eval_due = cfg.eval_every > 0 && (update + 1) % cfg.eval_every == 0;
        let pass1_eval = match (&prepared_eval, eval_due || is_last) {
            (Some(tasks), true) => Some(
                evaluate(&params, &vocab, tasks, cfg.eval_n, cfg.eval_k, cfg, update + 1)
                    .pass_at_k,
            ),
            _ => None,
        };

        let mean_stage =
            states.iter().map(|s| s.stage as f64).sum::<f64>() / states.len() as f64;
        let record = MetricsRecord {
            update,
            passed: stats.category_counts[0],
            failed: stats.category_counts[1],
            runtime_error: stats.category_counts[2],
            compile_error: stats.category_counts[3],
            mean_reward: stats.mean_reward,
            pass1_train,
            pass1_eval,
            mean_stage,
            masked_fraction: stats.masked_fraction,
            kl_mean: stats.kl_mean,
            clip_fraction: stats.clip_fraction,
            value_loss: stats.value_loss,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        };
        writer.write(&record)?;
        if update % 20 == 0 || is_last {
            eprintln!(
                "update {update}: reward {:.3} pass1 {:.3} stage {:.2} masked {:.3} ({} ms)",
                record.mean_reward, record.pass1_train, record.mean_stage, record.masked_fraction,
                record.wall_clock_ms
            );
        }

        let ckpt_due = cfg.checkpoint_every > 0 && (update + 1) % cfg.checkpoint_every == 0;
        if ckpt_due || is_last {
            checkpoint::save_checkpoint(
                &ckpt_dir,
                &params,
                &ref_params,
                &adam,
                states,
                cfg,
                &vocab,
                update + 1,
            )?;
        }
    }

    // A zero-update run still writes a checkpoint so eval tooling works.
    if start_update >= cfg.updates {
        checkpoint::save_checkpoint(
            &ckpt_dir, &params, &ref_params, &adam, states, cfg, &vocab, cfg.updates,
        )?;
    }

    let final_eval = prepared_eval.as_ref().map(|tasks| {
        evaluate(
            &params,
            &vocab,
            tasks,
            cfg.eval_n,
            cfg.eval_k,
            cfg,
            u64::MAX,
        )
    });

    Ok(TrainOutcome {
        metrics_path,
        checkpoint_dir: ckpt_dir,
        final_eval,
        params,
    })
}
