//! PPO machinery: KL-shaped per-token rewards, generalized advantage
//! estimation, and the clipped surrogate update with prompt and coverage
//! masking.
//!
//! A completion token enters the loss only when it sits past the prompt
//! AND its coverage-mask flag is set. Advantages are normalized over that
//! inclusion set across the whole batch, and the value loss uses the same
//! set. Both the policy and value losses are masked.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fgo::TokenMask;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::policy::{log_sum_exp, PolicyParams, SeqBatch};
use crate::rng::derive_seed;
use crate::runner::Category;
use crate::vocab::TokId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    /// Discount factor; episodic completions default to 1.
    pub gamma: f64,
    /// GAE decay.
    pub lam: f64,
    /// Per-token KL penalty coefficient against the frozen reference.
    pub beta: f64,
    /// Surrogate clip radius.
    pub clip: f64,
    /// Weight of the value loss.
    pub value_coef: f64,
    /// Optimization epochs per collected batch.
    pub epochs_per_batch: usize,
    /// Rollouts per gradient step; 0 means the full batch.
    pub minibatch: usize,
    /// Completions sampled per task per update.
    pub rollouts_per_sample: usize,
    /// Fold the KL term into per-token rewards (shaped) rather than adding
    /// a separate loss term.
    pub kl_in_reward: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 1.0,
            lam: 0.95,
            beta: 0.05,
            clip: 0.2,
            value_coef: 0.5,
            epochs_per_batch: 2,
            minibatch: 0,
            rollouts_per_sample: 16,
            kl_in_reward: true,
        }
    }
}

/// One sampled completion with everything the update needs.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// Index of the task this rollout belongs to (trainer bookkeeping).
    pub task_idx: usize,
    /// Prompt tokens followed by generated tokens (EOS included when
    /// emitted).
    pub ids: Vec<TokId>,
    pub prompt_len: usize,
    /// Teacher-forced log-probs of each completion token under the
    /// collection-time policy.
    pub logprobs_old: Vec<f64>,
    /// Same under the frozen reference model.
    pub ref_logprobs: Vec<f64>,
    /// Value head at each completion decision point.
    pub values: Vec<f64>,
    /// Coverage mask aligned to completion tokens.
    pub mask: TokenMask,
    /// Scalar execution reward of the whole attempt.
    pub terminal_reward: f64,
    pub category: Category,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Rollout {
    pub fn completion_len(&self) -> usize {
        self.ids.len() - self.prompt_len
    }

    /// Mean per-token log-ratio against the reference model.
    pub fn kl_sum(&self) -> f64 {
        self.logprobs_old
            .iter()
            .zip(&self.ref_logprobs)
            .map(|(a, b)| a - b)
            .sum()
    }
}

/// Per-token shaped rewards: each completion token pays the KL penalty
/// `-beta * (logprob - ref_logprob)`; the final token additionally receives
/// the terminal execution reward.
pub fn shaped_rewards(
    logprobs_old: &[f64],
    ref_logprobs: &[f64],
    terminal_reward: f64,
    beta: f64,
) -> Vec<f64> {
    assert_eq!(logprobs_old.len(), ref_logprobs.len());
    assert!(!logprobs_old.is_empty());
    let mut rewards: Vec<f64> = logprobs_old
        .iter()
        .zip(ref_logprobs)
        .map(|(lp, rlp)| -beta * (lp - rlp))
        .collect();
    *rewards.last_mut().unwrap() += terminal_reward;
    rewards
}

/// Generalized advantage estimation with terminal bootstrap value zero:
/// `delta_t = r_t + gamma*V_{t+1} - V_t`, `A_t = sum (gamma*lam)^l
/// delta_{t+l}`, `returns_t = A_t + V_t`.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lam: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let v_next = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * v_next - values[t];
        acc = delta + gamma * lam * acc;
        advantages[t] = acc;
    }
    let returns: Vec<f64> = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Fill `advantages`/`returns` from the rollout's rewards.
pub fn prepare_rollout(rollout: &mut Rollout, cfg: &PpoConfig) {
    let rewards = if cfg.kl_in_reward {
        shaped_rewards(
            &rollout.logprobs_old,
            &rollout.ref_logprobs,
            rollout.terminal_reward,
            cfg.beta,
        )
    } else {
        let mut r = vec![0.0; rollout.completion_len()];
        *r.last_mut().unwrap() = rollout.terminal_reward;
        r
    };
    let (adv, ret) = gae(&rewards, &rollout.values, cfg.gamma, cfg.lam);
    rollout.advantages = adv;
    rollout.returns = ret;
}

/// Summary statistics of one PPO update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub mean_reward: f64,
    /// Counts indexed as [passed, failed, runtime-error, compile-error].
    pub category_counts: [u64; 4],
    pub kl_mean: f64,
    pub clip_fraction: f64,
    /// Fraction of completion tokens excluded by the coverage mask.
    pub masked_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub included_tokens: usize,
    pub skipped: bool,
}

/// Clipped-surrogate PPO update over a batch of rollouts.
///
/// Inclusion set: completion tokens with mask flag 1. Advantages are
/// normalized to zero mean / unit variance over that set before the epoch
/// loop. Tokens outside the set contribute nothing to either loss. When
/// the set is empty the update is skipped and reported as such.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    params: &mut PolicyParams,
    adam: &mut AdamState,
    adam_cfg: &AdamConfig,
    rollouts: &mut [Rollout],
    cfg: &PpoConfig,
    lr_policy: f64,
    lr_critic: f64,
    pad: TokId,
    update_seed: u64,
) -> UpdateStats {
    for r in rollouts.iter() {
        let n = r.completion_len();
        assert_eq!(r.logprobs_old.len(), n);
        assert_eq!(r.ref_logprobs.len(), n);
        assert_eq!(r.values.len(), n);
        assert_eq!(r.mask.len(), n);
        assert_eq!(r.advantages.len(), n, "call prepare_rollout first");
    }

    // Batch statistics.
    let mut category_counts = [0u64; 4];
    let mut reward_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut total_tokens = 0usize;
    for r in rollouts.iter() {
        category_counts[r.category.index()] += 1;
        reward_sum += r.terminal_reward;
        kl_sum += r.kl_sum();
        total_tokens += r.completion_len();
    }
    let mean_reward = reward_sum / rollouts.len() as f64;
    let kl_mean = kl_sum / total_tokens.max(1) as f64;

    // Inclusion set and advantage normalization.
    let included_tokens: usize = rollouts.iter().map(|r| r.mask.included()).sum();
    let masked_fraction = 1.0 - included_tokens as f64 / total_tokens.max(1) as f64;
    if included_tokens == 0 {
        return UpdateStats {
            mean_reward,
            category_counts,
            kl_mean,
            clip_fraction: 0.0,
            masked_fraction,
            policy_loss: 0.0,
            value_loss: 0.0,
            included_tokens: 0,
            skipped: true,
        };
    }
    let mut adv_mean = 0.0;
    for r in rollouts.iter() {
        for (j, &flag) in r.mask.flags.iter().enumerate() {
            if flag {
                adv_mean += r.advantages[j];
            }
        }
    }
    adv_mean /= included_tokens as f64;
    let mut adv_var = 0.0;
    for r in rollouts.iter() {
        for (j, &flag) in r.mask.flags.iter().enumerate() {
            if flag {
                let d = r.advantages[j] - adv_mean;
                adv_var += d * d;
            }
        }
    }
    adv_var /= included_tokens as f64;
    let adv_std = adv_var.sqrt();
    let norm_adv: Vec<Vec<f64>> = rollouts
        .iter()
        .map(|r| {
            r.advantages
                .iter()
                .map(|a| {
                    if adv_std > 1e-12 {
                        (a - adv_mean) / (adv_std + 1e-8)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    // Epoch loop.
    let mut clip_events = 0u64;
    let mut clip_opportunities = 0u64;
    let mut policy_loss_acc = 0.0;
    let mut value_loss_acc = 0.0;
    let mut steps = 0u64;
    let minibatch = if cfg.minibatch == 0 {
        rollouts.len()
    } else {
        cfg.minibatch.min(rollouts.len())
    };
    for epoch in 0..cfg.epochs_per_batch {
        let mut order: Vec<usize> = (0..rollouts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            update_seed,
            "ppo-shuffle",
            &[epoch as u64],
        ));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(minibatch) {
            let seqs: Vec<Vec<TokId>> = chunk.iter().map(|&i| rollouts[i].ids.clone()).collect();
            let batch = SeqBatch::from_sequences(&seqs, pad);
            let n_inc: usize = chunk.iter().map(|&i| rollouts[i].mask.included()).sum();
            if n_inc == 0 {
                continue;
            }
            let scale = 1.0 / n_inc as f64;
            let mut chunk_clips = 0u64;
            let mut chunk_policy_loss = 0.0;
            let mut chunk_value_loss = 0.0;
            let (_, grads) = params.grads_with(&batch, |logits, values| {
                let mut dlogits: Vec<Array2<f64>> = logits
                    .iter()
                    .map(|l| Array2::zeros(l.raw_dim()))
                    .collect();
                let mut dvalues = Array2::zeros(values.raw_dim());
                for (bi, &ri) in chunk.iter().enumerate() {
                    let r = &rollouts[ri];
                    for j in 0..r.completion_len() {
                        if !r.mask.flags[j] {
                            continue;
                        }
                        let t = r.prompt_len - 1 + j;
                        let action = r.ids[r.prompt_len + j] as usize;
                        let row = logits[t].row(bi);
                        let row_slice = row.as_slice().unwrap();
                        let lse = log_sum_exp(row_slice);
                        let lp_new = row_slice[action] - lse;
                        let ratio = (lp_new - r.logprobs_old[j]).exp();
                        let a_hat = norm_adv[ri][j];
                        let unclipped = ratio * a_hat;
                        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a_hat;
                        // d(objective)/d(lp_new); zero when the clipped
                        // branch is strictly smaller (ratio outside the
                        // trust region on the penalized side).
                        let (obj, dlp_obj) = if unclipped <= clipped {
                            (unclipped, ratio * a_hat)
                        } else {
                            (clipped, 0.0)
                        };
                        if clipped < unclipped {
                            chunk_clips += 1;
                        }
                        chunk_policy_loss -= obj * scale;
                        // KL as a separate loss term when not shaped into
                        // rewards.
                        let dlp_extra = if cfg.kl_in_reward {
                            0.0
                        } else {
                            cfg.beta
                        };
                        let dlp_loss = -dlp_obj * scale + dlp_extra * scale;
                        // d lp_new / d logits = onehot(action) - softmax.
                        let mut drow = dlogits[t].row_mut(bi);
                        for (o, &l) in row_slice.iter().enumerate() {
                            drow[o] += -dlp_loss * (l - lse).exp();
                        }
                        drow[action] += dlp_loss;
                        // Masked value loss.
                        let v = values[[bi, t]];
                        let diff = v - r.returns[j];
                        chunk_value_loss += diff * diff * scale;
                        dvalues[[bi, t]] += cfg.value_coef * 2.0 * diff * scale;
                    }
                }
                let total_loss = chunk_policy_loss + cfg.value_coef * chunk_value_loss;
                (total_loss, dlogits, dvalues)
            });
            adam_step(params, &grads, adam, adam_cfg, lr_policy, lr_critic);
            clip_events += chunk_clips;
            clip_opportunities += n_inc as u64;
            policy_loss_acc += chunk_policy_loss;
            value_loss_acc += chunk_value_loss;
            steps += 1;
        }
    }

    UpdateStats {
        mean_reward,
        category_counts,
        kl_mean,
        clip_fraction: if clip_opportunities > 0 {
            clip_events as f64 / clip_opportunities as f64
        } else {
            0.0
        },
        masked_fraction,
        policy_loss: policy_loss_acc / steps.max(1) as f64,
        value_loss: value_loss_acc / steps.max(1) as f64,
        included_tokens,
        skipped: false,
    }
}
