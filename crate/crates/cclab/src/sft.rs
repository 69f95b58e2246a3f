//! Supervised warm start: next-token NLL on (descriptor ++ solution)
//! sequences with the descriptor positions excluded from the loss.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskInstance;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::policy::{log_sum_exp, PolicyParams, SeqBatch};
use crate::rng::derive_seed;
use crate::vocab::{TokId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        SftConfig {
            epochs: 3,
            lr: 1e-3,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Encode a task as `[bos] x y [eos]`, returning the sequence and the
/// prompt region length (`bos` plus descriptor tokens).
pub fn encode_task(vocab: &Vocab, task: &TaskInstance) -> (Vec<TokId>, usize) {
    let mut ids = vec![vocab.bos];
    for tok in &task.x {
        let id = vocab
            .id(tok)
            .unwrap_or_else(|| panic!("descriptor token `{tok}` not in vocabulary"));
        ids.push(id);
    }
    let prompt_len = ids.len();
    let enc = vocab
        .encode_source(&task.y)
        .expect("canonical solutions encode");
    ids.extend(enc.pieces);
    ids.push(vocab.eos);
    (ids, prompt_len)
}

/// Mean masked next-token NLL and its logit gradients for a padded batch.
///
/// `weights[i][t]` selects whether position t's prediction of `ids[t+1]`
/// counts; the loss is normalized by the number of selected positions.
pub fn nll_loss_grads(
    logits: &[Array2<f64>],
    values: &Array2<f64>,
    batch: &SeqBatch,
    weights: &[Vec<f64>],
) -> (f64, Vec<Array2<f64>>, Array2<f64>) {
    let b = batch.batch_size();
    let t_max = batch.t_max();
    let total_weight: f64 = weights.iter().map(|w| w.iter().sum::<f64>()).sum();
    assert!(total_weight > 0.0, "nll loss needs at least one target");
    let mut loss = 0.0;
    let mut dlogits: Vec<Array2<f64>> =
        (0..t_max).map(|t| Array2::zeros(logits[t].raw_dim())).collect();
    for i in 0..b {
        for t in 0..batch.len[i].saturating_sub(1) {
            let w = weights[i][t];
            if w == 0.0 {
                continue;
            }
            let scale = w / total_weight;
            let row = logits[t].row(i);
            let row_slice = row.as_slice().unwrap();
            let lse = log_sum_exp(row_slice);
            let target = batch.ids[[i, t + 1]] as usize;
            loss -= scale * (row_slice[target] - lse);
            let mut drow = dlogits[t].row_mut(i);
            for (o, &l) in row_slice.iter().enumerate() {
                drow[o] = scale * (l - lse).exp();
            }
            drow[target] -= scale;
        }
    }
    let dvalues = Array2::zeros(values.raw_dim());
    (loss, dlogits, dvalues)
}

/// Mean masked NLL of sequences without gradients, for reporting.
pub fn batch_nll(
    params: &PolicyParams,
    seqs: &[Vec<TokId>],
    prompt_lens: &[usize],
    pad: TokId,
) -> f64 {
    let (lp, _) = params.logprobs_values_batch(seqs, pad);
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, seq) in seqs.iter().enumerate() {
        for t in 0..seq.len() - 1 {
            if t + 1 >= prompt_lens[i] {
                total -= lp[i][t];
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Train in place; returns the mean NLL per epoch (measured on the
/// training batches as they are consumed).
pub fn sft_train(
    params: &mut PolicyParams,
    tasks: &[TaskInstance],
    vocab: &Vocab,
    cfg: &SftConfig,
    adam_cfg: &AdamConfig,
) -> Vec<f64> {
    assert!(!tasks.is_empty());
    let encoded: Vec<(Vec<TokId>, usize)> =
        tasks.iter().map(|t| encode_task(vocab, t)).collect();
    let mut state = AdamState::new(params);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sft-shuffle", &[epoch as u64]));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        let mut weight_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let seqs: Vec<Vec<TokId>> = chunk.iter().map(|&i| encoded[i].0.clone()).collect();
            let batch = SeqBatch::from_sequences(&seqs, vocab.pad);
            let weights: Vec<Vec<f64>> = chunk
                .iter()
                .enumerate()
                .map(|(bi, &i)| {
                    let len = seqs[bi].len();
                    let prompt = encoded[i].1;
                    (0..batch.t_max())
                        .map(|t| {
                            if t + 1 < len && t + 1 >= prompt {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let n_targets: f64 = weights.iter().map(|w| w.iter().sum::<f64>()).sum();
            let (loss, grads) = params.grads_with(&batch, |logits, values| {
                nll_loss_grads(logits, values, &batch, &weights)
            });
            adam_step(params, &grads, &mut state, adam_cfg, cfg.lr, cfg.lr);
            loss_sum += loss * n_targets;
            weight_sum += n_targets;
        }
        epoch_losses.push(loss_sum / weight_sum);
    }
    epoch_losses
}
