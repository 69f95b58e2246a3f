//! Tiny autoregressive token model with a value head.
//!
//! Architecture: embedding -> one gated recurrent mixing layer -> logits
//! head + scalar value head sharing the trunk. All math is f64 and the
//! backward pass is written out by hand, so gradients are exact and every
//! run is bit-reproducible on one thread.
//!
//! ```text
//! z_t  = sigmoid(Wz e_t + Uz h_{t-1} + bz)
//! hc_t = tanh  (Wh e_t + Uh h_{t-1} + bh)
//! h_t  = (1 - z_t) * h_{t-1} + z_t * hc_t
//! logits_t = Wo h_t + bo        value_t = wv . h_t + bv
//! ```

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vocab::TokId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl ModelConfig {
    pub fn with_vocab(vocab: usize) -> ModelConfig {
        ModelConfig {
            vocab,
            embed: 48,
            hidden: 96,
        }
    }
}

/// Nucleus-sampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            temperature: 0.8,
            top_p: 0.9,
            max_new_tokens: 64,
            seed: 0,
        }
    }
}

/// All learnable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub cfg: ModelConfig,
    pub embed: Array2<f64>, // V x D
    pub wz: Array2<f64>,    // H x D
    pub uz: Array2<f64>,    // H x H
    pub bz: Array1<f64>,    // H
    pub wh: Array2<f64>,    // H x D
    pub uh: Array2<f64>,    // H x H
    pub bh: Array1<f64>,    // H
    pub w_out: Array2<f64>, // V x H
    pub b_out: Array1<f64>, // V
    pub w_val: Array1<f64>, // H
    pub b_val: Array1<f64>, // 1
}

/// Tensor names in checkpoint/optimizer order.
pub const TENSOR_NAMES: [&str; 11] = [
    "embed", "wz", "uz", "bz", "wh", "uh", "bh", "w_out", "b_out", "w_val", "b_val",
];

/// Tensors updated with the critic learning rate.
pub const CRITIC_TENSORS: [&str; 2] = ["w_val", "b_val"];

impl PolicyParams {
    /// Small uniform init (+-0.08) for weights, zeros for biases and the
    /// value head.
    pub fn init(cfg: ModelConfig, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| rng.gen_range(-0.08..0.08))
        };
        let (v, d, h) = (cfg.vocab, cfg.embed, cfg.hidden);
        let embed = mat(v, d);
        let wz = mat(h, d);
        let uz = mat(h, h);
        let wh = mat(h, d);
        let uh = mat(h, h);
        let w_out = mat(v, h);
        PolicyParams {
            cfg,
            embed,
            wz,
            uz,
            bz: Array1::zeros(h),
            wh,
            uh,
            bh: Array1::zeros(h),
            w_out,
            b_out: Array1::zeros(v),
            w_val: Array1::zeros(h),
            b_val: Array1::zeros(1),
        }
    }

    pub fn param_count(&self) -> usize {
        self.flat_views().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn flat_views(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embed", self.embed.as_slice().unwrap()),
            ("wz", self.wz.as_slice().unwrap()),
            ("uz", self.uz.as_slice().unwrap()),
            ("bz", self.bz.as_slice().unwrap()),
            ("wh", self.wh.as_slice().unwrap()),
            ("uh", self.uh.as_slice().unwrap()),
            ("bh", self.bh.as_slice().unwrap()),
            ("w_out", self.w_out.as_slice().unwrap()),
            ("b_out", self.b_out.as_slice().unwrap()),
            ("w_val", self.w_val.as_slice().unwrap()),
            ("b_val", self.b_val.as_slice().unwrap()),
        ]
    }

    pub fn flat_views_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("embed", self.embed.as_slice_mut().unwrap()),
            ("wz", self.wz.as_slice_mut().unwrap()),
            ("uz", self.uz.as_slice_mut().unwrap()),
            ("bz", self.bz.as_slice_mut().unwrap()),
            ("wh", self.wh.as_slice_mut().unwrap()),
            ("uh", self.uh.as_slice_mut().unwrap()),
            ("bh", self.bh.as_slice_mut().unwrap()),
            ("w_out", self.w_out.as_slice_mut().unwrap()),
            ("b_out", self.b_out.as_slice_mut().unwrap()),
            ("w_val", self.w_val.as_slice_mut().unwrap()),
            ("b_val", self.b_val.as_slice_mut().unwrap()),
        ]
    }

    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("embed", self.embed.shape().to_vec()),
            ("wz", self.wz.shape().to_vec()),
            ("uz", self.uz.shape().to_vec()),
            ("bz", self.bz.shape().to_vec()),
            ("wh", self.wh.shape().to_vec()),
            ("uh", self.uh.shape().to_vec()),
            ("bh", self.bh.shape().to_vec()),
            ("w_out", self.w_out.shape().to_vec()),
            ("b_out", self.b_out.shape().to_vec()),
            ("w_val", self.w_val.shape().to_vec()),
            ("b_val", self.b_val.shape().to_vec()),
        ]
    }

    /// SHA-256 of all tensor bytes, for freeze/purity assertions.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (name, data) in self.flat_views() {
            hasher.update(name.as_bytes());
            for v in data {
                hasher.update(v.to_le_bytes());
            }
        }
        format!("{:x}", hasher.finalize())
    }
}

/// Gradient tensors, same shapes as [`PolicyParams`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub embed: Array2<f64>,
    pub wz: Array2<f64>,
    pub uz: Array2<f64>,
    pub bz: Array1<f64>,
    pub wh: Array2<f64>,
    pub uh: Array2<f64>,
    pub bh: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub w_val: Array1<f64>,
    pub b_val: Array1<f64>,
}

impl Grads {
    pub fn zeros_like(p: &PolicyParams) -> Grads {
        Grads {
            embed: Array2::zeros(p.embed.raw_dim()),
            wz: Array2::zeros(p.wz.raw_dim()),
            uz: Array2::zeros(p.uz.raw_dim()),
            bz: Array1::zeros(p.bz.raw_dim()),
            wh: Array2::zeros(p.wh.raw_dim()),
            uh: Array2::zeros(p.uh.raw_dim()),
            bh: Array1::zeros(p.bh.raw_dim()),
            w_out: Array2::zeros(p.w_out.raw_dim()),
            b_out: Array1::zeros(p.b_out.raw_dim()),
            w_val: Array1::zeros(p.w_val.raw_dim()),
            b_val: Array1::zeros(p.b_val.raw_dim()),
        }
    }

    pub fn flat_views(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embed", self.embed.as_slice().unwrap()),
            ("wz", self.wz.as_slice().unwrap()),
            ("uz", self.uz.as_slice().unwrap()),
            ("bz", self.bz.as_slice().unwrap()),
            ("wh", self.wh.as_slice().unwrap()),
            ("uh", self.uh.as_slice().unwrap()),
            ("bh", self.bh.as_slice().unwrap()),
            ("w_out", self.w_out.as_slice().unwrap()),
            ("b_out", self.b_out.as_slice().unwrap()),
            ("w_val", self.w_val.as_slice().unwrap()),
            ("b_val", self.b_val.as_slice().unwrap()),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.flat_views()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// A padded batch of token sequences.
#[derive(Debug, Clone)]
pub struct SeqBatch {
    /// B x T token ids, padded with `pad`.
    pub ids: Array2<u32>,
    pub len: Vec<usize>,
}

impl SeqBatch {
    pub fn from_sequences(seqs: &[Vec<TokId>], pad: TokId) -> SeqBatch {
        assert!(!seqs.is_empty());
        let t_max = seqs.iter().map(|s| s.len()).max().unwrap();
        let b = seqs.len();
        let mut ids = Array2::from_elem((b, t_max), pad);
        for (i, s) in seqs.iter().enumerate() {
            for (t, &tok) in s.iter().enumerate() {
                ids[[i, t]] = tok;
            }
        }
        SeqBatch {
            ids,
            len: seqs.iter().map(|s| s.len()).collect(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.ids.nrows()
    }

    pub fn t_max(&self) -> usize {
        self.ids.ncols()
    }
}

/// Forward activations kept for the backward pass.
pub struct Forward {
    /// Per position t: B x V logits.
    pub logits: Vec<Array2<f64>>,
    /// B x T values.
    pub values: Array2<f64>,
    z: Vec<Array2<f64>>,
    hc: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
}

fn sigmoid_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|x| 1.0 / (1.0 + (-x).exp()));
}

fn tanh_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(f64::tanh);
}

impl PolicyParams {
    fn gather_embed(&self, ids: &Array2<u32>, t: usize) -> Array2<f64> {
        let b = ids.nrows();
        let d = self.cfg.embed;
        Array2::from_shape_fn((b, d), |(i, j)| {
            self.embed[[ids[[i, t]] as usize, j]]
        })
    }

    /// Causal batched forward pass over a padded batch.
    ///
    /// Positions at or beyond a sequence's length produce garbage that the
    /// caller must weight out; they cannot influence earlier positions.
    pub fn forward(&self, batch: &SeqBatch) -> Forward {
        let b = batch.batch_size();
        let t_max = batch.t_max();
        let h_dim = self.cfg.hidden;
        let mut h_prev = Array2::zeros((b, h_dim));
        let mut logits = Vec::with_capacity(t_max);
        let mut values = Array2::zeros((b, t_max));
        let mut zs = Vec::with_capacity(t_max);
        let mut hcs = Vec::with_capacity(t_max);
        let mut hs = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let e = self.gather_embed(&batch.ids, t);
            let mut z = e.dot(&self.wz.t()) + h_prev.dot(&self.uz.t()) + &self.bz;
            sigmoid_inplace(&mut z);
            let mut hc = e.dot(&self.wh.t()) + h_prev.dot(&self.uh.t()) + &self.bh;
            tanh_inplace(&mut hc);
            let h = (1.0 - &z) * &h_prev + &z * &hc;
            let lg = h.dot(&self.w_out.t()) + &self.b_out;
            let val = h.dot(&self.w_val) + self.b_val[0];
            values.column_mut(t).assign(&val);
            logits.push(lg);
            zs.push(z);
            hcs.push(hc);
            h_prev = h.clone();
            hs.push(h);
        }
        Forward {
            logits,
            values,
            z: zs,
            hc: hcs,
            h: hs,
        }
    }

    /// Exact reverse-mode gradients for a loss expressed through its
    /// derivative w.r.t. logits and values.
    pub fn backward(
        &self,
        batch: &SeqBatch,
        fw: &Forward,
        dlogits: &[Array2<f64>],
        dvalues: &Array2<f64>,
    ) -> Grads {
        let b = batch.batch_size();
        let t_max = batch.t_max();
        assert_eq!(dlogits.len(), t_max);
        let h_dim = self.cfg.hidden;
        let mut g = Grads::zeros_like(self);
        let zeros_h = Array2::zeros((b, h_dim));
        let mut dh_next: Array2<f64> = Array2::zeros((b, h_dim));
        for t in (0..t_max).rev() {
            let h_t = &fw.h[t];
            let h_prev = if t == 0 { &zeros_h } else { &fw.h[t - 1] };
            let z = &fw.z[t];
            let hc = &fw.hc[t];
            let dval_t = dvalues.column(t);

            // Head gradients and dh at this position.
            let dlg = &dlogits[t];
            general_mat_mul(1.0, &dlg.t(), h_t, 1.0, &mut g.w_out);
            g.b_out += &dlg.sum_axis(Axis(0));
            // dh from logits head, value head, and the future.
            let mut dh = dlg.dot(&self.w_out) + dh_next;
            for (mut row, &dv) in dh.rows_mut().into_iter().zip(dval_t.iter()) {
                row.scaled_add(dv, &self.w_val);
            }
            for (hrow, &dv) in h_t.rows().into_iter().zip(dval_t.iter()) {
                g.w_val.scaled_add(dv, &hrow);
            }
            g.b_val[0] += dval_t.sum();

            // Gate chain.
            let dz = &dh * &(hc - h_prev);
            let dhc = &dh * z;
            let da_h = dhc * (1.0 - hc * hc);
            let da_z = dz * z * (1.0 - z);

            let e = self.gather_embed(&batch.ids, t);
            general_mat_mul(1.0, &da_h.t(), &e, 1.0, &mut g.wh);
            general_mat_mul(1.0, &da_h.t(), h_prev, 1.0, &mut g.uh);
            g.bh += &da_h.sum_axis(Axis(0));
            general_mat_mul(1.0, &da_z.t(), &e, 1.0, &mut g.wz);
            general_mat_mul(1.0, &da_z.t(), h_prev, 1.0, &mut g.uz);
            g.bz += &da_z.sum_axis(Axis(0));

            // Into the embedding table.
            let de = da_h.dot(&self.wh) + da_z.dot(&self.wz);
            for (i, row) in de.rows().into_iter().enumerate() {
                let tok = batch.ids[[i, t]] as usize;
                let mut dst = g.embed.row_mut(tok);
                dst += &row;
            }

            dh_next = dh * (1.0 - z) + da_h.dot(&self.uh) + da_z.dot(&self.uz);
        }
        g
    }

    /// Forward + loss + backward in one call. The loss closure receives
    /// per-position logits and the B x T value matrix and returns the loss
    /// with its gradients w.r.t. those outputs.
    pub fn grads_with<F>(&self, batch: &SeqBatch, loss_fn: F) -> (f64, Grads)
    where
        F: FnOnce(&[Array2<f64>], &Array2<f64>) -> (f64, Vec<Array2<f64>>, Array2<f64>),
    {
        let fw = self.forward(batch);
        let (loss, dlogits, dvalues) = loss_fn(&fw.logits, &fw.values);
        let g = self.backward(batch, &fw, &dlogits, &dvalues);
        (loss, g)
    }

    /// Teacher-forced log-probabilities and values for one sequence.
    /// `logprobs[t]` scores `ids[t+1]`; `values[t]` is the value head at
    /// position t. Lengths are `len-1` and `len`.
    pub fn logprobs_values(&self, ids: &[TokId]) -> (Vec<f64>, Vec<f64>) {
        let batch = SeqBatch::from_sequences(&[ids.to_vec()], 0);
        let fw = self.forward(&batch);
        let mut logprobs = Vec::with_capacity(ids.len().saturating_sub(1));
        for t in 0..ids.len().saturating_sub(1) {
            let row = fw.logits[t].row(0);
            let lse = log_sum_exp(row.as_slice().unwrap());
            logprobs.push(row[ids[t + 1] as usize] - lse);
        }
        let values = (0..ids.len()).map(|t| fw.values[[0, t]]).collect();
        (logprobs, values)
    }

    /// Batched variant of [`logprobs_values`].
    pub fn logprobs_values_batch(
        &self,
        seqs: &[Vec<TokId>],
        pad: TokId,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let batch = SeqBatch::from_sequences(seqs, pad);
        let fw = self.forward(&batch);
        let mut all_lp = Vec::with_capacity(seqs.len());
        let mut all_v = Vec::with_capacity(seqs.len());
        for (i, seq) in seqs.iter().enumerate() {
            let mut lp = Vec::with_capacity(seq.len() - 1);
            for t in 0..seq.len() - 1 {
                let row = fw.logits[t].row(i);
                let lse = log_sum_exp(row.as_slice().unwrap());
                lp.push(row[seq[t + 1] as usize] - lse);
            }
            all_lp.push(lp);
            all_v.push((0..seq.len()).map(|t| fw.values[[i, t]]).collect());
        }
        (all_lp, all_v)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// One sampled completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Prompt followed by generated tokens (including EOS when emitted).
    pub ids: Vec<TokId>,
    pub prompt_len: usize,
    /// Log-probability of each generated token under the renormalized
    /// truncated-nucleus distribution it was drawn from.
    pub logprobs: Vec<f64>,
    /// Value head at each generation decision point.
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn completion(&self) -> &[TokId] {
        &self.ids[self.prompt_len..]
    }
}

impl PolicyParams {
    /// Sample a completion with nucleus sampling: temperature-scaled
    /// softmax, smallest prefix of probability mass >= top_p, renormalize,
    /// draw. Deterministic in `cfg.seed`. Stops after EOS or
    /// `max_new_tokens` generated tokens.
    pub fn sample(&self, prompt: &[TokId], cfg: &SampleConfig, eos: TokId) -> Trajectory {
        assert!(!prompt.is_empty(), "prompt must be nonempty");
        assert!(cfg.temperature > 0.0, "temperature must be positive");
        assert!(cfg.top_p > 0.0 && cfg.top_p <= 1.0, "top_p must be in (0,1]");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let h_dim = self.cfg.hidden;
        let mut h = Array1::<f64>::zeros(h_dim);
        let mut logits = Array1::<f64>::zeros(self.cfg.vocab);
        let mut value = 0.0;
        let step = |h: &mut Array1<f64>, tok: TokId| -> (Array1<f64>, f64) {
            let e = self.embed.row(tok as usize);
            let mut z = self.wz.dot(&e) + self.uz.dot(h) + &self.bz;
            z.mapv_inplace(|x| 1.0 / (1.0 + (-x).exp()));
            let mut hc = self.wh.dot(&e) + self.uh.dot(h) + &self.bh;
            hc.mapv_inplace(f64::tanh);
            let new_h = (1.0 - &z) * &*h + &z * &hc;
            let lg = self.w_out.dot(&new_h) + &self.b_out;
            let val = self.w_val.dot(&new_h) + self.b_val[0];
            *h = new_h;
            (lg, val)
        };
        for &tok in prompt {
            let (lg, val) = step(&mut h, tok);
            logits = lg;
            value = val;
        }
        let mut ids = prompt.to_vec();
        let mut logprobs = Vec::new();
        let mut values = Vec::new();
        for _ in 0..cfg.max_new_tokens {
            let (tok, lp) = nucleus_draw(
                logits.as_slice().unwrap(),
                cfg.temperature,
                cfg.top_p,
                &mut rng,
            );
            ids.push(tok);
            logprobs.push(lp);
            values.push(value);
            if tok == eos {
                break;
            }
            let (lg, val) = step(&mut h, tok);
            logits = lg;
            value = val;
        }
        Trajectory {
            prompt_len: prompt.len(),
            ids,
            logprobs,
            values,
        }
    }
}

/// Draw one token from the truncated, renormalized nucleus distribution.
/// Returns the token and the log of its renormalized probability.
fn nucleus_draw(
    logits: &[f64],
    temperature: f64,
    top_p: f64,
    rng: &mut ChaCha8Rng,
) -> (TokId, f64) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits
        .iter()
        .map(|&l| ((l - m) / temperature).exp())
        .collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    // Sort indices by probability, descending; ties by index for
    // determinism.
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    // Smallest prefix reaching top_p, always at least one token.
    let mut kept = 0;
    let mut mass = 0.0;
    for &i in &order {
        kept += 1;
        mass += probs[i];
        if mass >= top_p {
            break;
        }
    }
    let mut u = rng.gen::<f64>() * mass;
    let mut choice = order[kept - 1];
    for &i in &order[..kept] {
        u -= probs[i];
        if u < 0.0 {
            choice = i;
            break;
        }
    }
    (choice as TokId, (probs[choice] / mass).ln())
}
