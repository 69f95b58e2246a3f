//! Adam with two learning-rate groups: the value head (critic) and
//! everything else (policy). The critic rate defaults to 3x the policy
//! rate, mirroring the usual actor/critic split.

use serde::{Deserialize, Serialize};

use crate::policy::{Grads, PolicyParams, CRITIC_TENSORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers aligned with the params' flat views.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &PolicyParams) -> AdamState {
        let sizes: Vec<usize> = params.flat_views().iter().map(|(_, s)| s.len()).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One Adam step. `lr_policy` applies to trunk and logits head,
/// `lr_critic` to the value head.
pub fn adam_step(
    params: &mut PolicyParams,
    grads: &Grads,
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr_policy: f64,
    lr_critic: f64,
) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let grad_views = grads.flat_views();
    for (idx, (name, slice)) in params.flat_views_mut().into_iter().enumerate() {
        let (gname, gslice) = &grad_views[idx];
        debug_assert_eq!(name, *gname);
        let lr = if CRITIC_TENSORS.contains(&name) {
            lr_critic
        } else {
            lr_policy
        };
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for i in 0..slice.len() {
            let g = gslice[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            slice[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ModelConfig, PolicyParams, SeqBatch};
    use ndarray::Array2;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let cfg = ModelConfig {
            vocab: 6,
            embed: 3,
            hidden: 4,
        };
        let mut p = PolicyParams::init(cfg, 1);
        let before = p.clone();
        let g = Grads::zeros_like(&p);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default(), 1e-3, 3e-3);
        assert_eq!(p, before);
    }

    #[test]
    fn critic_rate_only_moves_value_head() {
        let cfg = ModelConfig {
            vocab: 6,
            embed: 3,
            hidden: 4,
        };
        let mut p = PolicyParams::init(cfg, 2);
        let before = p.clone();
        // Uniform gradient of 1.0 everywhere.
        let batch = SeqBatch::from_sequences(&[vec![1, 2, 3]], 0);
        let fw_loss = |logits: &[Array2<f64>], values: &Array2<f64>| {
            let dlogits = logits.iter().map(|l| Array2::zeros(l.raw_dim())).collect();
            let dvalues = Array2::ones(values.raw_dim());
            (0.0, dlogits, dvalues)
        };
        let (_, g) = p.grads_with(&batch, fw_loss);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default(), 0.0, 1e-2);
        // Policy group untouched with lr 0.
        assert_eq!(p.w_out, before.w_out);
        assert_eq!(p.embed, before.embed);
        // Value head moved.
        assert_ne!(p.b_val, before.b_val);
    }
}
