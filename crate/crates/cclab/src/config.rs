//! Flat `key = value` config files for the trainer and the corpus
//! generator. Lines starting with `#` are comments. Unknown keys are
//! errors so typos fail loudly. Flag-level overrides are applied by the
//! CLI after the file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::corpus::{GenConfig, TEMPLATE_KINDS};
use crate::trainer::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`: {msg}")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Malformed { line: i + 1 })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            msg: "expected true/false".to_string(),
        }),
    }
}

/// Apply file keys onto a [`RunConfig`].
pub fn apply_run_config(
    cfg: &mut RunConfig,
    map: &BTreeMap<String, String>,
) -> Result<(), ConfigError> {
    for (key, value) in map {
        match key.as_str() {
            "seed" => cfg.seed = parse(key, value)?,
            "corpus_train" => cfg.corpus_train = PathBuf::from(value),
            "corpus_eval" => {
                cfg.corpus_eval = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "sft_epochs" => cfg.sft_epochs = parse(key, value)?,
            "sft_lr" => cfg.sft_lr = parse(key, value)?,
            "sft_batch" => cfg.sft_batch = parse(key, value)?,
            "updates" => cfg.updates = parse(key, value)?,
            "batch_tasks" => cfg.batch_tasks = parse(key, value)?,
            "temperature" => cfg.temperature = parse(key, value)?,
            "top_p" => cfg.top_p = parse(key, value)?,
            "max_new_tokens" => cfg.max_new_tokens = parse(key, value)?,
            "eval_temperature" => cfg.eval_temperature = parse(key, value)?,
            "eval_top_p" => cfg.eval_top_p = parse(key, value)?,
            "eval_n" => cfg.eval_n = parse(key, value)?,
            "eval_k" => cfg.eval_k = parse(key, value)?,
            "eval_every" => cfg.eval_every = parse(key, value)?,
            "checkpoint_every" => cfg.checkpoint_every = parse(key, value)?,
            "disable_cccs" => cfg.disable_cccs = parse_bool(key, value)?,
            "disable_fgo" => cfg.disable_fgo = parse_bool(key, value)?,
            "fuel" => cfg.fuel = parse(key, value)?,
            "model_embed" => cfg.model_embed = parse(key, value)?,
            "model_hidden" => cfg.model_hidden = parse(key, value)?,
            "lr_policy" => cfg.lr_policy = parse(key, value)?,
            "lr_critic" => cfg.lr_critic = parse(key, value)?,
            "ppo.gamma" => cfg.ppo.gamma = parse(key, value)?,
            "ppo.lam" => cfg.ppo.lam = parse(key, value)?,
            "ppo.beta" => cfg.ppo.beta = parse(key, value)?,
            "ppo.clip" => cfg.ppo.clip = parse(key, value)?,
            "ppo.value_coef" => cfg.ppo.value_coef = parse(key, value)?,
            "ppo.epochs_per_batch" => cfg.ppo.epochs_per_batch = parse(key, value)?,
            "ppo.minibatch" => cfg.ppo.minibatch = parse(key, value)?,
            "ppo.rollouts_per_sample" => cfg.ppo.rollouts_per_sample = parse(key, value)?,
            "ppo.kl_in_reward" => cfg.ppo.kl_in_reward = parse_bool(key, value)?,
            "cccs.alpha" => cfg.cccs.alpha = parse(key, value)?,
            "cccs.threshold" => cfg.cccs.threshold = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }
    Ok(())
}

/// Apply file keys onto a [`GenConfig`]. Template weights use
/// `weight.<template-name>`.
pub fn apply_gen_config(
    cfg: &mut GenConfig,
    map: &BTreeMap<String, String>,
) -> Result<(), ConfigError> {
    for (key, value) in map {
        if let Some(tmpl) = key.strip_prefix("weight.") {
            let idx = TEMPLATE_KINDS
                .iter()
                .position(|k| k.name() == tmpl)
                .ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
            cfg.weights[idx] = parse(key, value)?;
            continue;
        }
        match key.as_str() {
            "tests_per_instance" => cfg.tests_per_instance = parse(key, value)?,
            "value_min" => cfg.value_min = parse(key, value)?,
            "value_max" => cfg.value_max = parse(key, value)?,
            "min_cond" => cfg.min_cond = parse(key, value)?,
            "max_cond" => cfg.max_cond = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }
    Ok(())
}
