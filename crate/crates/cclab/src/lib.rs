//! Curriculum code-completion RL laboratory over the ML0 mini language.
//!
//! A tiny autoregressive policy learns to write ML0 programs from symbolic
//! task descriptors. Training combines execution-feedback rewards, a
//! per-sample completion curriculum that starts exploration near the goal
//! and walks back to full generation, and coverage-based token masking so
//! unexecuted code does not drive the update.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod curriculum;
pub mod fgo;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod rl;
pub mod sft;
pub mod trainer;
pub mod rng;
pub mod runner;
pub mod vocab;
