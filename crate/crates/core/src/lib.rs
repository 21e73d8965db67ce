//! Data-guided exploration noise for off-policy reinforcement learning from
//! demonstrations.
//!
//! The actor mean is learned by a deterministic actor-critic with a critic
//! ensemble and symmetric demo/online sampling; exploration noise comes from a
//! state-conditioned Gaussian whose Cholesky factor is fit, by maximum
//! likelihood, to the differences between demonstrated actions and the
//! current actor. Baselines (plain symmetric-sampling RL, BC-regularised
//! fine-tuning, IL/RL action selection), three sparse-reward toy
//! environments and an experiment harness complete the laboratory.

pub mod agent;
pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod demos;
pub mod dgn;
pub mod envs;
pub mod harness;
pub mod error;
pub mod numcore;
pub mod replay;

pub use error::{Error, Result};
