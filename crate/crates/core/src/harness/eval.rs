//! Deterministic evaluation on a fixed set of episode seeds.

use crate::envs::{self, EnvSpec, EnvState};
use crate::error::{Error, Result};
use crate::numcore::{SeededRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

/// Reset seeds for evaluation; drawn from their own stream so they never
/// coincide with training resets of the same run seed.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = SeededRng::with_stream(seed, Stream::Eval);
    (0..episodes).map(|_| rng.next_u64()).collect()
}

/// Runs `episodes` rollouts of `policy` and averages the outcomes.
pub fn evaluate<F>(spec: &EnvSpec, episodes: usize, seed: u64, mut policy: F) -> Result<EvalResult>
where
    F: FnMut(&EnvState, &[f64]) -> Result<Vec<f64>>,
{
    if episodes == 0 {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let (mut wins, mut ret, mut len) = (0usize, 0.0, 0.0);
    for s in eval_seeds(seed, episodes) {
        let (res, _) = envs::rollout(spec, s, &mut policy)?;
        wins += usize::from(res.success);
        ret += res.undiscounted_return;
        len += res.length as f64;
    }
    let n = episodes as f64;
    Ok(EvalResult {
        success_rate: wins as f64 / n,
        mean_return: ret / n,
        mean_length: len / n,
    })
}
