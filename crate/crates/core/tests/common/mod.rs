//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::Path;

use dgn_core::demos::{generate, DemoDataset, DEFAULT_NUM_DEMOS};
use dgn_core::envs::{EnvKind, ExpertMode};
use dgn_core::harness::ExperimentConfig;

/// Small networks, two critics, two updates per step. Roughly 250x cheaper
/// per env step than the defaults, which keeps multi-seed runs on a single
/// CPU core within minutes.
pub const FAST_PRESET: &[&str] = &[
    "agent.actor_hidden=64,64",
    "agent.critic_hidden=64,64",
    "agent.ensemble_size=2",
    "agent.target_subset=2",
    "agent.utd_ratio=2",
    "agent.batch_size=64",
    "agent.learning_rate=0.001",
];

pub fn demos_for(kind: EnvKind) -> DemoDataset {
    generate(
        &kind.spec(),
        DEFAULT_NUM_DEMOS,
        0.1,
        &[(ExpertMode::A, 0.5), (ExpertMode::B, 0.5)],
        0,
    )
    .expect("scripted expert produces demos")
}

/// Fast-preset config for `kind` and `method`; `extra` overrides last.
pub fn fast_config(kind: EnvKind, method: &str, seed: u64, extra: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(FAST_PRESET).unwrap();
    cfg.apply_overrides(&[format!("env={kind}"), format!("method={method}"), format!("seed={seed}")])
        .unwrap();
    cfg.out_dir = Default::default();
    cfg.apply_overrides(extra).unwrap();
    cfg
}

pub fn write_demos(dir: &Path, kind: EnvKind) -> std::path::PathBuf {
    let path = dir.join(format!("{kind}.demos"));
    demos_for(kind).save(&path).unwrap();
    path
}
