//! Experiment orchestration: configuration, the training loop, evaluation,
//! KL analysis, the metrics CSV and the self-test suite.

pub mod config;
pub mod eval;
pub mod kl;
pub mod metrics;
pub mod policy;
pub mod selftest;
pub mod train;

pub use config::{default_warmup, ExperimentConfig, Method};
pub use eval::{eval_seeds, evaluate, EvalResult};
pub use kl::{analyze_kl, mean_kl_to_bc};
pub use metrics::{MetricsRow, HEADER};
pub use policy::RunPolicy;
pub use train::{load_demos, train, train_from_config, RunOptions, RunOutput, TraceStep};
