//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Nested module settings use dotted keys (`agent.utd_ratio`, `dgn.hidden`).
//! Lists are comma separated, optional values accept `none`. Every key can be
//! overridden on the command line with a trailing `key=value` argument;
//! [`ExperimentConfig::to_text`] writes the full resolved configuration back
//! out in the same format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agent::AgentConfig;
use crate::baselines::{BcConfig, IbrlConfig, RftConfig};
use crate::dgn::{DgnConfig, Variant};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::replay::DEFAULT_CAPACITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dgn,
    DgnResidual,
    DgnGlobal,
    Rlpd,
    Rft,
    Ibrl,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dgn,
        Method::DgnResidual,
        Method::DgnGlobal,
        Method::Rlpd,
        Method::Rft,
        Method::Ibrl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dgn => "dgn",
            Method::DgnResidual => "dgn_residual",
            Method::DgnGlobal => "dgn_global",
            Method::Rlpd => "rlpd",
            Method::Rft => "rft",
            Method::Ibrl => "ibrl",
        }
    }

    /// Covariance variant for the DGN methods.
    pub fn dgn_variant(self) -> Option<Variant> {
        match self {
            Method::Dgn => Some(Variant::ZeroMean),
            Method::DgnResidual => Some(Variant::Residual),
            Method::DgnGlobal => Some(Variant::GlobalAblation),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub method: Method,
    pub demos: PathBuf,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// `None` picks the per-env default.
    pub warmup_episodes: Option<usize>,
    pub seed: u64,
    /// Empty path: keep everything in memory.
    pub out_dir: PathBuf,
    pub checkpoint_interval: usize,
    pub replay_capacity: usize,
    /// Stop once an eval row reaches this success rate.
    pub early_stop_success: Option<f64>,
    /// Fill the `wall_s` column (makes the CSV run-dependent).
    pub record_wall_time: bool,
    /// BC checkpoint used for the `kl` column.
    pub kl_bc: Option<PathBuf>,
    /// Pre-trained BC policy for IBRL; trained on the demos when unset.
    pub ibrl_bc: Option<PathBuf>,
    pub agent: AgentConfig,
    pub dgn: DgnConfig,
    pub rft: RftConfig,
    pub ibrl: IbrlConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::PointMaze,
            method: Method::Dgn,
            demos: PathBuf::new(),
            total_steps: 50_000,
            eval_interval: 1000,
            eval_episodes: 50,
            warmup_episodes: None,
            seed: 0,
            out_dir: PathBuf::new(),
            checkpoint_interval: 10_000,
            replay_capacity: DEFAULT_CAPACITY,
            early_stop_success: None,
            record_wall_time: false,
            kl_bc: None,
            ibrl_bc: None,
            agent: AgentConfig::default(),
            dgn: DgnConfig::default(),
            rft: RftConfig::default(),
            ibrl: IbrlConfig::default(),
        }
    }
}

/// Per-env warm-up episode counts.
pub fn default_warmup(env: EnvKind) -> usize {
    match env {
        EnvKind::PointMaze => 5,
        EnvKind::ReacherSparse => 10,
        EnvKind::PusherToy => 20,
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn show_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_episodes.unwrap_or_else(|| default_warmup(self.env))
    }

    /// DGN settings with the variant implied by the method.
    pub fn dgn_config(&self) -> Option<DgnConfig> {
        self.method.dgn_variant().map(|variant| DgnConfig {
            variant,
            ..self.dgn.clone()
        })
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "env" => self.env = v.parse().map_err(|_| Error::Config(format!("unknown env `{v}`")))?,
            "method" => self.method = v.parse()?,
            "demos" => self.demos = PathBuf::from(v),
            "total_steps" => self.total_steps = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "warmup_episodes" => {
                self.warmup_episodes = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "seed" => self.seed = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "checkpoint_interval" => self.checkpoint_interval = parse(key, v)?,
            "replay_capacity" => self.replay_capacity = parse(key, v)?,
            "early_stop_success" => self.early_stop_success = parse_opt(key, v)?,
            "record_wall_time" => self.record_wall_time = parse(key, v)?,
            "kl_bc" => self.kl_bc = parse_opt(key, v)?,
            "ibrl_bc" => self.ibrl_bc = parse_opt(key, v)?,
            "agent.gamma" => self.agent.gamma = parse(key, v)?,
            "agent.polyak" => self.agent.polyak = parse(key, v)?,
            "agent.ensemble_size" => self.agent.ensemble_size = parse(key, v)?,
            "agent.target_subset" => self.agent.target_subset = parse(key, v)?,
            "agent.utd_ratio" => self.agent.utd_ratio = parse(key, v)?,
            "agent.actor_update_interval" => self.agent.actor_update_interval = parse(key, v)?,
            "agent.explore_std" => self.agent.explore_std = parse(key, v)?,
            "agent.learning_rate" => self.agent.learning_rate = parse(key, v)?,
            "agent.batch_size" => self.agent.batch_size = parse(key, v)?,
            "agent.actor_hidden" => self.agent.actor_hidden = parse_list(key, v)?,
            "agent.critic_hidden" => self.agent.critic_hidden = parse_list(key, v)?,
            "agent.actor_dropout_rate" => self.agent.actor_dropout_rate = parse(key, v)?,
            "dgn.hidden" => self.dgn.hidden = parse_list(key, v)?,
            "dgn.dropout_rate" => self.dgn.dropout_rate = parse(key, v)?,
            "dgn.learning_rate" => self.dgn.learning_rate = parse(key, v)?,
            "dgn.weight_decay" => self.dgn.weight_decay = parse(key, v)?,
            "dgn.diag_floor" => self.dgn.diag_floor = parse(key, v)?,
            "dgn.update_interval" => self.dgn.update_interval = parse(key, v)?,
            "dgn.epochs_per_update" => self.dgn.epochs_per_update = parse(key, v)?,
            "dgn.fit_batch_size" => self.dgn.fit_batch_size = parse(key, v)?,
            "dgn.anneal_tau" => self.dgn.anneal_tau = parse_opt(key, v)?,
            "dgn.shutoff" => self.dgn.shutoff = parse(key, v)?,
            "dgn.shutoff_window" => self.dgn.shutoff_window = parse(key, v)?,
            "dgn.shutoff_threshold" => self.dgn.shutoff_threshold = parse(key, v)?,
            "rft.bc_weight" => self.rft.bc_weight = parse(key, v)?,
            "rft.pretrain_epochs" => self.rft.pretrain_epochs = parse(key, v)?,
            "ibrl.beta" => self.ibrl.beta = parse(key, v)?,
            "ibrl.mode" => self.ibrl.mode = v.parse()?,
            "bc.hidden" => self.ibrl.bc.hidden = parse_list(key, v)?,
            "bc.epochs" => self.ibrl.bc.epochs = parse(key, v)?,
            "bc.learning_rate" => self.ibrl.bc.learning_rate = parse(key, v)?,
            "bc.batch_size" => self.ibrl.bc.batch_size = parse(key, v)?,
            "bc.max_steps" => self.ibrl.bc.max_steps = parse_opt(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let a = &self.agent;
        let d = &self.dgn;
        let bc: &BcConfig = &self.ibrl.bc;
        vec![
            ("env", self.env.name().to_string()),
            ("method", self.method.name().to_string()),
            ("demos", self.demos.display().to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            (
                "warmup_episodes",
                self.warmup_episodes.map_or_else(|| "auto".to_string(), |w| w.to_string()),
            ),
            ("seed", self.seed.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("replay_capacity", self.replay_capacity.to_string()),
            ("early_stop_success", show_opt(&self.early_stop_success)),
            ("record_wall_time", self.record_wall_time.to_string()),
            ("kl_bc", show_path(&self.kl_bc)),
            ("ibrl_bc", show_path(&self.ibrl_bc)),
            ("agent.gamma", a.gamma.to_string()),
            ("agent.polyak", a.polyak.to_string()),
            ("agent.ensemble_size", a.ensemble_size.to_string()),
            ("agent.target_subset", a.target_subset.to_string()),
            ("agent.utd_ratio", a.utd_ratio.to_string()),
            ("agent.actor_update_interval", a.actor_update_interval.to_string()),
            ("agent.explore_std", a.explore_std.to_string()),
            ("agent.learning_rate", a.learning_rate.to_string()),
            ("agent.batch_size", a.batch_size.to_string()),
            ("agent.actor_hidden", show_list(&a.actor_hidden)),
            ("agent.critic_hidden", show_list(&a.critic_hidden)),
            ("agent.actor_dropout_rate", a.actor_dropout_rate.to_string()),
            ("dgn.hidden", show_list(&d.hidden)),
            ("dgn.dropout_rate", d.dropout_rate.to_string()),
            ("dgn.learning_rate", d.learning_rate.to_string()),
            ("dgn.weight_decay", d.weight_decay.to_string()),
            ("dgn.diag_floor", d.diag_floor.to_string()),
            ("dgn.update_interval", d.update_interval.to_string()),
            ("dgn.epochs_per_update", d.epochs_per_update.to_string()),
            ("dgn.fit_batch_size", d.fit_batch_size.to_string()),
            ("dgn.anneal_tau", show_opt(&d.anneal_tau)),
            ("dgn.shutoff", d.shutoff.to_string()),
            ("dgn.shutoff_window", d.shutoff_window.to_string()),
            ("dgn.shutoff_threshold", d.shutoff_threshold.to_string()),
            ("rft.bc_weight", self.rft.bc_weight.to_string()),
            ("rft.pretrain_epochs", self.rft.pretrain_epochs.to_string()),
            ("ibrl.beta", self.ibrl.beta.to_string()),
            ("ibrl.mode", self.ibrl.mode.to_string()),
            ("bc.hidden", show_list(&bc.hidden)),
            ("bc.epochs", bc.epochs.to_string()),
            ("bc.learning_rate", bc.learning_rate.to_string()),
            ("bc.batch_size", bc.batch_size.to_string()),
            ("bc.max_steps", show_opt(&bc.max_steps)),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Parses config text on top of the defaults. Errors name `path` and
    /// the offending line.
    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, found `{line}`")))?;
            cfg.set(k, v).map_err(|e| perr(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(path, &text)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("eval_interval and eval_episodes must be positive");
        }
        if self.checkpoint_interval == 0 || self.replay_capacity == 0 {
            return bad("checkpoint_interval and replay_capacity must be positive");
        }
        if self.ibrl.beta <= 0.0 {
            return bad("ibrl.beta must be positive");
        }
        if self.rft.bc_weight < 0.0 {
            return bad("rft.bc_weight must be non-negative");
        }
        self.agent.validate()?;
        self.dgn.validate()
    }
}
