//! Expert demonstration datasets: generation from the scripted experts and a
//! line-delimited JSON file format.
//!
//! File layout:
//!
//! ```text
//! {"format":"dgn-demos","version":1,"env_name":"point_maze","obs_dim":4,"act_dim":2,"meta":{...}}
//! {"obs":[...],"action":[...],"reward":0.0e0,"next_obs":[...],"done":false,"success":false,"traj_id":0,"step":0}
//! ...
//! ```
//!
//! Line 1 is the header; each further line is one transition. Reals are
//! written with 17 significant digits (`{:.16e}`), which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::envs::{self, EnvKind, EnvSpec, ExpertMode, Transition};
use crate::error::{Error, Result};
use crate::numcore::{RealMatrix, SeededRng};

pub const FORMAT_TAG: &str = "dgn-demos";
pub const FORMAT_VERSION: u32 = 1;

/// Default number of demonstrations per environment.
pub const DEFAULT_NUM_DEMOS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoMeta {
    pub mode_mix: Vec<(ExpertMode, f64)>,
    /// Expert mode used for each stored trajectory.
    pub traj_modes: Vec<ExpertMode>,
    pub expert_noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub env: EnvKind,
    pub trajectories: Vec<Vec<Transition>>,
    pub meta: DemoMeta,
}

impl DemoDataset {
    pub fn spec(&self) -> EnvSpec {
        self.env.spec()
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flatten()
    }

    /// All demonstrated `(state, action)` pairs as row-aligned matrices.
    pub fn state_action_pairs(&self) -> (RealMatrix, RealMatrix) {
        let spec = self.spec();
        let n = self.num_transitions();
        let mut obs = Vec::with_capacity(n * spec.obs_dim);
        let mut act = Vec::with_capacity(n * spec.act_dim);
        for t in self.transitions() {
            obs.extend_from_slice(&t.obs);
            act.extend_from_slice(&t.action);
        }
        (
            RealMatrix::from_vec(n, spec.obs_dim, obs).expect("dims validated"),
            RealMatrix::from_vec(n, spec.act_dim, act).expect("dims validated"),
        )
    }

    /// Checks the success-only and chaining invariants.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        if self.meta.traj_modes.len() != self.trajectories.len() {
            return Err(Error::contract("one expert mode per trajectory required"));
        }
        for (i, traj) in self.trajectories.iter().enumerate() {
            check_trajectory(&spec, traj).map_err(|m| Error::contract(format!("trajectory {i}: {m}")))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(self.to_text().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let spec = self.spec();
        let mut out = String::new();
        let mix: Vec<String> = self
            .meta
            .mode_mix
            .iter()
            .map(|(m, w)| format!("[\"{m}\",{}]", fmt_real(*w)))
            .collect();
        let modes: Vec<String> = self.meta.traj_modes.iter().map(|m| format!("\"{m}\"")).collect();
        let _ = writeln!(
            out,
            "{{\"format\":\"{FORMAT_TAG}\",\"version\":{FORMAT_VERSION},\"env_name\":\"{}\",\"obs_dim\":{},\"act_dim\":{},\"meta\":{{\"mode_mix\":[{}],\"traj_modes\":[{}],\"expert_noise_std\":{},\"seed\":{},\"count\":{}}}}}",
            spec.name(),
            spec.obs_dim,
            spec.act_dim,
            mix.join(","),
            modes.join(","),
            fmt_real(self.meta.expert_noise_std),
            self.meta.seed,
            self.trajectories.len()
        );
        for (traj_id, traj) in self.trajectories.iter().enumerate() {
            for (step, t) in traj.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{{\"obs\":{},\"action\":{},\"reward\":{},\"next_obs\":{},\"done\":{},\"success\":{},\"traj_id\":{traj_id},\"step\":{step}}}",
                    fmt_reals(&t.obs),
                    fmt_reals(&t.action),
                    fmt_real(t.reward),
                    fmt_reals(&t.next_obs),
                    t.done,
                    t.success,
                );
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_lines(path, BufReader::new(file))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_lines(Path::new("<memory>"), text.as_bytes())
    }
}

/// 17 significant digits in exponent form; exact for every finite `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_reals(vs: &[f64]) -> String {
    let parts: Vec<String> = vs.iter().map(|&v| fmt_real(v)).collect();
    format!("[{}]", parts.join(","))
}

fn check_trajectory(spec: &EnvSpec, traj: &[Transition]) -> std::result::Result<(), String> {
    let Some(last) = traj.last() else {
        return Err("empty trajectory".into());
    };
    if !last.success || !last.done {
        return Err("does not end in success".into());
    }
    for (k, t) in traj.iter().enumerate() {
        if t.obs.len() != spec.obs_dim
            || t.next_obs.len() != spec.obs_dim
            || t.action.len() != spec.act_dim
        {
            return Err(format!("step {k}: dimension mismatch"));
        }
        if (t.reward == 1.0) != t.success || !(t.reward == 0.0 || t.reward == 1.0) {
            return Err(format!("step {k}: reward inconsistent with success"));
        }
        if k + 1 < traj.len() && (t.done || t.success) {
            return Err(format!("step {k}: episode ends before the trajectory does"));
        }
        if k > 0 && traj[k - 1].next_obs != t.obs {
            return Err(format!("step {k}: obs does not chain from previous next_obs"));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    env_name: String,
    obs_dim: usize,
    act_dim: usize,
    meta: HeaderMeta,
}

#[derive(Deserialize)]
struct HeaderMeta {
    mode_mix: Vec<(ExpertMode, f64)>,
    traj_modes: Vec<ExpertMode>,
    expert_noise_std: f64,
    seed: u64,
    count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    obs: Vec<f64>,
    action: Vec<f64>,
    reward: f64,
    next_obs: Vec<f64>,
    done: bool,
    success: bool,
    traj_id: usize,
    step: usize,
}

fn parse_lines<R: BufRead>(path: &Path, reader: R) -> Result<DemoDataset> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| perr(1, "missing header line".into()))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| perr(1, format!("bad header: {e}")))?;
    if header.format != FORMAT_TAG || header.version != FORMAT_VERSION {
        return Err(perr(
            1,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let env: EnvKind = header
        .env_name
        .parse()
        .map_err(|e: Error| perr(1, e.to_string()))?;
    let spec = env.spec();
    if header.obs_dim != spec.obs_dim || header.act_dim != spec.act_dim {
        return Err(perr(1, format!("dims do not match {}", spec.name())));
    }
    if header.meta.traj_modes.len() != header.meta.count {
        return Err(perr(1, "traj_modes length differs from count".into()));
    }

    let mut trajectories: Vec<Vec<Transition>> = Vec::with_capacity(header.meta.count);
    let mut last_line = 1;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            return Err(perr(lineno, "blank line".into()));
        }
        let r: Record =
            serde_json::from_str(&line).map_err(|e| perr(lineno, format!("bad record: {e}")))?;
        if r.traj_id == trajectories.len() && r.step == 0 {
            if let Some(prev) = trajectories.last() {
                check_trajectory(&spec, prev).map_err(|m| perr(lineno - 1, m))?;
            }
            trajectories.push(Vec::new());
        }
        let current = trajectories.len().checked_sub(1);
        if current != Some(r.traj_id) || trajectories[r.traj_id].len() != r.step {
            return Err(perr(
                lineno,
                format!("out-of-order record traj_id={} step={}", r.traj_id, r.step),
            ));
        }
        let t = Transition {
            obs: r.obs,
            action: r.action,
            reward: r.reward,
            next_obs: r.next_obs,
            done: r.done,
            success: r.success,
        };
        if let Some(prev) = trajectories[r.traj_id].last() {
            if prev.next_obs != t.obs {
                return Err(perr(lineno, "obs does not chain from previous next_obs".into()));
            }
        }
        trajectories[r.traj_id].push(t);
    }
    if let Some(prev) = trajectories.last() {
        check_trajectory(&spec, prev).map_err(|m| perr(last_line, m))?;
    }
    if trajectories.len() != header.meta.count {
        return Err(perr(
            last_line,
            format!(
                "header promises {} trajectories, file holds {}",
                header.meta.count,
                trajectories.len()
            ),
        ));
    }
    Ok(DemoDataset {
        env,
        trajectories,
        meta: DemoMeta {
            mode_mix: header.meta.mode_mix,
            traj_modes: header.meta.traj_modes,
            expert_noise_std: header.meta.expert_noise_std,
            seed: header.meta.seed,
        },
    })
}

/// Rolls out the noisy scripted expert until `num_traj` successful episodes
/// are collected. Each trajectory's mode is drawn from `mode_mix`.
pub fn generate(
    spec: &EnvSpec,
    num_traj: usize,
    expert_noise_std: f64,
    mode_mix: &[(ExpertMode, f64)],
    seed: u64,
) -> Result<DemoDataset> {
    generate_with_budget(spec, num_traj, expert_noise_std, mode_mix, seed, 100 * num_traj)
}

/// [`generate`] with an explicit cap on the number of rollouts.
pub fn generate_with_budget(
    spec: &EnvSpec,
    num_traj: usize,
    expert_noise_std: f64,
    mode_mix: &[(ExpertMode, f64)],
    seed: u64,
    max_attempts: usize,
) -> Result<DemoDataset> {
    if num_traj == 0 {
        return Err(Error::contract("num_traj must be at least 1"));
    }
    if expert_noise_std < 0.0 || !expert_noise_std.is_finite() {
        return Err(Error::contract("expert noise std must be finite and non-negative"));
    }
    let total: f64 = mode_mix.iter().map(|(_, w)| w).sum();
    if mode_mix.is_empty() || mode_mix.iter().any(|(_, w)| *w < 0.0) || (total - 1.0).abs() > 1e-9
    {
        return Err(Error::contract("mode weights must be non-negative and sum to 1"));
    }
    let mut rng = SeededRng::with_stream(seed, crate::numcore::Stream::Demo);
    let mut trajectories = Vec::with_capacity(num_traj);
    let mut traj_modes = Vec::with_capacity(num_traj);
    let mut attempts = 0;
    while trajectories.len() < num_traj {
        if attempts >= max_attempts {
            return Err(Error::Generation(format!(
                "only {} of {num_traj} successful {} demos after {attempts} attempts",
                trajectories.len(),
                spec.name()
            )));
        }
        attempts += 1;
        let mode = pick_mode(mode_mix, rng.uniform());
        let reset_seed = rng.next_u64();
        let (result, traj) = envs::rollout(spec, reset_seed, |state, _| {
            let a = envs::expert_action(state, mode);
            Ok(a.into_iter()
                .map(|v| v + expert_noise_std * rng.normal())
                .collect())
        })?;
        if result.success {
            trajectories.push(traj);
            traj_modes.push(mode);
        }
    }
    Ok(DemoDataset {
        env: spec.kind,
        trajectories,
        meta: DemoMeta {
            mode_mix: mode_mix.to_vec(),
            traj_modes,
            expert_noise_std,
            seed,
        },
    })
}

fn pick_mode(mix: &[(ExpertMode, f64)], u: f64) -> ExpertMode {
    let mut acc = 0.0;
    for &(m, w) in mix {
        acc += w;
        if u < acc {
            return m;
        }
    }
    mix.last().expect("non-empty").0
}
