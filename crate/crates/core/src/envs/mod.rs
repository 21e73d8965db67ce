//! Sparse-reward continuous-control environments with exact dynamics.
//!
//! Every environment takes actions in `[-1, 1]^d` (larger inputs are clipped),
//! pays reward 1 on the step that reaches the goal and 0 otherwise, and ends
//! on success or at the horizon. Only [`reset`] consumes randomness.
//!
//! | env            | obs | act | horizon | difficulty |
//! |----------------|-----|-----|---------|------------|
//! | point_maze     | 4   | 2   | 100     | easy       |
//! | reacher_sparse | 6   | 2   | 100     | medium     |
//! | pusher_toy     | 6   | 2   | 200     | hard       |

mod maze;
mod pusher;
mod reacher;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::SeededRng;

pub use maze::{GAP_A_CENTER, GAP_B_CENTER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PointMaze,
    ReacherSparse,
    PusherToy,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::PointMaze, EnvKind::ReacherSparse, EnvKind::PusherToy];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PointMaze => "point_maze",
            EnvKind::ReacherSparse => "reacher_sparse",
            EnvKind::PusherToy => "pusher_toy",
        }
    }

    pub fn spec(self) -> EnvSpec {
        let (obs_dim, horizon) = match self {
            EnvKind::PointMaze => (4, 100),
            EnvKind::ReacherSparse => (6, 100),
            EnvKind::PusherToy => (6, 200),
        };
        EnvSpec {
            kind: self,
            obs_dim,
            act_dim: 2,
            horizon,
            action_low: vec![-1.0; 2],
            action_high: vec![1.0; 2],
            goal_radius: 0.05,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub horizon: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub goal_radius: f64,
}

impl EnvSpec {
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(name.parse::<EnvKind>()?.spec())
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

/// Live environment state. `vars` layout per env:
/// point_maze `[x, y]`; reacher_sparse `[θ1, θ2, goal_x, goal_y]`;
/// pusher_toy `[agent_x, agent_y, block_x, block_y, goal_x, goal_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub kind: EnvKind,
    pub vars: Vec<f64>,
    pub step_index: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub undiscounted_return: f64,
    pub length: usize,
}

/// Scripted expert variants. Only point_maze distinguishes them (route
/// through gap A or gap B); the other experts ignore the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpertMode {
    A,
    B,
}

impl FromStr for ExpertMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ExpertMode::A),
            "B" | "b" => Ok(ExpertMode::B),
            _ => Err(Error::Config(format!("unknown expert mode `{s}`"))),
        }
    }
}

impl fmt::Display for ExpertMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpertMode::A => "A",
            ExpertMode::B => "B",
        })
    }
}

/// Starts an episode; start and goal layouts are drawn from `seed`.
pub fn reset(spec: &EnvSpec, seed: u64) -> (EnvState, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let vars = match spec.kind {
        EnvKind::PointMaze => maze::reset(),
        EnvKind::ReacherSparse => reacher::reset(&mut rng),
        EnvKind::PusherToy => pusher::reset(&mut rng),
    };
    let state = EnvState {
        kind: spec.kind,
        vars,
        step_index: 0,
        done: false,
    };
    let obs = state.observation();
    (state, obs)
}

/// Advances one step. The returned transition records the clipped action.
pub fn step(state: &EnvState, action: &[f64]) -> Result<(EnvState, Transition)> {
    let spec = state.kind.spec();
    if state.done {
        return Err(Error::contract("step called on a finished episode"));
    }
    if action.len() != spec.act_dim {
        return Err(Error::shape(format!(
            "{} expects {} action dims, got {}",
            spec.name(),
            spec.act_dim,
            action.len()
        )));
    }
    if action.iter().any(|a| a.is_nan()) {
        return Err(Error::numeric("NaN action"));
    }
    let action = spec.clip_action(action);
    let obs = state.observation();
    let vars = match state.kind {
        EnvKind::PointMaze => maze::dynamics(&state.vars, &action),
        EnvKind::ReacherSparse => reacher::dynamics(&state.vars, &action),
        EnvKind::PusherToy => pusher::dynamics(&state.vars, &action),
    };
    let mut next = EnvState {
        kind: state.kind,
        vars,
        step_index: state.step_index + 1,
        done: false,
    };
    let success = next.goal_distance() < spec.goal_radius;
    next.done = success || next.step_index >= spec.horizon;
    let transition = Transition {
        obs,
        action,
        reward: if success { 1.0 } else { 0.0 },
        next_obs: next.observation(),
        done: next.done,
        success,
    };
    Ok((next, transition))
}

/// Deterministic scripted controller that solves the task from any reachable
/// state. Output components lie in `[-1, 1]`.
pub fn expert_action(state: &EnvState, mode: ExpertMode) -> Vec<f64> {
    match state.kind {
        EnvKind::PointMaze => maze::expert(&state.vars, mode),
        EnvKind::ReacherSparse => reacher::expert(&state.vars),
        EnvKind::PusherToy => pusher::expert(&state.vars),
    }
}

impl EnvState {
    pub fn spec(&self) -> EnvSpec {
        self.kind.spec()
    }

    pub fn observation(&self) -> Vec<f64> {
        match self.kind {
            EnvKind::PointMaze => maze::observe(&self.vars),
            EnvKind::ReacherSparse => reacher::observe(&self.vars),
            EnvKind::PusherToy => self.vars.clone(),
        }
    }

    /// Distance that must fall below the goal radius for success.
    pub fn goal_distance(&self) -> f64 {
        match self.kind {
            EnvKind::PointMaze => maze::goal_distance(&self.vars),
            EnvKind::ReacherSparse => reacher::goal_distance(&self.vars),
            EnvKind::PusherToy => pusher::goal_distance(&self.vars),
        }
    }

    /// Builds a mid-episode state directly (tests, analysis).
    pub fn from_vars(kind: EnvKind, vars: Vec<f64>) -> Result<Self> {
        let expected = match kind {
            EnvKind::PointMaze => 2,
            EnvKind::ReacherSparse => 4,
            EnvKind::PusherToy => 6,
        };
        if vars.len() != expected {
            return Err(Error::shape(format!(
                "{kind} state has {expected} variables, got {}",
                vars.len()
            )));
        }
        Ok(Self {
            kind,
            vars,
            step_index: 0,
            done: false,
        })
    }
}

/// Rolls out `policy` from `reset(spec, seed)` until the episode ends.
pub fn rollout<F>(spec: &EnvSpec, seed: u64, mut policy: F) -> Result<(EpisodeResult, Vec<Transition>)>
where
    F: FnMut(&EnvState, &[f64]) -> Result<Vec<f64>>,
{
    let (mut state, mut obs) = reset(spec, seed);
    let mut transitions = Vec::with_capacity(spec.horizon);
    while !state.done {
        let action = policy(&state, &obs)?;
        let (next, tr) = step(&state, &action)?;
        obs = tr.next_obs.clone();
        transitions.push(tr);
        state = next;
    }
    let success = transitions.last().is_some_and(|t| t.success);
    Ok((
        EpisodeResult {
            success,
            undiscounted_return: transitions.iter().map(|t| t.reward).sum(),
            length: transitions.len(),
        },
        transitions,
    ))
}
