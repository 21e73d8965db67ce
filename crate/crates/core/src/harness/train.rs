//! The training loop.
//!
//! Env steps are counted from the first warm-up step. For DGN methods the
//! covariance is refit at the start of every step `t` with `t % N == 0`
//! (including `t = 0`, before any interaction), always against a snapshot of
//! the current actor. Gradient updates begin once `warmup_episodes` episodes
//! have finished. Every `eval_interval` steps (and at step 0) an evaluation
//! row is appended.

use std::path::Path;
use std::time::Instant;

use crate::agent::Agent;
use crate::baselines::{bc_train, ibrl_act, pretrain_actor, rft_actor_update, BcPolicy};
use crate::demos::DemoDataset;
use crate::dgn::SamplingPolicy;
use crate::envs::{self, EnvSpec, EnvState};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::eval::evaluate;
use crate::harness::kl::mean_kl_to_bc;
use crate::harness::metrics::{self, MetricsRow};
use crate::harness::policy::RunPolicy;
use crate::numcore::{RealMatrix, SeededRng, Stream};
use crate::replay::{sample_symmetric, DemoStore, ReplayBuffer};

/// One recorded interaction, for trace comparisons between runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub obs: Vec<f64>,
    pub mean: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record this many leading interactions.
    pub trace_steps: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub policy: RunPolicy,
    pub trace: Vec<TraceStep>,
    pub env_steps: usize,
    pub episodes: usize,
    pub fits: usize,
    pub critic_updates: usize,
    pub actor_updates: usize,
    pub shutoff_step: Option<usize>,
}

struct Streams {
    explore: SeededRng,
    env_reset: SeededRng,
    replay: SeededRng,
    dropout: SeededRng,
    fit: SeededRng,
}

fn select_rows(m: &RealMatrix, idx: &[usize]) -> RealMatrix {
    let mut out = RealMatrix::zeros(idx.len(), m.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

fn at(step: usize) -> impl Fn(Error) -> Error {
    move |e| Error::AtStep {
        step,
        source: Box::new(e),
    }
}

/// Loads the demo file named by the config and checks it against the env.
pub fn load_demos(config: &ExperimentConfig) -> Result<DemoDataset> {
    let demos = DemoDataset::load(&config.demos)?;
    check_demos(config, &demos)?;
    Ok(demos)
}

fn check_demos(config: &ExperimentConfig, demos: &DemoDataset) -> Result<()> {
    if demos.env != config.env {
        return Err(Error::Config(format!(
            "demo file is for {} but the run uses {}",
            demos.env, config.env
        )));
    }
    if demos.num_transitions() == 0 {
        return Err(Error::Config("demo file holds no transitions".into()));
    }
    Ok(())
}

/// Runs an experiment. Writes `metrics.csv`, `config.cfg`, periodic
/// checkpoints and `final.ckpt` under `out_dir` unless it is empty.
pub fn train(config: &ExperimentConfig, demos: &DemoDataset, options: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    check_demos(config, demos)?;
    let spec: EnvSpec = config.env.spec();
    let seed = config.seed;
    let out_dir = (!config.out_dir.as_os_str().is_empty()).then_some(config.out_dir.as_path());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
        let cfg_path = dir.join("config.cfg");
        std::fs::write(&cfg_path, config.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    }
    let started = Instant::now();

    let (demo_obs, demo_actions) = demos.state_action_pairs();
    let demo_store = DemoStore::new(demos);
    let mut agent = Agent::new(
        config.agent.clone(),
        spec.obs_dim,
        spec.act_dim,
        &mut SeededRng::with_stream(seed, Stream::AgentInit),
    )?;
    let dgn = match config.dgn_config() {
        Some(dc) => Some(SamplingPolicy::new(
            dc,
            spec.obs_dim,
            spec.act_dim,
            &mut SeededRng::with_stream(seed, Stream::NoiseInit),
        )?),
        None => None,
    };
    let mut bc_rng = SeededRng::with_stream(seed, Stream::Bc);
    let bc = match config.method {
        Method::Ibrl => Some(match &config.ibrl_bc {
            Some(path) => BcPolicy::load(path)?,
            None => bc_train(&demo_obs, &demo_actions, &config.ibrl.bc, &mut bc_rng)?,
        }),
        _ => None,
    };
    if config.method == Method::Rft && config.rft.pretrain_epochs > 0 {
        pretrain_actor(
            &mut agent,
            &demo_obs,
            &demo_actions,
            config.rft.pretrain_epochs,
            config.agent.batch_size,
            &mut bc_rng,
        )?;
    }
    let kl_bc = config.kl_bc.as_ref().map(BcPolicy::load).transpose()?;

    let mut policy = RunPolicy {
        method: config.method,
        agent,
        dgn,
        bc,
    };
    let mut rng = Streams {
        explore: SeededRng::with_stream(seed, Stream::Explore),
        env_reset: SeededRng::with_stream(seed, Stream::EnvReset),
        replay: SeededRng::with_stream(seed, Stream::Replay),
        dropout: SeededRng::with_stream(seed, Stream::Dropout),
        fit: SeededRng::with_stream(seed, Stream::Fit),
    };
    let mut online = ReplayBuffer::new(config.replay_capacity, spec.obs_dim, spec.act_dim);

    let mut out = RunOutput {
        rows: Vec::new(),
        policy: policy.clone(),
        trace: Vec::new(),
        env_steps: 0,
        episodes: 0,
        fits: 0,
        critic_updates: 0,
        actor_updates: 0,
        shutoff_step: None,
    };
    let mut last_nll: Option<f64> = None;
    let mut episode: Option<(EnvState, Vec<f64>)> = None;

    let eval_row = |policy: &RunPolicy, t: usize, last_nll: Option<f64>| -> Result<MetricsRow> {
        let r = evaluate(&spec, config.eval_episodes, seed, |_, obs| policy.act_eval(obs))?;
        let kl = match &kl_bc {
            Some(bc) => Some(mean_kl_to_bc(policy, bc, &demo_obs)?),
            None => None,
        };
        Ok(MetricsRow {
            step: t,
            success: r.success_rate,
            mean_return: r.mean_return,
            ep_len: r.mean_length,
            noise_scale: policy.dgn.as_ref().map(|d| d.noise_scale(t)),
            dgn_nll: last_nll,
            kl,
            wall_s: config.record_wall_time.then(|| started.elapsed().as_secs_f64()),
        })
    };
    let save = |policy: &RunPolicy, t: usize, name: &str| -> Result<()> {
        if let Some(dir) = out_dir {
            policy.to_checkpoint(config, t).save(dir.join(name))?;
        }
        Ok(())
    };

    let mut t = 0;
    loop {
        if t % config.eval_interval == 0 {
            let row = eval_row(&policy, t, last_nll).map_err(at(t))?;
            let stop = config.early_stop_success.is_some_and(|s| row.success >= s);
            out.rows.push(row);
            if stop {
                break;
            }
        }
        if t % config.checkpoint_interval == 0 {
            save(&policy, t, &format!("checkpoints/step_{t:08}.ckpt"))?;
        }
        if t >= config.total_steps {
            break;
        }
        step_once(
            config,
            &spec,
            &mut policy,
            &mut online,
            &demo_store,
            (&demo_obs, &demo_actions),
            &mut rng,
            &mut episode,
            &mut last_nll,
            &mut out,
            t,
            options,
        )
        .map_err(at(t))?;
        t += 1;
    }

    out.env_steps = t;
    out.critic_updates = policy.agent.critic_updates;
    out.actor_updates = policy.agent.actor_updates;
    out.fits = policy.dgn.as_ref().map_or(0, |d| d.fits);
    save(&policy, t, "final.ckpt")?;
    if let Some(dir) = out_dir {
        metrics::write_csv(&dir.join("metrics.csv"), &out.rows)?;
    }
    out.policy = policy;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn step_once(
    config: &ExperimentConfig,
    spec: &EnvSpec,
    policy: &mut RunPolicy,
    online: &mut ReplayBuffer,
    demo_store: &DemoStore,
    demo_pairs: (&RealMatrix, &RealMatrix),
    rng: &mut Streams,
    episode: &mut Option<(EnvState, Vec<f64>)>,
    last_nll: &mut Option<f64>,
    out: &mut RunOutput,
    t: usize,
    options: &RunOptions,
) -> Result<()> {
    let (demo_obs, demo_actions) = demo_pairs;
    if let Some(dgn) = &mut policy.dgn {
        if t % dgn.config.update_interval == 0 {
            // The actor enters the fit only through these frozen means.
            let means = policy.agent.act_eval_batch(demo_obs)?;
            *last_nll = Some(dgn.fit(demo_obs, &means, demo_actions, &mut rng.fit)?);
        }
    }

    let (state, obs) = match episode.take() {
        Some(e) => e,
        None => envs::reset(spec, rng.env_reset.next_u64()),
    };
    let mean = policy.agent.act_eval(&obs)?;
    let action = match (&policy.dgn, &policy.bc) {
        (Some(dgn), _) => dgn.sample(&obs, &mean, t, &mut rng.explore)?,
        (None, Some(bc)) if policy.method == Method::Ibrl => {
            ibrl_act(&policy.agent, bc, &obs, &config.ibrl, &mut rng.explore)?.0
        }
        _ => policy.agent.act_explore_baseline(&obs, &mut rng.explore)?,
    };
    if out.trace.len() < options.trace_steps {
        out.trace.push(TraceStep {
            step: t,
            obs: obs.clone(),
            mean,
            action: action.clone(),
        });
    }
    let (next, tr) = envs::step(&state, &action)?;
    let (done, success, next_obs) = (tr.done, tr.success, tr.next_obs.clone());
    online.push(tr)?;
    if done {
        out.episodes += 1;
        if let Some(dgn) = &mut policy.dgn {
            let was = dgn.shutoff.tripped();
            dgn.record_episode(success);
            if !was && dgn.shutoff.tripped() {
                out.shutoff_step = Some(t + 1);
            }
        }
    } else {
        *episode = Some((next, next_obs));
    }

    if out.episodes < config.warmup() {
        return Ok(());
    }
    let agent = &mut policy.agent;
    for _ in 0..agent.config.utd_ratio {
        let batch = sample_symmetric(online, demo_store, agent.config.batch_size, &mut rng.replay)?;
        agent.critic_update(&batch, &mut rng.replay)?;
        agent.target_update();
        if agent.critic_updates % agent.config.actor_update_interval == 0 {
            if policy.method == Method::Rft && config.rft.bc_weight != 0.0 {
                let idx: Vec<usize> = (0..agent.config.batch_size)
                    .map(|_| rng.replay.below(demo_obs.rows()))
                    .collect();
                rft_actor_update(
                    agent,
                    &batch,
                    &select_rows(demo_obs, &idx),
                    &select_rows(demo_actions, &idx),
                    config.rft.bc_weight,
                    &mut rng.dropout,
                )?;
            } else {
                agent.actor_update(&batch, &mut rng.dropout)?;
            }
        }
    }
    Ok(())
}

/// Convenience wrapper: load demos named in the config and train.
pub fn train_from_config(config: &ExperimentConfig) -> Result<RunOutput> {
    let demos = load_demos(config)?;
    train(config, &demos, &RunOptions::default())
}

/// Reads the metrics CSV of a finished run.
pub fn read_run_metrics(run_dir: &Path) -> Result<Vec<MetricsRow>> {
    metrics::read_csv(&run_dir.join("metrics.csv"))
}
