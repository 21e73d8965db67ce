//! Comparison methods: behaviour cloning, BC-regularised fine-tuning (RFT)
//! and IL/RL action selection by Q value (IBRL-lite).

use std::fmt;
use std::str::FromStr;

use crate::agent::Agent;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::numcore::{
    AdamWConfig, AdamWState, GradBundle, MlpParams, Mode, RealMatrix, SeededRng,
};
use crate::replay::Batch;

pub const LOG_STD_MIN: f64 = -6.907_755_278_982_137; // ln 1e-3
pub const LOG_STD_MAX: f64 = std::f64::consts::LN_2;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq)]
pub struct BcConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Exact optimizer step budget overriding `epochs`; the underfit
    /// preset uses 100.
    pub max_steps: Option<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 128,
            max_steps: None,
        }
    }
}

impl BcConfig {
    pub fn underfit() -> Self {
        Self {
            max_steps: Some(100),
            ..Self::default()
        }
    }
}

/// Gaussian BC policy with a tanh-squashed mean and per-dim log std.
#[derive(Debug, Clone, PartialEq)]
pub struct BcPolicy {
    pub net: MlpParams,
    pub log_std: Vec<f64>,
    pub steps: usize,
}

impl BcPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let mut layers = vec![obs_dim];
        layers.extend_from_slice(hidden);
        layers.push(act_dim);
        Ok(Self {
            net: MlpParams::init(&layers, 0.0, rng)?,
            log_std: vec![0.0; act_dim],
            steps: 0,
        })
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.predict_one(obs)?.into_iter().map(f64::tanh).collect())
    }

    pub fn mean_batch(&self, obs: &RealMatrix) -> Result<RealMatrix> {
        Ok(self.net.predict(obs)?.map(f64::tanh))
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp())
            .collect()
    }

    /// Mean NLL over the batch and its gradients (net, log_std).
    pub fn nll(&self, obs: &RealMatrix, actions: &RealMatrix) -> Result<(f64, GradBundle, Vec<f64>)> {
        let (pre, cache) = self.net.forward_eval(obs)?;
        let n = obs.rows();
        let d = self.act_dim();
        if actions.shape() != (n, d) {
            return Err(Error::shape("bc batch actions do not match policy"));
        }
        let std = self.std();
        let mut loss = 0.0;
        let mut d_pre = RealMatrix::zeros(n, d);
        let mut g_log_std = vec![0.0; d];
        for b in 0..n {
            for j in 0..d {
                let m = pre[(b, j)].tanh();
                let var = std[j] * std[j];
                let e = m - actions[(b, j)];
                loss += 0.5 * e * e / var + std[j].ln() + HALF_LOG_2PI;
                d_pre[(b, j)] = e / var * (1.0 - m * m) / n as f64;
                g_log_std[j] += (1.0 - e * e / var) / n as f64;
            }
        }
        for (g, l) in g_log_std.iter_mut().zip(&self.log_std) {
            if !(LOG_STD_MIN..=LOG_STD_MAX).contains(l) {
                *g = 0.0;
            }
        }
        let (g_net, _) = self.net.backward(&cache, &d_pre)?;
        Ok((loss / n as f64, g_net, g_log_std))
    }

    /// Stores the policy as `{prefix}.mean` and `{prefix}.log_std`.
    pub fn write_checkpoint(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.put_mlp(&format!("{prefix}.mean"), &self.net);
        ck.put_vector(&format!("{prefix}.log_std"), &self.log_std);
    }

    pub fn from_checkpoint(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let net = ck.mlp(&format!("{prefix}.mean"))?.clone();
        let log_std = ck.vector(&format!("{prefix}.log_std"))?.to_vec();
        if log_std.len() != net.output_dim() {
            return Err(Error::shape("bc log_std length does not match mean net"));
        }
        Ok(Self {
            net,
            log_std,
            steps: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.set_meta("kind", "bc");
        self.write_checkpoint(&mut ck, "bc");
        ck.save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, "bc")
    }
}

fn rows(m: &RealMatrix, idx: &[usize]) -> RealMatrix {
    let mut out = RealMatrix::zeros(idx.len(), m.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

/// Trains a BC policy on `(obs, actions)` by Gaussian maximum likelihood.
/// `on_epoch` sees the policy after every completed epoch.
pub fn bc_train_with(
    obs: &RealMatrix,
    actions: &RealMatrix,
    config: &BcConfig,
    rng: &mut SeededRng,
    mut on_epoch: impl FnMut(usize, &BcPolicy),
) -> Result<BcPolicy> {
    let n = obs.rows();
    if n == 0 {
        return Err(Error::contract("behaviour cloning needs at least one demo pair"));
    }
    let mut policy = BcPolicy::new(obs.cols(), actions.cols(), &config.hidden, rng)?;
    let opt = AdamWConfig::with_lr(config.learning_rate);
    let mut net_opt = AdamWState::new(&policy.net, opt);
    let mut std_opt = AdamWState::new(&policy.log_std, opt);
    let mut order: Vec<usize> = (0..n).collect();
    // With a step budget the epoch count is ignored and training stops after
    // exactly that many optimizer steps.
    let cap = config.max_steps.unwrap_or(usize::MAX);
    let epochs = if config.max_steps.is_some() { usize::MAX } else { config.epochs };
    let mut epoch = 0;
    while epoch < epochs && policy.steps < cap {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size.max(1)) {
            if policy.steps >= cap {
                break;
            }
            let (_, g_net, g_std) = policy.nll(&rows(obs, chunk), &rows(actions, chunk))?;
            net_opt.step(&mut policy.net, &g_net)?;
            std_opt.step(&mut policy.log_std, &g_std)?;
            policy.steps += 1;
        }
        on_epoch(epoch, &policy);
        epoch += 1;
    }
    Ok(policy)
}

pub fn bc_train(obs: &RealMatrix, actions: &RealMatrix, config: &BcConfig, rng: &mut SeededRng) -> Result<BcPolicy> {
    bc_train_with(obs, actions, config, rng, |_, _| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct RftConfig {
    pub bc_weight: f64,
    pub pretrain_epochs: usize,
}

impl Default for RftConfig {
    fn default() -> Self {
        Self {
            bc_weight: 0.1,
            pretrain_epochs: 20,
        }
    }
}

/// `mean((tanh(actor(s)) − a)²)` over all elements, with its gradient.
pub fn actor_bc_loss(
    actor: &MlpParams,
    obs: &RealMatrix,
    actions: &RealMatrix,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<(f64, GradBundle)> {
    let (pre, cache) = actor.forward(obs, mode, rng)?;
    if actions.shape() != pre.shape() {
        return Err(Error::shape("demo actions do not match actor output"));
    }
    let count = (pre.rows() * pre.cols()) as f64;
    let mut loss = 0.0;
    let mut d_pre = RealMatrix::zeros(pre.rows(), pre.cols());
    for ((g, &p), &a) in d_pre.as_mut_slice().iter_mut().zip(pre.as_slice()).zip(actions.as_slice()) {
        let m = p.tanh();
        let e = m - a;
        loss += e * e;
        *g = 2.0 * e / count * (1.0 - m * m);
    }
    Ok((loss / count, actor.backward(&cache, &d_pre)?.0))
}

/// Actor loss `−mean Q + λ·MSE(μθ(s_demo), a_demo)`; one AdamW step. With
/// `λ = 0` this is exactly [`Agent::actor_update`].
pub fn rft_actor_update(
    agent: &mut Agent,
    rl_batch: &Batch,
    demo_obs: &RealMatrix,
    demo_actions: &RealMatrix,
    bc_weight: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    if bc_weight == 0.0 {
        return agent.actor_update(rl_batch, rng);
    }
    let (loss, grads) = rft_actor_grads(agent, rl_batch, demo_obs, demo_actions, bc_weight, rng)?;
    agent.apply_actor_grads(&grads)?;
    Ok(loss)
}

/// Loss and gradient of the RFT actor objective.
pub fn rft_actor_grads(
    agent: &Agent,
    rl_batch: &Batch,
    demo_obs: &RealMatrix,
    demo_actions: &RealMatrix,
    bc_weight: f64,
    rng: &mut SeededRng,
) -> Result<(f64, GradBundle)> {
    let (q_loss, mut grads) = agent.actor_objective(&rl_batch.obs, rng)?;
    let (bc_loss, bc_grads) = actor_bc_loss(&agent.actor, demo_obs, demo_actions, Mode::Train, rng)?;
    grads.add_scaled(&bc_grads, bc_weight);
    if !grads.is_finite() {
        return Err(Error::numeric("non-finite rft actor gradient"));
    }
    Ok((q_loss + bc_weight * bc_loss, grads))
}

/// Supervised pretraining of the actor mean on demo pairs (MSE).
pub fn pretrain_actor(
    agent: &mut Agent,
    obs: &RealMatrix,
    actions: &RealMatrix,
    epochs: usize,
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    let mut opt = AdamWState::new(&agent.actor, AdamWConfig::with_lr(1e-3));
    let mut order: Vec<usize> = (0..obs.rows()).collect();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch_size.max(1)) {
            let (_, g) = actor_bc_loss(&agent.actor, &rows(obs, chunk), &rows(actions, chunk), Mode::Train, rng)?;
            opt.step(&mut agent.actor, &g)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Soft,
    Greedy,
}

impl fmt::Display for SelectMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectMode::Soft => "soft",
            SelectMode::Greedy => "greedy",
        })
    }
}

impl FromStr for SelectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(SelectMode::Soft),
            "greedy" => Ok(SelectMode::Greedy),
            other => Err(Error::Config(format!("unknown ibrl mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbrlConfig {
    pub beta: f64,
    pub mode: SelectMode,
    pub bc: BcConfig,
}

impl Default for IbrlConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            mode: SelectMode::Soft,
            bc: BcConfig::default(),
        }
    }
}

/// Probability of picking the IL proposal: `softmax(β·[q_il, q_rl])[0]`.
pub fn il_pick_probability(q_il: f64, q_rl: f64, beta: f64) -> f64 {
    let z = beta * (q_rl - q_il);
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Chooses between `a_il` and `a_rl`; returns `true` when the IL arm wins.
pub fn select_arm(q_il: f64, q_rl: f64, config: &IbrlConfig, rng: &mut SeededRng) -> bool {
    match config.mode {
        SelectMode::Greedy => q_il > q_rl,
        SelectMode::Soft => rng.uniform() < il_pick_probability(q_il, q_rl, config.beta),
    }
}

/// Training-time action: BC mean versus the explored RL action, picked by
/// ensemble-mean Q. Returns the action and whether the IL arm was chosen.
pub fn ibrl_act(
    agent: &Agent,
    bc: &BcPolicy,
    obs: &[f64],
    config: &IbrlConfig,
    rng: &mut SeededRng,
) -> Result<(Vec<f64>, bool)> {
    let a_il = bc.mean(obs)?;
    let a_rl = agent.act_explore_baseline(obs, rng)?;
    let q_il = agent.q_mean(obs, &a_il)?;
    let q_rl = agent.q_mean(obs, &a_rl)?;
    let il = select_arm(q_il, q_rl, config, rng);
    Ok((if il { a_il } else { a_rl }, il))
}

/// Evaluation action: greedy choice between the BC mean and the actor mean.
pub fn ibrl_act_eval(agent: &Agent, bc: &BcPolicy, obs: &[f64]) -> Result<Vec<f64>> {
    let a_il = bc.mean(obs)?;
    let a_rl = agent.act_eval(obs)?;
    if agent.q_mean(obs, &a_il)? > agent.q_mean(obs, &a_rl)? {
        Ok(a_il)
    } else {
        Ok(a_rl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;
    use crate::demos::generate;
    use crate::envs::{EnvKind, ExpertMode, Transition};
    use crate::numcore::{finite_diff_grad, finite_diff_tensors, max_relative_error};
    use crate::replay::Source;

    fn small_agent(seed: u64) -> Agent {
        let cfg = AgentConfig {
            ensemble_size: 2,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..AgentConfig::default()
        };
        Agent::new(cfg, 3, 2, &mut SeededRng::new(seed)).unwrap()
    }

    fn rand_matrix(r: usize, c: usize, s: f64, rng: &mut SeededRng) -> RealMatrix {
        RealMatrix::from_vec(r, c, (0..r * c).map(|_| s * rng.normal()).collect()).unwrap()
    }

    fn rl_batch(rng: &mut SeededRng) -> Batch {
        let ts: Vec<Transition> = (0..6)
            .map(|_| Transition {
                obs: (0..3).map(|_| rng.normal()).collect(),
                action: vec![0.1, -0.2],
                reward: 0.0,
                next_obs: vec![0.0; 3],
                done: false,
                success: false,
            })
            .collect();
        Batch::from_transitions(ts.iter().map(|t| (t, Source::Online(0))))
    }

    #[test]
    fn bc_learns_constant_action() {
        let mut rng = SeededRng::new(0);
        let obs = rand_matrix(256, 3, 1.0, &mut rng);
        let target = [0.4, -0.7];
        let actions = RealMatrix::from_vec(256, 2, (0..512).map(|i| target[i % 2]).collect()).unwrap();
        let cfg = BcConfig {
            hidden: vec![32, 32],
            epochs: 200,
            batch_size: 64,
            ..BcConfig::default()
        };
        let bc = bc_train(&obs, &actions, &cfg, &mut rng).unwrap();
        for _ in 0..20 {
            let m = bc.mean(&(0..3).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap();
            for (x, t) in m.iter().zip(target) {
                assert!((x - t).abs() < 0.02, "{m:?}");
            }
        }
    }

    #[test]
    fn underfit_preset_takes_exactly_100_steps() {
        let mut rng = SeededRng::new(1);
        let obs = rand_matrix(50, 3, 1.0, &mut rng);
        let actions = rand_matrix(50, 2, 0.3, &mut rng);
        let cfg = BcConfig {
            hidden: vec![8],
            ..BcConfig::underfit()
        };
        assert_eq!(bc_train(&obs, &actions, &cfg, &mut rng).unwrap().steps, 100);
    }

    #[test]
    fn bc_held_out_nll_decreases_on_maze_demos() {
        let spec = EnvKind::PointMaze.spec();
        let mix = [(ExpertMode::A, 0.5), (ExpertMode::B, 0.5)];
        let train = generate(&spec, 10, 0.1, &mix, 1).unwrap().state_action_pairs();
        let held = generate(&spec, 5, 0.1, &mix, 2).unwrap().state_action_pairs();
        let cfg = BcConfig {
            hidden: vec![64, 64],
            epochs: 30,
            ..BcConfig::default()
        };
        let mut curve = Vec::new();
        bc_train_with(&train.0, &train.1, &cfg, &mut SeededRng::new(3), |epoch, p| {
            if [0, 9, 29].contains(&epoch) {
                curve.push(p.nll(&held.0, &held.1).unwrap().0);
            }
        })
        .unwrap();
        assert!(curve[0] > curve[1] && curve[1] > curve[2], "{curve:?}");
    }

    #[test]
    fn bc_gradients_match_finite_differences() {
        let mut rng = SeededRng::new(4);
        let mut bc = BcPolicy::new(3, 2, &[6], &mut rng).unwrap();
        bc.log_std = vec![-0.3, 0.2];
        let obs = rand_matrix(5, 3, 1.0, &mut rng);
        let actions = rand_matrix(5, 2, 0.5, &mut rng);
        let (_, g_net, g_std) = bc.nll(&obs, &actions).unwrap();
        let fd = finite_diff_grad(
            |net| {
                let mut p = bc.clone();
                p.net = net.clone();
                p.nll(&obs, &actions).unwrap().0
            },
            &bc.net,
            1e-6,
        );
        assert!(max_relative_error(&g_net.flatten(), &fd.flatten()) < 1e-4);
        let fd = finite_diff_tensors(
            |ls: &Vec<f64>| {
                let mut p = bc.clone();
                p.log_std = ls.clone();
                p.nll(&obs, &actions).unwrap().0
            },
            &bc.log_std,
            1e-6,
        );
        assert!(max_relative_error(&g_std, &fd[0]) < 1e-4);
    }

    #[test]
    fn std_is_clamped() {
        let mut rng = SeededRng::new(5);
        let mut bc = BcPolicy::new(3, 2, &[4], &mut rng).unwrap();
        bc.log_std = vec![-50.0, 50.0];
        assert_eq!(bc.std(), vec![LOG_STD_MIN.exp(), 2.0]);
    }

    #[test]
    fn rft_zero_weight_matches_plain_update() {
        let mut rng = SeededRng::new(6);
        let batch = rl_batch(&mut rng);
        let demo_obs = rand_matrix(4, 3, 1.0, &mut rng);
        let demo_act = rand_matrix(4, 2, 0.3, &mut rng);
        let mut a = small_agent(7);
        let mut b = small_agent(7);
        a.actor_update(&batch, &mut SeededRng::new(9)).unwrap();
        rft_actor_update(&mut b, &batch, &demo_obs, &demo_act, 0.0, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a.actor.fingerprint(), b.actor.fingerprint());
    }

    #[test]
    fn rft_huge_weight_follows_bc_gradient() {
        let mut rng = SeededRng::new(11);
        let batch = rl_batch(&mut rng);
        let demo_obs = rand_matrix(4, 3, 1.0, &mut rng);
        let demo_act = rand_matrix(4, 2, 0.3, &mut rng);
        let mut agent = small_agent(12);
        for c in &mut agent.critics {
            *c = MlpParams::zeros(c.layer_sizes(), 0.0).unwrap();
        }
        let (_, bc_grad) = actor_bc_loss(&agent.actor, &demo_obs, &demo_act, Mode::Eval, &mut rng).unwrap();
        let (_, total) = rft_actor_grads(&agent, &batch, &demo_obs, &demo_act, 1e6, &mut rng).unwrap();
        let (a, b) = (total.flatten(), bc_grad.flatten());
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 0.999);
    }

    #[test]
    fn rft_unit_weight_hand_check() {
        // One-layer actor with zero weights (tanh(0) = 0), linear critic
        // Q = c·[s, a] + b: loss = −mean Q + mean (0 − a_demo)².
        let cfg = AgentConfig {
            ensemble_size: 1,
            target_subset: 1,
            ..AgentConfig::default()
        };
        let actor = MlpParams::zeros(&[1, 1], 0.0).unwrap();
        let mut critic = MlpParams::zeros(&[2, 1], 0.0).unwrap();
        critic.weights[0] = RealMatrix::from_vec(2, 1, vec![2.0, 3.0]).unwrap();
        critic.biases[0] = vec![0.5];
        let mut agent = Agent::from_parts(cfg, actor, vec![critic.clone()], vec![critic]);
        let t = Transition {
            obs: vec![1.0],
            action: vec![0.0],
            reward: 0.0,
            next_obs: vec![0.0],
            done: false,
            success: false,
        };
        let batch = Batch::from_transitions([(&t, Source::Online(0))]);
        let demo_obs = RealMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let demo_act = RealMatrix::from_vec(2, 1, vec![0.5, -0.3]).unwrap();
        // Q(1, 0) = 2.5; MSE = (0.25 + 0.09) / 2 = 0.17; loss = −2.5 + 0.17.
        let loss = rft_actor_update(&mut agent, &batch, &demo_obs, &demo_act, 1.0, &mut SeededRng::new(0)).unwrap();
        assert!((loss - (-2.5 + 0.17)).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn soft_selection_is_fair_for_equal_q() {
        let cfg = IbrlConfig::default();
        let mut rng = SeededRng::new(13);
        let n = 100_000;
        let il = (0..n).filter(|_| select_arm(1.3, 1.3, &cfg, &mut rng)).count();
        let rate = il as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.01, "{rate}");
        // Chi-square with one degree of freedom at p = 0.001.
        let e = n as f64 / 2.0;
        let chi2 = ((il as f64 - e).powi(2) + ((n - il) as f64 - e).powi(2)) / e;
        assert!(chi2 < 10.83, "{chi2}");
    }

    #[test]
    fn huge_beta_matches_greedy() {
        let soft = IbrlConfig {
            beta: 1e9,
            ..IbrlConfig::default()
        };
        let greedy = IbrlConfig {
            mode: SelectMode::Greedy,
            ..IbrlConfig::default()
        };
        let mut rng = SeededRng::new(14);
        for _ in 0..10_000 {
            let (a, b) = (rng.normal(), rng.normal());
            if (a - b).abs() > 1e-6 {
                assert_eq!(select_arm(a, b, &soft, &mut rng), select_arm(a, b, &greedy, &mut rng));
            }
        }
    }

    #[test]
    fn logistic_pick_rate() {
        let cfg = IbrlConfig::default();
        let mut rng = SeededRng::new(15);
        let n = 100_000;
        let il = (0..n).filter(|_| select_arm(0.6, 0.5, &cfg, &mut rng)).count();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        let rate = il as f64 / n as f64;
        assert!((rate / expected - 1.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn selection_shift_invariance() {
        for (a, b) in [(0.1, 0.4), (-2.0, 3.0), (5.0, 5.0)] {
            let p = il_pick_probability(a, b, 10.0);
            let q = il_pick_probability(a + 100.0, b + 100.0, 10.0);
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn ibrl_actions_bounded_and_eval_deterministic() {
        let mut rng = SeededRng::new(16);
        let agent = small_agent(17);
        let bc = BcPolicy::new(3, 2, &[4], &mut rng).unwrap();
        let obs = [0.2, 0.3, -0.1];
        for _ in 0..100 {
            let (a, _) = ibrl_act(&agent, &bc, &obs, &IbrlConfig::default(), &mut rng).unwrap();
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
        assert_eq!(ibrl_act_eval(&agent, &bc, &obs).unwrap(), ibrl_act_eval(&agent, &bc, &obs).unwrap());
    }

    #[test]
    fn bc_checkpoint_round_trip() {
        let mut rng = SeededRng::new(18);
        let bc = BcPolicy::new(3, 2, &[4], &mut rng).unwrap();
        let mut ck = Checkpoint::new();
        bc.write_checkpoint(&mut ck, "bc");
        let back = BcPolicy::from_checkpoint(&Checkpoint::from_text(&ck.to_text()).unwrap(), "bc").unwrap();
        assert_eq!(back.net, bc.net);
        assert_eq!(back.log_std, bc.log_std);
    }
}
