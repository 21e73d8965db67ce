//! Data-guided exploration noise.
//!
//! Actions are drawn from `N(μθ(s), Σφ(s))` where `μθ` is the RL actor and
//! `Σφ(s) = A(s)·A(s)ᵀ` is fit by maximum likelihood to the gap between demo
//! actions and the (frozen) actor. `A` is lower-triangular; its raw entries
//! fill the lower triangle row by row, the diagonal going through softplus and
//! a floor.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::numcore::{
    gaussian_draw, sigmoid, softplus, solve_lower, solve_lower_transpose, AdamWConfig, AdamWState,
    GradBundle, MlpParams, Mode, RealMatrix, SeededRng, Tensors,
};

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    ZeroMean,
    Residual,
    GlobalAblation,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::ZeroMean => "zero_mean",
            Variant::Residual => "residual",
            Variant::GlobalAblation => "global_ablation",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_mean" => Ok(Variant::ZeroMean),
            "residual" => Ok(Variant::Residual),
            "global_ablation" => Ok(Variant::GlobalAblation),
            other => Err(Error::Config(format!("unknown dgn variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgnConfig {
    pub variant: Variant,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub diag_floor: f64,
    /// Env steps between fits (N).
    pub update_interval: usize,
    pub epochs_per_update: usize,
    pub fit_batch_size: usize,
    /// Annealing timescale in env steps; `None` disables annealing.
    pub anneal_tau: Option<f64>,
    pub shutoff: bool,
    pub shutoff_window: usize,
    pub shutoff_threshold: f64,
}

impl Default for DgnConfig {
    fn default() -> Self {
        Self {
            variant: Variant::ZeroMean,
            hidden: vec![128, 128],
            dropout_rate: 0.5,
            learning_rate: 1e-3,
            weight_decay: 3e-2,
            diag_floor: 1e-3,
            update_interval: 1000,
            epochs_per_update: 2,
            fit_batch_size: 128,
            anneal_tau: None,
            shutoff: true,
            shutoff_window: 10,
            shutoff_threshold: 0.5,
        }
    }
}

impl DgnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.diag_floor > 0.0) {
            return bad("dgn.diag_floor must be positive");
        }
        if self.update_interval == 0 || self.fit_batch_size == 0 {
            return bad("dgn.update_interval and dgn.fit_batch_size must be positive");
        }
        if matches!(self.anneal_tau, Some(t) if !(t > 0.0)) {
            return bad("dgn.anneal_tau must be positive when set");
        }
        if self.shutoff && (self.shutoff_window == 0 || !(0.0..=1.0).contains(&self.shutoff_threshold))
        {
            return bad("dgn.shutoff_window must be positive and dgn.shutoff_threshold in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) || self.learning_rate <= 0.0 {
            return bad("dgn.dropout_rate must lie in [0, 1) and dgn.learning_rate be positive");
        }
        Ok(())
    }
}

/// Number of raw outputs for a `d×d` lower-triangular factor.
pub fn raw_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Builds `A` from raw outputs: lower triangle row-major, diagonal
/// `max(softplus(r), floor)`.
pub fn assemble_factor(raw: &[f64], d: usize, floor: f64) -> Result<RealMatrix> {
    if raw.len() != raw_len(d) {
        return Err(Error::shape(format!("{} raw entries for a {d}x{d} factor", raw.len())));
    }
    if raw.iter().any(|r| !r.is_finite()) {
        return Err(Error::numeric("non-finite covariance output"));
    }
    let mut a = RealMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            a[(i, j)] = if i == j {
                softplus(raw[k]).max(floor)
            } else {
                raw[k]
            };
            k += 1;
        }
    }
    Ok(a)
}

/// Maps `dL/dA` back to the raw entries.
fn factor_raw_grad(raw: &[f64], d: usize, floor: f64, grad_a: &RealMatrix) -> Vec<f64> {
    let mut g = Vec::with_capacity(raw.len());
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            g.push(if i == j {
                if softplus(raw[k]) > floor {
                    grad_a[(i, j)] * sigmoid(raw[k])
                } else {
                    0.0
                }
            } else {
                grad_a[(i, j)]
            });
            k += 1;
        }
    }
    g
}

/// Per-sample Gaussian NLL `½|A⁻¹δ|² + Σ log A_jj + (d/2) log 2π` with
/// gradients with respect to `A` (lower triangle) and `δ`.
pub fn gaussian_nll(delta: &[f64], a: &RealMatrix) -> (f64, RealMatrix, Vec<f64>) {
    let d = delta.len();
    let u = solve_lower(a, delta);
    let w = solve_lower_transpose(a, &u);
    let mut loss = 0.5 * u.iter().map(|x| x * x).sum::<f64>() + 0.5 * d as f64 * LOG_2PI;
    let mut grad_a = RealMatrix::zeros(d, d);
    for i in 0..d {
        loss += a[(i, i)].ln();
        for j in 0..=i {
            grad_a[(i, j)] = -w[i] * u[j];
        }
        grad_a[(i, i)] += 1.0 / a[(i, i)];
    }
    (loss, grad_a, w)
}

/// State-conditioned factor network.
#[derive(Debug, Clone)]
pub struct CovNet {
    pub net: MlpParams,
    opt: AdamWState,
}

/// State-independent factor (ablation).
#[derive(Debug, Clone)]
pub struct GlobalCov {
    pub raw: Vec<f64>,
    opt: AdamWState,
}

/// Learned mean offset `μφ(s)` of the residual variant.
#[derive(Debug, Clone)]
pub struct ResidualNet {
    pub net: MlpParams,
    opt: AdamWState,
}

#[derive(Debug, Clone)]
pub enum Covariance {
    Net(CovNet),
    Global(GlobalCov),
}

/// Gradients of the mean NLL over a batch.
#[derive(Debug, Clone)]
pub struct NllGrads {
    pub covariance: CovGrad,
    pub residual: Option<GradBundle>,
}

#[derive(Debug, Clone)]
pub enum CovGrad {
    Net(GradBundle),
    Global(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShutoffMonitor {
    pub enabled: bool,
    pub window: usize,
    pub threshold: f64,
    ring: VecDeque<bool>,
    tripped: bool,
}

impl ShutoffMonitor {
    pub fn new(window: usize, threshold: f64) -> Self {
        Self {
            enabled: true,
            window,
            threshold,
            ring: VecDeque::with_capacity(window),
            tripped: false,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::new(0, 1.0)
        }
    }

    pub fn tripped(&self) -> bool {
        self.tripped
    }

    pub fn record(&mut self, success: bool) {
        if !self.enabled {
            return;
        }
        if self.ring.len() == self.window {
            self.ring.pop_front();
        }
        self.ring.push_back(success);
        if self.ring.len() == self.window {
            let rate = self.ring.iter().filter(|&&s| s).count() as f64 / self.window as f64;
            if rate >= self.threshold {
                self.tripped = true;
            }
        }
    }
}

/// `0` once shutoff has tripped, else `exp(−t/τ)` when annealing, else `1`.
pub fn noise_scale(schedule: &AnnealSchedule, shutoff: &ShutoffMonitor, t: usize) -> f64 {
    if shutoff.tripped() {
        0.0
    } else if let Some(tau) = schedule.tau {
        (-(t as f64) / tau).exp()
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct SamplingPolicy {
    pub config: DgnConfig,
    obs_dim: usize,
    act_dim: usize,
    pub covariance: Covariance,
    pub residual: Option<ResidualNet>,
    pub schedule: AnnealSchedule,
    pub shutoff: ShutoffMonitor,
    pub fits: usize,
}

impl SamplingPolicy {
    pub fn new(config: DgnConfig, obs_dim: usize, act_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let opt = AdamWConfig::with_lr(config.learning_rate).weight_decay(config.weight_decay);
        let mut layers = vec![obs_dim];
        layers.extend_from_slice(&config.hidden);
        let covariance = match config.variant {
            Variant::GlobalAblation => {
                let raw = vec![0.0; raw_len(act_dim)];
                Covariance::Global(GlobalCov {
                    opt: AdamWState::new(&raw, opt),
                    raw,
                })
            }
            _ => {
                let mut l = layers.clone();
                l.push(raw_len(act_dim));
                let net = MlpParams::init(&l, config.dropout_rate, rng)?;
                Covariance::Net(CovNet {
                    opt: AdamWState::new(&net, opt),
                    net,
                })
            }
        };
        let residual = if config.variant == Variant::Residual {
            let mut l = layers;
            l.push(act_dim);
            let mut net = MlpParams::init(&l, config.dropout_rate, rng)?;
            // Start with no offset so the first fit begins from the actor mean.
            net.scale_output_layer(0.0);
            Some(ResidualNet {
                opt: AdamWState::new(&net, opt),
                net,
            })
        } else {
            None
        };
        Ok(Self::assemble(config, obs_dim, act_dim, covariance, residual))
    }

    fn assemble(
        config: DgnConfig,
        obs_dim: usize,
        act_dim: usize,
        covariance: Covariance,
        residual: Option<ResidualNet>,
    ) -> Self {
        let schedule = AnnealSchedule {
            tau: config.anneal_tau,
        };
        let shutoff = if config.shutoff {
            ShutoffMonitor::new(config.shutoff_window, config.shutoff_threshold)
        } else {
            ShutoffMonitor::disabled()
        };
        Self {
            config,
            obs_dim,
            act_dim,
            covariance,
            residual,
            schedule,
            shutoff,
            fits: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    fn raw_batch(&self, obs: &RealMatrix, mode: Mode, rng: &mut SeededRng) -> Result<RealMatrix> {
        match &self.covariance {
            Covariance::Net(c) => Ok(c.net.forward(obs, mode, rng)?.0),
            Covariance::Global(g) => {
                let mut m = RealMatrix::zeros(obs.rows(), g.raw.len());
                for b in 0..obs.rows() {
                    m.row_mut(b).copy_from_slice(&g.raw);
                }
                Ok(m)
            }
        }
    }

    /// Cholesky factor `A(obs)` (eval mode).
    pub fn chol_factor(&self, obs: &[f64]) -> Result<RealMatrix> {
        let raw = match &self.covariance {
            Covariance::Net(c) => c.net.predict_one(obs)?,
            Covariance::Global(g) => g.raw.clone(),
        };
        assemble_factor(&raw, self.act_dim, self.config.diag_floor)
    }

    /// `Σφ(obs) = A·Aᵀ`.
    pub fn covariance_at(&self, obs: &[f64]) -> Result<RealMatrix> {
        let a = self.chol_factor(obs)?;
        a.matmul(&a.transpose())
    }

    /// `μφ(obs)` for the residual variant, zeros otherwise.
    pub fn mean_offset(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match &self.residual {
            Some(r) => r.net.predict_one(obs),
            None => Ok(vec![0.0; self.act_dim]),
        }
    }

    /// Mean NLL of `actions` given actor means and observations, with
    /// gradients for the covariance (and residual) parameters. The actor
    /// enters only through the precomputed `means`.
    pub fn nll(
        &self,
        obs: &RealMatrix,
        means: &RealMatrix,
        actions: &RealMatrix,
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(f64, NllGrads)> {
        let n = obs.rows();
        let d = self.act_dim;
        if means.shape() != (n, d) || actions.shape() != (n, d) {
            return Err(Error::shape("nll batch rows or action dims disagree"));
        }
        let floor = self.config.diag_floor;
        let raw = match &self.covariance {
            Covariance::Net(c) => {
                let (out, cache) = c.net.forward(obs, mode, rng)?;
                (out, Some(cache))
            }
            Covariance::Global(_) => (self.raw_batch(obs, mode, rng)?, None),
        };
        let residual = match &self.residual {
            Some(r) => {
                let (out, cache) = r.net.forward(obs, mode, rng)?;
                Some((out, cache))
            }
            None => None,
        };
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        let mut raw_grad = RealMatrix::zeros(n, raw_len(d));
        let mut res_grad = RealMatrix::zeros(n, d);
        for b in 0..n {
            let mut delta: Vec<f64> = actions.row(b).iter().zip(means.row(b)).map(|(a, m)| a - m).collect();
            if let Some((out, _)) = &residual {
                for (x, o) in delta.iter_mut().zip(out.row(b)) {
                    *x -= o;
                }
            }
            if delta.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric("non-finite action residual"));
            }
            let a = assemble_factor(raw.0.row(b), d, floor)?;
            let (loss, grad_a, w) = gaussian_nll(&delta, &a);
            total += loss;
            let g = factor_raw_grad(raw.0.row(b), d, floor, &grad_a);
            for (dst, v) in raw_grad.row_mut(b).iter_mut().zip(g) {
                *dst = v * scale;
            }
            for (dst, v) in res_grad.row_mut(b).iter_mut().zip(&w) {
                *dst = -v * scale;
            }
        }
        let covariance = match (&self.covariance, &raw.1) {
            (Covariance::Net(c), Some(cache)) => CovGrad::Net(c.net.backward(cache, &raw_grad)?.0),
            _ => {
                let mut g = vec![0.0; raw_len(d)];
                for b in 0..n {
                    for (acc, v) in g.iter_mut().zip(raw_grad.row(b)) {
                        *acc += v;
                    }
                }
                CovGrad::Global(g)
            }
        };
        let residual = match (&self.residual, &residual) {
            (Some(r), Some((_, cache))) => Some(r.net.backward(cache, &res_grad)?.0),
            _ => None,
        };
        Ok((total * scale, NllGrads { covariance, residual }))
    }

    /// Eval-mode mean NLL.
    pub fn mean_nll(&self, obs: &RealMatrix, means: &RealMatrix, actions: &RealMatrix) -> Result<f64> {
        // Eval mode draws nothing from the generator.
        let mut unused = SeededRng::new(0);
        Ok(self.nll(obs, means, actions, Mode::Eval, &mut unused)?.0)
    }

    fn apply(&mut self, grads: &NllGrads) -> Result<()> {
        match (&mut self.covariance, &grads.covariance) {
            (Covariance::Net(c), CovGrad::Net(g)) => c.opt.step(&mut c.net, g)?,
            (Covariance::Global(c), CovGrad::Global(g)) => c.opt.step(&mut c.raw, g)?,
            _ => return Err(Error::contract("gradient kind does not match covariance")),
        }
        if let (Some(r), Some(g)) = (&mut self.residual, &grads.residual) {
            r.opt.step(&mut r.net, g)?;
        }
        Ok(())
    }

    /// `epochs_per_update` shuffled minibatch passes of AdamW on the NLL of
    /// `(obs, actions)` around the frozen actor means. Returns the eval-mode
    /// mean NLL after fitting.
    pub fn fit(
        &mut self,
        obs: &RealMatrix,
        means: &RealMatrix,
        actions: &RealMatrix,
        rng: &mut SeededRng,
    ) -> Result<f64> {
        let n = obs.rows();
        if n == 0 {
            return Err(Error::contract("fit needs at least one demo pair"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let bs = self.config.fit_batch_size;
        for _ in 0..self.config.epochs_per_update {
            rng.shuffle(&mut order);
            for chunk in order.chunks(bs) {
                let pick = |m: &RealMatrix| {
                    let mut out = RealMatrix::zeros(chunk.len(), m.cols());
                    for (r, &i) in chunk.iter().enumerate() {
                        out.row_mut(r).copy_from_slice(m.row(i));
                    }
                    out
                };
                let (_, grads) = self.nll(&pick(obs), &pick(means), &pick(actions), Mode::Train, rng)?;
                self.apply(&grads)?;
            }
        }
        self.fits += 1;
        self.mean_nll(obs, means, actions)
    }

    pub fn noise_scale(&self, t: usize) -> f64 {
        noise_scale(&self.schedule, &self.shutoff, t)
    }

    /// `mean + scale·(μφ(obs) + A(obs)·z)` without clipping.
    pub fn sample_unclipped(
        &self,
        obs: &[f64],
        mean: &[f64],
        scale: f64,
        rng: &mut SeededRng,
    ) -> Result<Vec<f64>> {
        if scale == 0.0 {
            return Ok(mean.to_vec());
        }
        let a = self.chol_factor(obs)?;
        let offset = self.mean_offset(obs)?;
        let z = gaussian_draw(rng, self.act_dim);
        Ok((0..self.act_dim)
            .map(|i| {
                let az: f64 = (0..=i).map(|j| a[(i, j)] * z[j]).sum();
                mean[i] + scale * (offset[i] + az)
            })
            .collect())
    }

    /// Exploration action at env step `t`, clipped to `[−1, 1]`.
    pub fn sample(&self, obs: &[f64], mean: &[f64], t: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        let a = self.sample_unclipped(obs, mean, self.noise_scale(t), rng)?;
        Ok(a.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    pub fn record_episode(&mut self, success: bool) {
        self.shutoff.record(success);
    }

    pub fn write_checkpoint(&self, ck: &mut Checkpoint) {
        match &self.covariance {
            Covariance::Net(c) => ck.put_mlp("dgn.cov", &c.net),
            Covariance::Global(g) => ck.put_vector("dgn.global_raw", &g.raw),
        }
        if let Some(r) = &self.residual {
            ck.put_mlp("dgn.residual", &r.net);
        }
    }

    /// Restores the networks (optimizer state starts fresh, schedule state
    /// is not part of the checkpoint).
    pub fn from_checkpoint(config: DgnConfig, obs_dim: usize, act_dim: usize, ck: &Checkpoint) -> Result<Self> {
        config.validate()?;
        let opt = AdamWConfig::with_lr(config.learning_rate).weight_decay(config.weight_decay);
        let covariance = match config.variant {
            Variant::GlobalAblation => {
                let raw = ck.vector("dgn.global_raw")?.to_vec();
                if raw.len() != raw_len(act_dim) {
                    return Err(Error::shape("global covariance length does not match act_dim"));
                }
                Covariance::Global(GlobalCov {
                    opt: AdamWState::new(&raw, opt),
                    raw,
                })
            }
            _ => {
                let net = ck.mlp("dgn.cov")?.clone();
                if net.input_dim() != obs_dim || net.output_dim() != raw_len(act_dim) {
                    return Err(Error::shape("covariance network dims do not match env"));
                }
                Covariance::Net(CovNet {
                    opt: AdamWState::new(&net, opt),
                    net,
                })
            }
        };
        let residual = if config.variant == Variant::Residual {
            let net = ck.mlp("dgn.residual")?.clone();
            Some(ResidualNet {
                opt: AdamWState::new(&net, opt),
                net,
            })
        } else {
            None
        };
        Ok(Self::assemble(config, obs_dim, act_dim, covariance, residual))
    }

    /// Flattened parameters of every DGN network, for gradient checks.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut v = match &self.covariance {
            Covariance::Net(c) => c.net.tensors().concat(),
            Covariance::Global(g) => g.raw.clone(),
        };
        if let Some(r) = &self.residual {
            v.extend(r.net.tensors().concat());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_grad, finite_diff_tensors, max_relative_error, symmetric_eigenvalues};

    fn single(d: usize, delta: &[f64], diag: f64) -> f64 {
        let mut a = RealMatrix::zeros(d, d);
        for i in 0..d {
            a[(i, i)] = diag;
        }
        gaussian_nll(delta, &a).0
    }

    #[test]
    fn softplus_assembly() {
        let a = assemble_factor(&[0.0], 1, 1e-3).unwrap();
        assert!((a[(0, 0)] - std::f64::consts::LN_2).abs() < 1e-15);
        let a = assemble_factor(&[0.0, 0.0, 0.0], 2, 1e-3).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(a.as_slice(), &[ln2, 0.0, 0.0, ln2]);
        let sigma = a.matmul(&a.transpose()).unwrap();
        assert!((sigma[(0, 0)] - ln2 * ln2).abs() < 1e-15);
        assert_eq!(sigma[(0, 1)], 0.0);
    }

    #[test]
    fn diagonal_floor_holds() {
        let a = assemble_factor(&[-500.0, 3.0, -80.0], 2, 1e-3).unwrap();
        assert_eq!(a[(0, 0)], 1e-3);
        assert_eq!(a[(1, 1)], 1e-3);
        assert_eq!(a[(1, 0)], 3.0);
        assert_eq!(a[(0, 1)], 0.0);
        assert!(assemble_factor(&[f64::NAN], 1, 1e-3).is_err());
        assert!(assemble_factor(&[0.0, 0.0], 2, 1e-3).is_err());
    }

    #[test]
    fn nll_reference_values() {
        assert!((single(1, &[0.0], 1.0) - 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((single(2, &[0.0, 0.0], 1.0) - 1.837_877_066_409_345_3).abs() < 1e-12);
        assert!((single(1, &[2.0], 1.0) - 2.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn nll_matches_explicit_inverse() {
        // Independent route: explicit 2x2 inverse and determinant.
        let a = RealMatrix::from_rows(&[vec![0.7, 0.0], vec![-0.4, 1.3]]).unwrap();
        let s = a.matmul(&a.transpose()).unwrap();
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        let inv = [[s[(1, 1)] / det, -s[(0, 1)] / det], [-s[(1, 0)] / det, s[(0, 0)] / det]];
        let d = [0.3, -0.9];
        let quad = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
        let expected = 0.5 * quad + 0.5 * det.ln() + LOG_2PI;
        assert!((gaussian_nll(&d, &a).0 - expected).abs() < 1e-12);
    }

    fn test_policy(variant: Variant, seed: u64) -> SamplingPolicy {
        let cfg = DgnConfig {
            variant,
            hidden: vec![8, 8],
            dropout_rate: 0.0,
            ..DgnConfig::default()
        };
        let mut rng = SeededRng::new(seed);
        let mut p = SamplingPolicy::new(cfg, 3, 2, &mut rng).unwrap();
        if let Some(r) = &mut p.residual {
            // Non-zero offsets so the residual gradient path is exercised.
            r.net = MlpParams::init(r.net.layer_sizes(), 0.0, &mut rng).unwrap();
        }
        p
    }

    fn random_set(n: usize, seed: u64) -> (RealMatrix, RealMatrix, RealMatrix) {
        let mut rng = SeededRng::new(seed);
        let mut m = |c: usize, s: f64| {
            RealMatrix::from_vec(n, c, (0..n * c).map(|_| s * rng.normal()).collect()).unwrap()
        };
        (m(3, 1.0), m(2, 0.3), m(2, 0.5))
    }

    #[test]
    fn nll_gradients_match_finite_differences() {
        let (obs, means, actions) = random_set(7, 1);
        for variant in [Variant::ZeroMean, Variant::Residual, Variant::GlobalAblation] {
            let p = test_policy(variant, 2);
            let (_, g) = p.mean_nll_grads(&obs, &means, &actions);
            match (&p.covariance, &g.covariance) {
                (Covariance::Net(c), CovGrad::Net(gn)) => {
                    let fd = finite_diff_grad(
                        |net| {
                            let mut q = p.clone();
                            if let Covariance::Net(cc) = &mut q.covariance {
                                cc.net = net.clone();
                            }
                            q.mean_nll(&obs, &means, &actions).unwrap()
                        },
                        &c.net,
                        1e-6,
                    );
                    let err = max_relative_error(&gn.flatten(), &fd.flatten());
                    assert!(err < 1e-4, "{variant}: cov err {err}");
                }
                (Covariance::Global(c), CovGrad::Global(gg)) => {
                    let fd = finite_diff_tensors(
                        |raw: &Vec<f64>| {
                            let mut q = p.clone();
                            if let Covariance::Global(cc) = &mut q.covariance {
                                cc.raw = raw.clone();
                            }
                            q.mean_nll(&obs, &means, &actions).unwrap()
                        },
                        &c.raw,
                        1e-6,
                    );
                    let err = max_relative_error(gg, &fd[0]);
                    assert!(err < 1e-4, "{variant}: global err {err}");
                }
                _ => unreachable!(),
            }
            if let (Some(r), Some(gr)) = (&p.residual, &g.residual) {
                let fd = finite_diff_grad(
                    |net| {
                        let mut q = p.clone();
                        q.residual.as_mut().unwrap().net = net.clone();
                        q.mean_nll(&obs, &means, &actions).unwrap()
                    },
                    &r.net,
                    1e-6,
                );
                let err = max_relative_error(&gr.flatten(), &fd.flatten());
                assert!(err < 1e-4, "residual err {err}");
            }
        }
    }

    impl SamplingPolicy {
        fn mean_nll_grads(&self, obs: &RealMatrix, means: &RealMatrix, actions: &RealMatrix) -> (f64, NllGrads) {
            self.nll(obs, means, actions, Mode::Eval, &mut SeededRng::new(0)).unwrap()
        }
    }

    #[test]
    fn covariance_is_positive_definite() {
        let p = test_policy(Variant::ZeroMean, 3);
        let mut rng = SeededRng::new(4);
        for _ in 0..1000 {
            let obs = gaussian_draw(&mut rng, 3);
            let s = p.covariance_at(&obs).unwrap();
            for ev in symmetric_eigenvalues(&s) {
                assert!(ev >= 1e-6 - 1e-9, "{ev}");
            }
        }
    }

    #[test]
    fn schedule_values() {
        let anneal = AnnealSchedule { tau: Some(30000.0) };
        let open = ShutoffMonitor::new(10, 0.5);
        assert_eq!(noise_scale(&anneal, &open, 0), 1.0);
        assert!((noise_scale(&anneal, &open, 30000) - (-1.0f64).exp()).abs() < 1e-12);
        let plain = AnnealSchedule { tau: None };
        assert_eq!(noise_scale(&plain, &open, 123_456), 1.0);
        let mut tripped = ShutoffMonitor::new(1, 0.5);
        tripped.record(true);
        assert_eq!(noise_scale(&anneal, &tripped, 0), 0.0);
    }

    #[test]
    fn shutoff_window_and_latch() {
        let mut m = ShutoffMonitor::new(10, 0.5);
        for _ in 0..5 {
            m.record(true);
        }
        assert!(!m.tripped(), "window not full");
        for i in 0..5 {
            m.record(false);
            assert_eq!(m.tripped(), i == 4);
        }
        for _ in 0..10 {
            m.record(false);
        }
        assert!(m.tripped());
        let mut off = ShutoffMonitor::disabled();
        for _ in 0..50 {
            off.record(true);
        }
        assert!(!off.tripped());
    }

    #[test]
    fn zero_scale_returns_mean() {
        let p = test_policy(Variant::Residual, 5);
        let mut rng = SeededRng::new(1);
        let mean = [0.25, -0.5];
        assert_eq!(p.sample_unclipped(&[0.1, 0.2, 0.3], &mean, 0.0, &mut rng).unwrap(), mean);
        let mut q = p.clone();
        q.record_episode(true);
        q.shutoff = ShutoffMonitor::new(1, 0.5);
        q.record_episode(true);
        assert_eq!(q.sample(&[0.1, 0.2, 0.3], &mean, 0, &mut rng).unwrap(), mean);
    }

    #[test]
    fn sample_covariance_matches_factor() {
        let p = test_policy(Variant::ZeroMean, 6);
        let obs = [0.4, -0.2, 0.9];
        let sigma = p.covariance_at(&obs).unwrap();
        let mut rng = SeededRng::new(7);
        let n = 100_000;
        let mut acc = [[0.0; 2]; 2];
        for _ in 0..n {
            let a = p.sample_unclipped(&obs, &[0.0, 0.0], 1.0, &mut rng).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += a[i] * a[j];
                }
            }
        }
        let mut diff = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                diff += (acc[i][j] / n as f64 - sigma[(i, j)]).powi(2);
            }
        }
        let rel = diff.sqrt() / sigma.frobenius_norm();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn residual_sample_mean() {
        let p = test_policy(Variant::Residual, 8);
        let obs = [0.1, 0.5, -0.3];
        let base = [0.2, -0.1];
        let off = p.mean_offset(&obs).unwrap();
        let sigma = p.covariance_at(&obs).unwrap();
        let mut rng = SeededRng::new(9);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let a = p.sample_unclipped(&obs, &base, 1.0, &mut rng).unwrap();
            sum[0] += a[0];
            sum[1] += a[1];
        }
        for i in 0..2 {
            let se = (sigma[(i, i)] / n as f64).sqrt();
            let got = sum[i] / n as f64;
            assert!((got - base[i] - off[i]).abs() < 3.0 * se, "dim {i}: {got}");
        }
    }

    #[test]
    fn zero_epochs_leave_parameters() {
        let mut p = test_policy(Variant::Residual, 10);
        p.config.epochs_per_update = 0;
        let before = p.parameter_vector();
        let (obs, means, actions) = random_set(20, 2);
        p.fit(&obs, &means, &actions, &mut SeededRng::new(0)).unwrap();
        assert_eq!(p.parameter_vector(), before);
    }

    #[test]
    fn fit_recovers_constant_noise() {
        // a = μ + L z with L fixed; the best achievable mean NLL is the
        // Gaussian entropy ½ log det(2πe Σ*).
        let l = RealMatrix::from_rows(&[vec![0.3, 0.0], vec![0.1, 0.15]]).unwrap();
        let n = 4000;
        let mut rng = SeededRng::new(11);
        let obs = RealMatrix::from_vec(n, 3, (0..n * 3).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap();
        let means = RealMatrix::from_vec(n, 2, (0..n * 2).map(|_| rng.uniform_in(-0.5, 0.5)).collect()).unwrap();
        let mut actions = means.clone();
        for b in 0..n {
            let z = gaussian_draw(&mut rng, 2);
            actions[(b, 0)] += l[(0, 0)] * z[0];
            actions[(b, 1)] += l[(1, 0)] * z[0] + l[(1, 1)] * z[1];
        }
        let det_l = l[(0, 0)] * l[(1, 1)];
        let optimum = LOG_2PI + 1.0 + det_l.ln();
        let cfg = DgnConfig {
            hidden: vec![16, 16],
            dropout_rate: 0.0,
            epochs_per_update: 20,
            ..DgnConfig::default()
        };
        let mut p = SamplingPolicy::new(cfg, 3, 2, &mut rng).unwrap();
        let nll = p.fit(&obs, &means, &actions, &mut rng).unwrap();
        assert!((nll - optimum).abs() < 0.05, "nll {nll} vs {optimum}");
    }

    fn two_cluster(n: usize, rng: &mut SeededRng) -> (RealMatrix, RealMatrix, RealMatrix, [RealMatrix; 2]) {
        let truth = [
            RealMatrix::from_rows(&[vec![0.4, 0.0], vec![0.0, 0.05]]).unwrap(),
            RealMatrix::from_rows(&[vec![0.05, 0.0], vec![0.2, 0.3]]).unwrap(),
        ];
        let mut obs = RealMatrix::zeros(n, 3);
        let means = RealMatrix::zeros(n, 2);
        let mut actions = RealMatrix::zeros(n, 2);
        for b in 0..n {
            let c = b % 2;
            let centre = if c == 0 { -1.0 } else { 1.0 };
            for k in 0..3 {
                obs[(b, k)] = centre + 0.1 * rng.normal();
            }
            let z = gaussian_draw(rng, 2);
            let l = &truth[c];
            actions[(b, 0)] = l[(0, 0)] * z[0];
            actions[(b, 1)] = l[(1, 0)] * z[0] + l[(1, 1)] * z[1];
        }
        (obs, means, actions, truth)
    }

    #[test]
    fn state_conditioning_beats_global_factor() {
        let mut rng = SeededRng::new(12);
        let (obs, means, actions, truth) = two_cluster(2000, &mut rng);
        let fit = |variant: Variant, rng: &mut SeededRng| {
            let cfg = DgnConfig {
                variant,
                hidden: vec![16, 16],
                dropout_rate: 0.0,
                epochs_per_update: 30,
                ..DgnConfig::default()
            };
            let mut p = SamplingPolicy::new(cfg, 3, 2, rng).unwrap();
            let nll = p.fit(&obs, &means, &actions, rng).unwrap();
            (p, nll)
        };
        let (net, net_nll) = fit(Variant::ZeroMean, &mut rng);
        let (_, global_nll) = fit(Variant::GlobalAblation, &mut rng);
        assert!(global_nll - net_nll >= 0.1, "{net_nll} vs {global_nll}");
        for (c, centre) in [(0, -1.0), (1, 1.0)] {
            let got = net.covariance_at(&[centre; 3]).unwrap();
            let want = truth[c].matmul(&truth[c].transpose()).unwrap();
            let rel = got.sub(&want).unwrap().frobenius_norm() / want.frobenius_norm();
            assert!(rel < 0.2, "cluster {c}: {rel}");
        }
    }

    #[test]
    fn held_out_nll_decreases_over_fits() {
        let mut rng = SeededRng::new(13);
        let (obs, means, actions, _) = two_cluster(1000, &mut rng);
        let (h_obs, h_means, h_actions, _) = two_cluster(1000, &mut rng);
        let cfg = DgnConfig {
            hidden: vec![16, 16],
            ..DgnConfig::default()
        };
        let mut p = SamplingPolicy::new(cfg, 3, 2, &mut rng).unwrap();
        let mut last = p.mean_nll(&h_obs, &h_means, &h_actions).unwrap();
        for _ in 0..3 {
            p.fit(&obs, &means, &actions, &mut rng).unwrap();
            let now = p.mean_nll(&h_obs, &h_means, &h_actions).unwrap();
            assert!(now < last, "{now} >= {last}");
            last = now;
        }
    }
}
