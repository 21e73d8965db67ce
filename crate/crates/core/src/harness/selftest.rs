//! Quick oracle and property checks runnable from the command line.

use std::path::Path;

use crate::agent::{Agent, AgentConfig};
use crate::baselines::BcPolicy;
use crate::demos::{generate, DemoDataset};
use crate::dgn::{assemble_factor, gaussian_nll, noise_scale, AnnealSchedule, DgnConfig, ShutoffMonitor, SamplingPolicy, Variant};
use crate::envs::{EnvKind, ExpertMode};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::eval::evaluate;
use crate::numcore::{
    finite_diff_grad, gaussian_draw, gaussian_kl, max_relative_error, MlpParams, Mode, RealMatrix, SeededRng,
};

pub struct CheckOutcome {
    pub name: &'static str,
    pub result: Result<()>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<()> {
    ensure((got - want).abs() <= tol, || format!("{what}: {got} vs {want}"))
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> RealMatrix {
    RealMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect())
        .expect("consistent shape")
}

fn nll_values() -> Result<()> {
    let a1 = RealMatrix::identity(1);
    close(gaussian_nll(&[0.0], &a1).0, 0.918_938_533_204_672_7, 1e-12, "d=1 mode")?;
    close(gaussian_nll(&[2.0], &a1).0, 2.918_938_533_204_672_7, 1e-12, "d=1 delta=2")?;
    let a2 = RealMatrix::identity(2);
    close(gaussian_nll(&[0.0, 0.0], &a2).0, 1.837_877_066_409_345_3, 1e-12, "d=2 mode")?;
    let a = assemble_factor(&[0.0], 1, 1e-3)?;
    close(a[(0, 0)], std::f64::consts::LN_2, 1e-15, "softplus(0)")
}

fn kl_values() -> Result<()> {
    let one = RealMatrix::identity(1);
    let four = RealMatrix::from_vec(1, 1, vec![4.0])?;
    close(gaussian_kl(&[0.0], &one, &[0.0], &one)?, 0.0, 1e-9, "identical")?;
    close(gaussian_kl(&[0.0], &one, &[1.0], &one)?, 0.5, 1e-9, "unit shift")?;
    let want = 0.5 * (4.0 - 1.0 + (0.25f64).ln());
    close(gaussian_kl(&[0.0], &four, &[0.0], &one)?, want, 1e-9, "variance ratio 4")
}

fn schedule() -> Result<()> {
    let anneal = AnnealSchedule { tau: Some(30000.0) };
    let mut mon = ShutoffMonitor::new(10, 0.5);
    close(noise_scale(&anneal, &mon, 0), 1.0, 0.0, "scale at 0")?;
    close(noise_scale(&anneal, &mon, 30000), (-1.0f64).exp(), 1e-12, "scale at tau")?;
    for i in 0..10 {
        mon.record(i < 5);
        ensure(mon.tripped() == (i == 9), || format!("shutoff state after episode {i}"))?;
    }
    for _ in 0..10 {
        mon.record(false);
    }
    ensure(mon.tripped(), || "shutoff did not latch".into())?;
    close(noise_scale(&anneal, &mon, 5), 0.0, 0.0, "tripped scale")
}

fn mlp_mse_gradient() -> Result<()> {
    let mut rng = SeededRng::new(21);
    let net = MlpParams::init(&[4, 16, 16, 1], 0.0, &mut rng)?;
    let x = random_matrix(6, 4, 1.0, &mut rng);
    let y: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let loss = |n: &MlpParams| {
        let q = n.predict(&x).expect("shapes fixed");
        q.as_slice().iter().zip(&y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / 6.0
    };
    let (q, cache) = net.forward_eval(&x)?;
    let dq = RealMatrix::from_vec(6, 1, q.as_slice().iter().zip(&y).map(|(q, y)| 2.0 * (q - y) / 6.0).collect())?;
    let (g, _) = net.backward(&cache, &dq)?;
    let err = max_relative_error(&g.flatten(), &finite_diff_grad(loss, &net, 1e-6).flatten());
    ensure(err < 1e-4, || format!("critic-style gradient error {err}"))
}

fn actor_gradient() -> Result<()> {
    let mut rng = SeededRng::new(22);
    let cfg = AgentConfig {
        ensemble_size: 2,
        actor_hidden: vec![12, 12],
        critic_hidden: vec![12, 12],
        ..AgentConfig::default()
    };
    let agent = Agent::new(cfg, 4, 2, &mut rng)?;
    let obs = random_matrix(5, 4, 1.0, &mut rng);
    let (_, g) = agent.actor_objective(&obs, &mut SeededRng::new(0))?;
    let fd = finite_diff_grad(
        |a| {
            let mut ag = agent.clone();
            ag.actor = a.clone();
            ag.actor_objective(&obs, &mut SeededRng::new(0)).expect("shapes fixed").0
        },
        &agent.actor,
        1e-6,
    );
    let err = max_relative_error(&g.flatten(), &fd.flatten());
    ensure(err < 1e-4, || format!("actor gradient error {err}"))
}

fn covariance_gradient() -> Result<()> {
    let mut rng = SeededRng::new(23);
    let cfg = DgnConfig {
        variant: Variant::Residual,
        hidden: vec![8, 8],
        dropout_rate: 0.0,
        ..DgnConfig::default()
    };
    let mut p = SamplingPolicy::new(cfg, 3, 2, &mut rng)?;
    if let Some(r) = &mut p.residual {
        r.net = MlpParams::init(r.net.layer_sizes(), 0.0, &mut rng)?;
    }
    let obs = random_matrix(6, 3, 1.0, &mut rng);
    let means = random_matrix(6, 2, 0.3, &mut rng);
    let actions = random_matrix(6, 2, 0.5, &mut rng);
    let (_, g) = p.nll(&obs, &means, &actions, Mode::Eval, &mut rng)?;
    let (crate::dgn::Covariance::Net(c), crate::dgn::CovGrad::Net(gc)) = (&p.covariance, &g.covariance) else {
        return Err(Error::contract("expected a covariance network"));
    };
    let fd = finite_diff_grad(
        |n| {
            let mut q = p.clone();
            if let crate::dgn::Covariance::Net(cc) = &mut q.covariance {
                cc.net = n.clone();
            }
            q.mean_nll(&obs, &means, &actions).expect("shapes fixed")
        },
        &c.net,
        1e-6,
    );
    let err = max_relative_error(&gc.flatten(), &fd.flatten());
    ensure(err < 1e-4, || format!("covariance gradient error {err}"))?;
    let r = p.residual.as_ref().expect("residual variant");
    let fd = finite_diff_grad(
        |n| {
            let mut q = p.clone();
            q.residual.as_mut().expect("residual variant").net = n.clone();
            q.mean_nll(&obs, &means, &actions).expect("shapes fixed")
        },
        &r.net,
        1e-6,
    );
    let gr = g.residual.as_ref().expect("residual gradient");
    let err = max_relative_error(&gr.flatten(), &fd.flatten());
    ensure(err < 1e-4, || format!("residual gradient error {err}"))
}

fn bc_gradient() -> Result<()> {
    let mut rng = SeededRng::new(24);
    let bc = BcPolicy::new(3, 2, &[8], &mut rng)?;
    let obs = random_matrix(5, 3, 1.0, &mut rng);
    let actions = random_matrix(5, 2, 0.4, &mut rng);
    let (_, g, _) = bc.nll(&obs, &actions)?;
    let fd = finite_diff_grad(
        |n| {
            let mut p = bc.clone();
            p.net = n.clone();
            p.nll(&obs, &actions).expect("shapes fixed").0
        },
        &bc.net,
        1e-6,
    );
    let err = max_relative_error(&g.flatten(), &fd.flatten());
    ensure(err < 1e-4, || format!("bc gradient error {err}"))
}

fn covariance_sampling() -> Result<()> {
    let mut rng = SeededRng::new(25);
    let cfg = DgnConfig {
        hidden: vec![8],
        ..DgnConfig::default()
    };
    let p = SamplingPolicy::new(cfg, 3, 2, &mut rng)?;
    let obs = gaussian_draw(&mut rng, 3);
    let sigma = p.covariance_at(&obs)?;
    let n = 40_000;
    let mut acc = [0.0; 4];
    for _ in 0..n {
        let a = p.sample_unclipped(&obs, &[0.0, 0.0], 1.0, &mut rng)?;
        acc[0] += a[0] * a[0];
        acc[1] += a[0] * a[1];
        acc[2] += a[1] * a[0];
        acc[3] += a[1] * a[1];
    }
    let emp = RealMatrix::from_vec(2, 2, acc.iter().map(|v| v / n as f64).collect())?;
    let rel = emp.sub(&sigma)?.frobenius_norm() / sigma.frobenius_norm();
    ensure(rel < 0.05, || format!("sample covariance error {rel}"))
}

fn experts() -> Result<()> {
    for kind in EnvKind::ALL {
        for mode in [ExpertMode::A, ExpertMode::B] {
            let r = evaluate(&kind.spec(), 30, 1, |s, _| Ok(crate::envs::expert_action(s, mode)))?;
            ensure(r.success_rate >= 0.95, || format!("{kind} expert {mode}: {}", r.success_rate))?;
        }
    }
    Ok(())
}

fn demo_round_trip() -> Result<()> {
    let d = generate(&EnvKind::PointMaze.spec(), 3, 0.1, &[(ExpertMode::A, 1.0)], 7)?;
    let back = DemoDataset::from_text(&d.to_text())?;
    ensure(back == d, || "demo text round trip changed the data".into())
}

fn config_round_trip() -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(&["method=dgn_residual", "agent.critic_hidden=32,32", "dgn.anneal_tau=30000"])?;
    let back = ExperimentConfig::from_text(Path::new("<selftest>"), &cfg.to_text())?;
    ensure(back == cfg, || "config text round trip changed the settings".into())
}

/// Runs every check; each outcome is independent of the others.
pub fn run_selftest() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<()>); 12] = [
        ("nll reference values", nll_values),
        ("gaussian kl unit cases", kl_values),
        ("noise schedule and shutoff", schedule),
        ("critic regression gradient", mlp_mse_gradient),
        ("actor gradient", actor_gradient),
        ("covariance and residual gradients", covariance_gradient),
        ("bc gradient", bc_gradient),
        ("sample covariance", covariance_sampling),
        ("scripted experts", experts),
        ("demo file round trip", demo_round_trip),
        ("config round trip", config_round_trip),
        ("eval determinism", eval_determinism),
    ];
    checks
        .into_iter()
        .map(|(name, f)| CheckOutcome { name, result: f() })
        .collect()
}

fn eval_determinism() -> Result<()> {
    let spec = EnvKind::ReacherSparse.spec();
    let run = || evaluate(&spec, 5, 3, |_, o| Ok(vec![o[4].tanh(), -o[5].tanh()]));
    ensure(run()? == run()?, || "evaluation is not repeatable".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_selftest() {
            assert!(c.result.is_ok(), "{}: {:?}", c.name, c.result.err());
        }
    }
}
