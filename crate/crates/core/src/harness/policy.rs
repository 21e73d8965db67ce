//! The learned artefacts of a run, separated from buffers and schedules so
//! they can be checkpointed, evaluated and compared against BC.

use std::path::Path;

use crate::agent::Agent;
use crate::baselines::{ibrl_act_eval, BcPolicy};
use crate::checkpoint::Checkpoint;
use crate::dgn::SamplingPolicy;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::numcore::RealMatrix;

#[derive(Debug, Clone)]
pub struct RunPolicy {
    pub method: Method,
    pub agent: Agent,
    pub dgn: Option<SamplingPolicy>,
    /// IL proposal of IBRL.
    pub bc: Option<BcPolicy>,
}

impl RunPolicy {
    /// Deterministic evaluation action.
    pub fn act_eval(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match (&self.method, &self.bc) {
            (Method::Ibrl, Some(bc)) => ibrl_act_eval(&self.agent, bc, obs),
            _ => self.agent.act_eval(obs),
        }
    }

    /// Gaussian stand-in for the method's action distribution at `obs`:
    /// `N(μθ + μφ, Σφ)` for DGN variants, `N(mean, σ_explore² I)` otherwise
    /// (for IBRL the mean is the greedily selected proposal).
    pub fn distribution(&self, obs: &[f64]) -> Result<(Vec<f64>, RealMatrix)> {
        if let Some(dgn) = &self.dgn {
            let mut mean = self.agent.act_eval(obs)?;
            for (m, o) in mean.iter_mut().zip(dgn.mean_offset(obs)?) {
                *m += o;
            }
            return Ok((mean, dgn.covariance_at(obs)?));
        }
        let d = self.agent.act_dim();
        let var = self.agent.config.explore_std.powi(2);
        let mut cov = RealMatrix::zeros(d, d);
        for i in 0..d {
            cov[(i, i)] = var;
        }
        Ok((self.act_eval(obs)?, cov))
    }

    pub fn to_checkpoint(&self, config: &ExperimentConfig, step: usize) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("method", self.method);
        ck.set_meta("env", config.env.name());
        ck.set_meta("step", step);
        ck.set_meta("config", config.to_text());
        self.agent.write_checkpoint(&mut ck);
        if let Some(dgn) = &self.dgn {
            dgn.write_checkpoint(&mut ck);
        }
        if let Some(bc) = &self.bc {
            bc.write_checkpoint(&mut ck, "ibrl_bc");
        }
        ck
    }

    /// Rebuilds the policy and the configuration it was trained with.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ExperimentConfig, usize)> {
        let config = ExperimentConfig::from_text(Path::new("<checkpoint config>"), ck.meta("config")?)?;
        let step: usize = ck
            .meta("step")?
            .parse()
            .map_err(|_| Error::contract("checkpoint step is not a count"))?;
        let agent = Agent::from_checkpoint(config.agent.clone(), ck)?;
        let dgn = match config.dgn_config() {
            Some(dc) => Some(SamplingPolicy::from_checkpoint(dc, agent.obs_dim(), agent.act_dim(), ck)?),
            None => None,
        };
        let bc = if config.method == Method::Ibrl {
            Some(BcPolicy::from_checkpoint(ck, "ibrl_bc")?)
        } else {
            None
        };
        Ok((
            Self {
                method: config.method,
                agent,
                dgn,
                bc,
            },
            config,
            step,
        ))
    }
}
