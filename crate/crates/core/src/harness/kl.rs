//! Divergence of a trained method's action distribution from a BC policy,
//! averaged over demonstration states.
//!
//! Direction is `KL(method ‖ BC)`. DGN variants use the unscaled learned
//! covariance so the curve stays finite after shutoff.

use std::path::{Path, PathBuf};

use crate::baselines::BcPolicy;
use crate::checkpoint::Checkpoint;
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::harness::policy::RunPolicy;
use crate::numcore::{gaussian_kl, RealMatrix};

/// Mean over the rows of `states` of `KL(run(s) ‖ bc(s))`.
pub fn mean_kl_to_bc(run: &RunPolicy, bc: &BcPolicy, states: &RealMatrix) -> Result<f64> {
    if states.rows() == 0 {
        return Err(Error::contract("KL analysis needs at least one state"));
    }
    let d = bc.act_dim();
    let std = bc.std();
    let mut bc_cov = RealMatrix::zeros(d, d);
    for i in 0..d {
        bc_cov[(i, i)] = std[i] * std[i];
    }
    let mut total = 0.0;
    for b in 0..states.rows() {
        let s = states.row(b);
        let (mu, cov) = run.distribution(s)?;
        total += gaussian_kl(&mu, &cov, &bc.mean(s)?, &bc_cov)?;
    }
    Ok(total / states.rows() as f64)
}

/// Checkpoints of a run directory ordered by step (`checkpoints/*.ckpt`,
/// then `final.ckpt` if its step is new).
pub fn run_checkpoints(run_dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let dir = run_dir.join("checkpoints");
    let mut out = Vec::new();
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "ckpt") {
            let ck = Checkpoint::load(&path)?;
            let step = ck
                .meta("step")?
                .parse()
                .map_err(|_| Error::contract(format!("{}: bad step meta", path.display())))?;
            out.push((step, path));
        }
    }
    let last = run_dir.join("final.ckpt");
    if last.exists() {
        let step: usize = Checkpoint::load(&last)?
            .meta("step")?
            .parse()
            .map_err(|_| Error::contract("final checkpoint has a bad step"))?;
        if !out.iter().any(|(s, _)| *s == step) {
            out.push((step, last));
        }
    }
    out.sort();
    Ok(out)
}

/// KL curve over every checkpoint of a run.
pub fn analyze_kl(run_dir: &Path, bc: &BcPolicy, demos: &DemoDataset) -> Result<Vec<(usize, f64)>> {
    let (states, _) = demos.state_action_pairs();
    let mut curve = Vec::new();
    for (step, path) in run_checkpoints(run_dir)? {
        let (run, _, _) = RunPolicy::from_checkpoint(&Checkpoint::load(&path)?)?;
        curve.push((step, mean_kl_to_bc(&run, bc, &states)?));
    }
    if curve.is_empty() {
        return Err(Error::contract(format!("no checkpoints under {}", run_dir.display())));
    }
    Ok(curve)
}

pub fn curve_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("step,kl\n");
    for (s, k) in curve {
        out.push_str(&format!("{s},{k}\n"));
    }
    out
}
