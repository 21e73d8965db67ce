//! Deterministic numerics shared by every other module: dense matrices, the
//! seeded generator, feed-forward networks with reverse-mode gradients,
//! AdamW, a finite-difference oracle and small dense linear algebra.

pub mod adamw;
pub mod gradcheck;
pub mod linalg;
pub mod matrix;
pub mod mlp;
pub mod rng;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use gradcheck::{finite_diff_grad, finite_diff_tensors, max_relative_error};
pub use matrix::RealMatrix;
pub use mlp::{ForwardCache, GradBundle, MlpParams, Mode};
pub use linalg::{cholesky, gaussian_kl, outer_self, solve_lower, solve_lower_transpose, symmetric_eigenvalues};
pub use rng::{gaussian_draw, SeededRng, Stream};

/// A collection of flat parameter (or gradient) tensors in a fixed order.
pub trait Tensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Tensors for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

/// Polyak blend `target ← rate·online + (1 − rate)·target`.
pub fn polyak_blend<T: Tensors>(target: &mut T, online: &T, rate: f64) {
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        for (tv, &ov) in t.iter_mut().zip(o) {
            *tv = rate * ov + (1.0 - rate) * *tv;
        }
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
