//! Central finite differences: the independent oracle for every analytic
//! gradient in the crate.

use super::mlp::{GradBundle, MlpParams};
use super::Tensors;

/// Central-difference gradient of `f` at `params`, one tensor per entry of
/// `params.tensors()`.
pub fn finite_diff_tensors<P, F>(mut f: F, params: &P, h: f64) -> Vec<Vec<f64>>
where
    P: Tensors + Clone,
    F: FnMut(&P) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = params.clone();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (ti, &n) in shapes.iter().enumerate() {
        let mut g = vec![0.0; n];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = probe.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + h;
            let up = f(&probe);
            probe.tensors_mut()[ti][i] = orig - h;
            let down = f(&probe);
            probe.tensors_mut()[ti][i] = orig;
            *gi = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Finite-difference gradient of a scalar function of a network's parameters.
pub fn finite_diff_grad<F>(f: F, params: &MlpParams, h: f64) -> GradBundle
where
    F: FnMut(&MlpParams) -> f64,
{
    let flat = finite_diff_tensors(f, params, h);
    let mut g = GradBundle::zeros_like(params);
    for (dst, src) in g.tensors_mut().into_iter().zip(flat) {
        dst.copy_from_slice(&src);
    }
    g
}

/// Largest elementwise relative error `|a-b| / max(|a|, |b|, 1e-3)`.
///
/// The floor keeps near-zero components from turning round-off into huge
/// ratios: below it the comparison is effectively absolute at 1e-7.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-3))
        .fold(0.0, f64::max)
}
