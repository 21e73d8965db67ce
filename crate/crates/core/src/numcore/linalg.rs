//! Small dense linear algebra on [`RealMatrix`]: action dimensions here are
//! a handful, so plain O(d³) routines are all that is needed.

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `L·Lᵀ = m`.
pub fn cholesky(m: &RealMatrix) -> Result<RealMatrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::shape("cholesky of a non-square matrix"));
    }
    let mut l = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::numeric("matrix is not positive definite"));
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L·x = b` for lower-triangular `L`.
pub fn solve_lower(l: &RealMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ·x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &RealMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// `A·Aᵀ`.
pub fn outer_self(a: &RealMatrix) -> RealMatrix {
    a.matmul(&a.transpose()).expect("square by construction")
}

/// Closed-form `KL(N(mu1, cov1) ‖ N(mu2, cov2))`.
pub fn gaussian_kl(
    mu1: &[f64],
    cov1: &RealMatrix,
    mu2: &[f64],
    cov2: &RealMatrix,
) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || cov1.shape() != (d, d) || cov2.shape() != (d, d) {
        return Err(Error::shape(format!(
            "KL between mismatched Gaussians (dims {d}, {}, {:?}, {:?})",
            mu2.len(),
            cov1.shape(),
            cov2.shape()
        )));
    }
    let l1 = cholesky(cov1)?;
    let l2 = cholesky(cov2)?;
    // tr(Σ₂⁻¹Σ₁) = ‖L₂⁻¹L₁‖²_F
    let mut trace = 0.0;
    for j in 0..d {
        let col: Vec<f64> = (0..d).map(|i| l1[(i, j)]).collect();
        trace += solve_lower(&l2, &col).iter().map(|v| v * v).sum::<f64>();
    }
    let diff: Vec<f64> = mu2.iter().zip(mu1).map(|(a, b)| a - b).collect();
    let maha: f64 = solve_lower(&l2, &diff).iter().map(|v| v * v).sum();
    let logdet = |l: &RealMatrix| 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok(0.5 * (trace + maha - d as f64 + logdet(&l2) - logdet(&l1)))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &RealMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> RealMatrix {
        let mut m = RealMatrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[test]
    fn kl_identical_is_zero() {
        let c = RealMatrix::from_vec(2, 2, vec![2.0, 0.3, 0.3, 1.0]).unwrap();
        let kl = gaussian_kl(&[0.1, 0.2], &c, &[0.1, 0.2], &c).unwrap();
        assert!(kl.abs() < 1e-12);
    }

    #[test]
    fn kl_unit_mean_shift() {
        let kl = gaussian_kl(&[0.0], &diag(&[1.0]), &[1.0], &diag(&[1.0])).unwrap();
        assert!((kl - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_variance_ratio() {
        // σ₁ = 2, σ₂ = 1: ½[4 − 1 + ln(1/4)]
        let kl = gaussian_kl(&[0.0], &diag(&[4.0]), &[0.0], &diag(&[1.0])).unwrap();
        let expected = 0.5 * (3.0 + (0.25f64).ln());
        assert!((kl - expected).abs() < 1e-12);
        assert!((kl - 0.806_852_819_440_054_3).abs() < 1e-12);
    }

    #[test]
    fn kl_dimension_mismatch() {
        assert!(gaussian_kl(&[0.0], &diag(&[1.0]), &[0.0, 1.0], &diag(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn cholesky_round_trip_and_solves() {
        let m = RealMatrix::from_vec(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0])
            .unwrap();
        let l = cholesky(&m).unwrap();
        let back = outer_self(&l);
        assert!(back.sub(&m).unwrap().frobenius_norm() < 1e-12);
        let b = [1.0, -2.0, 0.5];
        let x = solve_lower(&l, &b);
        let lx: Vec<f64> = (0..3).map(|i| (0..3).map(|k| l[(i, k)] * x[k]).sum()).collect();
        for (a, b) in lx.iter().zip(&b) {
            assert!((a - b).abs() < 1e-12);
        }
        let y = solve_lower_transpose(&l, &b);
        let lty: Vec<f64> = (0..3).map(|i| (0..3).map(|k| l[(k, i)] * y[k]).sum()).collect();
        for (a, b) in lty.iter().zip(&b) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = RealMatrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = symmetric_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
