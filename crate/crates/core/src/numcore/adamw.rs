use super::Tensors;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

/// Moment accumulators for AdamW with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamWState {
    pub fn new<P: Tensors>(params: &P, config: AdamWConfig) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self {
            config,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One AdamW update in place. Non-finite gradients leave params and
    /// state untouched and return a numeric error.
    pub fn step<P: Tensors, G: Tensors>(&mut self, params: &mut P, grads: &G) -> Result<()> {
        let gs = grads.tensors();
        let mut ps = params.tensors_mut();
        if gs.len() != ps.len()
            || gs.len() != self.first.len()
            || gs
                .iter()
                .zip(&ps)
                .zip(&self.first)
                .any(|((g, p), m)| g.len() != p.len() || g.len() != m.len())
        {
            return Err(Error::shape("optimizer, parameter and gradient shapes differ"));
        }
        if !gs.iter().all(|g| g.iter().all(|v| v.is_finite())) {
            return Err(Error::numeric("non-finite gradient"));
        }
        self.step_count += 1;
        let c = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (((p, g), m), v) in ps
            .iter_mut()
            .zip(&gs)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= c.learning_rate * c.weight_decay * p[i];
                p[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamWState::step`].
pub fn adamw_step<P: Tensors, G: Tensors>(
    params: &mut P,
    grads: &G,
    state: &mut AdamWState,
) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        let mut st = AdamWState::new(&p, AdamWConfig::with_lr(0.1));
        for _ in 0..5 {
            st.step(&mut p, &vec![0.0; 3]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the update is lr·g/(|g| + eps) = 0.1·(1 - 1e-8).
        let mut p = vec![0.0];
        let mut st = AdamWState::new(&p, AdamWConfig::with_lr(0.1));
        st.step(&mut p, &vec![1.0]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn decoupled_weight_decay() {
        let mut p = vec![1.0];
        let mut st = AdamWState::new(&p, AdamWConfig::with_lr(1e-4).weight_decay(3e-2));
        st.step(&mut p, &vec![0.0]).unwrap();
        assert!((p[0] - 0.999997).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamWState::new(&p, AdamWConfig::with_lr(0.1));
        let err = st.step(&mut p, &vec![f64::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamWState::new(&p, AdamWConfig::default());
        assert!(st.step(&mut p, &vec![1.0]).is_err());
    }
}
