use serde::{Deserialize, Serialize};

use super::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW moments plus a linear learning-rate decay to zero over
/// `total_steps` updates (no warmup).
#[derive(Debug, Clone)]
pub struct OptimState {
    pub cfg: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    total_steps: u64,
}

impl OptimState {
    pub fn new<P: Parameters + ?Sized>(cfg: AdamWConfig, params: &P, total_steps: u64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            cfg,
            m: zeros.clone(),
            v: zeros,
            step: 0,
            total_steps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// `max(0, 1 − step / total_steps)` for the next update.
    pub fn lr_multiplier(&self) -> f64 {
        if self.total_steps == 0 {
            return 0.0;
        }
        (1.0 - self.step as f64 / self.total_steps as f64).max(0.0)
    }

    pub fn current_lr(&self) -> f64 {
        self.cfg.lr * self.lr_multiplier()
    }

    /// One decoupled-weight-decay Adam update with bias correction.
    pub fn update<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) {
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;

        let grads = grads.tensors();
        let params = params.tensors_mut();
        assert_eq!(params.len(), self.m.len(), "parameter tensor count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient tensor count mismatch");
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            assert_eq!(p.len(), g.len(), "gradient shape mismatch");
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalars(Vec<f64>);

    impl Parameters for Scalars {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_only_decays() {
        let cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.01,
            ..AdamWConfig::default()
        };
        let mut p = Scalars(vec![2.0, -3.0]);
        let g = Scalars(vec![0.0, 0.0]);
        let mut opt = OptimState::new(cfg, &p, 100);
        opt.update(&mut p, &g);
        assert!((p.0[0] - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        assert!((p.0[1] + 3.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn first_step_by_hand() {
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + eps)
        let cfg = AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        let mut p = Scalars(vec![1.0]);
        let mut opt = OptimState::new(cfg, &p, 1_000_000);
        opt.update(&mut p, &Scalars(vec![1.0]));
        let expected = 1.0 - 1e-3 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-15);
        assert!((p.0[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn schedule_reaches_zero() {
        let cfg = AdamWConfig {
            lr: 0.5,
            ..AdamWConfig::default()
        };
        let mut p = Scalars(vec![1.0]);
        let g = Scalars(vec![1.0]);
        let mut opt = OptimState::new(cfg, &p, 4);
        let mut mults = Vec::new();
        for _ in 0..4 {
            mults.push(opt.lr_multiplier());
            opt.update(&mut p, &g);
        }
        assert_eq!(mults, vec![1.0, 0.75, 0.5, 0.25]);
        assert_eq!(opt.lr_multiplier(), 0.0);
        let before = p.0[0];
        opt.update(&mut p, &g);
        assert_eq!(p.0[0], before);
    }
}
