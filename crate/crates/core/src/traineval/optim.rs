use super::TrainError;
use crate::gnn::ParamStore;
use crate::numcore::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for every tensor of one parameter store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    /// One bias-corrected update. `grads` follows store order. Nothing is
    /// modified if any gradient is non-finite.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &[Tensor],
        lr: f64,
    ) -> Result<(), TrainError> {
        assert_eq!(grads.len(), self.first.len(), "one gradient per parameter");
        for ((name, p), g) in params.iter().zip(grads) {
            if g.shape() != p.shape() {
                return Err(TrainError::GradientShape {
                    param: name.to_string(),
                    expected: p.shape().to_vec(),
                    found: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient {
                    param: name.to_string(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` whenever the monitored loss has
/// not improved for `patience` consecutive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    pub base_lr: f64,
    pub factor: f64,
    pub patience: usize,
    /// An observation improves only if it is below `best - min_improvement`.
    pub min_improvement: f64,
    best: f64,
    stale: usize,
    decays: u32,
}

impl PlateauSchedule {
    pub fn new(base_lr: f64, factor: f64, patience: usize) -> Self {
        assert!(base_lr > 0.0 && factor > 0.0 && factor <= 1.0 && patience > 0);
        Self {
            base_lr,
            factor,
            patience,
            min_improvement: 1e-6,
            best: f64::INFINITY,
            stale: 0,
            decays: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.base_lr * self.factor.powi(self.decays as i32)
    }

    pub fn decays(&self) -> u32 {
        self.decays
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records one monitored value and returns the learning rate to use next.
    pub fn observe(&mut self, value: f64) -> f64 {
        if value < self.best - self.min_improvement {
            self.best = value;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.decays += 1;
                self.stale = 0;
            }
        }
        self.lr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(values.to_vec()));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = store(&[1.0, -2.0]);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut s, &[Tensor::zeros(&[2])], 0.1).unwrap();
        }
        assert_eq!(s.by_name("w").unwrap().data(), &[1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_step_is_lr() {
        let mut s = store(&[0.0]);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        let mut prev = 0.0;
        for _ in 0..2000 {
            adam.step(&mut s, &[Tensor::vector(vec![3.0])], 0.01)
                .unwrap();
            let now = s.by_name("w").unwrap().data()[0];
            let delta = now - prev;
            prev = now;
            assert!((delta + 0.01).abs() < 1e-6, "{delta}");
        }
    }

    #[test]
    fn minimizes_square() {
        let mut s = store(&[1.0]);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        let mut reached = None;
        for step in 1..=500 {
            let w = s.by_name("w").unwrap().data()[0];
            adam.step(&mut s, &[Tensor::vector(vec![2.0 * w])], 0.01)
                .unwrap();
            if s.by_name("w").unwrap().data()[0].abs() < 1e-3 {
                reached = Some(step);
                break;
            }
        }
        assert!(
            reached.is_some(),
            "w = {}",
            s.by_name("w").unwrap().data()[0]
        );
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store(&[1.0]);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        let err = adam
            .step(&mut s, &[Tensor::vector(vec![f64::NAN])], 0.1)
            .unwrap_err();
        assert!(err.to_string().contains("'w'"), "{err}");
        assert_eq!(s.by_name("w").unwrap().data(), &[1.0]);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn plateau_decays_each_window() {
        let mut sched = PlateauSchedule::new(1e-3, 0.8, 3);
        assert_eq!(sched.observe(1.0), 1e-3);
        for k in 1..=4 {
            for _ in 0..3 {
                sched.observe(1.0);
            }
            assert!((sched.lr() - 1e-3 * 0.8f64.powi(k)).abs() < 1e-15);
        }
        // Tiny gains below the threshold do not count.
        let before = sched.decays();
        for i in 0..3 {
            sched.observe(1.0 - 1e-7 * i as f64);
        }
        assert_eq!(sched.decays(), before + 1);
        // A real improvement resets the window.
        sched.observe(0.5);
        sched.observe(0.5);
        sched.observe(0.5);
        assert_eq!(sched.decays(), before + 1);
    }
}
