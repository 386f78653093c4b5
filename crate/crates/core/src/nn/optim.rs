//! Adam optimizer over flat lists of parameter matrices.

use super::matrix::Matrix;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam state; one slot per parameter matrix, matched by position.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// One update step. `params[i]` is adjusted using `grads[i]`; the
    /// slot count and every shape must stay fixed across calls.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!(
                "{} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(NnError::State(format!(
                "optimizer was initialized with {} slots, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if !p.same_shape(g) || !p.same_shape(m) {
                return Err(NnError::Shape(format!(
                    "param {}x{} vs grad {}x{}",
                    p.rows(),
                    p.cols(),
                    g.rows(),
                    g.cols()
                )));
            }
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let grad = gd[i] + self.cfg.weight_decay * pd[i];
                md[i] = self.cfg.beta1 * md[i] + (1.0 - self.cfg.beta1) * grad;
                vd[i] = self.cfg.beta2 * vd[i] + (1.0 - self.cfg.beta2) * grad * grad;
                let mhat = md[i] / bc1;
                let vhat = vd[i] / bc2;
                pd[i] -= self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Matrix::from_vec(1, 2, vec![0.5, -0.25]).unwrap();
        let orig = p.clone();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut [&mut p], &[Matrix::zeros(1, 2)]).unwrap();
        assert_eq!(p, orig);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // with constant gradient g, the bias-corrected first step is
        // lr * g / (|g| + eps) ~= lr * sign(g)
        let mut p = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let g = Matrix::from_vec(1, 1, vec![0.37]).unwrap();
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg);
        adam.step(&mut [&mut p], &[g]).unwrap();
        let step = 1.0 - p.get(0, 0);
        assert!((step - cfg.lr).abs() < 1e-6, "step was {step}");
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut p = Matrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
            let mut adam = Adam::new(AdamConfig::default());
            for i in 0..25 {
                let g = Matrix::from_fn(2, 2, |r, c| ((r + c + i) as f64 * 0.01).sin());
                adam.step(&mut [&mut p], &[g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = Matrix::zeros(2, 2);
        let mut adam = Adam::new(AdamConfig::default());
        let g = Matrix::zeros(2, 3);
        assert!(adam.step(&mut [&mut p], &[g]).is_err());
    }
}
