use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// One update of `params` over the given index ranges only.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, ranges: &[Range<usize>]) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for r in ranges {
            for i in r.clone() {
                let g = grads[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / c1;
                let v_hat = self.v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Linear warmup to `peak` over the first `warmup_fraction` of `total_steps`,
/// then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
}

impl LrSchedule {
    pub fn new(peak: f64, total_steps: usize) -> Self {
        LrSchedule {
            peak,
            total_steps,
            warmup_fraction: 0.1,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let warmup = (self.total_steps as f64 * self.warmup_fraction).ceil() as usize;
        if warmup == 0 || step >= warmup {
            self.peak
        } else {
            self.peak * (step + 1) as f64 / warmup as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_constant() {
        let s = LrSchedule::new(1.0, 100);
        assert!((s.lr(0) - 0.1).abs() < 1e-12);
        assert!((s.lr(9) - 1.0).abs() < 1e-12);
        assert_eq!(s.lr(50), 1.0);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut a = Adam::new(3);
        let mut p = vec![1.0, 2.0, 3.0];
        a.update(&mut p, &[0.5, -0.5, 1.0], 0.0, &[0..3]);
        assert_eq!(p, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let mut a = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        a.update(&mut p, &[2.0, -3.0], 0.1, &[0..1]);
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert_eq!(p[1], 0.0);
    }
}
