//! Adam with a cosine-shaped cyclical learning rate.

use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Cyclical learning rate: a raised cosine that starts at `lr_max`, falls to
/// `lr_min` half way through a cycle and returns to `lr_max` at the end.
///
/// `t` is measured in epochs and may be fractional, so the rate can be
/// updated every step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub cycle_epochs: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr_max: 2e-4,
            lr_min: 2e-6,
            cycle_epochs: 4.0,
        }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, t: f64) -> f64 {
        let phase = (2.0 * std::f64::consts::PI * t / self.cycle_epochs).cos();
        self.lr_min + (self.lr_max - self.lr_min) * (1.0 + phase) / 2.0
    }
}

/// Adam optimizer over a fixed list of parameter tensors.
///
/// The caller supplies parameters and gradients in the same order on every
/// step. If any gradient entry is non-finite the step aborts with an error
/// and no state (parameters, moments, step count) changes.
pub struct Adam<S: Scalar> {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<S>], grads: &[Tensor<S>], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Train(format!(
                "optimizer got {} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Train(format!(
                "optimizer was initialized with {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::Train(format!(
                    "parameter {i}: shape {:?} but gradient shape {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Train(format!(
                    "parameter {i}: non-finite gradient, step aborted"
                )));
            }
        }

        self.t += 1;
        let b1 = S::from_f64(self.beta1);
        let b2 = S::from_f64(self.beta2);
        let one = S::one();
        let corr1 = S::from_f64(1.0 - self.beta1.powi(self.t as i32));
        let corr2 = S::from_f64(1.0 - self.beta2.powi(self.t as i32));
        let lr_s = S::from_f64(lr);
        let eps = S::from_f64(self.epsilon);

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let pd = p.data_mut();
            for j in 0..pd.len() {
                let gj = g.data()[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_hat = m[j] / corr1;
                let v_hat = v[j] / corr2;
                pd[j] = pd[j] - lr_s * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Default for Adam<S> {
    fn default() -> Self {
        Self::new()
    }
}
