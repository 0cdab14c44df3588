//! Adam and an exponential moving average of parameters.

use crate::tensor::contract_err;
use crate::{Result, Scalar, Tensor};

/// Serializable optimizer state for checkpoint resume.
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

pub struct Adam<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Apply one update from the gradients currently stored on `params`,
    /// then clear them. Parameter order must stay fixed across steps.
    pub fn step(&mut self, params: &[Tensor<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        if self.m.len() != params.len() {
            return contract_err("adam", "parameter list changed between steps");
        }
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let bias1 = T::from_f64(1.0 - self.beta1.powi(self.step as i32));
        let bias2 = T::from_f64(1.0 - self.beta2.powi(self.step as i32));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);
        for (i, p) in params.iter().enumerate() {
            let Some(grad) = p.grad() else {
                return contract_err("adam", format!("parameter {} has no gradient", i));
            };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            p.with_data_mut(|data| {
                for j in 0..data.len() {
                    let g = grad[j];
                    m[j] = b1 * m[j] + (one - b1) * g;
                    v[j] = b2 * v[j] + (one - b2) * g * g;
                    let mhat = m[j] / bias1;
                    let vhat = v[j] / bias2;
                    data[j] = data[j] - lr * mhat / (vhat.sqrt() + eps);
                }
            });
            p.zero_grad();
        }
        Ok(())
    }

    pub fn state(&self) -> AdamState<T> {
        AdamState { step: self.step, m: self.m.clone(), v: self.v.clone() }
    }

    pub fn load_state(&mut self, state: AdamState<T>) {
        self.step = state.step;
        self.m = state.m;
        self.v = state.v;
    }
}

/// Shadow copy of parameters updated as `s = decay * s + (1 - decay) * p`.
pub struct Ema<T: Scalar> {
    pub decay: f64,
    shadow: Vec<Vec<T>>,
}

impl<T: Scalar> Ema<T> {
    pub fn new(decay: f64, params: &[Tensor<T>]) -> Self {
        Ema { decay, shadow: params.iter().map(|p| p.to_vec()).collect() }
    }

    pub fn from_values(decay: f64, shadow: Vec<Vec<T>>) -> Self {
        Ema { decay, shadow }
    }

    pub fn update(&mut self, params: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.shadow.len() {
            return contract_err("ema", "parameter list changed");
        }
        let d = T::from_f64(self.decay);
        let one = T::one();
        for (s, p) in self.shadow.iter_mut().zip(params) {
            p.with_data(|data| {
                for (sv, &pv) in s.iter_mut().zip(data) {
                    *sv = d * *sv + (one - d) * pv;
                }
            });
        }
        Ok(())
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.shadow
    }
}
