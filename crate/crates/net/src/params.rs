//! Named parameter registry: deterministic initialization, unique names,
//! checkpoint load/store.

use crate::{NetError, Result};
use lidarseq_tensor::{Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub struct ParamStore<T: Scalar> {
    entries: Vec<(String, Tensor<T>)>,
    rng: ChaCha12Rng,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new(seed: u64) -> Self {
        ParamStore { entries: Vec::new(), rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    fn insert(&mut self, name: &str, t: Tensor<T>) -> Tensor<T> {
        assert!(
            !self.entries.iter().any(|(n, _)| n == name),
            "duplicate parameter name '{}'",
            name
        );
        self.entries.push((name.to_string(), t.clone()));
        t
    }

    /// Gaussian init with the given standard deviation (drawn in f64 so the
    /// stream is dtype-independent).
    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n)
            .map(|_| T::from_f64(self.rng.sample::<f64, _>(StandardNormal) * std))
            .collect();
        let t = Tensor::from_vec(shape, data).expect("shape matches data").trainable();
        self.insert(name, t)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Tensor<T> {
        let t = Tensor::<T>::zeros(shape).trainable();
        self.insert(name, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Tensor<T> {
        let t = Tensor::<T>::full(shape, T::from_f64(value)).trainable();
        self.insert(name, t)
    }

    /// He-style init for a conv kernel `[O, C, ...]`.
    pub fn conv(&mut self, name: &str, shape: &[usize]) -> Tensor<T> {
        let fan_in: usize = shape[1..].iter().product();
        self.normal(name, shape, (2.0 / fan_in as f64).sqrt())
    }

    /// 1/sqrt(fan_in) init for a linear weight `[O, I]`.
    pub fn linear(&mut self, name: &str, shape: &[usize]) -> Tensor<T> {
        self.normal(name, shape, 1.0 / (shape[1] as f64).sqrt())
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn named(&self) -> &[(String, Tensor<T>)] {
        &self.entries
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Overwrite parameter storage from named tensors (checkpoint restore).
    /// Every model parameter must be covered exactly once.
    pub fn load_named(&self, values: &[(String, Tensor<T>)]) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(NetError::Checkpoint(format!(
                "checkpoint has {} tensors, model has {}",
                values.len(),
                self.entries.len()
            )));
        }
        for (name, incoming) in values {
            let Some(target) = self.by_name(name) else {
                return Err(NetError::Checkpoint(format!("unknown parameter '{}'", name)));
            };
            if target.shape() != incoming.shape() {
                return Err(NetError::Checkpoint(format!(
                    "'{}': shape {:?} in checkpoint, {:?} in model",
                    name,
                    incoming.shape(),
                    target.shape()
                )));
            }
            target.with_data_mut(|dst| incoming.with_data(|src| dst.copy_from_slice(src)));
        }
        Ok(())
    }

    /// Overwrite from raw value vectors in registry order (EMA swap-in).
    pub fn load_values(&self, values: &[Vec<T>]) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(NetError::Checkpoint("value list length mismatch".into()));
        }
        for ((name, target), src) in self.entries.iter().zip(values) {
            if target.len() != src.len() {
                return Err(NetError::Checkpoint(format!("'{}' length mismatch", name)));
            }
            target.with_data_mut(|dst| dst.copy_from_slice(src));
        }
        Ok(())
    }

    pub fn zero_grads(&self) {
        for (_, t) in &self.entries {
            t.zero_grad();
        }
    }
}
