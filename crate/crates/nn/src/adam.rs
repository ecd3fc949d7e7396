use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::real::Real;
use crate::tensor::Tensor;

/// Adam hyperparameters. The learning rate is supplied per step so that a
/// schedule can drive it.
#[derive(Clone, Copy, Debug, PartialEq)]
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

#[derive(Clone, Debug)]
pub struct OptimizerState<F> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<F>>,
    second: Vec<Tensor<F>>,
    initialized: bool,
}

impl<F: Real> OptimizerState<F> {
    /// Uninitialized state; call [`OptimizerState::init`] before stepping.
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
            initialized: false,
        }
    }

    pub fn for_store(config: AdamConfig, store: &ParamStore<F>) -> Self {
        let mut s = Self::new(config);
        s.init(store);
        s
    }

    pub fn init(&mut self, store: &ParamStore<F>) {
        self.first = store.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        self.second = self.first.clone();
        self.step = 0;
        self.initialized = true;
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update using the gradients held in `store`.
pub fn adam_step<F: Real>(store: &mut ParamStore<F>, state: &mut OptimizerState<F>, lr: f64) -> Result<()> {
    if !state.initialized || state.first.len() != store.len() {
        return Err(NnError::UninitializedState);
    }
    for (p, m) in store.params().iter().zip(&state.first) {
        if p.value.shape() != m.shape() {
            return Err(NnError::UninitializedState);
        }
    }
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bc1 = F::lit(1.0 - beta1.powi(t));
    let bc2 = F::lit(1.0 - beta2.powi(t));
    let (b1, b2) = (F::lit(beta1), F::lit(beta2));
    let (one_b1, one_b2) = (F::lit(1.0 - beta1), F::lit(1.0 - beta2));
    let (lr, eps) = (F::lit(lr), F::lit(eps));

    for ((p, m), v) in store
        .params_mut()
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let g = p.grad.data();
        for i in 0..g.len() {
            let md = &mut m.data_mut()[i];
            *md = b1 * *md + one_b1 * g[i];
            let mhat = *md / bc1;
            let vd = &mut v.data_mut()[i];
            *vd = b2 * *vd + one_b2 * g[i] * g[i];
            let vhat = *vd / bc2;
            p.value.data_mut()[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
