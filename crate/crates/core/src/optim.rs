//! Adam over small named parameter vectors, and a central-difference
//! gradient checker for the hand-derived gradients.

use crate::error::{DiverError, Result};
use crate::scalar::Scalar;

/// Ordered named scalar parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    names: Vec<String>,
    values: Vec<T>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(names: Vec<String>, values: Vec<T>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(DiverError::ParamShape {
                expected: names.len(),
                actual: values.len(),
            });
        }
        Ok(Self { names, values })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>) -> Self {
        let (names, values) = pairs.into_iter().map(|(n, v)| (n.into(), v)).unzip();
        Self { names, values }
    }

    /// Same names as `self`, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.names.clone(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_lr(lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self::with_lr(T::lit(1e-3))
    }
}

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub config: AdamConfig<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig<T>) -> Self {
        Self {
            step: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            config,
        }
    }

    /// One Adam update of `params` in place.
    pub fn step(&mut self, params: &mut ParamVector<T>, grads: &ParamVector<T>) -> Result<()> {
        if grads.len() != params.len() {
            return Err(DiverError::ParamShape {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        self.step_values(&params.names, &mut params.values, &grads.values)
    }

    fn step_values(&mut self, names: &[String], values: &mut [T], grads: &[T]) -> Result<()> {
        if grads.len() != values.len() || self.m.len() != values.len() {
            return Err(DiverError::ParamShape {
                expected: values.len(),
                actual: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(DiverError::NonFiniteGradient {
                name: names.get(i).cloned().unwrap_or_else(|| i.to_string()),
            });
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = T::one() - beta1.powi(t);
        let bc2 = T::one() - beta2.powi(t);
        for i in 0..values.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (T::one() - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (T::one() - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            values[i] = values[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(
    state: &AdamState<T>,
    params: &ParamVector<T>,
    grads: &ParamVector<T>,
) -> Result<(AdamState<T>, ParamVector<T>)> {
    let mut state = state.clone();
    let mut params = params.clone();
    state.step(&mut params, grads)?;
    Ok((state, params))
}

/// Runs `iters` Adam steps on `objective`, which returns `(loss, gradient)`.
///
/// The returned trace holds `iters + 1` losses: the value before each step
/// followed by the value at the final parameters.
pub fn minimize<T: Scalar>(
    stage: &'static str,
    params: &mut ParamVector<T>,
    config: AdamConfig<T>,
    iters: usize,
    mut objective: impl FnMut(&[T]) -> (T, Vec<T>),
) -> Result<Vec<T>> {
    let mut state = AdamState::new(params.len(), config);
    let mut trace = Vec::with_capacity(iters + 1);
    for iteration in 0..=iters {
        let (loss, grad) = objective(&params.values);
        if !loss.is_finite() {
            return Err(DiverError::NonFiniteLoss { stage, iteration });
        }
        trace.push(loss);
        if iteration == iters {
            break;
        }
        state.step_values(&params.names, &mut params.values, &grad)?;
    }
    Ok(trace)
}

/// Central-difference gradient check.
///
/// Returns `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
pub fn grad_check<T: Scalar>(f: impl Fn(&[T]) -> T, at: &[T], analytic: &[T], step: T) -> T {
    assert_eq!(at.len(), analytic.len(), "gradient length");
    let mut x = at.to_vec();
    let mut worst = T::zero();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let fp = f(&x);
        x[i] = orig - step;
        let fm = f(&x);
        x[i] = orig;
        let numeric = (fp - fm) / (step + step);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(T::one());
        worst = worst.max(err);
    }
    worst
}
