use crate::error::{Error, Result};
use crate::nn::mlp::{MlpParams, ParamGrads};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for one network.
///
/// Convention used throughout the crate: [`AdamState::step`] moves the
/// parameters *against* the supplied gradient, so callers pass the gradient
/// of a loss to minimize. Ascent on an objective means passing its negation.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: ParamGrads,
    pub second_moment: ParamGrads,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        Self::with_constants(params, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_constants(params: &MlpParams, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: ParamGrads::zeros_like(params),
            second_moment: ParamGrads::zeros_like(params),
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One Adam step. Non-finite gradients reject the step and leave both the
    /// parameters and the moments untouched.
    pub fn step(
        &mut self,
        params: &mut MlpParams,
        grads: &ParamGrads,
        learning_rate: f64,
    ) -> Result<()> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !grads.matches(params) || !self.first_moment.matches(params) {
            return Err(Error::InvalidArgument(
                "gradient or optimizer shape does not match parameters".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NumericalFailure("non-finite gradient".into()));
        }
        self.step_count += 1;
        let hyper = AdamHyper {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            step: self.step_count,
            learning_rate,
        };
        for (k, layer) in params.layers_mut().iter_mut().enumerate() {
            hyper.apply(
                layer.weights_mut(),
                &grads.weights[k],
                &mut self.first_moment.weights[k],
                &mut self.second_moment.weights[k],
            );
            hyper.apply(
                layer.biases_mut(),
                &grads.biases[k],
                &mut self.first_moment.biases[k],
                &mut self.second_moment.biases[k],
            );
        }
        Ok(())
    }
}

/// Constants of a single Adam step, `step` already incremented.
#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub learning_rate: f64,
}

impl AdamHyper {
    /// Elementwise update over flat slices.
    pub fn apply(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
