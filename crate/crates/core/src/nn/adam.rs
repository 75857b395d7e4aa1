use super::{NnError, Result, WeightVector};

/// ADAM moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One bias-corrected descent step, in place.
    pub fn update(&mut self, w: &mut [f64], grad: &[f64]) -> Result<()> {
        if w.len() != grad.len() {
            return Err(NnError::Length(w.len(), grad.len()));
        }
        if w.len() != self.first_moment.len() {
            return Err(NnError::Length(w.len(), self.first_moment.len()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((wi, &g), m), v) in w
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *wi -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::update`].
pub fn adam_step(
    state: &AdamState,
    w: &WeightVector,
    grad: &WeightVector,
) -> Result<(WeightVector, AdamState)> {
    let mut state = state.clone();
    let mut w = w.clone();
    state.update(&mut w.0, &grad.0)?;
    Ok((w, state))
}
