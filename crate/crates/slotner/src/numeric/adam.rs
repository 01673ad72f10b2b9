use crate::{Error, Result};

use super::tensor::Tensor;

/// Per-parameter Adam accumulator with its hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(numel: usize, learning_rate: f64) -> AdamState {
        AdamState {
            step_count: 0,
            first_moment: vec![0.0; numel],
            second_moment: vec![0.0; numel],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place on `values`.
pub fn adam_step(values: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if values.len() != grads.len()
        || values.len() != state.first_moment.len()
        || values.len() != state.second_moment.len()
    {
        return Err(Error::Dimension(format!(
            "adam_step: params={}, grads={}, moments={}/{}",
            values.len(),
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    state.step_count += 1;
    let t = state.step_count as f64;
    let bias1 = 1.0 - state.beta1.powf(t);
    let bias2 = 1.0 - state.beta2.powf(t);
    for i in 0..values.len() {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bias1;
        let v_hat = state.second_moment[i] / bias2;
        values[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Adam over a fixed list of trainable tensors. A tensor with no accumulated
/// gradient this step counts as zero gradient (moments still decay).
pub struct Adam {
    params: Vec<Tensor>,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: Vec<Tensor>, learning_rate: f64) -> Adam {
        let states = params
            .iter()
            .map(|p| AdamState::new(p.numel(), learning_rate))
            .collect();
        Adam { params, states }
    }

    pub fn zero_grads(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    pub fn step(&mut self) -> Result<()> {
        for (p, state) in self.params.iter().zip(self.states.iter_mut()) {
            let grads = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            let mut values = p.to_vec();
            adam_step(&mut values, &grads, state)?;
            p.set_data(&values);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_fresh_state_is_a_fixed_point() {
        let mut values = vec![0.7, -1.3, 2.1];
        let mut state = AdamState::new(3, 0.1);
        adam_step(&mut values, &[0.0, 0.0, 0.0], &mut state).unwrap();
        assert_eq!(values, vec![0.7, -1.3, 2.1]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_magnitude_matches_hand_evaluation() {
        // t=1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps),
        // so a unit gradient moves the parameter by almost exactly lr.
        let mut values = vec![1.0];
        let mut state = AdamState::new(1, 0.1);
        adam_step(&mut values, &[1.0], &mut state).unwrap();
        let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((values[0] - expected).abs() < 1e-15, "{}", values[0]);
        assert!((values[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut a = vec![0.5];
        let mut b = vec![0.5];
        let mut sa = AdamState::new(1, 0.01);
        let mut sb = AdamState::new(1, 0.01);
        for step in 0..25 {
            let g = [(step as f64 * 0.37).sin()];
            adam_step(&mut a, &g, &mut sa).unwrap();
            adam_step(&mut b, &g, &mut sb).unwrap();
        }
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut values = vec![0.0; 2];
        let mut state = AdamState::new(2, 0.1);
        assert!(adam_step(&mut values, &[1.0], &mut state).is_err());
    }

    #[test]
    fn optimizer_skips_unseeded_grads_as_zero() {
        let p = Tensor::param(vec![1.0], &[1]).unwrap();
        let mut opt = Adam::new(vec![p.clone()], 0.1);
        opt.step().unwrap();
        assert_eq!(p.to_vec(), vec![1.0]);
    }
}
