//! Adam optimizer over flat parameter vectors.

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam step, descending along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "adam state shape mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient shape mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut adam = AdamState::new(3, 0.01);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        adam.step(&mut params, &[0.0, 0.0, 0.0]);
        assert_eq!(params, before);
        assert!(adam.first_moment().iter().all(|&x| x == 0.0));
        assert!(adam.second_moment().iter().all(|&x| x == 0.0));
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        for &g in &[0.5, -3.0, 1e-3] {
            let mut adam = AdamState::new(1, 0.01);
            let mut w = vec![0.0];
            adam.step(&mut w, &[g]);
            // Bias-corrected first step: lr * g / (|g| + eps).
            assert!((w[0].abs() / 0.01 - 1.0).abs() < 1e-5, "g={g}, w={}", w[0]);
            assert!(w[0].signum() == -g.signum());
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut adam = AdamState::new(1, 0.1);
        let mut w = vec![0.0];
        for _ in 0..100 {
            let grad = 2.0 * (w[0] - 3.0);
            adam.step(&mut w, &[grad]);
        }
        assert!((w[0] - 3.0).abs() < 0.1, "w = {}", w[0]);
        assert_eq!(adam.step_count(), 100);
    }
}
