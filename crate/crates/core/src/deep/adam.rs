/// Adam optimizer state for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut a = AdamState::new(2, 0.001);
        let mut p = vec![1.0, 1.0];
        a.step(&mut p, &[3.7, -0.02]);
        assert!((p[0] - (1.0 - 0.001)).abs() < 1e-9);
        assert!((p[1] - (1.0 + 0.001)).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = AdamState::new(3, 0.001);
        let mut p = vec![0.5, -2.0, 7.0];
        a.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut a = AdamState::new(2, 0.01);
        let mut p = vec![0.0, 0.0];
        for _ in 0..5 {
            a.step(&mut p, &[0.3, 0.3]);
        }
        assert_eq!(p[0], p[1]);
        assert_eq!(a.steps(), 5);
    }
}
