//! Adam optimizer and the step learning-rate schedule.

use super::matrix::Matrix;
use super::param::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        Self::with_hyperparams(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(store: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Gradients are left in place.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for (((w, &g), m), v) in value
                .iter_mut()
                .zip(grad)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// `base · factor^⌊epoch / step_size⌋`.
pub fn lr_at_epoch(epoch: usize, base: f64, step_size: usize, factor: f64) -> f64 {
    let step_size = step_size.max(1);
    base * factor.powi((epoch / step_size) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut store = ParamStore::new();
        let id = store.add(Matrix::row_vector(&[1.5, -2.0]));
        let mut adam = Adam::new(&store);
        adam.step(&mut store, 0.1);
        assert_eq!(store.value(id).data(), &[1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add(Matrix::scalar(0.0));
        store.get_mut(id).grad = Matrix::scalar(1.0);
        let mut adam = Adam::new(&store);
        adam.step(&mut store, 0.1);
        // m̂ = v̂ = 1 → Δ = −0.1/(1 + 1e-8)
        assert!((store.value(id).item() + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(store.get(id).grad.item(), 1.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add(Matrix::scalar(1.0));
        let mut adam = Adam::new(&store);
        let mut converged_at = None;
        for i in 0..200 {
            let w = store.value(id).item();
            store.get_mut(id).grad = Matrix::scalar(2.0 * w);
            adam.step(&mut store, 0.05);
            if store.value(id).item().abs() < 0.1 {
                converged_at = Some(i);
                break;
            }
        }
        assert!(converged_at.is_some());
    }

    #[test]
    fn step_schedule() {
        assert_eq!(lr_at_epoch(0, 0.09, 50, 0.9), 0.09);
        assert!((lr_at_epoch(49, 0.09, 50, 0.9) - 0.09).abs() < 1e-15);
        assert!((lr_at_epoch(50, 0.09, 50, 0.9) - 0.081).abs() < 1e-15);
        assert!((lr_at_epoch(125, 0.09, 50, 0.9) - 0.0729).abs() < 1e-15);
    }
}
