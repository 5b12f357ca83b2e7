use super::error::DiffError;
use super::param::ParamStore;
use crate::scalar::{lit, Real};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, Copy)]
pub struct Adam<T: Real> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T) -> Self {
        Self {
            lr,
            beta1: lit(0.9),
            beta2: lit(0.999),
            eps: lit(1e-8),
        }
    }

    /// Applies one update to every parameter using its stored gradient.
    ///
    /// Nothing is modified if any gradient entry is non-finite.
    pub fn step(&self, store: &mut ParamStore<T>) -> Result<(), DiffError> {
        if let Some(bad) = store.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(DiffError::NonFiniteGradient(bad.name.clone()));
        }
        let one = T::one();
        for p in store.iter_mut() {
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = one - self.beta1.powi(t);
            let c2 = one - self.beta2.powi(t);
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(&mut p.moment1)
                .and(&mut p.moment2)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.add("x", array![[1.0f64]]);
        s.get_mut(id).grad[[0, 0]] = 1.0;
        Adam::new(0.1).step(&mut s).unwrap();
        let p = s.get(id);
        assert!((p.value[[0, 0]] - 0.9).abs() < 1e-7);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_values() {
        let mut s = ParamStore::new();
        let id = s.add("x", array![[1.5f64, -2.0]]);
        Adam::new(0.1).step(&mut s).unwrap();
        assert_eq!(s.value(id), &array![[1.5, -2.0]]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = ParamStore::new();
        s.add("ok", array![[1.0f64]]);
        let bad = s.add("encoder.w0", array![[1.0f64]]);
        s.get_mut(bad).grad[[0, 0]] = f64::NAN;
        let err = Adam::new(0.1).step(&mut s).unwrap_err();
        assert_eq!(err, DiffError::NonFiniteGradient("encoder.w0".into()));
        assert_eq!(s.get(bad).step_count, 0);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(x) = (x - 2)^2, grad = 2(x - 2)
        let mut s = ParamStore::new();
        let id = s.add("x", array![[0.0f64]]);
        let opt = Adam::new(0.1);
        for _ in 0..100 {
            let x = s.value(id)[[0, 0]];
            s.get_mut(id).grad[[0, 0]] = 2.0 * (x - 2.0);
            opt.step(&mut s).unwrap();
        }
        assert!((s.value(id)[[0, 0]] - 2.0).abs() < 0.05);
    }
}
