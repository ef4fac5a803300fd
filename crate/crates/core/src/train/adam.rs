//! Adam optimizer with per-parameter moment state.

use std::collections::HashMap;

use ndarray::ArrayD;

use crate::tensor::{ParamStore, Scalar};

pub struct Adam<T: Scalar> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: HashMap<String, ArrayD<T>>,
    v: HashMap<String, ArrayD<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        Self { beta1, beta2, eps: 1e-8, t: 0, m: HashMap::new(), v: HashMap::new() }
    }

    /// One update over every parameter that has a gradient.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>, lr: f64) {
        self.t += 1;
        let b1 = T::from_real(self.beta1);
        let b2 = T::from_real(self.beta2);
        let one = T::one();
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let alpha = T::from_real(lr * bc2.sqrt() / bc1);
        let eps = T::from_real(self.eps);

        for (path, w) in params.iter_mut() {
            let Some(g) = grads.get(path) else { continue };
            let m = self
                .m
                .entry(path.to_string())
                .or_insert_with(|| ArrayD::zeros(w.raw_dim()));
            let v = self
                .v
                .entry(path.to_string())
                .or_insert_with(|| ArrayD::zeros(w.raw_dim()));
            ndarray::Zip::from(w)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *w = *w - alpha * *m / (v.sqrt() + eps);
                });
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn adam_descends_a_quadratic() {
        // minimize f(w) = Σ w², gradient 2w
        let mut params = ParamStore::<f64>::new();
        params.insert("w", ArrayD::from_elem(IxDyn(&[4]), 1.0));
        let mut opt = Adam::new(0.9, 0.999);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let g = params.get("w").unwrap().mapv(|w| 2.0 * w);
            let mut gs = ParamStore::new();
            gs.insert("w", g);
            opt.step(&mut params, &gs, 0.05);
            let f: f64 = params.get("w").unwrap().iter().map(|w| w * w).sum();
            last = f;
        }
        assert!(last < 1e-3, "did not descend: {last}");
        assert_eq!(opt.steps_taken(), 200);
    }
}
