use super::scalar::Scalar;

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }

    /// One bias-corrected descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [F], grads: &[F], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "adam state shape");
        assert_eq!(grads.len(), self.m.len(), "adam gradient shape");
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        // lr·m̂/(√v̂ + ε) with the corrections folded into the step size.
        let alpha = F::of(lr * c2.sqrt() / c1);
        let eps_hat = F::of(self.eps * c2.sqrt());
        let one = F::one();
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p -= alpha * *m / (v.sqrt() + eps_hat);
        }
    }
}
