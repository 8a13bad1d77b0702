use serde::{Deserialize, Serialize};

/// Variance below which a component is only centered, not scaled.
pub const MIN_VARIANCE: f64 = 1e-8;
/// Bound on scaled components. Lidar beams read max range most of the time, so a
/// rare close reading would otherwise map to a z-score in the tens.
pub const Z_CLIP: f64 = 5.0;

/// Per-component running mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    count: u64,
    mean: Vec<f64>,
    /// Sum of squared deviations from the running mean.
    m2: Vec<f64>,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn from_parts(count: u64, mean: Vec<f64>, m2: Vec<f64>) -> Self {
        assert_eq!(mean.len(), m2.len());
        Self { count, mean, m2 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Population variance of component `i`.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2[i] / self.count as f64
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "normalizer dimension");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *s += delta * (xi - *m);
        }
    }

    /// Normalizes with the current statistics, without updating them.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "normalizer dimension");
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let centered = xi - self.mean[i];
                let var = self.variance(i);
                if var < MIN_VARIANCE {
                    centered
                } else {
                    (centered / var.sqrt()).clamp(-Z_CLIP, Z_CLIP)
                }
            })
            .collect()
    }

    /// In training mode folds `x` into the statistics first; evaluation mode is read-only.
    pub fn normalize(&mut self, x: &[f64], training: bool) -> Vec<f64> {
        if training {
            self.update(x);
        }
        self.apply(x)
    }
}
