use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{conv_out_len, orthogonal_init, relu_backward, relu_inplace, sigmoid, Conv1d, Dense};
use super::params::{ParamStore, TensorSpec};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Layer sizes of the scan-processing network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub beams: usize,
    pub frames: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv1_stride: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub conv2_stride: usize,
    pub fc1: usize,
    pub fc2: usize,
    /// Non-scan inputs appended after the first dense layer (goal + velocity).
    pub extras: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            beams: 512,
            frames: 3,
            conv1_filters: 32,
            conv1_kernel: 5,
            conv1_stride: 2,
            conv2_filters: 32,
            conv2_kernel: 3,
            conv2_stride: 2,
            fc1: 256,
            fc2: 128,
            extras: 4,
        }
    }
}

impl Architecture {
    pub fn with_beams(beams: usize) -> Self {
        Self {
            beams,
            ..Self::default()
        }
    }

    pub fn input_len(&self) -> usize {
        self.frames * self.beams + self.extras
    }

    pub fn conv1_len(&self) -> usize {
        conv_out_len(self.beams, self.conv1_kernel, self.conv1_stride)
    }

    pub fn conv2_len(&self) -> usize {
        conv_out_len(self.conv1_len(), self.conv2_kernel, self.conv2_stride)
    }

    pub fn flatten_len(&self) -> usize {
        self.conv2_len() * self.conv2_filters
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.conv2_len() == 0 || self.fc1 == 0 || self.fc2 == 0 {
            return Err(Error::Config(format!(
                "architecture leaves no features: {}",
                self.descriptor()
            )));
        }
        Ok(())
    }

    /// Human-readable layer chain, also stored in checkpoints.
    pub fn descriptor(&self) -> String {
        format!(
            "scan{}x{}|conv1d({}->{},k{},s{})|conv1d({}->{},k{},s{})|dense({}->{})|concat(+{})|dense({}->{})",
            self.frames,
            self.beams,
            self.frames,
            self.conv1_filters,
            self.conv1_kernel,
            self.conv1_stride,
            self.conv1_filters,
            self.conv2_filters,
            self.conv2_kernel,
            self.conv2_stride,
            self.flatten_len(),
            self.fc1,
            self.extras,
            self.fc1 + self.extras,
            self.fc2
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    /// Two outputs: sigmoid translational mean, tanh rotational mean; plus a free log-std.
    Policy,
    /// One linear output.
    Value,
}

impl HeadKind {
    pub fn outputs(self) -> usize {
        match self {
            HeadKind::Policy => 2,
            HeadKind::Value => 1,
        }
    }
}

/// Initial log standard deviation of the action distribution.
pub const INITIAL_LOG_STD: f64 = -1.0;

/// Conv → conv → dense trunk with either a Gaussian-policy or a value head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    pub arch: Architecture,
    pub kind: HeadKind,
    pub params: ParamStore<F>,
    conv1: Conv1d,
    conv2: Conv1d,
    fc1: Dense,
    fc2: Dense,
    head: Dense,
    log_std: Option<TensorSpec>,
}

/// Cached activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct Activations<F> {
    pub batch: usize,
    /// Scans, channels-last `[batch, beams, frames]`.
    x0: Vec<F>,
    y1: Vec<F>,
    y2: Vec<F>,
    /// `[batch, fc1 + extras]`: ReLU(fc1) followed by the raw extras.
    z: Vec<F>,
    h2: Vec<F>,
    /// Head outputs after activation: action means or values.
    pub out: Vec<F>,
}

impl<F: Scalar> Network<F> {
    fn build(arch: Architecture, kind: HeadKind) -> Result<Self> {
        arch.validate()?;
        let mut p = ParamStore::default();
        let conv1 = Conv1d::register(&mut p, "conv1", arch.frames, arch.conv1_filters, arch.conv1_kernel, arch.conv1_stride, arch.beams);
        let conv2 = Conv1d::register(
            &mut p,
            "conv2",
            arch.conv1_filters,
            arch.conv2_filters,
            arch.conv2_kernel,
            arch.conv2_stride,
            conv1.out_len,
        );
        let fc1 = Dense::register(&mut p, "fc1", arch.flatten_len(), arch.fc1);
        let fc2 = Dense::register(&mut p, "fc2", arch.fc1 + arch.extras, arch.fc2);
        let head = Dense::register(&mut p, "out", arch.fc2, kind.outputs());
        let log_std = (kind == HeadKind::Policy).then(|| p.add("log_std", &[2]));
        Ok(Self {
            arch,
            kind,
            params: p,
            conv1,
            conv2,
            fc1,
            fc2,
            head,
            log_std,
        })
    }

    /// Zero-initialized network; mostly useful as a deserialization target.
    pub fn zeros(arch: Architecture, kind: HeadKind) -> Result<Self> {
        Self::build(arch, kind)
    }

    /// Orthogonal initialization: gain √2 for ReLU layers, 0.01 on the head, zero biases.
    pub fn init(arch: Architecture, kind: HeadKind, seed: u64) -> Result<Self> {
        let mut net = Self::build(arch, kind)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let relu_gain = 2f64.sqrt();
        let layers = [
            (net.conv1.weight.clone(), relu_gain),
            (net.conv2.weight.clone(), relu_gain),
            (net.fc1.weight.clone(), relu_gain),
            (net.fc2.weight.clone(), relu_gain),
            (net.head.weight.clone(), 0.01),
        ];
        for (spec, gain) in layers {
            let rows = spec.shape[0];
            let cols = spec.len() / rows;
            orthogonal_init(net.params.get_mut(&spec), rows, cols, gain, &mut rng);
        }
        if let Some(ls) = net.log_std.clone() {
            net.params.get_mut(&ls).fill(F::of(INITIAL_LOG_STD));
        }
        Ok(net)
    }

    pub fn policy(arch: Architecture, seed: u64) -> Result<Self> {
        Self::init(arch, HeadKind::Policy, seed)
    }

    pub fn value(arch: Architecture, seed: u64) -> Result<Self> {
        Self::init(arch, HeadKind::Value, seed)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn outputs(&self) -> usize {
        self.kind.outputs()
    }

    pub fn log_std_spec(&self) -> Option<&TensorSpec> {
        self.log_std.as_ref()
    }

    /// The observation-independent log standard deviations (policy heads only).
    pub fn log_std(&self) -> [F; 2] {
        let s = self.log_std.as_ref().expect("value network has no log_std");
        let v = self.params.get(s);
        [v[0], v[1]]
    }

    /// Batched forward pass. `obs` holds `batch` rows laid out as scans
    /// (frame-major), then the extras.
    pub fn forward(&self, obs: &[F], batch: usize) -> Result<Activations<F>> {
        let d = self.arch.input_len();
        if obs.len() != batch * d {
            return Err(Error::Shape {
                context: "network input",
                expected: vec![batch, d],
                actual: vec![obs.len() / d.max(1), obs.len() % d.max(1)],
            });
        }
        let (beams, frames, extras) = (self.arch.beams, self.arch.frames, self.arch.extras);
        let mut x0 = vec![F::zero(); batch * beams * frames];
        for (s, row) in obs.chunks_exact(d).enumerate() {
            let dst = &mut x0[s * beams * frames..(s + 1) * beams * frames];
            for f in 0..frames {
                for (k, &v) in row[f * beams..(f + 1) * beams].iter().enumerate() {
                    dst[k * frames + f] = v;
                }
            }
        }

        let mut y1 = vec![F::zero(); batch * self.conv1.out_size()];
        self.conv1.forward(&self.params, batch, &x0, &mut y1);
        relu_inplace(&mut y1);

        let mut y2 = vec![F::zero(); batch * self.conv2.out_size()];
        self.conv2.forward(&self.params, batch, &y1, &mut y2);
        relu_inplace(&mut y2);

        let mut h1 = vec![F::zero(); batch * self.arch.fc1];
        self.fc1.forward(&self.params, batch, &y2, self.arch.flatten_len(), &mut h1);
        relu_inplace(&mut h1);

        let zw = self.arch.fc1 + extras;
        let mut z = vec![F::zero(); batch * zw];
        for s in 0..batch {
            z[s * zw..s * zw + self.arch.fc1].copy_from_slice(&h1[s * self.arch.fc1..(s + 1) * self.arch.fc1]);
            z[s * zw + self.arch.fc1..(s + 1) * zw].copy_from_slice(&obs[s * d + frames * beams..(s + 1) * d]);
        }

        let mut h2 = vec![F::zero(); batch * self.arch.fc2];
        self.fc2.forward(&self.params, batch, &z, zw, &mut h2);
        relu_inplace(&mut h2);

        let mut out = vec![F::zero(); batch * self.outputs()];
        self.head.forward(&self.params, batch, &h2, self.arch.fc2, &mut out);
        if self.kind == HeadKind::Policy {
            // Saturated activations are nudged back inside the open intervals.
            let eps = F::epsilon();
            let one = F::one();
            for pair in out.chunks_exact_mut(2) {
                pair[0] = sigmoid(pair[0]).max(eps).min(one - eps);
                pair[1] = pair[1].tanh().max(eps - one).min(one - eps);
            }
        }
        Ok(Activations {
            batch,
            x0,
            y1,
            y2,
            z,
            h2,
            out,
        })
    }

    /// Reverse pass. `d_out` is the loss gradient w.r.t. `acts.out` (after the
    /// output activations); parameter gradients are accumulated into `grads`.
    /// The log-std gradient is the caller's responsibility.
    pub fn backward(&self, acts: &Activations<F>, d_out: &[F], grads: &mut [F]) {
        let batch = acts.batch;
        assert_eq!(d_out.len(), batch * self.outputs(), "output gradient shape");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer shape");

        let mut d_pre = d_out.to_vec();
        if self.kind == HeadKind::Policy {
            for (d, m) in d_pre.chunks_exact_mut(2).zip(acts.out.chunks_exact(2)) {
                d[0] *= m[0] * (F::one() - m[0]);
                d[1] *= F::one() - m[1] * m[1];
            }
        }

        let mut d_h2 = vec![F::zero(); batch * self.arch.fc2];
        self.head.backward(&self.params, batch, &acts.h2, self.arch.fc2, &d_pre, grads, Some(&mut d_h2));
        relu_backward(&acts.h2, &mut d_h2);

        let zw = self.arch.fc1 + self.arch.extras;
        let mut d_z = vec![F::zero(); batch * zw];
        self.fc2.backward(&self.params, batch, &acts.z, zw, &d_h2, grads, Some(&mut d_z));
        let fc1 = self.arch.fc1;
        let mut d_h1 = vec![F::zero(); batch * fc1];
        for s in 0..batch {
            let src = &d_z[s * zw..s * zw + fc1];
            let act = &acts.z[s * zw..s * zw + fc1];
            for ((d, &g), &a) in d_h1[s * fc1..(s + 1) * fc1].iter_mut().zip(src).zip(act) {
                *d = if a > F::zero() { g } else { F::zero() };
            }
        }

        let mut d_y2 = vec![F::zero(); batch * self.conv2.out_size()];
        self.fc1.backward(&self.params, batch, &acts.y2, self.arch.flatten_len(), &d_h1, grads, Some(&mut d_y2));
        relu_backward(&acts.y2, &mut d_y2);

        let mut scratch = Vec::new();
        let mut d_y1 = vec![F::zero(); batch * self.conv1.out_size()];
        self.conv2.backward(&self.params, batch, &acts.y1, &d_y2, grads, Some(&mut d_y1), &mut scratch);
        relu_backward(&acts.y1, &mut d_y1);

        self.conv1.backward(&self.params, batch, &acts.x0, &d_y1, grads, None, &mut scratch);
    }

    /// Converts the parameters to another precision.
    pub fn cast<G: Scalar>(&self) -> Network<G> {
        Network {
            arch: self.arch.clone(),
            kind: self.kind,
            params: self.params.cast(),
            conv1: self.conv1.clone(),
            conv2: self.conv2.clone(),
            fc1: self.fc1.clone(),
            fc2: self.fc2.clone(),
            head: self.head.clone(),
            log_std: self.log_std.clone(),
        }
    }
}
