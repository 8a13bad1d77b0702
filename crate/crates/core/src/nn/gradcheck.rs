//! Central finite-difference checks of the analytic gradients at 64-bit precision.
//!
//! Public so the acceptance runner can execute the same suite as the unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::gaussian::{gaussian_kl, gaussian_kl_grad, log_prob, log_prob_grad};
use super::layers::{Conv1d, Dense};
use super::network::{Architecture, HeadKind, Network};
use super::params::ParamStore;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Description of the instance that produced `max_rel_error`.
    pub worst: String,
}

impl GradCheckReport {
    fn record(&mut self, label: &str, analytic: &[f64], numeric: &[f64]) {
        self.instances += 1;
        self.coordinates += analytic.len();
        for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            let e = rel_error(a, n);
            if e > self.max_rel_error || e.is_nan() {
                self.max_rel_error = e;
                self.worst = format!("{label}[{i}]: analytic {a:e}, numeric {n:e}");
            }
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.instances += other.instances;
        self.coordinates += other.coordinates;
        if other.max_rel_error > self.max_rel_error || other.max_rel_error.is_nan() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Central differences of `f` w.r.t. every coordinate of `x`.
pub fn numeric_gradient(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let up = f(x);
            x[i] = orig - STEP;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_arch(rng: &mut ChaCha8Rng) -> Architecture {
    loop {
        let a = Architecture {
            beams: rng.gen_range(8..=20),
            frames: 3,
            conv1_filters: rng.gen_range(2..=4),
            conv1_kernel: rng.gen_range(2..=5),
            conv1_stride: rng.gen_range(1..=2),
            conv2_filters: rng.gen_range(2..=4),
            conv2_kernel: rng.gen_range(2..=3),
            conv2_stride: rng.gen_range(1..=2),
            fc1: rng.gen_range(3..=8),
            fc2: rng.gen_range(3..=8),
            extras: 4,
        };
        if a.validate().is_ok() {
            return a;
        }
    }
}

/// Policy network plus Gaussian head under a mixed log-prob / KL loss.
fn policy_instance(rng: &mut ChaCha8Rng, report: &mut GradCheckReport) {
    let arch = random_arch(rng);
    let batch = rng.gen_range(1..=3);
    let mut net = Network::<f64>::zeros(arch.clone(), HeadKind::Policy).unwrap();
    net.params.values = normals(rng, net.param_count(), 0.5);
    let obs = normals(rng, batch * arch.input_len(), 1.0);
    let actions: Vec<[f64; 2]> = (0..batch).map(|_| [rng.gen_range(-1.0..1.5), rng.gen_range(-1.5..1.5)]).collect();
    let old: Vec<[f64; 2]> = (0..batch).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let old_ls = [rng.gen_range(-1.5..0.0), rng.gen_range(-1.5..0.0)];
    let (c, d) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.1..3.0));
    let ls_range = net.log_std_spec().unwrap().range();

    let loss = |net: &Network<f64>| -> f64 {
        let out = net.forward(&obs, batch).unwrap().out;
        let ls = net.log_std();
        (0..batch)
            .map(|b| {
                let m = [out[2 * b], out[2 * b + 1]];
                c * log_prob(m, ls, actions[b]) + d * gaussian_kl(old[b], old_ls, m, ls)
            })
            .sum()
    };

    let acts = net.forward(&obs, batch).unwrap();
    let ls = net.log_std();
    let mut d_out = vec![0.0; 2 * batch];
    let mut grads = vec![0.0; net.param_count()];
    for b in 0..batch {
        let m = [acts.out[2 * b], acts.out[2 * b + 1]];
        let (lm, lls) = log_prob_grad(m, ls, actions[b]);
        let (km, kls) = gaussian_kl_grad(old[b], old_ls, m, ls);
        for k in 0..2 {
            d_out[2 * b + k] = c * lm[k] + d * km[k];
            grads[ls_range.start + k] += c * lls[k] + d * kls[k];
        }
    }
    net.backward(&acts, &d_out, &mut grads);

    let mut probe = net.clone();
    let mut x = net.params.values.clone();
    let numeric = numeric_gradient(&mut x, |v| {
        probe.params.values.copy_from_slice(v);
        loss(&probe)
    });
    report.record(&format!("policy {}", arch.descriptor()), &grads, &numeric);
}

/// Value network under a squared-error regression loss.
fn value_instance(rng: &mut ChaCha8Rng, report: &mut GradCheckReport) {
    let arch = random_arch(rng);
    let batch = rng.gen_range(1..=3);
    let mut net = Network::<f64>::zeros(arch.clone(), HeadKind::Value).unwrap();
    net.params.values = normals(rng, net.param_count(), 0.5);
    let obs = normals(rng, batch * arch.input_len(), 1.0);
    let targets = normals(rng, batch, 2.0);
    let loss = |net: &Network<f64>| -> f64 {
        let out = net.forward(&obs, batch).unwrap().out;
        out.iter().zip(&targets).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / batch as f64
    };
    let acts = net.forward(&obs, batch).unwrap();
    let d_out: Vec<f64> = acts.out.iter().zip(&targets).map(|(v, r)| 2.0 * (v - r) / batch as f64).collect();
    let mut grads = vec![0.0; net.param_count()];
    net.backward(&acts, &d_out, &mut grads);
    let mut probe = net.clone();
    let mut x = net.params.values.clone();
    let numeric = numeric_gradient(&mut x, |v| {
        probe.params.values.copy_from_slice(v);
        loss(&probe)
    });
    report.record(&format!("value {}", arch.descriptor()), &grads, &numeric);
}

/// A dense layer alone, checking parameter and input gradients under a linear loss.
fn dense_instance(rng: &mut ChaCha8Rng, report: &mut GradCheckReport) {
    let (inputs, outputs, batch) = (rng.gen_range(1..=7), rng.gen_range(1..=6), rng.gen_range(1..=4));
    let stride = inputs + rng.gen_range(0..=2);
    let mut p = ParamStore::<f64>::default();
    let layer = Dense::register(&mut p, "d", inputs, outputs);
    p.values = normals(rng, p.len(), 1.0);
    let x = normals(rng, batch * stride, 1.0);
    let coeff = normals(rng, batch * outputs, 1.0);
    let loss = |p: &ParamStore<f64>, x: &[f64]| -> f64 {
        let mut y = vec![0.0; batch * outputs];
        layer.forward(p, batch, x, stride, &mut y);
        y.iter().zip(&coeff).map(|(a, b)| a * b).sum()
    };
    let mut grads = vec![0.0; p.len()];
    let mut dx = vec![0.0; batch * inputs];
    layer.backward(&p, batch, &x, stride, &coeff, &mut grads, Some(&mut dx));

    let mut probe = p.clone();
    let mut w = p.values.clone();
    let numeric = numeric_gradient(&mut w, |v| {
        probe.values.copy_from_slice(v);
        loss(&probe, &x)
    });
    report.record("dense params", &grads, &numeric);

    let mut xs = x.clone();
    let numeric_x = numeric_gradient(&mut xs, |v| loss(&p, v));
    let dense_x: Vec<f64> = (0..batch * stride)
        .map(|i| if i % stride < inputs { numeric_x[i] } else { 0.0 })
        .collect();
    let analytic_x: Vec<f64> = (0..batch * stride)
        .map(|i| if i % stride < inputs { dx[(i / stride) * inputs + i % stride] } else { 0.0 })
        .collect();
    report.record("dense input", &analytic_x, &dense_x);
}

/// A convolution layer alone, checking kernel, bias and input gradients.
fn conv_instance(rng: &mut ChaCha8Rng, report: &mut GradCheckReport) {
    let (in_ch, out_ch) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let kernel = rng.gen_range(1..=4);
    let stride = rng.gen_range(1..=3);
    let in_len = kernel + rng.gen_range(0..=8);
    let batch = rng.gen_range(1..=3);
    let mut p = ParamStore::<f64>::default();
    let layer = Conv1d::register(&mut p, "c", in_ch, out_ch, kernel, stride, in_len);
    p.values = normals(rng, p.len(), 1.0);
    let x = normals(rng, batch * layer.in_size(), 1.0);
    let coeff = normals(rng, batch * layer.out_size(), 1.0);
    let loss = |p: &ParamStore<f64>, x: &[f64]| -> f64 {
        let mut y = vec![0.0; batch * layer.out_size()];
        layer.forward(p, batch, x, &mut y);
        y.iter().zip(&coeff).map(|(a, b)| a * b).sum()
    };
    let mut grads = vec![0.0; p.len()];
    let mut dx = vec![0.0; x.len()];
    let mut scratch = Vec::new();
    layer.backward(&p, batch, &x, &coeff, &mut grads, Some(&mut dx), &mut scratch);

    let mut probe = p.clone();
    let mut w = p.values.clone();
    let numeric = numeric_gradient(&mut w, |v| {
        probe.values.copy_from_slice(v);
        loss(&probe, &x)
    });
    report.record("conv params", &grads, &numeric);
    let mut xs = x.clone();
    let numeric_x = numeric_gradient(&mut xs, |v| loss(&p, v));
    report.record("conv input", &dx, &numeric_x);
}

/// Runs `rounds` rounds of (policy, value, dense, conv) instances.
pub fn run_suite(rounds: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    for _ in 0..rounds {
        policy_instance(&mut rng, &mut report);
        value_instance(&mut rng, &mut report);
        dense_instance(&mut rng, &mut report);
        conv_instance(&mut rng, &mut report);
    }
    report
}
