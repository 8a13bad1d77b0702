//! Dense and 1-D convolution layers over batched, channels-last activations.
//!
//! Weights live in a [`ParamStore`]; a layer only records where.

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::{ParamStore, TensorSpec};
use super::scalar::{gemm, Scalar, View};

/// Fully connected layer, `y = x·Wᵀ + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: TensorSpec,
    pub bias: TensorSpec,
}

impl Dense {
    pub fn register<F: Scalar>(store: &mut ParamStore<F>, name: &str, inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: store.add(&format!("{name}.weight"), &[outputs, inputs]),
            bias: store.add(&format!("{name}.bias"), &[outputs]),
        }
    }

    /// `x: [batch, in]` with row stride `x_stride` → `y: [batch, out]`.
    pub fn forward<F: Scalar>(&self, p: &ParamStore<F>, batch: usize, x: &[F], x_stride: usize, y: &mut [F]) {
        let b = p.get(&self.bias);
        for row in y.chunks_exact_mut(self.outputs).take(batch) {
            row.copy_from_slice(b);
        }
        let xv = View { rows: batch, cols: self.inputs, rs: x_stride, cs: 1 };
        let wv = View::row_major(self.outputs, self.inputs).t();
        gemm(F::one(), x, xv, p.get(&self.weight), wv, F::one(), y, View::row_major(batch, self.outputs));
    }

    /// Accumulates parameter gradients into `grads`; writes `dx` when requested.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<F: Scalar>(
        &self,
        p: &ParamStore<F>,
        batch: usize,
        x: &[F],
        x_stride: usize,
        dy: &[F],
        grads: &mut [F],
        dx: Option<&mut [F]>,
    ) {
        let dyv = View::row_major(batch, self.outputs);
        let xv = View { rows: batch, cols: self.inputs, rs: x_stride, cs: 1 };
        let gw = &mut grads[self.weight.range()];
        gemm(F::one(), dy, dyv.t(), x, xv, F::one(), gw, View::row_major(self.outputs, self.inputs));
        let gb = &mut grads[self.bias.range()];
        for row in dy.chunks_exact(self.outputs).take(batch) {
            for (g, &d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if let Some(dx) = dx {
            gemm(
                F::one(),
                dy,
                dyv,
                p.get(&self.weight),
                View::row_major(self.outputs, self.inputs),
                F::zero(),
                dx,
                View::row_major(batch, self.inputs),
            );
        }
    }
}

/// Valid-padding 1-D convolution on channels-last input `[len, in_ch]`.
///
/// The kernel is stored as `[out_ch, kernel, in_ch]`, so one output position is a
/// dot product with a contiguous window of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_len: usize,
    pub out_len: usize,
    pub weight: TensorSpec,
    pub bias: TensorSpec,
}

/// Output length of a valid-padding convolution.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize) -> usize {
    if len < kernel {
        0
    } else {
        (len - kernel) / stride + 1
    }
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn register<F: Scalar>(
        store: &mut ParamStore<F>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        in_len: usize,
    ) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            in_len,
            out_len: conv_out_len(in_len, kernel, stride),
            weight: store.add(&format!("{name}.weight"), &[out_ch, kernel, in_ch]),
            bias: store.add(&format!("{name}.bias"), &[out_ch]),
        }
    }

    pub fn in_size(&self) -> usize {
        self.in_len * self.in_ch
    }

    pub fn out_size(&self) -> usize {
        self.out_len * self.out_ch
    }

    fn window(&self) -> usize {
        self.kernel * self.in_ch
    }

    /// Input windows of one sample as a strided `[out_len, kernel*in_ch]` view.
    fn cols_view(&self) -> View {
        View {
            rows: self.out_len,
            cols: self.window(),
            rs: self.stride * self.in_ch,
            cs: 1,
        }
    }

    pub fn forward<F: Scalar>(&self, p: &ParamStore<F>, batch: usize, x: &[F], y: &mut [F]) {
        let w = p.get(&self.weight);
        let b = p.get(&self.bias);
        let wv = View::row_major(self.out_ch, self.window()).t();
        let yv = View::row_major(self.out_len, self.out_ch);
        for s in 0..batch {
            let xs = &x[s * self.in_size()..(s + 1) * self.in_size()];
            let ys = &mut y[s * self.out_size()..(s + 1) * self.out_size()];
            for row in ys.chunks_exact_mut(self.out_ch) {
                row.copy_from_slice(b);
            }
            gemm(F::one(), xs, self.cols_view(), w, wv, F::one(), ys, yv);
        }
    }

    /// Accumulates kernel and bias gradients; when `dx` is given it is overwritten
    /// with the input gradient (`scratch` must hold `out_len * kernel * in_ch`).
    #[allow(clippy::too_many_arguments)]
    pub fn backward<F: Scalar>(
        &self,
        p: &ParamStore<F>,
        batch: usize,
        x: &[F],
        dy: &[F],
        grads: &mut [F],
        mut dx: Option<&mut [F]>,
        scratch: &mut Vec<F>,
    ) {
        let yv = View::row_major(self.out_len, self.out_ch);
        let wshape = View::row_major(self.out_ch, self.window());
        let win = self.window();
        if dx.is_some() {
            scratch.resize(self.out_len * win, F::zero());
        }
        for s in 0..batch {
            let xs = &x[s * self.in_size()..(s + 1) * self.in_size()];
            let dys = &dy[s * self.out_size()..(s + 1) * self.out_size()];
            gemm(F::one(), dys, yv.t(), xs, self.cols_view(), F::one(), &mut grads[self.weight.range()], wshape);
            let gb = &mut grads[self.bias.range()];
            for row in dys.chunks_exact(self.out_ch) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                // Window gradients, then scatter-add the overlapping windows.
                gemm(F::one(), dys, yv, p.get(&self.weight), wshape, F::zero(), scratch, View::row_major(self.out_len, win));
                let dxs = &mut dx[s * self.in_size()..(s + 1) * self.in_size()];
                dxs.fill(F::zero());
                for (t, wrow) in scratch.chunks_exact(win).enumerate() {
                    let start = t * self.stride * self.in_ch;
                    for (d, &g) in dxs[start..start + win].iter_mut().zip(wrow) {
                        *d += g;
                    }
                }
            }
        }
    }
}

pub fn relu_inplace<F: Scalar>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Zeroes gradients where the ReLU output was not positive.
pub fn relu_backward<F: Scalar>(y: &[F], dy: &mut [F]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= F::zero() {
            *d = F::zero();
        }
    }
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Fills `w: [rows, cols]` with an orthogonal matrix scaled by `gain`.
///
/// Rows are orthonormal when `rows <= cols`, columns otherwise (modified Gram–Schmidt
/// on a Gaussian sample).
pub fn orthogonal_init<F: Scalar, R: Rng>(w: &mut [F], rows: usize, cols: usize, gain: f64, rng: &mut R) {
    assert_eq!(w.len(), rows * cols);
    let (count, dim, transpose) = if rows <= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for u in &basis {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= proj * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    for (i, u) in basis.iter().enumerate() {
        for (j, &val) in u.iter().enumerate() {
            let (r, c) = if transpose { (j, i) } else { (i, j) };
            w[r * cols + c] = F::of(gain * val);
        }
    }
}
