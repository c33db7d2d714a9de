//! Convolution, transposed convolution, pooling, dense layers and activations.
//!
//! Every layer takes N×C×H×W input (dense layers flatten everything after N)
//! and accumulates parameter gradients in its [`LayerParams`]; callers zero
//! them through the optimizer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Learnable weights and biases with matching gradient and momentum buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub biases: Tensor,
    pub grad_weights: Tensor,
    pub grad_biases: Tensor,
    pub(crate) velocity_weights: Tensor,
    pub(crate) velocity_biases: Tensor,
}

impl LayerParams {
    pub fn zeros(weight_shape: &[usize], bias_len: usize) -> Self {
        Self::from_tensors(Tensor::zeros(weight_shape), Tensor::zeros(&[bias_len]))
    }

    pub fn from_tensors(weights: Tensor, biases: Tensor) -> Self {
        Self {
            grad_weights: Tensor::zeros(weights.shape()),
            grad_biases: Tensor::zeros(biases.shape()),
            velocity_weights: Tensor::zeros(weights.shape()),
            velocity_biases: Tensor::zeros(biases.shape()),
            weights,
            biases,
        }
    }

    /// Zero biases and weights drawn from N(0, 2 / fan_in).
    pub fn he_init<R: Rng + ?Sized>(weight_shape: &[usize], bias_len: usize, fan_in: usize, rng: &mut R) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut p = Self::zeros(weight_shape, bias_len);
        for w in p.weights.data_mut() {
            *w = normal.sample(rng) as f32;
        }
        p
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.data_mut().fill(0.0);
        self.grad_biases.data_mut().fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// `c = a·b + beta·c` for row-major operands, optionally transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    beta: f32,
    c: &mut [f32],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above describe exactly the m×k, k×n and m×n
    // row-major buffers whose lengths are checked in debug builds.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds valid k×k windows of a C×H×W image into a (C·k·k)×(OH·OW) matrix.
fn im2col(input: &[f32], c: usize, h: usize, w: usize, k: usize, cols: &mut [f32]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let plane = oh * ow;
    for ci in 0..c {
        let chan = &input[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * plane;
                for oy in 0..oh {
                    let src = (oy + ky) * w + kx;
                    cols[row + oy * ow..row + (oy + 1) * ow].copy_from_slice(&chan[src..src + ow]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back into a C×H×W image.
fn col2im(cols: &[f32], c: usize, h: usize, w: usize, k: usize, out: &mut [f32]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let plane = oh * ow;
    for ci in 0..c {
        let chan = &mut out[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * plane;
                for oy in 0..oh {
                    let dst = (oy + ky) * w + kx;
                    let src = &cols[row + oy * ow..row + (oy + 1) * ow];
                    for (d, s) in chan[dst..dst + ow].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

fn expect_rank4(x: &Tensor, channels: usize, min_side: usize) -> Result<[usize; 4]> {
    let d = x.dims4();
    if x.shape().len() != 4 || d[1] != channels || d[2] < min_side || d[3] < min_side {
        return Err(Error::ShapeMismatch {
            expected: vec![d[0], channels, min_side.max(d[2]), min_side.max(d[3])],
            actual: x.shape().to_vec(),
        });
    }
    Ok(d)
}

/// Valid (unpadded) stride-1 cross-correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub params: LayerParams,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            params: LayerParams::zeros(&[out_channels, in_channels, kernel, kernel], out_channels),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn he_init<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        Self {
            params: LayerParams::he_init(
                &[out_channels, in_channels, kernel, kernel],
                out_channels,
                in_channels * kernel * kernel,
                rng,
            ),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn output_side(&self, side: usize) -> usize {
        side - self.kernel + 1
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = expect_rank4(input, self.in_channels, self.kernel)?;
        let k = self.kernel;
        let (oh, ow) = (h - k + 1, w - k + 1);
        let (plane, patch) = (oh * ow, c * k * k);
        let mut cols = vec![0.0; patch * plane];
        let mut out = Tensor::zeros(&[n, self.out_channels, oh, ow]);
        let bias = self.params.biases.data();
        let in_len = c * h * w;
        let out_len = self.out_channels * plane;
        for s in 0..n {
            im2col(&input.data()[s * in_len..(s + 1) * in_len], c, h, w, k, &mut cols);
            let y = &mut out.data_mut()[s * out_len..(s + 1) * out_len];
            for (o, row) in y.chunks_exact_mut(plane).enumerate() {
                row.fill(bias[o]);
            }
            gemm(
                self.out_channels,
                patch,
                plane,
                self.params.weights.data(),
                false,
                &cols,
                false,
                1.0,
                y,
            );
        }
        out.ensure_finite("conv forward")?;
        Ok(out)
    }

    /// Accumulates weight/bias gradients and returns the input gradient when
    /// `want_input_grad` is set.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor, want_input_grad: bool) -> Result<Option<Tensor>> {
        let [n, c, h, w] = expect_rank4(input, self.in_channels, self.kernel)?;
        let k = self.kernel;
        let (oh, ow) = (h - k + 1, w - k + 1);
        if grad_out.shape() != [n, self.out_channels, oh, ow] {
            return Err(Error::ShapeMismatch {
                expected: vec![n, self.out_channels, oh, ow],
                actual: grad_out.shape().to_vec(),
            });
        }
        let (plane, patch) = (oh * ow, c * k * k);
        let in_len = c * h * w;
        let out_len = self.out_channels * plane;
        let mut cols = vec![0.0; patch * plane];
        let mut grad_in = want_input_grad.then(|| Tensor::zeros(input.shape()));
        for s in 0..n {
            let x = &input.data()[s * in_len..(s + 1) * in_len];
            let dy = &grad_out.data()[s * out_len..(s + 1) * out_len];
            im2col(x, c, h, w, k, &mut cols);
            gemm(
                self.out_channels,
                plane,
                patch,
                dy,
                false,
                &cols,
                true,
                1.0,
                self.params.grad_weights.data_mut(),
            );
            for (o, row) in dy.chunks_exact(plane).enumerate() {
                self.params.grad_biases.data_mut()[o] += row.iter().sum::<f32>();
            }
            if let Some(gi) = grad_in.as_mut() {
                gemm(
                    patch,
                    self.out_channels,
                    plane,
                    self.params.weights.data(),
                    true,
                    dy,
                    false,
                    0.0,
                    &mut cols,
                );
                col2im(&cols, c, h, w, k, &mut gi.data_mut()[s * in_len..(s + 1) * in_len]);
            }
        }
        Ok(grad_in)
    }
}

/// Transposed convolution: the adjoint of [`Conv2d`] with the same kernel,
/// growing each side by `kernel - 1`.
///
/// Weights are stored `[in, out, k, k]`, so a conv weight tensor of shape
/// `[A, B, k, k]` (B→A channels) used here maps A→B channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Deconv2d {
    pub params: LayerParams,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Deconv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            params: LayerParams::zeros(&[in_channels, out_channels, kernel, kernel], out_channels),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn from_params(params: LayerParams) -> Result<Self> {
        let s = params.weights.shape().to_vec();
        if s.len() != 4 || s[2] != s[3] || params.biases.len() != s[1] {
            return Err(Error::ShapeMismatch {
                expected: vec![s.first().copied().unwrap_or(0), params.biases.len(), 0, 0],
                actual: s,
            });
        }
        Ok(Self {
            in_channels: s[0],
            out_channels: s[1],
            kernel: s[2],
            params,
        })
    }

    pub fn output_side(&self, side: usize) -> usize {
        side + self.kernel - 1
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = expect_rank4(input, self.in_channels, 1)?;
        let k = self.kernel;
        let (oh, ow) = (h + k - 1, w + k - 1);
        let plane = h * w;
        let patch = self.out_channels * k * k;
        let mut cols = vec![0.0; patch * plane];
        let mut out = Tensor::zeros(&[n, self.out_channels, oh, ow]);
        let in_len = c * plane;
        let out_len = self.out_channels * oh * ow;
        for s in 0..n {
            let x = &input.data()[s * in_len..(s + 1) * in_len];
            gemm(
                patch,
                c,
                plane,
                self.params.weights.data(),
                true,
                x,
                false,
                0.0,
                &mut cols,
            );
            let y = &mut out.data_mut()[s * out_len..(s + 1) * out_len];
            for (o, chan) in y.chunks_exact_mut(oh * ow).enumerate() {
                chan.fill(self.params.biases.data()[o]);
            }
            col2im(&cols, self.out_channels, oh, ow, k, y);
        }
        out.ensure_finite("deconv forward")?;
        Ok(out)
    }

    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor, want_input_grad: bool) -> Result<Option<Tensor>> {
        let [n, c, h, w] = expect_rank4(input, self.in_channels, 1)?;
        let k = self.kernel;
        let (oh, ow) = (h + k - 1, w + k - 1);
        if grad_out.shape() != [n, self.out_channels, oh, ow] {
            return Err(Error::ShapeMismatch {
                expected: vec![n, self.out_channels, oh, ow],
                actual: grad_out.shape().to_vec(),
            });
        }
        let plane = h * w;
        let patch = self.out_channels * k * k;
        let in_len = c * plane;
        let out_len = self.out_channels * oh * ow;
        let mut cols = vec![0.0; patch * plane];
        let mut grad_in = want_input_grad.then(|| Tensor::zeros(input.shape()));
        for s in 0..n {
            let x = &input.data()[s * in_len..(s + 1) * in_len];
            let dy = &grad_out.data()[s * out_len..(s + 1) * out_len];
            im2col(dy, self.out_channels, oh, ow, k, &mut cols);
            gemm(
                c,
                plane,
                patch,
                x,
                false,
                &cols,
                true,
                1.0,
                self.params.grad_weights.data_mut(),
            );
            for (o, chan) in dy.chunks_exact(oh * ow).enumerate() {
                self.params.grad_biases.data_mut()[o] += chan.iter().sum::<f32>();
            }
            if let Some(gi) = grad_in.as_mut() {
                gemm(
                    c,
                    patch,
                    plane,
                    self.params.weights.data(),
                    false,
                    &cols,
                    false,
                    0.0,
                    &mut gi.data_mut()[s * in_len..(s + 1) * in_len],
                );
            }
        }
        Ok(grad_in)
    }
}

/// Non-overlapping-window max pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
}

/// Flat input index of each pooled maximum.
pub type ArgMax = Vec<usize>;

impl MaxPool {
    pub fn new(window: usize, stride: usize) -> Self {
        Self { window, stride }
    }

    pub fn output_side(&self, side: usize) -> usize {
        (side - self.window) / self.stride + 1
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ArgMax)> {
        let [n, c, h, w] = input.dims4();
        if input.shape().len() != 4 || h < self.window || w < self.window {
            return Err(Error::ShapeMismatch {
                expected: vec![n, c, self.window, self.window],
                actual: input.shape().to_vec(),
            });
        }
        let (oh, ow) = (self.output_side(h), self.output_side(w));
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        let x = input.data();
        let y = out.data_mut();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * self.stride * w + ox * self.stride;
                    for dy in 0..self.window {
                        for dx in 0..self.window {
                            let i = base + (oy * self.stride + dy) * w + ox * self.stride + dx;
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                    }
                    y[argmax.len()] = x[best];
                    argmax.push(best);
                }
            }
        }
        Ok((out, argmax))
    }

    /// Routes each output gradient to the input position that won the max.
    pub fn backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Tensor {
        let mut gi = Tensor::zeros(input_shape);
        for (&i, &g) in argmax.iter().zip(grad_out.data()) {
            gi.data_mut()[i] += g;
        }
        gi
    }
}

/// Fully connected layer, `y = W·x + b` with `W` stored `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub params: LayerParams,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            params: LayerParams::zeros(&[out_features, in_features], out_features),
            in_features,
            out_features,
        }
    }

    pub fn he_init<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        Self {
            params: LayerParams::he_init(&[out_features, in_features], out_features, in_features, rng),
            in_features,
            out_features,
        }
    }

    fn check(&self, input: &Tensor) -> Result<usize> {
        let (n, per) = input.batch_split();
        if per != self.in_features {
            return Err(Error::ShapeMismatch {
                expected: vec![n, self.in_features],
                actual: input.shape().to_vec(),
            });
        }
        Ok(n)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let n = self.check(input)?;
        let mut out = Tensor::zeros(&[n, self.out_features]);
        for row in out.data_mut().chunks_exact_mut(self.out_features) {
            row.copy_from_slice(self.params.biases.data());
        }
        gemm(
            n,
            self.in_features,
            self.out_features,
            input.data(),
            false,
            self.params.weights.data(),
            true,
            1.0,
            out.data_mut(),
        );
        out.ensure_finite("linear forward")?;
        Ok(out)
    }

    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor, want_input_grad: bool) -> Result<Option<Tensor>> {
        let n = self.check(input)?;
        if grad_out.shape() != [n, self.out_features] {
            return Err(Error::ShapeMismatch {
                expected: vec![n, self.out_features],
                actual: grad_out.shape().to_vec(),
            });
        }
        gemm(
            self.out_features,
            n,
            self.in_features,
            grad_out.data(),
            true,
            input.data(),
            false,
            1.0,
            self.params.grad_weights.data_mut(),
        );
        for row in grad_out.data().chunks_exact(self.out_features) {
            for (g, d) in self.params.grad_biases.data_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        if !want_input_grad {
            return Ok(None);
        }
        let mut gi = Tensor::zeros(input.shape());
        gemm(
            n,
            self.out_features,
            self.in_features,
            grad_out.data(),
            false,
            self.params.weights.data(),
            false,
            0.0,
            gi.data_mut(),
        );
        Ok(Some(gi))
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient of [`relu`] given its output.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (g, &y) in g.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
    g
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut()
        .iter_mut()
        .for_each(|v| *v = (1.0 / (1.0 + (-*v as f64).exp())) as f32);
    y
}

/// Gradient of [`sigmoid`] given its output.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (g, &s) in g.data_mut().iter_mut().zip(output.data()) {
        *g *= s * (1.0 - s);
    }
    g
}
