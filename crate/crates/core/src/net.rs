//! Fully connected networks over a flat parameter vector.
//!
//! Parameters are laid out layer by layer. Each layer stores its weight matrix
//! row-major with one row per output unit, followed by its bias vector:
//!
//! ```text
//! [W_0 (n_1 x n_0) | b_0 (n_1) | W_1 (n_2 x n_1) | b_1 (n_2) | ...]
//! ```

use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::error::{check_len, Error, Result};

/// Negative-side slope of the hidden-layer leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => libm::tanh(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::LeakyRelu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer activations recorded by a forward pass, reusable for one
/// backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    // activations[0] is the input, activations[l + 1] the output of layer l.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

/// Recorded forward pass over a batch of inputs.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    n: usize,
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `n` row-major output rows.
    pub fn output(&self) -> &[f64] {
        self.activations.last().map_or(&[], |v| v.as_slice())
    }
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map_or(&[], |v| v.as_slice())
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    pub fn zeros(sizes: &[usize], output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "layer sizes must have at least two positive entries, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
            hidden: Activation::LeakyRelu,
            output,
        })
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)` per layer.
    pub fn random<R: RngCore>(sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / libm::sqrt(w[0] as f64);
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[offset..offset + n] {
                *p = bound * (2.0 * unit_f64(rng) - 1.0);
            }
            offset += n;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], output: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        check_len("parameter vector", net.params.len(), params.len())?;
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn same_shape(&self, other: &DenseNet) -> bool {
        self.sizes == other.sizes && self.hidden == other.hidden && self.output == other.output
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        let mut offset = 0;
        for layer in 0..self.sizes.len() - 1 {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let y: Vec<f64> = (0..n_out)
                .map(|o| act.apply(dot(&w[o * n_in..(o + 1) * n_in], &x) + b[o]))
                .collect();
            offset += n_in * n_out + n_out;
            x = y;
        }
        Ok(x)
    }

    fn forward_trace(&self, input: &[f64], trace: &mut Trace) {
        let layers = self.sizes.len() - 1;
        trace.activations.resize_with(layers + 1, Vec::new);
        trace.pre.resize_with(layers, Vec::new);
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(input);
        let mut offset = 0;
        for layer in 0..layers {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let (before, after) = trace.activations.split_at_mut(layer + 1);
            let x = &before[layer];
            let y = &mut after[0];
            let z = &mut trace.pre[layer];
            z.clear();
            y.clear();
            for o in 0..n_out {
                let zo = dot(&w[o * n_in..(o + 1) * n_in], x) + b[o];
                z.push(zo);
                y.push(act.apply(zo));
            }
            offset += n_in * n_out + n_out;
        }
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        check_len("network input", self.input_dim(), input.len())?;
        let mut trace = Trace::default();
        self.forward_trace(input, &mut trace);
        Ok(trace)
    }

    /// Backward pass over a recorded `trace`. Adds the parameter gradient of
    /// `<output, output_grad>` into `param_grad` when given and returns the
    /// gradient w.r.t. the input.
    pub fn backprop(&self, trace: &Trace, output_grad: &[f64], mut param_grad: Option<&mut [f64]>) -> Result<Vec<f64>> {
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        check_len("trace depth", self.sizes.len(), trace.activations.len())?;
        if let Some(g) = &param_grad {
            check_len("parameter gradient", self.params.len(), g.len())?;
        }
        let mut delta: Vec<f64> = Vec::new();
        let mut upstream = output_grad.to_vec();
        let mut offset = self.params.len();
        for layer in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            offset -= n_in * n_out + n_out;
            delta.clear();
            delta.extend(
                (0..n_out).map(|o| upstream[o] * act.derivative(trace.pre[layer][o], trace.activations[layer + 1][o])),
            );
            let x = &trace.activations[layer];
            let w = &self.params[offset..offset + n_in * n_out];
            let mut down = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                for (di, &wi) in down.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *di += wi * d;
                }
            }
            if let Some(g) = param_grad.as_deref_mut() {
                let (gw, gb) = g[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (g, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Forward pass over `n` row-major inputs, recording what a batched
    /// backward pass needs.
    pub fn trace_batch(&self, inputs: &[f64], n: usize) -> Result<BatchTrace> {
        check_len("batch input", n * self.input_dim(), inputs.len())?;
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        activations.push(inputs.to_vec());
        let mut offset = 0;
        for layer in 0..layers {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &activations[layer];
            let mut z = Vec::with_capacity(n * n_out);
            for xs in x.chunks_exact(n_in) {
                z.extend(w.chunks_exact(n_in).zip(b).map(|(row, bo)| dot(row, xs) + bo));
            }
            activations.push(z.iter().map(|v| act.apply(*v)).collect());
            pre.push(z);
            offset += n_in * n_out + n_out;
        }
        Ok(BatchTrace { n, activations, pre })
    }

    /// Batched [`DenseNet::backprop`]: `output_grads` and the returned input
    /// gradients are `n` row-major rows.
    pub fn backprop_batch(
        &self,
        trace: &BatchTrace,
        output_grads: &[f64],
        mut param_grad: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        let n = trace.n;
        check_len("batch output gradient", n * self.output_dim(), output_grads.len())?;
        check_len("trace depth", self.sizes.len(), trace.activations.len())?;
        if let Some(g) = &param_grad {
            check_len("parameter gradient", self.params.len(), g.len())?;
        }
        let mut upstream = output_grads.to_vec();
        let mut delta: Vec<f64> = Vec::new();
        let mut offset = self.params.len();
        for layer in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            offset -= n_in * n_out + n_out;
            delta.clear();
            delta.extend(
                upstream
                    .iter()
                    .zip(&trace.pre[layer])
                    .zip(&trace.activations[layer + 1])
                    .map(|((u, z), a)| u * act.derivative(*z, *a)),
            );
            let x = &trace.activations[layer];
            let w = &self.params[offset..offset + n_in * n_out];
            if let Some(g) = param_grad.as_deref_mut() {
                // gw[o][i] = sum_s delta[s][o] x[s][i], as dots over the batch.
                let dt = transpose(&delta, n, n_out);
                let xt = transpose(x, n, n_in);
                let (gw, gb) = g[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for ((grow, drow), gbo) in gw.chunks_exact_mut(n_in).zip(dt.chunks_exact(n)).zip(gb.iter_mut()) {
                    *gbo += drow.iter().sum::<f64>();
                    for (g, xcol) in grow.iter_mut().zip(xt.chunks_exact(n)) {
                        *g += dot(drow, xcol);
                    }
                }
            }
            let wt = transpose(w, n_out, n_in);
            let mut down = Vec::with_capacity(n * n_in);
            for drow in delta.chunks_exact(n_out) {
                down.extend(wt.chunks_exact(n_out).map(|wcol| dot(drow, wcol)));
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Adds the gradient of `<output, output_grad>` w.r.t. the parameters into
    /// `param_grad` and returns the gradient w.r.t. the input.
    pub fn accumulate_gradient(&self, input: &[f64], output_grad: &[f64], param_grad: &mut [f64]) -> Result<Vec<f64>> {
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        check_len("parameter gradient", self.params.len(), param_grad.len())?;
        let trace = self.trace(input)?;
        self.backprop(&trace, output_grad, Some(param_grad))
    }

    /// Exact gradients of `<forward(input), output_grad>`.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Gradients> {
        let mut params = vec![0.0; self.params.len()];
        let input = self.accumulate_gradient(input, output_grad, &mut params)?;
        Ok(Gradients { params, input })
    }

    /// Central-difference estimate of the parameter gradient of
    /// `<forward(input), output_grad>`.
    pub fn finite_diff_grad(&self, input: &[f64], output_grad: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("step h must be positive, got {h}")));
        }
        check_len("network input", self.input_dim(), input.len())?;
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        let objective = |net: &DenseNet| -> f64 { dot(&net.forward(input).expect("checked"), output_grad) };
        let mut probe = self.clone();
        let mut grad = vec![0.0; self.params.len()];
        for i in 0..grad.len() {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let plus = objective(&probe);
            probe.params[i] = orig - h;
            let minus = objective(&probe);
            probe.params[i] = orig;
            grad[i] = (plus - minus) / (2.0 * h);
        }
        Ok(grad)
    }
}

/// Gradient-check error between two vectors, relative to their scale:
/// `max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|)`. Zero when both vanish.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| libm::fabs(*x)).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Four interleaved partial sums, so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Row-major `rows x cols` to row-major `cols x rows`.
fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for (r, row) in m.chunks_exact(cols).enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c * rows + r] = *v;
        }
    }
    t
}

/// Uniform double in `[0, 1)` from the top 53 bits of a draw.
pub(crate) fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Straight matrix arithmetic with nested `Vec` weights, independent of the
    /// flat layout walk used by `forward`.
    fn oracle_forward(net: &DenseNet, input: &[f64]) -> Vec<f64> {
        let mut mats: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
        let mut p = net.params().iter().copied();
        for w in net.sizes().windows(2) {
            let m: Vec<Vec<f64>> = (0..w[1]).map(|_| (0..w[0]).map(|_| p.next().unwrap()).collect()).collect();
            let b: Vec<f64> = (0..w[1]).map(|_| p.next().unwrap()).collect();
            mats.push((m, b));
        }
        let mut x = input.to_vec();
        let last = mats.len() - 1;
        for (l, (m, b)) in mats.iter().enumerate() {
            x = m
                .iter()
                .zip(b)
                .map(|(row, bi)| {
                    let z: f64 = row.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + bi;
                    if l == last {
                        match net.output_activation() {
                            Activation::Tanh => z.tanh(),
                            _ => z,
                        }
                    } else if z > 0.0 {
                        z
                    } else {
                        0.01 * z
                    }
                })
                .collect();
        }
        x
    }

    fn identity(n: usize, output: Activation) -> DenseNet {
        let mut params = vec![0.0; n * n + n];
        for i in 0..n {
            params[i * n + i] = 1.0;
        }
        DenseNet::from_params(&[n, n], output, params).unwrap()
    }

    #[test]
    fn parameter_count_matches_layout() {
        let net = DenseNet::zeros(&[3, 8, 8, 2], Activation::Linear).unwrap();
        assert_eq!(net.num_params(), 3 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
    }

    #[test]
    fn identity_layers() {
        let lin = identity(2, Activation::Linear);
        assert_eq!(lin.forward(&[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
        let tanh = identity(1, Activation::Tanh);
        assert_eq!(tanh.forward(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let mut rng = seeded(3);
        for output in [Activation::Tanh, Activation::Linear] {
            let net = DenseNet::random(&[2, 3, 1], output, &mut rng).unwrap();
            let input = [0.3, -0.7];
            let got = net.forward(&input).unwrap();
            let want = oracle_forward(&net, &input);
            assert!((got[0] - want[0]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn rejects_wrong_input_length() {
        let net = DenseNet::zeros(&[2, 1], Activation::Linear).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(net.backward(&[1.0, 2.0], &[1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(DenseNet::zeros(&[2, 0, 1], Activation::Linear).is_err());
        assert!(DenseNet::zeros(&[2], Activation::Linear).is_err());
    }

    #[test]
    fn linear_layer_gradients() {
        // y = W x + b with W = [[1, 2], [3, 4]], b = [0.5, -0.5]
        let net = DenseNet::from_params(&[2, 2], Activation::Linear, vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        let x = [0.25, -1.0];
        let g = [2.0, -3.0];
        let grads = net.backward(&x, &g).unwrap();
        // dW = g x^T, db = g
        assert_eq!(grads.params, vec![0.5, -2.0, -0.75, 3.0, 2.0, -3.0]);
        // W^T g
        assert_eq!(grads.input, vec![1.0 * 2.0 + 3.0 * -3.0, 2.0 * 2.0 + 4.0 * -3.0]);

        let fd = net.finite_diff_grad(&x, &g, 1e-3).unwrap();
        for (a, b) in fd.iter().zip(&grads.params) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = seeded(11);
        let net = DenseNet::random(&[3, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let grads = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(grads.params.iter().all(|&g| g == 0.0));
        assert!(grads.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn finite_diff_rejects_non_positive_step() {
        let net = DenseNet::zeros(&[1, 1], Activation::Linear).unwrap();
        assert!(matches!(net.finite_diff_grad(&[1.0], &[1.0], 0.0), Err(Error::InvalidArgument(_))));
        assert!(net.finite_diff_grad(&[1.0], &[1.0], -1e-5).is_err());
    }

    #[test]
    fn backward_is_deterministic() {
        let mut rng = seeded(5);
        let net = DenseNet::random(&[3, 8, 8, 2], Activation::Tanh, &mut rng).unwrap();
        let a = net.backward(&[0.1, -0.4, 0.9], &[1.0, -2.0]).unwrap();
        let b = net.backward(&[0.1, -0.4, 0.9], &[1.0, -2.0]).unwrap();
        assert_eq!(a, b);
    }
}
