//! Dense feed-forward policy networks with exact reverse-mode gradients.
//!
//! Parameters of a network live in one flat buffer. Each layer stores its
//! weight matrix row-major (`out x in`) followed by its bias vector, layers
//! in input-to-output order. Hidden layers use `tanh`; the output layer is
//! either the identity (continuous actions) or a softmax (discrete actions).
//!
//! The backward pass accepts cotangents for the output *and* for every
//! hidden activation, so losses that couple hidden representations across
//! networks can inject gradient mid-network.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("layer {layer}: expected input of width {expected}, got {found}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(&'static str),
    #[error("parameter buffer has {found} entries, architecture needs {expected}")]
    ParameterCount { expected: usize, found: usize },
    #[error("got {policies} policies but {traces} traces/cotangents")]
    CountMismatch { policies: usize, traces: usize },
    #[error("cotangent for {what} has width {found}, expected {expected}")]
    CotangentShape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Softmax,
}

/// One multilayer perceptron policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Everything a forward pass produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Pre-activation values, one vector per layer (hidden layers and output).
    pub pre: Vec<Vec<f64>>,
    /// Post-`tanh` activations of the hidden layers.
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Forward pass over a batch. Every buffer is sample-major: sample `s`
/// occupies row `s` of a `batch x width` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub batch: usize,
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Gradient of a scalar loss with respect to a network's output and hidden
/// activations. Cotangents of a [`BatchTrace`] are sample-major like the
/// trace itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Cotangent {
    pub output: Vec<f64>,
    pub hidden: Vec<Vec<f64>>,
}

impl Cotangent {
    pub fn zeros(dims: &[usize]) -> Self {
        let hidden = dims[1..dims.len() - 1].iter().map(|&w| vec![0.0; w]).collect();
        Cotangent {
            output: vec![0.0; dims[dims.len() - 1]],
            hidden,
        }
    }

    pub fn output_only(dims: &[usize], output: Vec<f64>) -> Self {
        let mut cot = Self::zeros(dims);
        cot.output = output;
        cot
    }
}

fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Network with every weight and bias set to zero.
    pub fn zeros(dims: &[usize], output: OutputActivation) -> Result<Self, NnError> {
        validate_dims(dims)?;
        Ok(Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; parameter_count(dims)],
            output,
        })
    }

    pub fn from_params(
        dims: &[usize],
        output: OutputActivation,
        params: Vec<f64>,
    ) -> Result<Self, NnError> {
        validate_dims(dims)?;
        let expected = parameter_count(dims);
        if params.len() != expected {
            return Err(NnError::ParameterCount {
                expected,
                found: params.len(),
            });
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params,
            output,
        })
    }

    /// Fan-in scaled uniform initialization: every weight and bias of a layer
    /// with `n` inputs is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn init_uniform<R: Rng + ?Sized>(
        dims: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(dims, output)?;
        let mut offset = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / libm::sqrt(w[0] as f64);
            let len = w[0] * w[1] + w[1];
            for p in &mut net.params[offset..offset + len] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += len;
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn hidden_layers(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn output_activation(&self) -> OutputActivation {
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

    /// `(weights, biases)` of layer `layer`.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (offset, fan_in, fan_out) = self.layer_offset(layer);
        let w_end = offset + fan_in * fan_out;
        (
            &self.params[offset..w_end],
            &self.params[w_end..w_end + fan_out],
        )
    }

    fn layer_offset(&self, layer: usize) -> (usize, usize, usize) {
        let offset = parameter_count(&self.dims[..=layer]);
        (offset, self.dims[layer], self.dims[layer + 1])
    }

    pub fn forward(&self, state: &[f64]) -> Result<ForwardTrace, NnError> {
        if state.len() != self.dims[0] {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: self.dims[0],
                found: state.len(),
            });
        }
        let n_layers = self.dims.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        for layer in 0..n_layers {
            let input: &[f64] = if layer == 0 { state } else { &hidden[layer - 1] };
            let (weights, biases) = self.layer(layer);
            let z = affine(weights, biases, input);
            if layer + 1 < n_layers {
                hidden.push(z.iter().map(|&v| libm::tanh(v)).collect());
            }
            pre.push(z);
        }
        let output = apply_output(self.output, &pre[n_layers - 1]);
        Ok(ForwardTrace {
            input: state.to_vec(),
            pre,
            hidden,
            output,
        })
    }

    pub fn predict(&self, state: &[f64]) -> Result<Vec<f64>, NnError> {
        self.forward(state).map(|t| t.output)
    }

    /// Accumulates `scale * dL/dparams` into `grad`.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        cotangent: &Cotangent,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<(), NnError> {
        self.check_cotangent(cotangent)?;
        if grad.len() != self.params.len() {
            return Err(NnError::ParameterCount {
                expected: self.params.len(),
                found: grad.len(),
            });
        }
        let delta = self.output_delta(&trace.output, &cotangent.output);
        self.backprop(&trace.input, &trace.hidden, &cotangent.hidden, delta, scale, grad);
        Ok(())
    }

    /// Forward pass over `inputs.len() / input_dim` samples stored
    /// sample-major. Row `s` of every buffer equals what [`Mlp::forward`]
    /// computes for sample `s`, bit for bit.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<BatchTrace, NnError> {
        let d0 = self.dims[0];
        if inputs.len() % d0 != 0 {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: d0,
                found: inputs.len() % d0,
            });
        }
        let batch = inputs.len() / d0;
        let n_layers = self.dims.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        for layer in 0..n_layers {
            let input: &[f64] = if layer == 0 { inputs } else { &hidden[layer - 1] };
            let (weights, biases) = self.layer(layer);
            let z = affine_batch(weights, biases, input, batch);
            if layer + 1 < n_layers {
                hidden.push(z.iter().map(|&v| libm::tanh(v)).collect());
            }
            pre.push(z);
        }
        let last = &pre[n_layers - 1];
        let output = match self.output {
            OutputActivation::Identity => last.clone(),
            OutputActivation::Softmax => last.chunks_exact(self.output_dim()).flat_map(softmax).collect(),
        };
        Ok(BatchTrace {
            batch,
            input: inputs.to_vec(),
            pre,
            hidden,
            output,
        })
    }

    /// Accumulates `scale * dL/dparams`, summed over the batch, into `grad`.
    pub fn backward_batch_into(
        &self,
        trace: &BatchTrace,
        cotangent: &Cotangent,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<(), NnError> {
        let b = trace.batch;
        if cotangent.output.len() != b * self.output_dim() {
            return Err(NnError::CotangentShape {
                what: "output",
                expected: b * self.output_dim(),
                found: cotangent.output.len(),
            });
        }
        if cotangent.hidden.len() != self.hidden_layers() {
            return Err(NnError::CotangentShape {
                what: "hidden layer count",
                expected: self.hidden_layers(),
                found: cotangent.hidden.len(),
            });
        }
        for (h, &w) in cotangent.hidden.iter().zip(&self.dims[1..]) {
            if h.len() != b * w {
                return Err(NnError::CotangentShape {
                    what: "hidden layer",
                    expected: b * w,
                    found: h.len(),
                });
            }
        }
        if grad.len() != self.params.len() {
            return Err(NnError::ParameterCount {
                expected: self.params.len(),
                found: grad.len(),
            });
        }
        let out = self.output_dim();
        let delta = match self.output {
            OutputActivation::Identity => cotangent.output.clone(),
            OutputActivation::Softmax => trace
                .output
                .chunks_exact(out)
                .zip(cotangent.output.chunks_exact(out))
                .flat_map(|(y, g)| self.output_delta(y, g))
                .collect(),
        };
        self.backprop(&trace.input, &trace.hidden, &cotangent.hidden, delta, scale, grad);
        Ok(())
    }

    /// Gradient of the loss with respect to the output pre-activation.
    fn output_delta(&self, output: &[f64], cotangent: &[f64]) -> Vec<f64> {
        match self.output {
            OutputActivation::Identity => cotangent.to_vec(),
            OutputActivation::Softmax => {
                let dot: f64 = output.iter().zip(cotangent).map(|(a, b)| a * b).sum();
                output
                    .iter()
                    .zip(cotangent)
                    .map(|(yi, gi)| yi * (gi - dot))
                    .collect()
            }
        }
    }

    /// Reverse pass from the output delta through every layer. Buffers hold
    /// one or more samples, sample-major.
    fn backprop(
        &self,
        input: &[f64],
        hidden: &[Vec<f64>],
        hidden_cotangents: &[Vec<f64>],
        mut delta: Vec<f64>,
        scale: f64,
        grad: &mut [f64],
    ) {
        for layer in (0..self.dims.len() - 1).rev() {
            let x: &[f64] = if layer == 0 { input } else { &hidden[layer - 1] };
            let (offset, fan_in, fan_out) = self.layer_offset(layer);
            let w_end = offset + fan_in * fan_out;
            let (gw, gb) = grad[offset..w_end + fan_out].split_at_mut(fan_in * fan_out);
            accumulate_outer(gw, gb, x, &delta, scale);
            if layer == 0 {
                break;
            }
            let weights = &self.params[offset..w_end];
            let mut upstream = hidden_cotangents[layer - 1].clone();
            for (u, d) in upstream.chunks_exact_mut(fan_in).zip(delta.chunks_exact(fan_out)) {
                accumulate_transposed(weights, d, u);
            }
            delta = upstream
                .iter()
                .zip(&hidden[layer - 1])
                .map(|(u, h)| u * (1.0 - h * h))
                .collect();
        }
    }

    fn check_cotangent(&self, cotangent: &Cotangent) -> Result<(), NnError> {
        if cotangent.output.len() != self.output_dim() {
            return Err(NnError::CotangentShape {
                what: "output",
                expected: self.output_dim(),
                found: cotangent.output.len(),
            });
        }
        if cotangent.hidden.len() != self.hidden_layers() {
            return Err(NnError::CotangentShape {
                what: "hidden layer count",
                expected: self.hidden_layers(),
                found: cotangent.hidden.len(),
            });
        }
        for (h, &w) in cotangent.hidden.iter().zip(&self.dims[1..]) {
            if h.len() != w {
                return Err(NnError::CotangentShape {
                    what: "hidden layer",
                    expected: w,
                    found: h.len(),
                });
            }
        }
        Ok(())
    }
}

/// Parameter gradients of every policy given their traces and cotangents.
pub fn backward(
    policies: &[Mlp],
    traces: &[ForwardTrace],
    cotangents: &[Cotangent],
) -> Result<Vec<Vec<f64>>, NnError> {
    if traces.len() != policies.len() || cotangents.len() != policies.len() {
        return Err(NnError::CountMismatch {
            policies: policies.len(),
            traces: traces.len().min(cotangents.len()),
        });
    }
    policies
        .iter()
        .zip(traces)
        .zip(cotangents)
        .map(|((p, t), c)| {
            let mut grad = vec![0.0; p.num_params()];
            p.backward_into(t, c, 1.0, &mut grad)?;
            Ok(grad)
        })
        .collect()
}

/// Output of the last layer given its pre-activation.
pub fn apply_output(kind: OutputActivation, z: &[f64]) -> Vec<f64> {
    match kind {
        OutputActivation::Identity => z.to_vec(),
        OutputActivation::Softmax => softmax(z),
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `gw += scale * delta^T x` and `gb += scale * sum_s delta_s` for
/// sample-major `x` (`batch x fan_in`) and `delta` (`batch x fan_out`).
/// Four samples share each pass over a gradient row.
fn accumulate_outer(gw: &mut [f64], gb: &mut [f64], x: &[f64], delta: &[f64], scale: f64) {
    let fan_out = gb.len();
    let fan_in = gw.len() / fan_out;
    let mut xs = x.chunks_exact(4 * fan_in);
    let mut ds = delta.chunks_exact(4 * fan_out);
    for (xb, db) in (&mut xs).zip(&mut ds) {
        let (x0, rest) = xb.split_at(fan_in);
        let (x1, rest) = rest.split_at(fan_in);
        let (x2, x3) = rest.split_at(fan_in);
        for (o, (row, b)) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).enumerate() {
            let c = [0, 1, 2, 3].map(|k| scale * db[k * fan_out + o]);
            *b += (c[0] + c[1]) + (c[2] + c[3]);
            for (i, g) in row.iter_mut().enumerate() {
                *g += (c[0] * x0[i] + c[1] * x1[i]) + (c[2] * x2[i] + c[3] * x3[i]);
            }
        }
    }
    for (xr, dr) in xs.remainder().chunks_exact(fan_in).zip(ds.remainder().chunks_exact(fan_out)) {
        for ((row, b), &d) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).zip(dr) {
            let c = scale * d;
            *b += c;
            for (g, &xi) in row.iter_mut().zip(xr) {
                *g += c * xi;
            }
        }
    }
}

/// `upstream += W^T delta` for one sample, four weight rows per pass.
fn accumulate_transposed(weights: &[f64], delta: &[f64], upstream: &mut [f64]) {
    let fan_in = upstream.len();
    let mut rows = weights.chunks_exact(4 * fan_in);
    let mut deltas = delta.chunks_exact(4);
    for (block, d) in (&mut rows).zip(&mut deltas) {
        let (r0, rest) = block.split_at(fan_in);
        let (r1, rest) = rest.split_at(fan_in);
        let (r2, r3) = rest.split_at(fan_in);
        for (i, u) in upstream.iter_mut().enumerate() {
            *u += (r0[i] * d[0] + r1[i] * d[1]) + (r2[i] * d[2] + r3[i] * d[3]);
        }
    }
    for (row, &d) in rows.remainder().chunks_exact(fan_in).zip(deltas.remainder()) {
        for (u, &w) in upstream.iter_mut().zip(row) {
            *u += w * d;
        }
    }
}

/// [`affine`] over `batch` sample-major inputs. Four samples share each
/// weight row; every output is computed exactly as `affine` would.
fn affine_batch(weights: &[f64], biases: &[f64], input: &[f64], batch: usize) -> Vec<f64> {
    let fan_out = biases.len();
    let fan_in = input.len() / batch;
    let mut z = vec![0.0; batch * fan_out];
    let mut xs = input.chunks_exact(4 * fan_in);
    let mut zs = z.chunks_exact_mut(4 * fan_out);
    for (xb, zb) in (&mut xs).zip(&mut zs) {
        let (x0, rest) = xb.split_at(fan_in);
        let (x1, rest) = rest.split_at(fan_in);
        let (x2, x3) = rest.split_at(fan_in);
        for (o, (row, &b)) in weights.chunks_exact(fan_in).zip(biases).enumerate() {
            let d = dot4(row, [x0, x1, x2, x3]);
            for k in 0..4 {
                zb[k * fan_out + o] = b + d[k];
            }
        }
    }
    for (x, zr) in xs.remainder().chunks_exact(fan_in).zip(zs.into_remainder().chunks_exact_mut(fan_out)) {
        zr.copy_from_slice(&affine(weights, biases, x));
    }
    z
}

fn affine(weights: &[f64], biases: &[f64], input: &[f64]) -> Vec<f64> {
    let fan_in = input.len();
    biases
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            b + dot(row, input)
        })
        .collect()
}

/// Dot product with independent partial sums, which lets the loop vectorize
/// instead of waiting on one serial chain of additions.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut a_chunks = a.chunks_exact(4);
    let mut b_chunks = b.chunks_exact(4);
    for (x, y) in (&mut a_chunks).zip(&mut b_chunks) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = a_chunks
        .remainder()
        .iter()
        .zip(b_chunks.remainder())
        .map(|(x, y)| x * y)
        .sum();
    // Pairs lanes the way two-wide SIMD registers hold them.
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Four [`dot`] products against one shared row, each summed in exactly the
/// order `dot` uses.
fn dot4(w: &[f64], x: [&[f64]; 4]) -> [f64; 4] {
    let n = w.len();
    let body = n - n % 4;
    let x = x.map(|r| &r[..n]);
    let mut acc = [[0.0; 4]; 4];
    for c in (0..body).step_by(4) {
        let wc = &w[c..c + 4];
        for (a, r) in acc.iter_mut().zip(&x) {
            let rc = &r[c..c + 4];
            for k in 0..4 {
                a[k] += wc[k] * rc[k];
            }
        }
    }
    core::array::from_fn(|s| {
        let tail: f64 = w[body..].iter().zip(&x[s][body..]).map(|(a, b)| a * b).sum();
        (acc[s][0] + acc[s][2]) + (acc[s][1] + acc[s][3]) + tail
    })
}

fn validate_dims(dims: &[usize]) -> Result<(), NnError> {
    if dims.len() < 2 {
        return Err(NnError::InvalidArchitecture(
            "need at least an input and an output width",
        ));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(NnError::InvalidArchitecture("layer widths must be positive"));
    }
    Ok(())
}
