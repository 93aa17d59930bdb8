//! Dense feed-forward networks with explicit forward and backward passes.
//!
//! Weights are stored row-major as `out x in` per layer, batches as
//! `rows x features`. All arithmetic is 64-bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod gradcheck;
mod optim;

pub use gradcheck::{check_parameters, gradient_check, GradCheckOptions, GradCheckReport, LayerCheck, LossTag};
pub use optim::{clip_params, rmsprop_step, OptimizerState, RMSPROP_DECAY, RMSPROP_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-z)),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Layer widths (input first) and one activation per weight layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = NetworkSpec {
            layer_sizes,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hidden layers use ReLU, the output layer `output`.
    pub fn relu_stack(layer_sizes: Vec<usize>, output: Activation) -> Result<Self> {
        let n = layer_sizes.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n];
        if let Some(last) = activations.last_mut() {
            *last = output;
        }
        NetworkSpec::new(layer_sizes, activations)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("a network needs at least an input and an output layer"));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(Error::config(alloc::format!(
                "{} activations for {} weight layers",
                self.activations.len(),
                self.layer_sizes.len() - 1
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Weights and bias of one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// All parameters of a network, one [`Layer`] per weight layer. Gradients
/// and optimizer accumulators use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    pub layers: Vec<Layer>,
}

impl NetworkParameters {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        NetworkParameters {
            layers: spec
                .layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[1], w[0]))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParameters {
            layers: self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.values_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Checks layer shapes against `spec` and that every entry is finite.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.num_layers() {
            return Err(Error::shape(alloc::format!(
                "{} parameter layers for a {}-layer spec",
                self.layers.len(),
                spec.num_layers()
            )));
        }
        for (i, (layer, w)) in self.layers.iter().zip(spec.layer_sizes.windows(2)).enumerate() {
            if layer.cols != w[0]
                || layer.rows != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.bias.len() != w[1]
            {
                return Err(Error::shape(alloc::format!(
                    "layer {i} is {}x{}, spec expects {}x{}",
                    layer.rows,
                    layer.cols,
                    w[1],
                    w[0]
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::Input("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Weights uniform in `±sqrt(1 / fan_in)`, biases zero.
pub fn init_network<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<NetworkParameters> {
    spec.validate()?;
    let mut params = NetworkParameters::zeros(spec);
    for layer in &mut params.layers {
        let scale = libm::sqrt(1.0 / layer.cols as f64);
        for w in &mut layer.weights {
            *w = scale * (2.0 * rng.gen::<f64>() - 1.0);
        }
    }
    Ok(params)
}

/// Row-major dense matrix; one row per batch sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape("vstack column mismatch"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::from_vec(self.rows + other.rows, self.cols, data)
    }

    /// Places `self` left of `other`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape("hstack row mismatch"));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Matrix::from_vec(self.rows, cols, data)
    }

    /// Columns `start..start + width`.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }
}

/// `C = A·op(B)` for row-major operands with arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass slices whose extents cover every strided index for
    // the given (m, k, n); `c` is m x n row-major and does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
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
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Inputs, pre-activations and outputs of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; `inputs[0]` is the batch.
    pub inputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
    pub output: Matrix,
}

impl ForwardCache {
    /// Sign pattern of every ReLU pre-activation, used to detect kinks.
    pub fn relu_mask(&self, spec: &NetworkSpec) -> Vec<bool> {
        self.pre_activations
            .iter()
            .zip(&spec.activations)
            .filter(|(_, a)| **a == Activation::Relu)
            .flat_map(|(z, _)| z.data.iter().map(|v| *v > 0.0))
            .collect()
    }
}

pub fn forward(params: &NetworkParameters, spec: &NetworkSpec, batch: &Matrix) -> Result<ForwardCache> {
    if batch.cols != spec.input_size() {
        return Err(Error::shape(alloc::format!(
            "batch has {} features, network expects {}",
            batch.cols,
            spec.input_size()
        )));
    }
    if params.layers.len() != spec.num_layers() {
        return Err(Error::shape("parameter layers do not match spec"));
    }
    let n = batch.rows;
    let mut inputs = Vec::with_capacity(spec.num_layers());
    let mut pre_activations = Vec::with_capacity(spec.num_layers());
    let mut current = batch.clone();
    for (layer, &act) in params.layers.iter().zip(&spec.activations) {
        if layer.cols != current.cols {
            return Err(Error::shape("layer input width mismatch"));
        }
        let mut z = Matrix::zeros(n, layer.rows);
        // Z = X · Wᵀ
        gemm(
            n,
            layer.cols,
            layer.rows,
            &current.data,
            current.cols as isize,
            1,
            &layer.weights,
            1,
            layer.cols as isize,
            &mut z.data,
        );
        for r in 0..n {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let a = Matrix {
            rows: n,
            cols: z.cols,
            data: z.data.iter().map(|&v| act.apply(v)).collect(),
        };
        inputs.push(current);
        pre_activations.push(z);
        current = a;
    }
    Ok(ForwardCache {
        inputs,
        pre_activations,
        output: current,
    })
}

/// Output of the network without keeping intermediate values.
pub fn predict(params: &NetworkParameters, spec: &NetworkSpec, batch: &Matrix) -> Result<Matrix> {
    Ok(forward(params, spec, batch)?.output)
}

/// Back-propagates `grad_output = ∂L/∂output` through the cached pass.
/// Returns parameter gradients and `∂L/∂input`.
pub fn backward(
    params: &NetworkParameters,
    spec: &NetworkSpec,
    cache: &ForwardCache,
    grad_output: &Matrix,
) -> Result<(NetworkParameters, Matrix)> {
    if grad_output.rows != cache.output.rows || grad_output.cols != cache.output.cols {
        return Err(Error::shape("output gradient does not match forward output"));
    }
    if cache.inputs.len() != params.layers.len() {
        return Err(Error::shape("cache does not match parameters"));
    }
    let n = grad_output.rows;
    let mut grads = params.zeros_like();
    let mut upstream = grad_output.clone();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let act = spec.activations[l];
        let z = &cache.pre_activations[l];
        let a = if l + 1 < cache.inputs.len() {
            &cache.inputs[l + 1]
        } else {
            &cache.output
        };
        for ((g, &zv), &av) in upstream.data.iter_mut().zip(&z.data).zip(&a.data) {
            *g *= act.derivative(zv, av);
        }
        let x = &cache.inputs[l];
        let gl = &mut grads.layers[l];
        // dW = dZᵀ · X
        gemm(
            layer.rows,
            n,
            layer.cols,
            &upstream.data,
            1,
            layer.rows as isize,
            &x.data,
            x.cols as isize,
            1,
            &mut gl.weights,
        );
        for r in 0..n {
            for (b, g) in gl.bias.iter_mut().zip(upstream.row(r)) {
                *b += g;
            }
        }
        // dX = dZ · W
        let mut dx = Matrix::zeros(n, layer.cols);
        gemm(
            n,
            layer.rows,
            layer.cols,
            &upstream.data,
            layer.rows as isize,
            1,
            &layer.weights,
            layer.cols as isize,
            1,
            &mut dx.data,
        );
        upstream = dx;
    }
    Ok((grads, upstream))
}
