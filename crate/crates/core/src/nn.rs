//! Dense ReLU network used as the Q-function approximator.
//!
//! Weights of a layer are stored row-major as `in_dim x out_dim`, so a batch
//! of inputs `X (batch x in)` maps to `X W + b`. Hidden layers use ReLU, the
//! output layer is linear. All arithmetic is `f64`.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

pub const HIDDEN_WIDTH: usize = 256;
pub const HIDDEN_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::ShapeMismatch(format!(
                "layer {in_dim}x{out_dim} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Weight from input `i` to output `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.out_dim + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `out = x W + b` for `batch` rows of `x`.
    fn affine(&self, x: &[f64], batch: usize, out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), batch * self.in_dim);
        out.clear();
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        // SAFETY: slices have exactly the lengths implied by the dimensions and strides.
        unsafe {
            matrixmultiply::dgemm(
                batch,
                self.in_dim,
                self.out_dim,
                1.0,
                x.as_ptr(),
                self.in_dim as isize,
                1,
                self.weights.as_ptr(),
                self.out_dim as isize,
                1,
                1.0,
                out.as_mut_ptr(),
                self.out_dim as isize,
                1,
            );
        }
    }
}

/// One training example: the loss only looks at output unit `action`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Partial derivatives of the minibatch loss, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Dense>,
}

impl GradientSet {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// Euclidean norm over every partial derivative.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

impl QNetwork {
    /// The `[5, 256, 256, 256, actions]` Q-network with scaled uniform init.
    pub fn for_actions<R: Rng + ?Sized>(inputs: usize, actions: usize, rng: &mut R) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend([HIDDEN_WIDTH; HIDDEN_LAYERS]);
        sizes.push(actions);
        Self::new(&sizes, rng).expect("static shape is valid")
    }

    /// Uniform init in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in &mut net.layers {
            let limit = init_limit(l.in_dim, l.out_dim);
            for w in &mut l.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer output {} feeds input {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Q-values for `batch` inputs stored row-major in `inputs`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_inputs(inputs, batch)?;
        let mut cur = inputs.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, batch, &mut next);
            if i < last {
                relu(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    fn check_inputs(&self, inputs: &[f64], batch: usize) -> Result<()> {
        if inputs.len() != batch * self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} inputs, got {}",
                batch * self.input_dim(),
                inputs.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Mean squared error `(1/B) Σ (Q(s_i, a_i) - y_i)^2` over the batch.
    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for s in batch {
            let q = self.forward(s.state)?;
            let a = self.check_action(s.action)?;
            total += (q[a] - s.target).powi(2);
        }
        Ok(total / batch.len() as f64)
    }

    fn check_action(&self, action: usize) -> Result<usize> {
        if action >= self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "action {action} outside {} outputs",
                self.output_dim()
            )));
        }
        Ok(action)
    }

    pub fn backward(&self, batch: &[Sample<'_>]) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.backward_into(batch, &mut grads)?;
        Ok(grads)
    }

    /// Gradient of [`QNetwork::loss`], written into `grads`. Returns the loss.
    pub fn backward_into(&self, batch: &[Sample<'_>], grads: &mut GradientSet) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        self.check_grad_shape(grads)?;
        let n = batch.len();
        let d_in = self.input_dim();
        let mut x = Vec::with_capacity(n * d_in);
        for s in batch {
            if s.state.len() != d_in {
                return Err(Error::ShapeMismatch(format!(
                    "sample has {} features, expected {d_in}",
                    s.state.len()
                )));
            }
            if !s.target.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            self.check_action(s.action)?;
            x.extend_from_slice(s.state);
        }
        self.check_inputs(&x, n)?;
        grads.clear();

        // activations[l] is the input to layer l
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x);
        for layer in &self.layers[..last] {
            let mut z = Vec::new();
            layer.affine(activations.last().expect("non-empty"), n, &mut z);
            relu(&mut z);
            activations.push(z);
        }

        // output layer, evaluated only at each sample's action
        let out = &self.layers[last];
        let h = &activations[last];
        let scale = 2.0 / n as f64;
        let mut loss = 0.0;
        let mut delta = vec![0.0; n * out.in_dim];
        {
            let g = &mut grads.layers[last];
            for (i, s) in batch.iter().enumerate() {
                let a = s.action;
                let row = &h[i * out.in_dim..(i + 1) * out.in_dim];
                let q = out.bias[a]
                    + row
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * out.weights[j * out.out_dim + a])
                        .sum::<f64>();
                let err = q - s.target;
                loss += err * err;
                let d = scale * err;
                g.bias[a] += d;
                for (j, v) in row.iter().enumerate() {
                    g.weights[j * out.out_dim + a] += d * v;
                    delta[i * out.in_dim + j] = d * out.weights[j * out.out_dim + a];
                }
            }
        }

        for l in (0..last).rev() {
            let layer = &self.layers[l];
            let act_out = &activations[l + 1];
            for (d, a) in delta.iter_mut().zip(act_out) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let input = &activations[l];
            let g = &mut grads.layers[l];
            for i in 0..n {
                for (gb, d) in g.bias.iter_mut().zip(&delta[i * layer.out_dim..(i + 1) * layer.out_dim]) {
                    *gb += d;
                }
            }
            // SAFETY: dimensions and strides match the buffers below.
            unsafe {
                // dW = input^T delta
                matrixmultiply::dgemm(
                    layer.in_dim,
                    n,
                    layer.out_dim,
                    1.0,
                    input.as_ptr(),
                    1,
                    layer.in_dim as isize,
                    delta.as_ptr(),
                    layer.out_dim as isize,
                    1,
                    0.0,
                    g.weights.as_mut_ptr(),
                    layer.out_dim as isize,
                    1,
                );
            }
            if l > 0 {
                let mut prev = vec![0.0; n * layer.in_dim];
                // SAFETY: as above; W^T is read through swapped strides.
                unsafe {
                    matrixmultiply::dgemm(
                        n,
                        layer.out_dim,
                        layer.in_dim,
                        1.0,
                        delta.as_ptr(),
                        layer.out_dim as isize,
                        1,
                        layer.weights.as_ptr(),
                        1,
                        layer.out_dim as isize,
                        0.0,
                        prev.as_mut_ptr(),
                        layer.in_dim as isize,
                        1,
                    );
                }
                delta = prev;
            }
        }
        Ok(loss / n as f64)
    }

    fn check_grad_shape(&self, grads: &GradientSet) -> Result<()> {
        let same = grads.layers.len() == self.layers.len()
            && grads
                .layers
                .iter()
                .zip(&self.layers)
                .all(|(g, l)| g.in_dim == l.in_dim && g.out_dim == l.out_dim);
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("gradient shape differs from network".into()))
        }
    }

    fn check_same_shape(&self, other: &QNetwork) -> Result<()> {
        if self.layer_sizes() == other.layer_sizes() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.layer_sizes(),
                other.layer_sizes()
            )))
        }
    }

    /// Plain gradient descent step `θ ← θ - lr * grad`.
    pub fn sgd_update(&mut self, grads: &GradientSet, learning_rate: f64) -> Result<()> {
        self.check_grad_shape(grads)?;
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * d;
            }
        }
        Ok(())
    }

    /// Blends `self ← tau * primary + (1 - tau) * self`.
    pub fn soft_update(&mut self, primary: &QNetwork, tau: f64) -> Result<()> {
        self.check_same_shape(primary)?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid("tau", "must be in [0, 1]"));
        }
        for (t, p) in self.layers.iter_mut().zip(&primary.layers) {
            for (a, b) in t.weights.iter_mut().zip(&p.weights) {
                *a = tau * b + (1.0 - tau) * *a;
            }
            for (a, b) in t.bias.iter_mut().zip(&p.bias) {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
        Ok(())
    }

    /// Writes the checkpoint layout:
    ///
    /// ```text
    /// magic   8 bytes  "MVAPQN01"
    /// count   u32 LE   number of layer sizes (layers + 1)
    /// sizes   count x u64 LE
    /// per layer: in*out weights (row-major in x out), then out biases, f64 LE
    /// ```
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        let sizes = self.layer_sizes();
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in &sizes {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        let count = u32::from_le_bytes(b4) as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let mut b8 = [0u8; 8];
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8).map_err(io)?;
            sizes.push(u64::from_le_bytes(b8) as usize);
        }
        let mut net = Self::zeros(&sizes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        for l in &mut net.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                r.read_exact(&mut b8).map_err(io)?;
                *v = f64::from_le_bytes(b8);
            }
        }
        if r.read(&mut b8).map_err(io)? != 0 {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(net)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MVAPQN01";

pub fn init_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
