//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` per network (weights of layer `l`
//! stored row-major as `in x out`, followed by its bias), which keeps the
//! optimizers, finite-difference checks and JSON persistence trivial.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
}

pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.inputs.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Network with `hidden` activation on every layer except the last,
    /// which uses `output`. All parameters zero.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs at least an input and an output size");
        let layers = sizes.len() - 1;
        let mut activations = vec![hidden; layers];
        activations[layers - 1] = output;
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Mlp {
            sizes: sizes.to_vec(),
            activations,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(sizes, hidden, output);
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = net.layer_offsets(l);
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        net
    }

    pub fn from_parts(sizes: Vec<usize>, activations: Vec<Activation>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Domain("mlp shape/activation mismatch".into()));
        }
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if params.len() != n {
            return Err(Error::Domain(format!(
                "mlp expects {n} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters".into()));
        }
        Ok(Mlp {
            sizes,
            activations,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Multiply the weights of the last layer, e.g. to start a policy head
    /// near uniform.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let l = self.num_layers() - 1;
        let (w, _) = self.layer_offsets(l);
        let len = self.sizes[l] * self.sizes[l + 1];
        self.params[w..w + len].iter_mut().for_each(|p| *p *= factor);
    }

    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        (off, off + self.sizes[layer] * self.sizes[layer + 1])
    }

    fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (w, b) = self.layer_offsets(layer);
        ArrayView2::from_shape((self.sizes[layer], self.sizes[layer + 1]), &self.params[w..b])
            .expect("layer shape")
    }

    fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (_, b) = self.layer_offsets(layer);
        ArrayView1::from(&self.params[b..b + self.sizes[layer + 1]])
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut cur = x.to_vec();
        for l in 0..self.num_layers() {
            let (rows, cols) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer_offsets(l);
            let mut out = self.params[b..b + cols].to_vec();
            for (i, xi) in cur.iter().enumerate().take(rows) {
                if *xi == 0.0 {
                    continue;
                }
                let row = &self.params[w + i * cols..w + (i + 1) * cols];
                for (o, wij) in out.iter_mut().zip(row) {
                    *o += xi * wij;
                }
            }
            let act = self.activations[l];
            out.iter_mut().for_each(|z| *z = act.apply(*z));
            cur = out;
        }
        cur
    }

    /// Batched forward pass, rows are samples.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut cur = x.to_owned();
        for l in 0..self.num_layers() {
            let mut z = cur.dot(&self.weights(l));
            z += &self.bias(l);
            let act = self.activations[l];
            z.mapv_inplace(|v| act.apply(v));
            cur = z;
        }
        cur
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.num_layers() + 1);
        let mut pre = Vec::with_capacity(self.num_layers());
        inputs.push(x.to_owned());
        for l in 0..self.num_layers() {
            let mut z = inputs[l].dot(&self.weights(l));
            z += &self.bias(l);
            let act = self.activations[l];
            let a = z.mapv(|v| act.apply(v));
            pre.push(z);
            inputs.push(a);
        }
        ForwardCache {
            inputs,
            pre_activations: pre,
        }
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`
    /// and return `d loss / d input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: ArrayView2<'_, f64>,
        grads: &mut [f64],
    ) -> Array2<f64> {
        assert_eq!(grads.len(), self.params.len());
        let mut upstream = d_output.to_owned();
        for l in (0..self.num_layers()).rev() {
            let act = self.activations[l];
            let z = &cache.pre_activations[l];
            let mut dz = upstream;
            if act != Activation::Identity {
                ndarray::Zip::from(&mut dz)
                    .and(z)
                    .for_each(|d, &zv| *d *= act.derivative(zv));
            }
            let (w_off, b_off) = self.layer_offsets(l);
            let (rows, cols) = (self.sizes[l], self.sizes[l + 1]);
            {
                let mut gw = ArrayViewMut2::from_shape((rows, cols), &mut grads[w_off..b_off])
                    .expect("grad shape");
                general_mat_mul(1.0, &cache.inputs[l].t(), &dz, 1.0, &mut gw);
            }
            for (g, s) in grads[b_off..b_off + cols]
                .iter_mut()
                .zip(dz.sum_axis(Axis(0)).iter())
            {
                *g += s;
            }
            upstream = dz.dot(&self.weights(l).t());
        }
        upstream
    }
}

/// Adam over a list of parameter segments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, segment_lens: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: segment_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: segment_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (s, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[s], &mut self.v[s]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// Plain SGD with classical momentum.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64, n: usize) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = self.momentum * *v - self.lr * g;
            *p += *v;
        }
    }
}

/// Scale gradient segments so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.iter_mut().for_each(|x| *x *= s));
    }
    norm
}
