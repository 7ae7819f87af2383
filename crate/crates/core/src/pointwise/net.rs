//! Dense feed-forward layers with hand-written backpropagation.
//!
//! Samples are rows. A [`Stack`] is a chain of dense layers; hidden layers are
//! always activated, the last one only when `activate_last` is set. Parameters
//! flatten layer by layer as the column-major weight matrix followed by the
//! bias vector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64, slope: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64, slope: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaky_relu" => Ok(Activation::LeakyRelu),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(
                "activation",
                format!("`{other}` (expected leaky_relu, relu or tanh)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: DMatrix::zeros(inputs, outputs),
            b: DVector::zeros(outputs),
        }
    }

    /// Uniform He-style initialization, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`,
    /// zero biases.
    pub fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let w = DMatrix::from_fn(inputs, outputs, |_, _| rng.random_range(-bound..bound));
        Dense {
            w,
            b: DVector::zeros(outputs),
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.w;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.b[j]);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub leaky_slope: f64,
    pub activate_last: bool,
}

/// What a training forward pass keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct StackCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    masks: Vec<Option<DMatrix<f64>>>,
}

impl Stack {
    /// Layers of widths `sizes` after an input of width `inputs`.
    pub fn init(
        inputs: usize,
        sizes: &[usize],
        activation: Activation,
        leaky_slope: f64,
        activate_last: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = inputs;
        for &w in sizes {
            layers.push(Dense::init(fan_in, w, rng));
            fan_in = w;
        }
        Stack {
            layers,
            activation,
            leaky_slope,
            activate_last,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.nrows())
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    fn activated(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.activate_last
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if self.activated(i) {
                let (act, slope) = (self.activation, self.leaky_slope);
                h.apply(|v| *v = act.apply(*v, slope));
            }
        }
        h
    }

    /// Forward pass with inverted dropout on every activated output.
    pub fn forward_train(
        &self,
        x: &DMatrix<f64>,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (DMatrix<f64>, StackCache) {
        let mut cache = StackCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            cache.inputs.push(h);
            if self.activated(i) {
                let (act, slope) = (self.activation, self.leaky_slope);
                let mut a = z.map(|v| act.apply(v, slope));
                let mask = (dropout > 0.0).then(|| {
                    let keep = 1.0 / (1.0 - dropout);
                    DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
                        if rng.random::<f64>() < dropout {
                            0.0
                        } else {
                            keep
                        }
                    })
                });
                if let Some(m) = &mask {
                    a.component_mul_assign(m);
                }
                cache.masks.push(mask);
                h = a;
            } else {
                cache.masks.push(None);
                h = z.clone();
            }
            cache.pre.push(z);
        }
        (h, cache)
    }

    /// Writes parameter gradients into `grad` (same layout as
    /// [`Stack::params_into`]) and returns the gradient with respect to the
    /// stack input.
    pub fn backward(
        &self,
        cache: &StackCache,
        grad_out: DMatrix<f64>,
        l2: f64,
        grad: &mut [f64],
    ) -> DMatrix<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        let mut g = grad_out;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if self.activated(i) {
                if let Some(m) = &cache.masks[i] {
                    g.component_mul_assign(m);
                }
                let (act, slope) = (self.activation, self.leaky_slope);
                g.zip_apply(&cache.pre[i], |gv, z| *gv *= act.derivative(z, slope));
            }
            let gw = cache.inputs[i].transpose() * &g;
            let nw = layer.w.len();
            let o = offsets[i];
            for (k, (dst, src)) in grad[o..o + nw].iter_mut().zip(gw.iter()).enumerate() {
                *dst = src + 2.0 * l2 * layer.w[k];
            }
            for (j, dst) in grad[o + nw..o + layer.n_params()].iter_mut().enumerate() {
                *dst = g.column(j).sum();
            }
            g = &g * layer.w.transpose();
        }
        g
    }

    pub fn weight_penalty(&self) -> f64 {
        self.layers.iter().map(|l| l.w.norm_squared()).sum()
    }

    pub fn params_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
    }

    /// Reads parameters back; returns how many were consumed.
    pub fn set_params(&mut self, p: &[f64]) -> usize {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        off
    }
}

/// A differentiable regressor trainable by [`super::train`].
pub trait Network: Clone {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn n_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
    /// Evaluation-mode forward pass (no dropout).
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// Loss `mean_rows(sum_cols (y - y_hat)^2) + l2 * sum(W^2)` and its gradient.
    fn loss_grad(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        l2: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<f64>);

    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::invalid(
                "network input",
                format!("expected {} columns, got {}", self.n_inputs(), x.ncols()),
            ));
        }
        Ok(self.forward(x))
    }
}

fn data_loss(pred: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = y.nrows() as f64;
    let diff = pred - y;
    let loss = diff.norm_squared() / n;
    (loss, diff * (2.0 / n))
}

/// Plain perceptron: activated hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub stack: Stack,
}

impl Mlp {
    pub fn init(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        activation: Activation,
        leaky_slope: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = hidden.to_vec();
        sizes.push(outputs);
        Mlp {
            stack: Stack::init(inputs, &sizes, activation, leaky_slope, false, &mut rng),
        }
    }
}

impl Network for Mlp {
    fn n_inputs(&self) -> usize {
        self.stack.n_inputs()
    }
    fn n_outputs(&self) -> usize {
        self.stack.n_outputs()
    }
    fn n_params(&self) -> usize {
        self.stack.n_params()
    }
    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        self.stack.params_into(&mut p);
        p
    }
    fn set_params(&mut self, p: &[f64]) {
        self.stack.set_params(p);
    }
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.stack.forward(x)
    }
    fn loss_grad(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        l2: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<f64>) {
        let (pred, cache) = self.stack.forward_train(x, dropout, rng);
        let (loss, g) = data_loss(&pred, y);
        let mut grad = vec![0.0; self.n_params()];
        self.stack.backward(&cache, g, l2, &mut grad);
        (loss + l2 * self.stack.weight_penalty(), grad)
    }
}

/// Number of geometric features (coordinates and normal) leading each row.
pub const GEO_FEATURES: usize = 6;
/// Number of flow-condition features closing each row.
pub const COND_FEATURES: usize = 3;

/// Dual-branch perceptron: geometry and flow conditions pass through separate
/// activated stacks whose outputs are concatenated into a trunk with a linear
/// output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaDnn {
    pub geo: Stack,
    pub cond: Stack,
    pub trunk: Stack,
}

impl LambdaDnn {
    pub fn init(
        geo: &[usize],
        cond: &[usize],
        trunk: &[usize],
        outputs: usize,
        activation: Activation,
        leaky_slope: f64,
        seed: u64,
    ) -> Result<Self> {
        if geo.is_empty() || cond.is_empty() {
            return Err(Error::invalid("lambda-dnn", "both branches need at least one layer"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geo = Stack::init(GEO_FEATURES, geo, activation, leaky_slope, true, &mut rng);
        let cond = Stack::init(COND_FEATURES, cond, activation, leaky_slope, true, &mut rng);
        let mut sizes = trunk.to_vec();
        sizes.push(outputs);
        let trunk = Stack::init(
            geo.n_outputs() + cond.n_outputs(),
            &sizes,
            activation,
            leaky_slope,
            false,
            &mut rng,
        );
        Ok(LambdaDnn { geo, cond, trunk })
    }

    fn merged(&self, g: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(g.nrows(), g.ncols() + c.ncols());
        m.columns_mut(0, g.ncols()).copy_from(g);
        m.columns_mut(g.ncols(), c.ncols()).copy_from(c);
        m
    }
}

impl Network for LambdaDnn {
    fn n_inputs(&self) -> usize {
        GEO_FEATURES + COND_FEATURES
    }
    fn n_outputs(&self) -> usize {
        self.trunk.n_outputs()
    }
    fn n_params(&self) -> usize {
        self.geo.n_params() + self.cond.n_params() + self.trunk.n_params()
    }
    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        self.geo.params_into(&mut p);
        self.cond.params_into(&mut p);
        self.trunk.params_into(&mut p);
        p
    }
    fn set_params(&mut self, p: &[f64]) {
        let a = self.geo.set_params(p);
        let b = self.cond.set_params(&p[a..]);
        self.trunk.set_params(&p[a + b..]);
    }
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let g = self.geo.forward(&x.columns(0, GEO_FEATURES).into_owned());
        let c = self
            .cond
            .forward(&x.columns(GEO_FEATURES, COND_FEATURES).into_owned());
        self.trunk.forward(&self.merged(&g, &c))
    }
    fn loss_grad(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        l2: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<f64>) {
        let xg = x.columns(0, GEO_FEATURES).into_owned();
        let xc = x.columns(GEO_FEATURES, COND_FEATURES).into_owned();
        let (g, gc) = self.geo.forward_train(&xg, dropout, rng);
        let (c, cc) = self.cond.forward_train(&xc, dropout, rng);
        let (pred, tc) = self.trunk.forward_train(&self.merged(&g, &c), dropout, rng);
        let (loss, d) = data_loss(&pred, y);

        let (ng, nc) = (self.geo.n_params(), self.cond.n_params());
        let mut grad = vec![0.0; self.n_params()];
        let (geo_grad, rest) = grad.split_at_mut(ng);
        let (cond_grad, trunk_grad) = rest.split_at_mut(nc);
        let dm = self.trunk.backward(&tc, d, l2, trunk_grad);
        let split = g.ncols();
        self.geo
            .backward(&gc, dm.columns(0, split).into_owned(), l2, geo_grad);
        self.cond.backward(
            &cc,
            dm.columns(split, dm.ncols() - split).into_owned(),
            l2,
            cond_grad,
        );
        let penalty =
            self.geo.weight_penalty() + self.cond.weight_penalty() + self.trunk.weight_penalty();
        (loss + l2 * penalty, grad)
    }
}

/// Largest relative deviation between analytic and central-difference
/// gradients, `|a - n| / max(|a|, |n|, 1e-6)`, without dropout.
pub fn gradient_check<N: Network>(
    net: &N,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l2: f64,
    step: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, analytic) = net.loss_grad(x, y, l2, 0.0, &mut rng);
    let base = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + step;
        probe.set_params(&p);
        let up = probe.loss_grad(x, y, l2, 0.0, &mut rng).0;
        p[k] = base[k] - step;
        probe.set_params(&p);
        let down = probe.loss_grad(x, y, l2, 0.0, &mut rng).0;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}
