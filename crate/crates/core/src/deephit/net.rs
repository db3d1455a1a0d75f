//! Feedforward network with a shared ReLU trunk, one ReLU stack per cause and a
//! single softmax over all (cause, bin) cells.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn xavier<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            w: Array2::from_shape_simple_fn((inputs, outputs), || rng.random_range(-limit..=limit)),
            b: Array1::zeros(outputs),
        }
    }

    fn zeros_like(&self) -> Self {
        Self { w: Array2::zeros(self.w.raw_dim()), b: Array1::zeros(self.b.len()) }
    }

    fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub shared: Vec<Dense>,
    /// Per cause: hidden ReLU layers followed by a linear layer onto the bins.
    pub heads: Vec<Vec<Dense>>,
    pub p: usize,
    pub causes: usize,
    pub bins: usize,
}

pub(crate) struct Cache {
    /// Input to each shared layer, then the shared output.
    shared_in: Vec<Array2<f64>>,
    /// Input to each head layer, per cause.
    head_in: Vec<Vec<Array2<f64>>>,
    pub y: Array2<f64>,
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|v| v.max(0.0));
    a
}

pub(crate) fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

impl Network {
    pub fn new<R: Rng>(
        p: usize,
        causes: usize,
        bins: usize,
        shared_layers: &[usize],
        cause_layers: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut shared = Vec::new();
        let mut width = p;
        for &h in shared_layers {
            shared.push(Dense::xavier(width, h, rng));
            width = h;
        }
        let head_input = width + p;
        let heads = (0..causes)
            .map(|_| {
                let mut layers = Vec::new();
                let mut w = head_input;
                for &h in cause_layers {
                    layers.push(Dense::xavier(w, h, rng));
                    w = h;
                }
                layers.push(Dense::xavier(w, bins, rng));
                layers
            })
            .collect();
        Self { shared, heads, p, causes, bins }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shared: self.shared.iter().map(Dense::zeros_like).collect(),
            heads: self.heads.iter().map(|h| h.iter().map(Dense::zeros_like).collect()).collect(),
            ..*self
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.shared.iter().chain(self.heads.iter().flatten())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.shared.iter_mut().chain(self.heads.iter_mut().flatten())
    }

    pub fn n_parameters(&self) -> usize {
        self.layers().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All weights and biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in self.layers() {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for l in self.layers_mut() {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = *it.next().expect("length"));
        }
    }

    pub(crate) fn forward_cache(&self, x: ArrayView2<f64>) -> Cache {
        let mut shared_in = vec![x.to_owned()];
        for layer in &self.shared {
            let next = relu(layer.apply(&shared_in.last().expect("input").view()));
            shared_in.push(next);
        }
        let z = concatenate(Axis(1), &[shared_in.last().expect("input").view(), x]).expect("shapes");
        let mut head_in = Vec::with_capacity(self.causes);
        let mut logits = Vec::with_capacity(self.causes);
        for head in &self.heads {
            let mut inputs = vec![z.clone()];
            let last = head.len() - 1;
            for (i, layer) in head.iter().enumerate() {
                let a = layer.apply(&inputs.last().expect("input").view());
                if i == last {
                    logits.push(a);
                } else {
                    inputs.push(relu(a));
                }
            }
            head_in.push(inputs);
        }
        let views: Vec<_> = logits.iter().map(|l| l.view()).collect();
        let mut y = concatenate(Axis(1), &views).expect("shapes");
        softmax_rows(&mut y);
        Cache { shared_in, head_in, y }
    }

    /// Joint pmf for each row of `x`, laid out cause-major (`k * bins + b`).
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_cache(x).y
    }

    /// Gradient with respect to all parameters given `dloss/dy` at the output.
    pub(crate) fn backward(&self, cache: &Cache, dy: &Array2<f64>) -> Network {
        let y = &cache.y;
        // Softmax Jacobian: dlogit = y * (dy - <dy, y>).
        let inner = (dy * y).sum_axis(Axis(1)).insert_axis(Axis(1));
        let dlogits = y * &(dy - &inner);
        let mut grad = self.zeros_like();
        let width = cache.shared_in.last().expect("input").ncols();
        let mut dz = Array2::<f64>::zeros((y.nrows(), width + self.p));
        for (k, head) in self.heads.iter().enumerate() {
            let mut d = dlogits.slice(s![.., k * self.bins..(k + 1) * self.bins]).to_owned();
            for i in (0..head.len()).rev() {
                let input = &cache.head_in[k][i];
                grad.heads[k][i].w = input.t().dot(&d);
                grad.heads[k][i].b = d.sum_axis(Axis(0));
                let mut din = d.dot(&head[i].w.t());
                if i > 0 {
                    din.zip_mut_with(input, |g, &a| if a <= 0.0 { *g = 0.0 });
                    d = din;
                } else {
                    dz += &din;
                }
            }
        }
        let mut d = dz.slice(s![.., ..width]).to_owned();
        for i in (0..self.shared.len()).rev() {
            // Mask by the ReLU output of this layer.
            d.zip_mut_with(&cache.shared_in[i + 1], |g, &a| if a <= 0.0 { *g = 0.0 });
            let input = &cache.shared_in[i];
            grad.shared[i].w = input.t().dot(&d);
            grad.shared[i].b = d.sum_axis(Axis(0));
            if i > 0 {
                d = d.dot(&self.shared[i].w.t());
            }
        }
        grad
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.layers().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// Adam optimizer state over a network's parameters.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0, lr }
    }

    pub fn update(&mut self, net: &mut Network, grad: &Network) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let mut idx = 0;
        for (layer, g) in net.layers_mut().zip(grad.layers()) {
            let params = layer.w.iter_mut().chain(layer.b.iter_mut());
            for (w, &gw) in params.zip(g.w.iter().chain(g.b.iter())) {
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * gw;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * gw * gw;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                idx += 1;
            }
        }
    }
}
