//! A dense ReLU network with a softmax cross-entropy head.
//!
//! Matrix products are plain loops in a fixed summation order, so results
//! are bit-reproducible for a given seed on any target.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tensor_store::{Checkpoint, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width (class count).
    pub layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], classes: usize) -> Self {
        let mut layer_sizes = vec![input];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(classes);
        MlpSpec { layer_sizes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {:?}", self.layer_sizes)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `[n_out, n_in]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weight: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// `out[b, o] = bias[o] + sum_i x[b, i] * w[o, i]`
    fn apply(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut out = vec![0.0; batch * self.n_out];
        for b in 0..batch {
            let xb = &x[b * self.n_in..(b + 1) * self.n_in];
            let ob = &mut out[b * self.n_out..(b + 1) * self.n_out];
            for (o, out_v) in ob.iter_mut().enumerate() {
                let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
                let mut acc = self.bias[o];
                for (w, xv) in row.iter().zip(xb) {
                    acc += w * xv;
                }
                *out_v = acc;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    /// Bumped on every parameter mutation; ties caches to parameters.
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations saved by [`Mlp::forward`] for [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    version: u64,
    /// Input to each layer (post-ReLU for hidden layers).
    inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

/// Gradients with the same layout as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

pub fn weight_name(layer: usize) -> String {
    format!("layers.{layer}.weight")
}

pub fn bias_name(layer: usize) -> String {
    format!("layers.{layer}.bias")
}

fn layers_to_checkpoint(layers: &[Dense]) -> Checkpoint {
    let mut cp = Checkpoint::new();
    for (i, l) in layers.iter().enumerate() {
        cp.push(Tensor::from_f64(weight_name(i), vec![l.n_out, l.n_in], l.weight.clone()).expect("shape matches"))
            .expect("unique names");
        cp.push(Tensor::from_f64(bias_name(i), vec![l.n_out], l.bias.clone()).expect("shape matches"))
            .expect("unique names");
    }
    cp
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for
    /// weights and biases.
    pub fn init(spec: &MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = 1.0 / (n_in as f64).sqrt();
                let dist = Uniform::new(-bound, bound).expect("bound > 0");
                let mut rng = substream(seed, &weight_name(i));
                let mut l = Dense::zeros(n_in, n_out);
                l.weight.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
                l.bias.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
                l
            })
            .collect();
        Ok(Mlp { layers, version: 0 })
    }

    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layer_sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, version: 0 })
    }

    pub fn spec(&self) -> MlpSpec {
        let mut sizes = vec![self.layers[0].n_in];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        MlpSpec { layer_sizes: sizes }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Invalid(format!(
                "batch of {} values is not {} x {}",
                x.len(),
                batch,
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&h, batch);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        let cache = ForwardCache {
            batch,
            version: self.version,
            inputs,
            logits: h.clone(),
        };
        Ok((h, cache))
    }

    /// Class predictions only.
    pub fn predict(&self, x: &[f64], batch: usize) -> Result<Vec<usize>> {
        let (logits, _) = self.forward(x, batch)?;
        let c = self.n_classes();
        Ok(logits.chunks(c).map(argmax).collect())
    }

    /// Gradient of the mean cross-entropy over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::Invalid(
                "stale forward cache: parameters changed since forward".into(),
            ));
        }
        let batch = cache.batch;
        if labels.len() != batch {
            return Err(Error::Invalid(format!("{} labels for batch of {batch}", labels.len())));
        }
        let c = self.n_classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::Invalid(format!("label {bad} outside [0, {c})")));
        }

        let mut delta = softmax_rows(&cache.logits, c);
        for (b, &y) in labels.iter().enumerate() {
            delta[b * c + y] -= 1.0;
        }
        let inv = 1.0 / batch as f64;
        delta.iter_mut().for_each(|d| *d *= inv);

        let mut grads: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.n_in, l.n_out)).collect();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.inputs[i];
            let g = &mut grads[i];
            for b in 0..batch {
                let db = &delta[b * layer.n_out..(b + 1) * layer.n_out];
                let xb = &input[b * layer.n_in..(b + 1) * layer.n_in];
                for (o, &d) in db.iter().enumerate() {
                    g.bias[o] += d;
                    if d != 0.0 {
                        let row = &mut g.weight[o * layer.n_in..(o + 1) * layer.n_in];
                        for (gw, xv) in row.iter_mut().zip(xb) {
                            *gw += d * xv;
                        }
                    }
                }
            }
            if i == 0 {
                break;
            }
            // Propagate through the weights, then through the ReLU that
            // produced `input` (zero where the activation was clipped).
            let mut prev = vec![0.0; batch * layer.n_in];
            for b in 0..batch {
                let db = &delta[b * layer.n_out..(b + 1) * layer.n_out];
                let pb = &mut prev[b * layer.n_in..(b + 1) * layer.n_in];
                for (o, &d) in db.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weight[o * layer.n_in..(o + 1) * layer.n_in];
                    for (p, w) in pb.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(Gradients { layers: grads })
    }

    /// Plain SGD update.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers_mut().iter_mut().zip(&grads.layers) {
            l.weight.iter_mut().zip(&g.weight).for_each(|(w, gw)| *w -= lr * gw);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, gb)| *b -= lr * gb);
        }
    }

    /// Exports parameters as F64 tensors `layers.{i}.weight` (`[out, in]`)
    /// and `layers.{i}.bias`.
    pub fn to_checkpoint(&self) -> Checkpoint {
        layers_to_checkpoint(&self.layers)
    }

    /// Rebuilds a model from [`Mlp::to_checkpoint`] output.
    pub fn from_checkpoint(spec: &MlpSpec, cp: &Checkpoint) -> Result<Self> {
        let mut model = Mlp::zeros(spec)?;
        for (i, l) in model.layers.iter_mut().enumerate() {
            let w = cp
                .get(&weight_name(i))
                .ok_or_else(|| Error::tensor(weight_name(i), "missing from checkpoint"))?;
            let b = cp
                .get(&bias_name(i))
                .ok_or_else(|| Error::tensor(bias_name(i), "missing from checkpoint"))?;
            if w.shape() != [l.n_out, l.n_in] || b.shape() != [l.n_out] {
                return Err(Error::tensor(w.name(), "shape does not match the model spec"));
            }
            l.weight = w.values();
            l.bias = b.values();
        }
        Ok(model)
    }
}

impl Gradients {
    pub fn to_checkpoint(&self) -> Checkpoint {
        layers_to_checkpoint(&self.layers)
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn softmax_rows(logits: &[f64], c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / sum));
    }
    out
}

/// Mean softmax cross-entropy of `logits` (`[batch, c]`) against `labels`.
pub fn cross_entropy(logits: &[f64], labels: &[usize], c: usize) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.chunks(c).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// Random `[batch, d]` inputs in `[-1, 1)` for tests and benches.
pub fn random_batch<R: Rng>(rng: &mut R, batch: usize, d: usize) -> Vec<f64> {
    (0..batch * d).map(|_| rng.random_range(-1.0..1.0)).collect()
}
