//! Fully connected feed-forward network trained by plain gradient descent
//! on mean squared error.
//!
//! Each layer computes `σ(W a + b)`; `b` is called the drift. Hidden layers
//! use ReLU (`x·1{x ≥ 0}`) or the logistic sigmoid, the output layer is the
//! identity by default so that z-scored targets are reachable.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, Normalization};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a = σ(z)`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Full,
    /// Mini-batches of this size, reshuffled every epoch.
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSpec {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: BatchMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `[input, hidden..., 1]`.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub seed: u64,
    pub training: TrainingSpec,
}

impl MlpSpec {
    /// `[d, 16, 16, 1]`, ReLU hidden layers, identity output, full-batch
    /// gradient descent with rate 0.01 for 5000 epochs.
    pub fn emissions_default(input_dim: usize) -> Self {
        MlpSpec {
            layer_sizes: vec![input_dim, 16, 16, 1],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            seed: 42,
            training: TrainingSpec {
                learning_rate: 0.01,
                epochs: 5000,
                batch: BatchMode::Full,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Hyperparameter(
                "layer sizes need an input and an output layer, all non-empty".into(),
            ));
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::Hyperparameter("the output layer must have size 1".into()));
        }
        if !(self.training.learning_rate > 0.0) || !self.training.learning_rate.is_finite() {
            return Err(Error::Hyperparameter("learning rate must be positive".into()));
        }
        if self.training.epochs == 0 {
            return Err(Error::Hyperparameter("epochs must be at least 1".into()));
        }
        if self.training.batch == BatchMode::Size(0) {
            return Err(Error::Hyperparameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `outputs x inputs` weights in row-major order plus one drift per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub drift: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            drift: vec![0.0; outputs],
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.drift.len()
    }

    fn param_mut(&mut self, k: usize) -> &mut f64 {
        if k < self.weights.len() {
            &mut self.weights[k]
        } else {
            &mut self.drift[k - self.weights.len()]
        }
    }

    fn param(&self, k: usize) -> f64 {
        if k < self.weights.len() {
            self.weights[k]
        } else {
            self.drift[k - self.weights.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub spec: MlpSpec,
    /// Normalization of the design the network was trained on.
    pub scaling: Normalization,
    /// Whether the design's target was log-transformed before scaling.
    pub log_target: bool,
    /// Training MSE before the first update and after every epoch.
    pub loss_trace: Vec<f64>,
}

impl MlpModel {
    /// All weights and drifts set to zero.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Ok(MlpModel {
            layers,
            spec,
            scaling: Normalization::None,
            log_target: false,
            loss_trace: Vec::new(),
        })
    }

    /// Seeded uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`,
    /// drifts zero.
    pub fn initialized(spec: MlpSpec) -> Result<Self> {
        let mut model = MlpModel::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.spec.seed);
        for layer in &mut model.layers {
            let r = math::sqrt(6.0 / (layer.inputs + layer.outputs) as f64);
            for w in &mut layer.weights {
                *w = rng.random_range(-r..r);
            }
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.spec.output_activation
        } else {
            self.spec.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_dim(input)?;
        let mut scratch = Scratch::new(self);
        Ok(self.forward_into(input, &mut scratch))
    }

    fn check_dim(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Layout {
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(())
    }

    fn forward_into(&self, input: &[f64], s: &mut Scratch) -> f64 {
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation(l);
            let (prev, rest) = s.post.split_at_mut(l);
            let a_in: &[f64] = if l == 0 { input } else { &prev[l - 1] };
            let z = &mut s.pre[l];
            let a = &mut rest[0];
            for j in 0..layer.outputs {
                let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                let v = layer.drift[j] + row.iter().zip(a_in).map(|(w, x)| w * x).sum::<f64>();
                z[j] = v;
                a[j] = act.apply(v);
            }
        }
        s.post.last().unwrap()[0]
    }

    /// Adds `d loss / d params` to `grads`, where `output_grad` is
    /// `d loss / d output`. Expects `s` to hold this input's forward pass.
    fn backward_into(&self, input: &[f64], output_grad: f64, s: &mut Scratch, grads: &mut [DenseLayer]) {
        let last = self.layers.len() - 1;
        {
            let (z, a) = (s.pre[last][0], s.post[last][0]);
            s.delta[last][0] = output_grad * self.activation(last).derivative(z, a);
        }
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let a_in: &[f64] = if l == 0 { input } else { &s.post[l - 1] };
            let g = &mut grads[l];
            for j in 0..layer.outputs {
                let dj = s.delta[l][j];
                if dj == 0.0 {
                    continue;
                }
                g.drift[j] += dj;
                let row = &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(a_in) {
                    *gw += dj * x;
                }
            }
            if l == 0 {
                break;
            }
            let act = self.activation(l - 1);
            let (lower, upper) = s.delta.split_at_mut(l);
            let (below, here) = (&mut lower[l - 1], &upper[0]);
            for k in 0..layer.inputs {
                let mut acc = 0.0;
                for j in 0..layer.outputs {
                    acc += layer.weights[j * layer.inputs + k] * here[j];
                }
                below[k] = acc * act.derivative(s.pre[l - 1][k], s.post[l - 1][k]);
            }
        }
    }

    fn param(&self, mut k: usize) -> f64 {
        for layer in &self.layers {
            if k < layer.n_params() {
                return layer.param(k);
            }
            k -= layer.n_params();
        }
        panic!("parameter index out of range")
    }

    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if k < layer.n_params() {
                return layer.param_mut(k);
            }
            k -= layer.n_params();
        }
        panic!("parameter index out of range")
    }

    fn zero_grads(&self) -> Vec<DenseLayer> {
        self.layers
            .iter()
            .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Mean squared error over `(x, y)` on the model scale.
    pub fn mse(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let mut s = Scratch::new(self);
        let total: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let r = self.forward_into(xi, &mut s) - yi;
                r * r
            })
            .sum();
        total / x.len() as f64
    }
}

struct Scratch {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(m: &MlpModel) -> Self {
        let sizes = || m.layers.iter().map(|l| vec![0.0; l.outputs]).collect::<Vec<_>>();
        Scratch {
            pre: sizes(),
            post: sizes(),
            delta: sizes(),
        }
    }
}

pub fn forward(model: &MlpModel, input: &[f64]) -> Result<f64> {
    model.forward(input)
}

/// Trains on a normalized design; the returned model keeps the design's
/// normalization so that [`predict_mlp`] accepts raw-scale rows.
pub fn train_mlp(design: &DesignMatrix, spec: &MlpSpec) -> Result<MlpModel> {
    let mut model = train_on(design.rows(), design.targets(), spec)?;
    model.scaling = design.transform().normalization.clone();
    model.log_target = design.transform().options.log_transform;
    Ok(model)
}

/// Gradient descent on already-scaled inputs and targets.
pub fn train_on(x: &[Vec<f64>], y: &[f64], spec: &MlpSpec) -> Result<MlpModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty("network training needs rows"));
    }
    let mut model = MlpModel::initialized(spec.clone())?;
    if let Some(bad) = x.iter().find(|r| r.len() != model.input_dim()) {
        return Err(Error::Layout {
            expected: model.input_dim(),
            found: bad.len(),
        });
    }

    let n = x.len();
    let lr = spec.training.learning_rate;
    let mut s = Scratch::new(&model);
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle_rng.set_stream(1);
    let mut trace = Vec::with_capacity(spec.training.epochs + 1);

    for epoch in 0..spec.training.epochs {
        let batch = match spec.training.batch {
            BatchMode::Full => n,
            BatchMode::Size(b) => {
                order.shuffle(&mut shuffle_rng);
                trace.push(model.mse(x, y));
                b.min(n)
            }
        };
        for chunk in order.chunks(batch) {
            for g in grads.iter_mut() {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.drift.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 2.0 / chunk.len() as f64;
            let mut sse = 0.0;
            for &i in chunk {
                let r = model.forward_into(&x[i], &mut s) - y[i];
                sse += r * r;
                model.backward_into(&x[i], scale * r, &mut s, &mut grads);
            }
            if batch == n {
                trace.push(sse / n as f64);
            }
            if !trace.last().is_some_and(|l| l.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= lr * gw;
                }
                for (b, gb) in layer.drift.iter_mut().zip(&g.drift) {
                    *b -= lr * gb;
                }
            }
        }
    }
    let final_loss = model.mse(x, y);
    trace.push(final_loss);
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: spec.training.epochs,
        });
    }
    model.loss_trace = trace;
    Ok(model)
}

/// Largest relative disagreement between backpropagated gradients of
/// `0.5 (forward(x) - y)^2` and central finite differences (step 1e-5).
pub fn gradient_check(model: &MlpModel, input: &[f64], target: f64) -> f64 {
    const STEP: f64 = 1e-5;
    let mut s = Scratch::new(model);
    let out = model.forward_into(input, &mut s);
    let mut grads = model.zero_grads();
    model.backward_into(input, out - target, &mut s, &mut grads);
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.drift).copied())
        .collect();

    let mut probe = model.clone();
    let loss = |m: &MlpModel, s: &mut Scratch| {
        let r = m.forward_into(input, s) - target;
        0.5 * r * r
    };
    let mut worst: f64 = 0.0;
    for (k, ga) in analytic.into_iter().enumerate() {
        let orig = model.param(k);
        *probe.param_mut(k) = orig + STEP;
        let up = loss(&probe, &mut s);
        *probe.param_mut(k) = orig - STEP;
        let down = loss(&probe, &mut s);
        *probe.param_mut(k) = orig;
        let gn = (up - down) / (2.0 * STEP);
        let denom = ga.abs().max(gn.abs()).max(1e-8);
        worst = worst.max((ga - gn).abs() / denom);
    }
    worst
}

/// Raw-scale design rows in, tons out: normalize with the stored
/// parameters, run the network, undo the target scaling.
pub fn predict_mlp(model: &MlpModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut s = Scratch::new(model);
    rows.iter()
        .map(|r| {
            model.check_dim(r)?;
            let mut x = r.clone();
            model.scaling.apply_row(&mut x);
            let z = model.forward_into(&x, &mut s);
            let y = match model.scaling.target() {
                Some(t) => t.invert(z),
                None => z,
            };
            Ok(if model.log_target { math::exp(y) } else { y })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize], hidden: Activation, output: Activation) -> MlpSpec {
        MlpSpec {
            layer_sizes: sizes.to_vec(),
            hidden_activation: hidden,
            output_activation: output,
            seed: 1,
            training: TrainingSpec {
                learning_rate: 0.01,
                epochs: 10,
                batch: BatchMode::Full,
            },
        }
    }

    #[test]
    fn activations_match_definitions() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Identity.apply(-3.5), -3.5);
    }

    #[test]
    fn zero_sigmoid_net_outputs_half() {
        let m = MlpModel::zeros(spec(&[1, 3, 1], Activation::Sigmoid, Activation::Sigmoid)).unwrap();
        assert_eq!(m.forward(&[0.7]).unwrap(), 0.5);
    }

    #[test]
    fn hand_built_one_three_one() {
        let mut m = MlpModel::zeros(spec(&[1, 3, 1], Activation::Sigmoid, Activation::Identity)).unwrap();
        m.layers[0].weights = vec![1.0, -1.0, 2.0];
        m.layers[1].weights = vec![1.0, 1.0, 1.0];
        assert_eq!(m.forward(&[0.0]).unwrap(), 1.5);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(&[2, 3, 2], Activation::Relu, Activation::Identity);
        assert!(s.validate().is_err());
        s.layer_sizes = vec![2, 1];
        s.training.learning_rate = 0.0;
        assert!(s.validate().is_err());
        s.training.learning_rate = 0.1;
        s.training.epochs = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn wrong_input_dimension() {
        let m = MlpModel::zeros(spec(&[2, 3, 1], Activation::Relu, Activation::Identity)).unwrap();
        assert_eq!(
            m.forward(&[1.0]).unwrap_err(),
            Error::Layout { expected: 2, found: 1 }
        );
        assert!(predict_mlp(&m, &[vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn initialization_respects_fan_bounds() {
        let m = MlpModel::initialized(spec(&[4, 8, 1], Activation::Relu, Activation::Identity)).unwrap();
        let r0 = math::sqrt(6.0 / 12.0);
        assert!(m.layers[0].weights.iter().all(|w| w.abs() < r0));
        assert!(m.layers.iter().all(|l| l.drift.iter().all(|b| *b == 0.0)));
        assert_eq!(m.n_params(), 4 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn trace_has_initial_and_per_epoch_losses() {
        let x: Vec<Vec<f64>> = (0..8).map(|k| vec![f64::from(k) / 8.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let m = train_on(&x, &y, &spec(&[1, 4, 1], Activation::Relu, Activation::Identity)).unwrap();
        assert_eq!(m.loss_trace.len(), 11);
        assert!((m.loss_trace[10] - m.mse(&x, &y)).abs() < 1e-15);
    }

    #[test]
    fn minibatch_mode_trains() {
        let x: Vec<Vec<f64>> = (0..20).map(|k| vec![f64::from(k) / 10.0 - 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let mut s = spec(&[1, 8, 1], Activation::Relu, Activation::Identity);
        s.training.batch = BatchMode::Size(5);
        s.training.epochs = 200;
        let m = train_on(&x, &y, &s).unwrap();
        assert_eq!(m.loss_trace.len(), 201);
        assert!(m.loss_trace[200] < m.loss_trace[0]);
    }
}
