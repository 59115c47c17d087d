//! Dense symmetric autoencoders.
//!
//! An [`Autoencoder`] maps `ℝᵈ → ℝᵈ` through a bottleneck of width `u < d`.
//! Layers up to and including the bottleneck form the encoder, the rest the
//! decoder. The reconstruction error of a point is the Euclidean norm of
//! `forward(p) - p`.

mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use train::{train, Optimizer, TrainConfig};

/// `N × d` row-major matrix; each row is one point.
pub type DataMatrix = Array2<f64>;

/// Rows scored in one pass by the batched evaluators.
const EVAL_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    GlorotUniform,
    HeUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Act {
    Linear,
    Tanh,
    Relu,
    Sigmoid,
}

impl From<HiddenActivation> for Act {
    fn from(a: HiddenActivation) -> Self {
        match a {
            HiddenActivation::Tanh => Act::Tanh,
            HiddenActivation::Relu => Act::Relu,
            HiddenActivation::Sigmoid => Act::Sigmoid,
        }
    }
}

impl From<OutputActivation> for Act {
    fn from(a: OutputActivation) -> Self {
        match a {
            OutputActivation::Linear => Act::Linear,
            OutputActivation::Sigmoid => Act::Sigmoid,
        }
    }
}

impl Act {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Act::Linear => {}
            Act::Tanh => z.mapv_inplace(f64::tanh),
            Act::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Act::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// Multiplies `delta` by the activation derivative, expressed through the
    /// activation output `a`.
    fn backprop(self, delta: &mut Array2<f64>, a: &Array2<f64>) {
        match self {
            Act::Linear => {}
            Act::Tanh => Zip::from(delta).and(a).for_each(|d, &a| *d *= 1.0 - a * a),
            Act::Relu => Zip::from(delta).and(a).for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            }),
            Act::Sigmoid => Zip::from(delta).and(a).for_each(|d, &a| *d *= a * (1.0 - a)),
        }
    }
}

/// Architecture and regularization of a dense autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNetSpec {
    /// Widths of every layer, input and output included. Must start and end
    /// with the ambient dimension `d`; the smallest interior width is the
    /// latent dimension.
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    /// Weight-decay strength. Zero means unregularized.
    pub l2_lambda: f64,
    pub init: Init,
    pub seed: u64,
}

impl DenseNetSpec {
    /// Mirrored architecture `d, hidden.., latent, ..hidden, d`.
    pub fn symmetric(dim: usize, hidden: &[usize], latent: usize) -> Self {
        let mut layer_widths = Vec::with_capacity(2 * hidden.len() + 3);
        layer_widths.push(dim);
        layer_widths.extend_from_slice(hidden);
        layer_widths.push(latent);
        layer_widths.extend(hidden.iter().rev());
        layer_widths.push(dim);
        DenseNetSpec {
            layer_widths,
            hidden_activation: HiddenActivation::Tanh,
            output_activation: OutputActivation::Linear,
            l2_lambda: 0.0,
            init: Init::GlorotUniform,
            seed: 0,
        }
    }

    pub fn with_l2(mut self, l2_lambda: f64) -> Self {
        self.l2_lambda = l2_lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.layer_widths;
        if w.len() < 3 {
            return Err(Error::config(format!(
                "an autoencoder needs at least 3 layer widths, got {}",
                w.len()
            )));
        }
        if w.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if w[0] != w[w.len() - 1] {
            return Err(Error::config(format!(
                "input width {} differs from output width {}",
                w[0],
                w[w.len() - 1]
            )));
        }
        if self.latent_dim() >= self.input_dim() {
            return Err(Error::config(format!(
                "latent dimension {} must be smaller than the ambient dimension {}",
                self.latent_dim(),
                self.input_dim()
            )));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::config(format!(
                "l2_lambda must be a finite non-negative number, got {}",
                self.l2_lambda
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn latent_dim(&self) -> usize {
        let w = &self.layer_widths;
        w[1..w.len() - 1].iter().copied().min().unwrap_or(0)
    }

    /// Index of the layer whose output is the code.
    fn latent_layer(&self) -> usize {
        let w = &self.layer_widths;
        let u = self.latent_dim();
        (1..w.len() - 1).find(|&i| w[i] == u).expect("validated spec") - 1
    }

    fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    fn activation(&self, layer: usize) -> Act {
        if layer + 1 == self.n_layers() {
            self.output_activation.into()
        } else {
            self.hidden_activation.into()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out_width × in_width`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Weights and biases of every layer. Also used as the container for
/// gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    pub fn zeros_like(other: &ModelParams) -> Self {
        ModelParams {
            layers: other
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn weight_sq_sum(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Inverse of [`ModelParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
    }

    fn check_shapes(&self, spec: &DenseNetSpec) -> Result<()> {
        let w = &spec.layer_widths;
        if self.layers.len() != w.len() - 1 {
            return Err(Error::shape(
                format!("{} layers", w.len() - 1),
                format!("{} layers", self.layers.len()),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.dim() != (w[i + 1], w[i]) || l.bias.len() != w[i + 1] {
                return Err(Error::shape(
                    format!("layer {i} weights {}x{}", w[i + 1], w[i]),
                    format!("{:?}, bias {}", l.weights.dim(), l.bias.len()),
                ));
            }
        }
        Ok(())
    }
}

/// Draws weights from the spec's init scheme (seeded by `spec.seed`); biases
/// start at zero.
pub fn init_params(spec: &DenseNetSpec) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let layers = spec
        .layer_widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = match spec.init {
                Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
            };
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            Layer {
                weights: Array2::from_shape_fn((fan_out, fan_in), |_| rng.sample(dist)),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(ModelParams { layers })
}

/// A dense autoencoder: its spec together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub spec: DenseNetSpec,
    pub params: ModelParams,
}

impl Autoencoder {
    pub fn new(spec: DenseNetSpec) -> Result<Self> {
        let params = init_params(&spec)?;
        Ok(Autoencoder { spec, params })
    }

    pub fn from_params(spec: DenseNetSpec, params: ModelParams) -> Result<Self> {
        spec.validate()?;
        params.check_shapes(&spec)?;
        Ok(Autoencoder { spec, params })
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        let d = self.spec.input_dim();
        if batch.ncols() != d {
            return Err(Error::shape(format!("{d} columns"), format!("{} columns", batch.ncols())));
        }
        Ok(())
    }

    fn run_layers(&self, input: ArrayView2<f64>, layers: std::ops::Range<usize>) -> Array2<f64> {
        let mut a = input.to_owned();
        for i in layers {
            let l = &self.params.layers[i];
            let mut z = a.dot(&l.weights.t()) + &l.bias;
            self.spec.activation(i).apply(&mut z);
            a = z;
        }
        a
    }

    /// Output of every layer, input included.
    fn activations(&self, batch: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.params.layers.len() + 1);
        acts.push(batch.to_owned());
        for (i, l) in self.params.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.weights.t()) + &l.bias;
            self.spec.activation(i).apply(&mut z);
            acts.push(z);
        }
        acts
    }

    /// Reconstruction `au(batch)`, one row per input row.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<DataMatrix> {
        self.check_input(&batch)?;
        Ok(self.run_layers(batch, 0..self.params.layers.len()))
    }

    /// Latent codes of `batch`.
    pub fn encode(&self, batch: ArrayView2<f64>) -> Result<DataMatrix> {
        self.check_input(&batch)?;
        Ok(self.run_layers(batch, 0..self.spec.latent_layer() + 1))
    }

    /// Decoder image of latent `codes`.
    pub fn decode(&self, codes: ArrayView2<f64>) -> Result<DataMatrix> {
        let u = self.spec.latent_dim();
        if codes.ncols() != u {
            return Err(Error::shape(format!("{u} latent columns"), codes.ncols()));
        }
        Ok(self.run_layers(codes, self.spec.latent_layer() + 1..self.params.layers.len()))
    }

    /// Mean squared reconstruction error: mean over rows of the mean over
    /// coordinates. No penalty term.
    pub fn mse(&self, data: ArrayView2<f64>) -> Result<f64> {
        self.check_input(&data)?;
        let n = data.nrows() as f64 * data.ncols() as f64;
        let mut total = 0.0;
        for chunk in data.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
            let out = self.run_layers(chunk, 0..self.params.layers.len());
            total += Zip::from(&out).and(&chunk).fold(0.0, |acc, &o, &x| acc + (o - x) * (o - x));
        }
        Ok(total / n)
    }

    /// Training objective: `mse + l2_lambda · Σ w²` (biases unpenalized).
    pub fn loss(&self, batch: ArrayView2<f64>) -> Result<f64> {
        Ok(self.mse(batch)? + self.spec.l2_lambda * self.params.weight_sq_sum())
    }

    /// Analytic gradient of [`Autoencoder::loss`] on `batch`.
    pub fn gradients(&self, batch: ArrayView2<f64>) -> Result<ModelParams> {
        self.check_input(&batch)?;
        Ok(self.loss_and_gradients(batch).1)
    }

    pub(crate) fn loss_and_gradients(&self, batch: ArrayView2<f64>) -> (f64, ModelParams) {
        let acts = self.activations(batch);
        let scale = 1.0 / (batch.nrows() as f64 * batch.ncols() as f64);
        let lambda = self.spec.l2_lambda;

        let mut delta = acts.last().unwrap() - &batch;
        let sq: f64 = delta.iter().map(|v| v * v).sum();
        let loss = sq * scale + lambda * self.params.weight_sq_sum();
        delta *= 2.0 * scale;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.params.layers.len());
        for i in (0..self.params.layers.len()).rev() {
            let layer = &self.params.layers[i];
            self.spec.activation(i).backprop(&mut delta, &acts[i + 1]);
            let mut gw = delta.t().dot(&acts[i]);
            if lambda != 0.0 {
                gw.scaled_add(2.0 * lambda, &layer.weights);
            }
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&layer.weights);
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        (loss, ModelParams { layers: grads })
    }

    /// Per-row Euclidean reconstruction error `‖au(p) − p‖₂`.
    pub fn reconstruction_errors(&self, data: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_input(&data)?;
        let mut out = Vec::with_capacity(data.nrows());
        for chunk in data.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
            let recon = self.run_layers(chunk, 0..self.params.layers.len());
            for (r, x) in recon.outer_iter().zip(chunk.outer_iter()) {
                let sq: f64 = r.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(sq.sqrt());
            }
        }
        Ok(out)
    }
}
