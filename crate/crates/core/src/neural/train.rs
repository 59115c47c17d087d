use ndarray::{ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Autoencoder, DenseNetSpec, ModelParams};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Optimizer {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Optimizer::Sgd { lr } => lr > 0.0 && lr.is_finite(),
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                lr > 0.0
                    && lr.is_finite()
                    && beta1 > 0.0
                    && beta1 < 1.0
                    && beta2 > 0.0
                    && beta2 < 1.0
                    && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub shuffle_seed: u64,
    /// Stop once the full-data training MSE drops below this value.
    #[serde(default)]
    pub target_train_mse: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if let Some(t) = self.target_train_mse {
            if !(t >= 0.0) {
                return Err(Error::config("target_train_mse must be non-negative"));
            }
        }
        self.optimizer.validate()
    }

    pub fn with_shuffle_seed(mut self, seed: u64) -> Self {
        self.shuffle_seed = seed;
        self
    }
}

enum State {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, step: i32, m: ModelParams, v: ModelParams },
}

impl State {
    fn new(opt: Optimizer, params: &ModelParams) -> Self {
        match opt {
            Optimizer::Sgd { lr } => State::Sgd { lr },
            Optimizer::Adam { lr, beta1, beta2, eps } => State::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step: 0,
                m: ModelParams::zeros_like(params),
                v: ModelParams::zeros_like(params),
            },
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        match self {
            State::Sgd { lr } => {
                for (p, g) in params.layers.iter_mut().zip(&grads.layers) {
                    p.weights.scaled_add(-*lr, &g.weights);
                    p.bias.scaled_add(-*lr, &g.bias);
                }
            }
            State::Adam { lr, beta1, beta2, eps, step, m, v } => {
                *step += 1;
                let (b1, b2, eps) = (*beta1, *beta2, *eps);
                let c1 = 1.0 - b1.powi(*step);
                let c2 = 1.0 - b2.powi(*step);
                let lr = *lr;
                let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                for (((p, g), m), v) in
                    params.layers.iter_mut().zip(&grads.layers).zip(&mut m.layers).zip(&mut v.layers)
                {
                    Zip::from(&mut p.weights)
                        .and(&g.weights)
                        .and(&mut m.weights)
                        .and(&mut v.weights)
                        .for_each(update);
                    Zip::from(&mut p.bias)
                        .and(&g.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .for_each(update);
                }
            }
        }
    }
}

/// Mini-batch training from freshly initialized parameters.
///
/// Rows are reshuffled every epoch by a generator seeded with
/// `cfg.shuffle_seed`; the result is a pure function of
/// `(spec, cfg, data)`. Returns [`Error::Diverged`] (1-based epoch) as soon as
/// a batch loss or a parameter stops being finite.
pub fn train(spec: &DenseNetSpec, cfg: &TrainConfig, data: ArrayView2<f64>) -> Result<Autoencoder> {
    cfg.validate()?;
    let mut model = Autoencoder::new(spec.clone())?;
    model.check_input(&data)?;
    let n = data.nrows();
    if n == 0 {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if cfg.epochs == 0 {
        return Ok(model);
    }

    let mut state = State::new(cfg.optimizer, &model.params);
    let mut rng = seed::rng(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let batch = data.select(Axis(0), idx);
            let (loss, grads) = model.loss_and_gradients(batch.view());
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, member: None });
            }
            state.step(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::Diverged { epoch, member: None });
        }
        if let Some(target) = cfg.target_train_mse {
            let mse = model.mse(data)?;
            if !mse.is_finite() {
                return Err(Error::Diverged { epoch, member: None });
            }
            if mse < target {
                break;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, HiddenActivation};
    use ndarray::Array2;

    fn sine(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 2), |(i, c)| {
            let x = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            if c == 0 {
                x
            } else {
                x.sin()
            }
        })
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            optimizer: Optimizer::Adam { lr: 5e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            shuffle_seed: 3,
            target_train_mse: None,
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let spec = DenseNetSpec::symmetric(2, &[8], 1).with_seed(4);
        let m = train(&spec, &cfg(0), sine(20).view()).unwrap();
        assert_eq!(m.params, init_params(&spec).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let spec = DenseNetSpec::symmetric(2, &[8], 1).with_seed(4);
        let a = train(&spec, &cfg(5), sine(40).view()).unwrap();
        let b = train(&spec, &cfg(5), sine(40).view()).unwrap();
        assert_eq!(a, b);
        let c = train(&spec, &cfg(5).with_shuffle_seed(9), sine(40).view()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overfits_sine_curve() {
        let spec = DenseNetSpec::symmetric(2, &[32, 32], 1).with_seed(1);
        let data = sine(200);
        let mut c = cfg(600);
        c.optimizer = Optimizer::Adam { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        c.batch_size = 32;
        let m = train(&spec, &c, data.view()).unwrap();
        let mse = m.mse(data.view()).unwrap();
        assert!(mse < 1e-2, "train mse {mse}");
    }

    #[test]
    fn target_mse_stops_early() {
        let spec = DenseNetSpec::symmetric(2, &[16], 1).with_seed(1);
        let data = sine(50);
        let mut c = cfg(10_000);
        c.target_train_mse = Some(0.5);
        let early = train(&spec, &c, data.view()).unwrap();
        assert!(early.mse(data.view()).unwrap() < 0.5);
        // Any finite loss beats an infinite target, so training stops after one epoch.
        c.target_train_mse = Some(f64::INFINITY);
        let one = train(&spec, &c, data.view()).unwrap();
        assert_eq!(one, train(&spec, &cfg(1), data.view()).unwrap());
    }

    #[test]
    fn plain_gradient_descent_is_monotone() {
        let mut spec = DenseNetSpec::symmetric(2, &[6], 1).with_seed(2);
        spec.hidden_activation = HiddenActivation::Sigmoid;
        let data = sine(30);
        let mut losses = Vec::new();
        let mut model = Autoencoder::new(spec).unwrap();
        let mut state = State::new(Optimizer::Sgd { lr: 1e-2 }, &model.params);
        for _ in 0..=10 {
            let (loss, g) = model.loss_and_gradients(data.view());
            losses.push(loss);
            state.step(&mut model.params, &g);
        }
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    }

    #[test]
    fn divergence_is_reported() {
        let spec = DenseNetSpec::symmetric(2, &[8], 1).with_seed(4);
        let mut c = cfg(5);
        c.optimizer = Optimizer::Sgd { lr: 1e200 };
        let data = sine(40) * 1e3;
        match train(&spec, &c, data.view()) {
            Err(Error::Diverged { epoch, member: None }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_optimizer_rejected() {
        let spec = DenseNetSpec::symmetric(2, &[8], 1);
        let mut c = cfg(1);
        c.optimizer = Optimizer::Adam { lr: 1e-3, beta1: 1.0, beta2: 0.999, eps: 1e-8 };
        assert!(matches!(train(&spec, &c, sine(4).view()), Err(Error::Config(_))));
        c.optimizer = Optimizer::Sgd { lr: 0.0 };
        assert!(matches!(train(&spec, &c, sine(4).view()), Err(Error::Config(_))));
    }
}
