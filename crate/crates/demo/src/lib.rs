//! WebAssembly bindings for the sine demo page in `www/`.
//!
//! Every export returns JSON so the page needs no generated type glue.

use potatoes::data::SineParams;
use potatoes::harness::{sine_demo, DatasetSource, EnsembleConfig, ExperimentConfig, ModelConfig, Regularization};
use potatoes::metrics::{LabeledScores, Metric};
use potatoes::neural::Optimizer;
use potatoes::TrainConfig;
use wasm_bindgen::prelude::*;

fn config(k: usize, l2_lambda: f64, seed: u64, epochs: usize, n_inliers: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: "sine".into(),
        seed,
        replicates: 1,
        methods: vec!["AE".parse().unwrap(), "POT".parse().unwrap()],
        metrics: vec![Metric::PrecisionAt(3)],
        test_metrics: Vec::new(),
        comparisons: Vec::new(),
        output_dir: None,
        workers: Some(1),
        dataset: DatasetSource::Sine(SineParams { n_inliers, ..SineParams::default() }),
        model: ModelConfig {
            hidden: vec![32, 32],
            latent: 1,
            hidden_activation: potatoes::neural::HiddenActivation::Tanh,
            output_activation: potatoes::neural::OutputActivation::Linear,
            init: potatoes::neural::Init::GlorotUniform,
        },
        ensemble: EnsembleConfig { k: Some(k), cluster_cap: None, ensemble_size: None },
        regularization: Some(Regularization::Fixed { l2_lambda }),
        train: TrainConfig {
            epochs,
            batch_size: 32,
            optimizer: Optimizer::Adam { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            shuffle_seed: 0,
            target_train_mse: None,
        },
        train_overrides: Default::default(),
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Trains the regularized AE, AE_r0 and a `k`-part POTATOES model on one sine
/// dataset and returns every plotted point, panel by panel.
#[wasm_bindgen]
pub fn sine_panels(k: usize, l2_lambda: f64, seed: u64, epochs: usize, n_inliers: usize) -> Result<String, JsError> {
    let demo = sine_demo(&config(k, l2_lambda, seed, epochs, n_inliers)).map_err(js_err)?;
    serde_json::to_string(&demo).map_err(js_err)
}

/// Ranking metrics of `scores` against 0/1 `labels`; undefined metrics are null.
#[wasm_bindgen]
pub fn score_metrics(scores: Vec<f64>, labels: Vec<u8>, k: usize) -> Result<String, JsError> {
    let ls = LabeledScores::new(scores, labels).map_err(js_err)?;
    let mut out = serde_json::Map::new();
    for m in [Metric::RocAuc, Metric::AveragePrecision, Metric::OptimalF1, Metric::PrecisionAt(k.max(1))] {
        out.insert(m.to_string(), m.evaluate(&ls).ok().into());
    }
    Ok(serde_json::Value::Object(out).to_string())
}
