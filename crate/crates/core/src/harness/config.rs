use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SineParams;
use crate::ensemble::{ClusterCap, EnsembleShape, Method};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::neural::{HiddenActivation, Init, Optimizer, OutputActivation};
use crate::{DenseNetSpec, TrainConfig};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "POTATOES_WORKERS";

/// One experiment: a replicated dataset group, the methods to compare and
/// how to train them. Read from TOML with [`ExperimentConfig::load`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Group name used in reports and tables.
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    /// Metrics on which the configured method pairs are t-tested.
    #[serde(default = "default_test_metrics")]
    pub test_metrics: Vec<Metric>,
    /// Pairs `[a, b]`; differences are `a − b` per replicate.
    #[serde(default)]
    pub comparisons: Vec<(Method, Method)>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Falls back to `POTATOES_WORKERS`, then to the number of CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
    pub dataset: DatasetSource,
    pub model: ModelConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub regularization: Option<Regularization>,
    pub train: TrainConfig,
    /// Per-method replacements for fields of `train`.
    #[serde(default)]
    pub train_overrides: BTreeMap<Method, TrainOverride>,
}

fn default_test_metrics() -> Vec<Metric> {
    vec![Metric::AveragePrecision]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Images of one class as inliers, other classes as sampled outliers.
    Idx(IdxSource),
    /// Replicate `r` is an independent sine dataset; `seed` is ignored.
    Sine(SineParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub inlier_class: u8,
    #[serde(default = "default_outlier_ratio")]
    pub outlier_ratio: f64,
    #[serde(default)]
    pub inlier_cap: Option<usize>,
    #[serde(default = "one")]
    pub downsample: usize,
}

fn default_outlier_ratio() -> f64 {
    0.005
}

fn one() -> usize {
    1
}

/// Mirrored dense architecture `d, hidden.., latent, ..hidden, d`; `d` comes
/// from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub latent: usize,
    #[serde(default = "default_hidden_activation")]
    pub hidden_activation: HiddenActivation,
    #[serde(default = "default_output_activation")]
    pub output_activation: OutputActivation,
    #[serde(default = "default_init")]
    pub init: Init,
}

fn default_hidden_activation() -> HiddenActivation {
    HiddenActivation::Tanh
}

fn default_output_activation() -> OutputActivation {
    OutputActivation::Linear
}

fn default_init() -> Init {
    Init::GlorotUniform
}

impl ModelConfig {
    /// Unregularized spec for `dim`-dimensional data.
    pub fn spec(&self, dim: usize) -> DenseNetSpec {
        let mut spec = DenseNetSpec::symmetric(dim, &self.hidden, self.latent);
        spec.hidden_activation = self.hidden_activation;
        spec.output_activation = self.output_activation;
        spec.init = self.init;
        spec
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// POTATOES parts; give either this or `cluster_cap`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub cluster_cap: Option<usize>,
    /// Members of OF_AEE and AEE, POTATOES models in PE.
    #[serde(default)]
    pub ensemble_size: Option<usize>,
}

/// Weight decay of the regularized methods (AE, AEE): fixed, or tuned with
/// ground-truth labels on one replicate and shared by all of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Regularization {
    Fixed {
        l2_lambda: f64,
    },
    Tuned {
        grid: Vec<f64>,
        #[serde(default = "default_tune_metric")]
        metric: Metric,
        #[serde(default)]
        replicate: usize,
    },
}

fn default_tune_metric() -> Metric {
    Metric::AveragePrecision
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverride {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub optimizer: Option<Optimizer>,
    pub target_train_mse: Option<f64>,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        if let DatasetSource::Idx(src) = &mut cfg.dataset {
            src.images = base.join(&src.images);
            src.labels = base.join(&src.labels);
        }
        if let Some(dir) = &cfg.output_dir {
            cfg.output_dir = Some(base.join(dir));
        }
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let cfg = Self::from_toml(&text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods configured"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::config(format!("method {m} listed twice")));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::config("no metrics configured"));
        }
        if let Some(m) = self.test_metrics.iter().find(|m| !self.metrics.contains(m)) {
            return Err(Error::config(format!("test metric {m} is not among the metrics")));
        }
        for &(a, b) in &self.comparisons {
            if a == b || !self.methods.contains(&a) || !self.methods.contains(&b) {
                return Err(Error::config(format!("invalid comparison {a}-{b}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be positive"));
        }
        if self.model.latent == 0 || self.model.hidden.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        self.train.validate()?;
        for m in self.train_overrides.keys() {
            self.train_for(*m).validate()?;
        }
        self.shape()?;
        self.check_regularization()?;
        if let DatasetSource::Idx(src) = &self.dataset {
            for p in [&src.images, &src.labels] {
                if !p.is_file() {
                    return Err(Error::config(format!("dataset file {} not found", p.display())));
                }
            }
        }
        Ok(())
    }

    fn uses(&self, methods: &[Method]) -> bool {
        self.methods.iter().any(|m| methods.contains(m))
    }

    /// `k` and ensemble size; unused entries are reported as 0.
    pub fn shape(&self) -> Result<EnsembleShape> {
        let e = &self.ensemble;
        let k = match (e.k, e.cluster_cap) {
            (Some(_), Some(_)) => return Err(Error::config("give either k or cluster_cap, not both")),
            (Some(k), None) => k,
            (None, Some(c)) => ClusterCap::new(c)?.k(),
            (None, None) => 0,
        };
        if self.uses(&[Method::Pot, Method::Pe]) && k < 2 {
            return Err(Error::config("POT and PE need k >= 2 (or cluster_cap >= 1)"));
        }
        let ensemble_size = e.ensemble_size.unwrap_or(0);
        if self.uses(&[Method::OfAee, Method::Aee, Method::Pe]) && ensemble_size == 0 {
            return Err(Error::config("OF_AEE, AEE and PE need ensemble_size >= 1"));
        }
        Ok(EnsembleShape { k, ensemble_size })
    }

    fn check_regularization(&self) -> Result<()> {
        let positive = |l: f64| l > 0.0 && l.is_finite();
        match &self.regularization {
            None if self.uses(&[Method::Ae, Method::Aee]) => {
                Err(Error::config("AE and AEE need a [regularization] section"))
            }
            None => Ok(()),
            Some(Regularization::Fixed { l2_lambda }) if !positive(*l2_lambda) => {
                Err(Error::config("regularized methods need l2_lambda > 0"))
            }
            Some(Regularization::Fixed { .. }) => Ok(()),
            Some(Regularization::Tuned { grid, replicate, .. }) => {
                if grid.is_empty() || !grid.iter().all(|&l| positive(l)) {
                    Err(Error::config("the regularization grid must be non-empty with every l2_lambda > 0"))
                } else if *replicate >= self.replicates {
                    Err(Error::config(format!("tuning replicate {replicate} out of range")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Training settings of `method` after applying its overrides.
    pub fn train_for(&self, method: Method) -> TrainConfig {
        let mut cfg = self.train.clone();
        if let Some(o) = self.train_overrides.get(&method) {
            if let Some(v) = o.epochs {
                cfg.epochs = v;
            }
            if let Some(v) = o.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = o.optimizer {
                cfg.optimizer = v;
            }
            if o.target_train_mse.is_some() {
                cfg.target_train_mse = o.target_train_mse;
            }
        }
        cfg
    }

    /// Worker threads: the config value, else `POTATOES_WORKERS`, else the
    /// available parallelism.
    pub fn worker_count(&self) -> Result<usize> {
        match self.workers {
            Some(w) => Ok(w),
            None => default_workers(),
        }
    }
}

pub fn default_workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
