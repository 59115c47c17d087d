//! POTATOES ensembles and the autoencoder baselines they are compared with.
//!
//! A [`Partition`] splits the row indices into `k` disjoint parts of nearly
//! equal size. [`fit_potatoes`] overfits one unregularized autoencoder per
//! part and [`score_potatoes`] scores every row by the maximum reconstruction
//! error over all members ([`score_max`]).
//!
//! Member `i` of any ensemble is seeded from `derive_seed(seed, i)` alone, so
//! sequential and parallel execution produce bit-identical models.

use std::path::Path;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{LabeledScores, Metric};
use crate::neural::{train, Autoencoder, DenseNetSpec, TrainConfig};
use crate::seed::{self, derive_seed};

/// How independent ensemble members are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// On the current rayon pool when the `parallel` feature is enabled,
    /// sequentially otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub(crate) fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// `k` disjoint index sets covering `0..n`, sizes differing by at most one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<Vec<usize>>,
    seed: u64,
}

impl Partition {
    /// Uniformly random partition of `0..n` into `k` near-equal parts.
    /// Each part is sorted ascending.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::config(format!("a partition needs k >= 2 parts, got {k}")));
        }
        if k > n {
            return Err(Error::config(format!("cannot split {n} rows into {k} non-empty parts")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed));
        let mut parts = vec![Vec::with_capacity(n / k + 1); k];
        for (pos, &row) in order.iter().enumerate() {
            parts[pos % k].push(row);
        }
        for p in &mut parts {
            p.sort_unstable();
        }
        Ok(Partition { parts, seed })
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn n(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Part index of every row.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (i, p) in self.parts.iter().enumerate() {
            for &r in p {
                out[r] = i;
            }
        }
        out
    }
}

/// Largest cluster of mutually close points that still counts as outliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCap(usize);

impl ClusterCap {
    pub fn new(c: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::config("cluster cap must be at least 1"));
        }
        Ok(ClusterCap(c))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Ensemble size `c + 1`: any cluster of at most `c` rows misses a part.
    pub fn k(self) -> usize {
        self.0 + 1
    }
}

/// Init and shuffle seeds of ensemble member `i`.
pub fn member_seeds(seed: u64, i: usize) -> (u64, u64) {
    let m = derive_seed(seed, i as u64);
    (derive_seed(m, seed::stream::INIT), derive_seed(m, seed::stream::SHUFFLE))
}

/// Trains ensemble member `i` of `seed` on `data` with the seeds from
/// [`member_seeds`]. The single-model methods use member 0.
pub fn train_seeded(
    data: ArrayView2<f64>,
    spec: &DenseNetSpec,
    cfg: &TrainConfig,
    seed: u64,
    i: usize,
) -> Result<Autoencoder> {
    let (init, shuffle) = member_seeds(seed, i);
    let spec = spec.clone().with_seed(init);
    let cfg = cfg.clone().with_shuffle_seed(shuffle);
    train(&spec, &cfg, data).map_err(|e| e.in_member(i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotatoesModel {
    pub partition: Partition,
    /// Member `i` was trained on the rows of part `i` only.
    pub members: Vec<Autoencoder>,
}

const MODEL_FORMAT: &str = "potatoes-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: PotatoesModel,
}

impl PotatoesModel {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Versioned JSON: `{"format": "potatoes-model", "version": 1, "model": ..}`.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self.clone() };
        serde_json::to_string(&file).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Trains the member for part `i` of a POTATOES ensemble seeded with `seed`.
/// `part_rows` must be exactly the rows of that part, in ascending index order.
pub fn train_member(
    part_rows: ArrayView2<f64>,
    spec: &DenseNetSpec,
    cfg: &TrainConfig,
    seed: u64,
    i: usize,
) -> Result<Autoencoder> {
    train_seeded(part_rows, spec, cfg, derive_seed(seed, seed::stream::MEMBERS), i)
}

/// Partitions `data` into `k` parts and overfits one autoencoder per part.
pub fn fit_potatoes(
    data: ArrayView2<f64>,
    k: usize,
    spec: &DenseNetSpec,
    cfg: &TrainConfig,
    seed: u64,
    exec: Execution,
) -> Result<PotatoesModel> {
    spec.validate()?;
    if spec.l2_lambda != 0.0 {
        return Err(Error::config("POTATOES members must be unregularized (l2_lambda = 0)"));
    }
    let partition = Partition::random(data.nrows(), k, derive_seed(seed, seed::stream::PARTITION))?;
    let members = exec
        .map(k, |i| {
            let rows = data.select(Axis(0), &partition.parts[i]);
            train_member(rows.view(), spec, cfg, seed, i)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PotatoesModel { partition, members })
}

/// Elementwise maximum of the member error vectors.
pub fn score_max(member_errors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = member_errors
        .first()
        .ok_or_else(|| Error::config("score_max needs at least one member"))?;
    let mut out = first.clone();
    for e in &member_errors[1..] {
        if e.len() != out.len() {
            return Err(Error::shape(format!("{} scores", out.len()), e.len()));
        }
        for (o, &v) in out.iter_mut().zip(e) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

/// Reconstruction errors of every member on every row of `data`.
pub fn member_errors(model: &PotatoesModel, data: ArrayView2<f64>, exec: Execution) -> Result<Vec<Vec<f64>>> {
    exec.map(model.members.len(), |i| model.members[i].reconstruction_errors(data))
        .into_iter()
        .collect()
}

/// `s(p) = maxᵢ rᵢ(p)` over all members, each evaluated on all of `data`.
pub fn score_potatoes(model: &PotatoesModel, data: ArrayView2<f64>, exec: Execution) -> Result<Vec<f64>> {
    score_max(&member_errors(model, data, exec)?)
}

/// Scoring methods compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Single regularized autoencoder on the full data.
    #[serde(rename = "AE")]
    Ae,
    /// Single unregularized autoencoder on the full data.
    #[serde(rename = "AE_r0")]
    AeR0,
    /// Ensemble of unregularized autoencoders, each on the full data, max-aggregated.
    #[serde(rename = "OF_AEE")]
    OfAee,
    /// Ensemble of regularized autoencoders, each on the full data, max-aggregated.
    #[serde(rename = "AEE")]
    Aee,
    #[serde(rename = "POT")]
    Pot,
    /// Ensemble of POTATOES models, mean-aggregated.
    #[serde(rename = "PE")]
    Pe,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Ae, Method::AeR0, Method::OfAee, Method::Aee, Method::Pot, Method::Pe];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ae => "AE",
            Method::AeR0 => "AE_r0",
            Method::OfAee => "OF_AEE",
            Method::Aee => "AEE",
            Method::Pot => "POT",
            Method::Pe => "PE",
        }
    }

    pub fn is_regularized(self) -> bool {
        matches!(self, Method::Ae | Method::Aee)
    }

    /// Number of full-data autoencoder trainings one run costs, roughly.
    pub fn cost(self, ensemble_size: usize) -> usize {
        match self {
            Method::Ae | Method::AeR0 | Method::Pot => 1,
            Method::OfAee | Method::Aee | Method::Pe => ensemble_size,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

/// Ensemble sizes shared by the methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleShape {
    /// Parts per POTATOES model.
    pub k: usize,
    /// Members of OF_AEE/AEE and POTATOES models in PE.
    pub ensemble_size: usize,
}

/// Outlier scores of `data` under `method`.
///
/// `spec.l2_lambda` must be positive for AE/AEE and zero for all other
/// methods. PE averages the scores of `ensemble_size` POTATOES models with
/// seeds `derive_seed(seed, j)`.
pub fn score_method(
    method: Method,
    data: ArrayView2<f64>,
    spec: &DenseNetSpec,
    cfg: &TrainConfig,
    shape: EnsembleShape,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if method.is_regularized() != (spec.l2_lambda > 0.0) {
        return Err(Error::config(format!(
            "{method} requires {} but l2_lambda = {}",
            if method.is_regularized() { "l2_lambda > 0" } else { "l2_lambda = 0" },
            spec.l2_lambda
        )));
    }
    if matches!(method, Method::OfAee | Method::Aee | Method::Pe) && shape.ensemble_size == 0 {
        return Err(Error::config("ensemble_size must be positive"));
    }
    match method {
        Method::Ae | Method::AeR0 => train_seeded(data, spec, cfg, seed, 0)?.reconstruction_errors(data),
        Method::OfAee | Method::Aee => {
            let errors = exec
                .map(shape.ensemble_size, |i| {
                    train_seeded(data, spec, cfg, seed, i)?.reconstruction_errors(data)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            score_max(&errors)
        }
        Method::Pot => {
            let model = fit_potatoes(data, shape.k, spec, cfg, seed, exec)?;
            score_potatoes(&model, data, exec)
        }
        Method::Pe => {
            let scores = exec
                .map(shape.ensemble_size, |j| {
                    let s = derive_seed(seed, j as u64);
                    let model = fit_potatoes(data, shape.k, spec, cfg, s, exec)?;
                    score_potatoes(&model, data, exec)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let n = scores.len() as f64;
            let mut mean = vec![0.0; data.nrows()];
            for s in &scores {
                for (m, v) in mean.iter_mut().zip(s) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            Ok(mean)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub l2_lambda: f64,
    /// `(l2_lambda, metric value)` for every grid point, ascending in lambda.
    pub trace: Vec<(f64, f64)>,
}

/// Picks the `l2_lambda` from `grid` whose single autoencoder scores best on
/// `metric` against the true `labels`. Ties go to the smallest lambda.
///
/// This peeks at ground truth and exists only to build the strongest possible
/// regularized baseline.
pub fn tune_regularization(
    data: ArrayView2<f64>,
    labels: &[u8],
    spec: &DenseNetSpec,
    grid: &[f64],
    cfg: &TrainConfig,
    metric: Metric,
    seed: u64,
    exec: Execution,
) -> Result<TuningResult> {
    if grid.is_empty() {
        return Err(Error::config("regularization grid is empty"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = exec
        .map(grid.len(), |g| {
            let s = spec.clone().with_l2(grid[g]);
            let scores = train_seeded(data, &s, cfg, seed, 0)?.reconstruction_errors(data)?;
            metric.evaluate(&LabeledScores::new(scores, labels.to_vec())?)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok(TuningResult { l2_lambda: grid[best], trace: grid.into_iter().zip(values).collect() })
}
