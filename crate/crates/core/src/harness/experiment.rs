use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, Regularization};
use crate::data::{build_group, gen_sine_dataset, read_idx, GroupParams, SineParams, UodDataset};
use crate::ensemble::{score_method, tune_regularization, Execution, Method, TuningResult};
use crate::error::{Error, Result};
use crate::metrics::{LabeledScores, Metric};
use crate::seed::{derive_seed, stream};
use crate::stats::{ks_normality, paired_t_test, shapiro_wilk, NormalityTest, PairedSample, TTest};

pub const REPORT_FORMAT: &str = "potatoes-report";
pub const REPORT_VERSION: u32 = 1;

/// Results of one experiment. Serialized deterministically: identical
/// configs and seeds give byte-identical JSON whatever the worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub metrics: Vec<Metric>,
    /// Weight decay used by AE and AEE.
    pub l2_lambda: Option<f64>,
    pub tuning: Option<TuningResult>,
    pub methods: Vec<MethodResult>,
    pub comparisons: Vec<Comparison>,
    /// Wall-clock seconds per method, summed over replicates. Not part of the
    /// JSON, which must not depend on timing; see [`EvalReport::write`].
    #[serde(skip)]
    pub runtime: BTreeMap<Method, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Set when any replicate failed; `values` and `means` are then empty.
    pub error: Option<String>,
    /// One value per replicate, in replicate order.
    pub values: BTreeMap<Metric, Vec<f64>>,
    pub means: BTreeMap<Metric, f64>,
}

impl MethodResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Paired comparison of two methods on one metric across replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Method,
    pub b: Method,
    pub metric: Metric,
    /// `value(a) − value(b)` per replicate.
    pub differences: Vec<f64>,
    pub t_test: Option<TTest>,
    pub shapiro_wilk: Option<NormalityTest>,
    pub ks: Option<NormalityTest>,
    /// Why `t_test` is missing, or why a normality check was skipped.
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Stored per-replicate values, `None` if the method is absent or failed.
    pub fn values(&self, m: Method, metric: Metric) -> Option<&[f64]> {
        self.method(m).and_then(|r| r.values.get(&metric)).map(Vec::as_slice)
    }

    pub fn comparison(&self, a: Method, b: Method, metric: Metric) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b && c.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::Serde(format!("unsupported report {} v{}", r.format, r.version)));
        }
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Long-format CSV `method,replicate,metric,value` of all stored values.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(["method", "replicate", "metric", "value"]).map_err(io)?;
        for r in &self.methods {
            for (metric, values) in &r.values {
                for (i, v) in values.iter().enumerate() {
                    w.write_record([r.method.to_string(), i.to_string(), metric.to_string(), v.to_string()])
                        .map_err(io)?;
                }
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
            .map_err(|e| Error::Serde(e.to_string()))
    }

    /// Writes `report.json`, `report.csv` and `timings.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let timings: BTreeMap<String, f64> =
            self.runtime.iter().map(|(m, s)| (m.to_string(), *s)).collect();
        let timings = serde_json::to_string_pretty(&timings).map_err(|e| Error::Serde(e.to_string()))?;
        for (file, body) in [("report.json", self.to_json()?), ("report.csv", self.to_csv()?), ("timings.json", timings)] {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Replicated datasets of the experiment, in replicate order.
pub fn load_replicates(cfg: &ExperimentConfig) -> Result<Vec<UodDataset>> {
    let seed = derive_seed(cfg.seed, stream::DATA);
    match &cfg.dataset {
        DatasetSource::Sine(p) => (0..cfg.replicates)
            .map(|r| gen_sine_dataset(&SineParams { seed: derive_seed(seed, r as u64), ..p.clone() }))
            .collect(),
        DatasetSource::Idx(src) => {
            for p in [&src.images, &src.labels] {
                if !p.is_file() {
                    return Err(Error::config(format!("dataset file {} not found", p.display())));
                }
            }
            let images = read_idx(&src.images)?;
            let labels = read_idx(&src.labels)?;
            let params = GroupParams {
                inlier_class: src.inlier_class,
                outlier_ratio: src.outlier_ratio,
                n_replicates: cfg.replicates,
                inlier_cap: src.inlier_cap,
                downsample: src.downsample,
                seed,
            };
            Ok(build_group(&cfg.name, &images, &labels, &params)?.replicates)
        }
    }
}

/// Seed of all models trained on replicate `r`.
pub fn replicate_model_seed(master: u64, r: usize) -> u64 {
    derive_seed(derive_seed(master, stream::MODELS), r as u64)
}

/// Resolves the weight decay of the regularized methods, tuning it on the
/// configured replicate if asked to.
pub(crate) fn resolve_lambda(
    cfg: &ExperimentConfig,
    data: &[UodDataset],
    exec: Execution,
) -> Result<(Option<f64>, Option<TuningResult>)> {
    match &cfg.regularization {
        None => Ok((None, None)),
        Some(Regularization::Fixed { l2_lambda }) => Ok((Some(*l2_lambda), None)),
        Some(Regularization::Tuned { grid, metric, replicate }) => {
            let ds = data
                .get(*replicate)
                .ok_or_else(|| Error::config(format!("tuning replicate {replicate} out of range")))?;
            let spec = cfg.model.spec(ds.data.ncols());
            let t = tune_regularization(
                ds.data.view(),
                &ds.labels,
                &spec,
                grid,
                &cfg.train_for(Method::Ae),
                *metric,
                replicate_model_seed(cfg.seed, *replicate),
                exec,
            )?;
            Ok((Some(t.l2_lambda), Some(t)))
        }
    }
}

/// Runs every configured method on every replicate, then the paired tests.
///
/// Work runs on a dedicated pool of [`ExperimentConfig::worker_count`]
/// threads. Every task seed is derived from the master seed up front, so the
/// report does not depend on the number of workers. A method that fails on
/// any replicate is recorded as failed; the others continue. If
/// `output_dir` is set the report is written there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let workers = cfg.worker_count()?;
    let report = with_pool(workers, || run_in_pool(cfg))??;
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[cfg(feature = "parallel")]
pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn with_pool<T: Send>(_workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

type TaskOutcome = (Result<BTreeMap<Metric, f64>>, f64);

fn run_in_pool(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let exec = Execution::Parallel;
    let data = load_replicates(cfg)?;
    let shape = cfg.shape()?;
    let (l2_lambda, tuning) = resolve_lambda(cfg, &data, exec)?;

    let tasks: Vec<(usize, Method)> =
        (0..cfg.replicates).flat_map(|r| cfg.methods.iter().map(move |&m| (r, m))).collect();
    let outcomes: Vec<TaskOutcome> = exec.map(tasks.len(), |t| {
        let (r, method) = tasks[t];
        let ds = &data[r];
        let start = Instant::now();
        let lambda = if method.is_regularized() { l2_lambda.unwrap_or(0.0) } else { 0.0 };
        let spec = cfg.model.spec(ds.data.ncols()).with_l2(lambda);
        let res = score_method(
            method,
            ds.data.view(),
            &spec,
            &cfg.train_for(method),
            shape,
            replicate_model_seed(cfg.seed, r),
            exec,
        )
        .and_then(|scores| {
            let ls = LabeledScores::new(scores, ds.labels.clone())?;
            cfg.metrics.iter().map(|&m| Ok((m, m.evaluate(&ls)?))).collect()
        });
        (res, start.elapsed().as_secs_f64())
    });

    let mut methods = Vec::new();
    let mut runtime = BTreeMap::new();
    for (j, &method) in cfg.methods.iter().enumerate() {
        let mut result =
            MethodResult { method, error: None, values: BTreeMap::new(), means: BTreeMap::new() };
        let mut seconds = 0.0;
        for r in 0..cfg.replicates {
            let (res, secs) = &outcomes[r * cfg.methods.len() + j];
            seconds += secs;
            match res {
                Ok(vals) if result.error.is_none() => {
                    for (m, v) in vals {
                        result.values.entry(*m).or_default().push(*v);
                    }
                }
                Ok(_) => {}
                Err(e) if result.error.is_none() => result.error = Some(format!("replicate {r}: {e}")),
                Err(_) => {}
            }
        }
        if result.failed() {
            result.values.clear();
        }
        result.means = result
            .values
            .iter()
            .map(|(m, v)| (*m, v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        runtime.insert(method, seconds);
        methods.push(result);
    }

    let mut report = EvalReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        metrics: cfg.metrics.clone(),
        l2_lambda,
        tuning,
        methods,
        comparisons: Vec::new(),
        runtime,
    };
    report.comparisons = cfg
        .comparisons
        .iter()
        .flat_map(|&(a, b)| cfg.test_metrics.iter().map(move |&m| (a, b, m)))
        .map(|(a, b, m)| compare(&report, a, b, m))
        .collect();
    Ok(report)
}

/// Paired t-test of `a − b` with Shapiro-Wilk and Lilliefors checks of the
/// differences. Checks that cannot run are explained in `notes`.
pub fn compare(report: &EvalReport, a: Method, b: Method, metric: Metric) -> Comparison {
    let mut c = Comparison {
        a,
        b,
        metric,
        differences: Vec::new(),
        t_test: None,
        shapiro_wilk: None,
        ks: None,
        notes: Vec::new(),
    };
    let (va, vb) = match (report.values(a, metric), report.values(b, metric)) {
        (Some(va), Some(vb)) => (va, vb),
        _ => {
            c.notes.push(format!("{a} or {b} has no {metric} values"));
            return c;
        }
    };
    let ps = match PairedSample::new(va.to_vec(), vb.to_vec()) {
        Ok(ps) => ps,
        Err(e) => {
            c.notes.push(e.to_string());
            return c;
        }
    };
    c.differences = ps.differences();
    match paired_t_test(&ps) {
        Ok(t) => c.t_test = Some(t),
        Err(e) => c.notes.push(format!("t-test: {e}")),
    }
    match shapiro_wilk(&c.differences) {
        Ok(t) => c.shapiro_wilk = Some(t),
        Err(e) => c.notes.push(format!("shapiro-wilk: {e}")),
    }
    match ks_normality(&c.differences) {
        Ok(t) => c.ks = Some(t),
        Err(e) => c.notes.push(format!("kolmogorov-smirnov: {e}")),
    }
    c
}
