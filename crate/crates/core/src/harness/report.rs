use std::fmt::Write as _;

use serde::Serialize;

use super::experiment::EvalReport;
use crate::ensemble::Method;
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// Marks the best method of a row in mean tables.
pub const BEST_MARKER: &str = "*";
pub const FAILED: &str = "failed";

/// A rendered table; `rows[i][0]` is the row label.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_text(&self) -> String {
        let cols = self.header.len();
        let width: Vec<usize> = (0..cols)
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r.get(c).map_or(0, |s| s.chars().count()))
                    .chain([self.header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::from("|");
            for (c, w) in width.iter().enumerate() {
                let cell = cells.get(c).map_or("", String::as_str);
                if c == 0 {
                    let _ = write!(s, " {cell:<w$} |");
                } else {
                    let _ = write!(s, " {cell:>w$} |");
                }
            }
            s.push('\n');
            s
        };
        let mut out = format!("{}\n\n", self.title);
        out += &line(&self.header);
        out += &format!("|{}\n", width.iter().map(|w| format!("{}|", "-".repeat(w + 2))).collect::<String>());
        for r in &self.rows {
            out += &line(r);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
            .map_err(|e| Error::Serde(e.to_string()))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean-metric tables (one row per report, one column per method, best
/// mean marked) followed by p-value and normality tables for every stored
/// comparison. All numbers are recomputed from the stored per-replicate
/// values.
pub fn report_tables(reports: &[EvalReport]) -> Vec<Table> {
    let mut methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| reports.iter().any(|r| r.method(*m).is_some()))
        .collect();
    methods.dedup();
    let mut metrics: Vec<Metric> = Vec::new();
    for r in reports {
        for m in &r.metrics {
            if !metrics.contains(m) {
                metrics.push(*m);
            }
        }
    }

    let mut tables = Vec::new();
    for &metric in &metrics {
        let mut header = vec!["group".to_string()];
        header.extend(methods.iter().map(Method::to_string));
        let rows = reports
            .iter()
            .map(|r| {
                let means: Vec<Option<f64>> =
                    methods.iter().map(|&m| r.values(m, metric).map(mean)).collect();
                let best = means.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut row = vec![r.name.clone()];
                for (&m, v) in methods.iter().zip(&means) {
                    row.push(match (r.method(m), v) {
                        (None, _) => "-".into(),
                        (Some(res), _) if res.failed() => FAILED.into(),
                        (Some(_), Some(v)) if *v == best => format!("{v:.6}{BEST_MARKER}"),
                        (Some(_), Some(v)) => format!("{v:.6}"),
                        (Some(_), None) => "-".into(),
                    });
                }
                row
            })
            .collect();
        tables.push(Table { title: format!("Mean {metric}"), header, rows });
    }

    let pairs: Vec<(Method, Method, Metric)> = {
        let mut p = Vec::new();
        for r in reports {
            for c in &r.comparisons {
                if !p.contains(&(c.a, c.b, c.metric)) {
                    p.push((c.a, c.b, c.metric));
                }
            }
        }
        p
    };
    if !pairs.is_empty() {
        let mut header = vec!["group".to_string()];
        header.extend(pairs.iter().map(|(a, b, m)| format!("{a}-{b} ({m})")));
        let rows = reports
            .iter()
            .map(|r| {
                let mut row = vec![r.name.clone()];
                for &(a, b, m) in &pairs {
                    row.push(match r.comparison(a, b, m).and_then(|c| c.t_test) {
                        Some(t) => format!("{:.3e}", t.p),
                        None => "-".into(),
                    });
                }
                row
            })
            .collect();
        tables.push(Table { title: "Paired t-test p-values".into(), header, rows });

        let header = ["group", "comparison", "mean diff", "t", "df", "p", "SW W", "SW p", "KS D", "KS p"]
            .map(String::from)
            .to_vec();
        let opt = |v: Option<f64>, e: bool| match v {
            Some(v) if e => format!("{v:.3e}"),
            Some(v) => format!("{v:.4}"),
            None => "-".into(),
        };
        let mut rows = Vec::new();
        for r in reports {
            for c in &r.comparisons {
                let diff = (!c.differences.is_empty()).then(|| mean(&c.differences));
                rows.push(vec![
                    r.name.clone(),
                    format!("{}-{} ({})", c.a, c.b, c.metric),
                    opt(diff, false),
                    opt(c.t_test.map(|t| t.t), false),
                    c.t_test.map_or("-".into(), |t| t.df.to_string()),
                    opt(c.t_test.map(|t| t.p), true),
                    opt(c.shapiro_wilk.map(|t| t.statistic), false),
                    opt(c.shapiro_wilk.map(|t| t.p), true),
                    opt(c.ks.map(|t| t.statistic), false),
                    opt(c.ks.map(|t| t.p), true),
                ]);
            }
        }
        tables.push(Table { title: "Normality checks of the paired differences".into(), header, rows });
    }
    tables
}

/// Box-plot summary of one method's per-replicate values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub method: Method,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Values beyond the whiskers.
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order statistics:
/// position `(n − 1) q`, zero-based.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-method quartiles, whiskers and outliers of `metric`. Failed methods
/// are left out.
pub fn box_plot_data(report: &EvalReport, metric: Metric) -> Result<Vec<BoxStats>> {
    if !report.metrics.contains(&metric) {
        return Err(Error::config(format!("metric {metric} is not in the report")));
    }
    let mut out = Vec::new();
    for r in &report.methods {
        let Some(values) = r.values.get(&metric).filter(|v| !v.is_empty()) else {
            continue;
        };
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = v.iter().copied().filter(|x| (lo..=hi).contains(x));
        let whisker_low = inside.clone().fold(f64::INFINITY, f64::min);
        let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max);
        out.push(BoxStats {
            method: r.method,
            n: v.len(),
            q1,
            median,
            q3,
            whisker_low,
            whisker_high,
            outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
        });
    }
    Ok(out)
}

/// CSV with one row per method; outliers are `;`-separated.
pub fn box_plot_csv(stats: &[BoxStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(["method", "n", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers"])
        .map_err(err)?;
    for s in stats {
        let outliers: Vec<String> = s.outliers.iter().map(f64::to_string).collect();
        w.write_record([
            s.method.to_string(),
            s.n.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.whisker_low.to_string(),
            s.whisker_high.to_string(),
            outliers.join(";"),
        ])
        .map_err(err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
        .map_err(|e| Error::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{compare, MethodResult, REPORT_FORMAT, REPORT_VERSION};
    use std::collections::BTreeMap;

    fn result(method: Method, ap: &[f64]) -> MethodResult {
        let values: BTreeMap<Metric, Vec<f64>> = [(Metric::AveragePrecision, ap.to_vec())].into();
        let means = values.iter().map(|(m, v)| (*m, mean(v))).collect();
        MethodResult { method, error: None, values, means }
    }

    fn report(name: &str, methods: Vec<MethodResult>) -> EvalReport {
        EvalReport {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            name: name.into(),
            seed: 0,
            replicates: 5,
            metrics: vec![Metric::AveragePrecision],
            l2_lambda: None,
            tuning: None,
            methods,
            comparisons: Vec::new(),
            runtime: BTreeMap::new(),
        }
    }

    #[test]
    fn single_method_table() {
        let r = report("g", vec![result(Method::Pot, &[0.5, 0.7])]);
        let tables = report_tables(&[r]);
        assert_eq!(tables.len(), 1);
        assert_eq!(tables[0].header, vec!["group", "POT"]);
        assert_eq!(tables[0].rows, vec![vec!["g".to_string(), "0.600000*".to_string()]]);
    }

    #[test]
    fn means_and_best_marker() {
        let mut r = report("g", vec![result(Method::Ae, &[0.1, 0.2, 0.6]), result(Method::Pot, &[0.4, 0.5, 0.9])]);
        r.comparisons.push(compare(&r, Method::Pot, Method::Ae, Metric::AveragePrecision));
        let tables = report_tables(&[r]);
        assert_eq!(tables[0].rows[0], vec!["g", "0.300000", "0.600000*"]);
        // Differences are a constant 0.3 up to rounding, so the test is degenerate or
        // extremely significant; either way a cell is rendered.
        assert_eq!(tables[1].header, vec!["group", "POT-AE (ap)"]);
        assert_eq!(tables[2].rows.len(), 1);
        let csv = tables[0].to_csv().unwrap();
        assert_eq!(csv, "group,AE,POT\ng,0.300000,0.600000*\n");
        assert!(tables[0].to_text().contains("| g     | 0.300000 | 0.600000* |"));
    }

    #[test]
    fn failed_method_cell() {
        let mut failed = result(Method::AeR0, &[]);
        failed.values.clear();
        failed.means.clear();
        failed.error = Some("replicate 0: training diverged at epoch 3".into());
        let r = report("g", vec![failed, result(Method::Pot, &[0.5])]);
        let t = &report_tables(&[r])[0];
        assert_eq!(t.rows[0], vec!["g", FAILED, "0.500000*"]);
    }

    #[test]
    fn groups_are_rows() {
        let a = report("mnist_0", vec![result(Method::Ae, &[0.5]), result(Method::Pot, &[0.4])]);
        let b = report("mnist_1", vec![result(Method::Pot, &[0.9])]);
        let t = &report_tables(&[a, b])[0];
        assert_eq!(t.rows[0], vec!["mnist_0", "0.500000*", "0.400000"]);
        assert_eq!(t.rows[1], vec!["mnist_1", "-", "0.900000*"]);
    }

    #[test]
    fn box_plot_rules() {
        let r = report("g", vec![result(Method::Ae, &[5.0, 3.0, 1.0, 4.0, 2.0]), result(Method::Pot, &[0.5; 4])]);
        let b = box_plot_data(&r, Metric::AveragePrecision).unwrap();
        assert_eq!((b[0].q1, b[0].median, b[0].q3), (2.0, 3.0, 4.0));
        assert_eq!((b[0].whisker_low, b[0].whisker_high), (1.0, 5.0));
        assert!(b[0].outliers.is_empty());
        assert_eq!(b[1].q3 - b[1].q1, 0.0);
        assert!(b[1].outliers.is_empty());
        assert_eq!(b[1].whisker_low, 0.5);

        let r = report("g", vec![result(Method::Ae, &[1.0, 1.1, 1.2, 1.3, 10.0])]);
        let b = box_plot_data(&r, Metric::AveragePrecision).unwrap();
        assert_eq!(b[0].outliers, vec![10.0]);
        assert_eq!(b[0].whisker_high, 1.3);
        assert!(box_plot_csv(&b).unwrap().ends_with(",10\n"));

        assert!(matches!(box_plot_data(&r, Metric::RocAuc), Err(Error::Config(_))));
    }
}
