//! Ranking metrics for outlier scores.
//!
//! Label `1` marks an outlier, `0` an inlier. All metrics depend on the
//! scores only through their order, ties included.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<u8>,
    positives: usize,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::shape(
                format!("{} labels", scores.len()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::config(format!("labels must be 0 or 1, found {bad}")));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::config("scores contain NaN"));
        }
        let positives = labels.iter().filter(|&&l| l == 1).count();
        Ok(LabeledScores { scores, labels, positives })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn require_both_classes(&self, metric: &str) -> Result<()> {
        if self.positives == 0 || self.positives == self.len() {
            Err(Error::UndefinedMetric(format!("{metric} needs both inliers and outliers")))
        } else {
            Ok(())
        }
    }

    /// Indices by descending score; equal scores keep index order.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// `(outliers, inliers)` per group of tied scores, highest score first.
    fn tie_groups(&self) -> Vec<(usize, usize)> {
        let order = self.ranking();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut last: Option<f64> = None;
        for i in order {
            let s = self.scores[i];
            if last.is_none_or(|l| l.total_cmp(&s) != Ordering::Equal) {
                groups.push((0, 0));
                last = Some(s);
            }
            let g = groups.last_mut().unwrap();
            if self.labels[i] == 1 {
                g.0 += 1;
            } else {
                g.1 += 1;
            }
        }
        groups
    }
}

/// Probability that a random outlier outscores a random inlier, counting ties
/// as one half.
pub fn roc_auc(ls: &LabeledScores) -> Result<f64> {
    ls.require_both_classes("roc_auc")?;
    let pos = ls.positives as f64;
    let neg = (ls.len() - ls.positives) as f64;
    // Walk groups from the lowest score up, counting inliers seen so far.
    let mut inliers_below = 0.0;
    let mut wins = 0.0;
    for &(p, n) in ls.tie_groups().iter().rev() {
        wins += p as f64 * (inliers_below + 0.5 * n as f64);
        inliers_below += n as f64;
    }
    Ok(wins / (pos * neg))
}

/// Step-wise average precision `Σ (Rₙ − Rₙ₋₁) Pₙ` over descending score
/// thresholds, tied scores forming a single threshold.
pub fn average_precision(ls: &LabeledScores) -> Result<f64> {
    ls.require_both_classes("average_precision")?;
    let total = ls.positives as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    for (p, n) in ls.tie_groups() {
        tp += p;
        fp += n;
        if p > 0 {
            ap += (p as f64 / total) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// Best F1 over the prediction sets `{q : s(q) > s(p)}` for `p` in the data.
///
/// The inequality is strict, so the highest-scoring point is never predicted
/// at its own threshold and the full dataset is never a candidate. An empty
/// prediction set has F1 zero.
pub fn optimal_f1(ls: &LabeledScores) -> Result<f64> {
    ls.require_both_classes("optimal_f1")?;
    let total = ls.positives;
    let (mut tp, mut predicted) = (0usize, 0usize);
    let mut best = 0.0f64;
    // Each candidate set is a union of the groups strictly above a threshold.
    for (p, n) in ls.tie_groups() {
        if predicted > 0 {
            best = best.max(2.0 * tp as f64 / (predicted + total) as f64);
        }
        tp += p;
        predicted += p + n;
    }
    Ok(best)
}

/// Fraction of outliers among the `k` highest scores. Ties at the cut are
/// broken by row index, lower first.
pub fn precision_at_k(ls: &LabeledScores, k: usize) -> Result<f64> {
    if k == 0 || k > ls.len() {
        return Err(Error::config(format!("precision@{k} undefined for {} points", ls.len())));
    }
    let hits = ls.ranking()[..k].iter().filter(|&&i| ls.labels[i] == 1).count();
    Ok(hits as f64 / k as f64)
}

/// A metric by name: `roc_auc`, `ap`, `of1` or `prec@K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    RocAuc,
    AveragePrecision,
    OptimalF1,
    PrecisionAt(usize),
}

impl Metric {
    pub fn evaluate(&self, ls: &LabeledScores) -> Result<f64> {
        match *self {
            Metric::RocAuc => roc_auc(ls),
            Metric::AveragePrecision => average_precision(ls),
            Metric::OptimalF1 => optimal_f1(ls),
            Metric::PrecisionAt(k) => precision_at_k(ls, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::RocAuc => f.write_str("roc_auc"),
            Metric::AveragePrecision => f.write_str("ap"),
            Metric::OptimalF1 => f.write_str("of1"),
            Metric::PrecisionAt(k) => write!(f, "prec@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roc_auc" => Ok(Metric::RocAuc),
            "ap" => Ok(Metric::AveragePrecision),
            "of1" => Ok(Metric::OptimalF1),
            _ => s
                .strip_prefix("prec@")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k > 0)
                .map(Metric::PrecisionAt)
                .ok_or_else(|| Error::config(format!("unknown metric '{s}'"))),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
