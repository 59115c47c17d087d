//! Unsupervised outlier detection with partitioning overfitting autoencoder
//! ensembles (POTATOES).
//!
//! The dataset is split at random into `k = c + 1` equally sized parts, where
//! `c` is the largest cluster of points that should still count as outliers.
//! One unregularized autoencoder is overfitted to each part, and every point
//! is scored by the largest reconstruction error any member assigns to it.
//! A cluster of at most `c` outliers misses at least one part, so at least one
//! member never saw it and reconstructs it badly.
//!
//! Modules:
//! - [`neural`]: dense autoencoders, backpropagation, SGD/Adam training.
//! - [`ensemble`]: partitions, POTATOES fitting and scoring, baselines.
//! - [`metrics`]: ROC AUC, average precision, optimal F1, precision@k.
//! - [`stats`]: paired t-test, Shapiro-Wilk, Lilliefors-corrected KS.
//! - [`data`]: IDX parsing, synthetic sine data, replicated dataset groups.
//! - [`harness`]: experiment configs, runs, reports, plots.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod neural;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use neural::{Autoencoder, DataMatrix, DenseNetSpec, ModelParams, TrainConfig};
