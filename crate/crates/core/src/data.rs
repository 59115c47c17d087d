//! Dataset ingestion and construction.
//!
//! IDX files (the MNIST container format) are parsed bit-exactly, optionally
//! gzip-wrapped. Replicated outlier-detection groups are built from a labeled
//! image set by taking one class as inliers and sampling a small fraction of
//! outliers from all other classes.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;
use rand::seq::index;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::DataMatrix;
use crate::seed::{self, derive_seed};

const IDX_U8: u8 = 0x08;

/// Magic number of a 3-D u8 IDX tensor (images).
pub const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
/// Magic number of a 1-D u8 IDX tensor (labels).
pub const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!("{expected} elements for dims {dims:?}"), data.len()));
        }
        Ok(IdxTensor { dims, data })
    }

    /// Number of items along the first axis.
    pub fn len(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements per item.
    pub fn item_size(&self) -> usize {
        self.dims[1..].iter().product()
    }

    pub fn item(&self, i: usize) -> &[u8] {
        let s = self.item_size();
        &self.data[i * s..(i + 1) * s]
    }
}

/// Reads an IDX file, transparently gunzipping it if needed.
pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|e| Error::Format(format!("gzip: {e}")))?;
        return parse_idx(&raw);
    }
    if bytes.len() < 4 {
        return Err(Error::Format("file shorter than the magic number".into()));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let ndims = bytes[3] as usize;
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != IDX_U8 || ndims == 0 {
        return Err(Error::Format(format!("unsupported magic number 0x{magic:08X}")));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Truncated { expected: header, found: bytes.len() });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < count {
        return Err(Error::Truncated { expected: header + count, found: bytes.len() });
    }
    if payload.len() > count {
        return Err(Error::Format(format!(
            "{} trailing bytes after the payload",
            payload.len() - count
        )));
    }
    Ok(IdxTensor { dims, data: payload.to_vec() })
}

/// Serializes a u8 tensor in IDX layout (uncompressed).
pub fn encode_idx(t: &IdxTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * t.dims.len() + t.data.len());
    out.extend_from_slice(&[0, 0, IDX_U8, t.dims.len() as u8]);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&t.data);
    out
}

/// One outlier-detection dataset with ground truth for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UodDataset {
    pub data: DataMatrix,
    /// `1` marks an outlier.
    pub labels: Vec<u8>,
    pub replicate_seed: u64,
}

impl UodDataset {
    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn outlier_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == 1).collect()
    }
}

/// Noisy sine curve with a few planted off-curve points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SineParams {
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub noise_sd: f64,
    pub x_range: (f64, f64),
    /// Vertical extent of the outlier box; horizontally it spans `x_range`.
    pub y_range: (f64, f64),
    /// Outlier candidates with `|y − sin x| < margin` are rejected.
    pub margin: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SineParams {
    fn default() -> Self {
        SineParams {
            n_inliers: 200,
            n_outliers: 3,
            noise_sd: 0.05,
            x_range: (-PI, PI),
            y_range: (-2.0, 2.0),
            margin: 0.5,
            max_attempts: 10_000,
            seed: 0,
        }
    }
}

/// Inliers `(x, sin x + ε)` followed by the outliers, which are uniform in
/// the box and at vertical distance at least `margin` from the curve.
pub fn gen_sine_dataset(p: &SineParams) -> Result<UodDataset> {
    if p.n_inliers == 0 {
        return Err(Error::config("sine dataset needs at least one inlier"));
    }
    if !(p.noise_sd >= 0.0) || !(p.x_range.0 < p.x_range.1) || !(p.y_range.0 < p.y_range.1) {
        return Err(Error::config("invalid sine dataset ranges"));
    }
    let mut rng = seed::rng(p.seed);
    let xs = Uniform::new(p.x_range.0, p.x_range.1).expect("checked range");
    let ys = Uniform::new(p.y_range.0, p.y_range.1).expect("checked range");
    let noise = Normal::new(0.0, p.noise_sd).expect("checked sd");
    let n = p.n_inliers + p.n_outliers;
    let mut data = Array2::zeros((n, 2));
    for i in 0..p.n_inliers {
        let x = xs.sample(&mut rng);
        let eps = if p.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        data[[i, 0]] = x;
        data[[i, 1]] = x.sin() + eps;
    }
    for i in p.n_inliers..n {
        let mut placed = false;
        for _ in 0..p.max_attempts {
            let (x, y) = (xs.sample(&mut rng), ys.sample(&mut rng));
            if (y - x.sin()).abs() >= p.margin {
                data[[i, 0]] = x;
                data[[i, 1]] = y;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "no outlier at distance {} from the curve after {} attempts",
                p.margin, p.max_attempts
            )));
        }
    }
    let mut labels = vec![0u8; n];
    labels[p.n_inliers..].fill(1);
    Ok(UodDataset { data, labels, replicate_seed: p.seed })
}

/// Datasets that share their inliers and differ in sampled outliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetGroup {
    pub name: String,
    pub replicates: Vec<UodDataset>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub inlier_class: u8,
    #[serde(default = "default_outlier_ratio")]
    pub outlier_ratio: f64,
    pub n_replicates: usize,
    /// Keep at most this many inliers (sampled once, shared by all replicates).
    #[serde(default)]
    pub inlier_cap: Option<usize>,
    /// Average-pool square images by this factor before flattening.
    #[serde(default = "one")]
    pub downsample: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_outlier_ratio() -> f64 {
    0.005
}

fn one() -> usize {
    1
}

/// Number of outliers `m` such that `m / (inliers + m)` is closest to
/// `ratio`: `round(ratio · inliers / (1 − ratio))`, halves rounded up.
pub fn outlier_count(inliers: usize, ratio: f64) -> usize {
    (ratio * inliers as f64 / (1.0 - ratio) + 0.5).floor() as usize
}

/// Builds a replicated group: all rows of `inlier_class` (optionally capped)
/// followed, per replicate, by outliers drawn without replacement from the
/// other classes. Pixels are scaled to `[0, 1]`.
pub fn build_group(
    name: &str,
    images: &IdxTensor,
    labels: &IdxTensor,
    p: &GroupParams,
) -> Result<DatasetGroup> {
    if labels.dims.len() != 1 || labels.len() != images.len() {
        return Err(Error::config(format!(
            "label tensor {:?} does not match image tensor {:?}",
            labels.dims, images.dims
        )));
    }
    if !(p.outlier_ratio > 0.0 && p.outlier_ratio < 1.0) {
        return Err(Error::config("outlier_ratio must lie in (0, 1)"));
    }
    if p.n_replicates == 0 {
        return Err(Error::config("n_replicates must be positive"));
    }
    let mut inliers: Vec<usize> =
        (0..labels.len()).filter(|&i| labels.data[i] == p.inlier_class).collect();
    let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels.data[i] != p.inlier_class).collect();
    if inliers.is_empty() {
        return Err(Error::config(format!("class {} has no images", p.inlier_class)));
    }
    if let Some(cap) = p.inlier_cap {
        if cap == 0 {
            return Err(Error::config("inlier_cap must be positive"));
        }
        if cap < inliers.len() {
            let mut rng = seed::rng(derive_seed(p.seed, seed::stream::PARTITION));
            let mut keep: Vec<usize> =
                index::sample(&mut rng, inliers.len(), cap).into_iter().map(|j| inliers[j]).collect();
            keep.sort_unstable();
            inliers = keep;
        }
    }
    let m = outlier_count(inliers.len(), p.outlier_ratio);
    if m > pool.len() {
        return Err(Error::config(format!(
            "need {m} outliers but only {} non-inlier images exist",
            pool.len()
        )));
    }

    let pixels = Pixels::new(images, p.downsample)?;
    let inlier_rows = pixels.rows(&inliers);
    let replicates = (0..p.n_replicates)
        .map(|r| {
            let replicate_seed = derive_seed(p.seed, r as u64);
            let mut rng = seed::rng(replicate_seed);
            let mut picked: Vec<usize> =
                index::sample(&mut rng, pool.len(), m).into_iter().map(|j| pool[j]).collect();
            picked.sort_unstable();
            let outlier_rows = pixels.rows(&picked);
            let data = ndarray::concatenate![ndarray::Axis(0), inlier_rows, outlier_rows];
            let mut labels = vec![0u8; inliers.len() + m];
            labels[inliers.len()..].fill(1);
            UodDataset { data, labels, replicate_seed }
        })
        .collect();
    Ok(DatasetGroup { name: name.to_string(), replicates })
}

struct Pixels<'a> {
    images: &'a IdxTensor,
    factor: usize,
    side: (usize, usize),
}

impl<'a> Pixels<'a> {
    fn new(images: &'a IdxTensor, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("downsample factor must be positive"));
        }
        let side = match images.dims[..] {
            [_, h, w] => (h, w),
            [_, n] => (1, n),
            _ => return Err(Error::config(format!("expected image dims [n, h, w], got {:?}", images.dims))),
        };
        if factor > 1 && (side.0 % factor != 0 || side.1 % factor != 0) {
            return Err(Error::config(format!("downsample factor {factor} does not divide {side:?}")));
        }
        Ok(Pixels { images, factor, side })
    }

    fn width(&self) -> usize {
        (self.side.0 / self.factor) * (self.side.1 / self.factor)
    }

    fn rows(&self, items: &[usize]) -> DataMatrix {
        let (h, w) = self.side;
        let f = self.factor;
        let (oh, ow) = (h / f, w / f);
        let norm = 255.0 * (f * f) as f64;
        let mut out = Array2::zeros((items.len(), self.width()));
        for (r, &i) in items.iter().enumerate() {
            let img = self.images.item(i);
            for y in 0..oh {
                for x in 0..ow {
                    let mut s = 0u32;
                    for dy in 0..f {
                        for dx in 0..f {
                            s += img[(y * f + dy) * w + x * f + dx] as u32;
                        }
                    }
                    out[[r, y * ow + x]] = s as f64 / norm;
                }
            }
        }
        out
    }
}
