//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use ndarray::Array2;
use potatoes::ensemble::Partition;
use potatoes::neural::{HiddenActivation, OutputActivation};
use potatoes::{Autoencoder, DenseNetSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small architecture and batch for gradient checks. All parameters,
/// biases included, are redrawn so that no ReLU sits exactly on its kink.
pub fn random_case(seed: u64) -> (Autoencoder, Array2<f64>) {
    let mut r = rng(seed);
    let d = r.random_range(2..=6);
    let latent = r.random_range(1..d);
    let hidden: Vec<usize> = (0..r.random_range(0..=2)).map(|_| r.random_range(1..=6)).collect();
    let mut spec = DenseNetSpec::symmetric(d, &hidden, latent).with_seed(r.random());
    spec.hidden_activation = [HiddenActivation::Tanh, HiddenActivation::Relu, HiddenActivation::Sigmoid][r.random_range(0..3)];
    spec.output_activation = [OutputActivation::Linear, OutputActivation::Sigmoid][r.random_range(0..2)];
    spec.l2_lambda = if r.random_bool(0.5) { 0.0 } else { r.random_range(1e-3..0.5) };
    let rows = r.random_range(1..=8);
    let batch = Array2::from_shape_fn((rows, d), |_| r.random_range(-1.5..1.5));
    let mut model = Autoencoder::new(spec).unwrap();
    let theta: Vec<f64> = (0..model.params.n_params()).map(|_| r.random_range(-1.0..1.0)).collect();
    model.params.set_flat(&theta);
    (model, batch)
}

/// Largest per-coordinate relative error between the analytic gradient and
/// central differences with step `h`; the denominator is floored at `floor`.
pub fn max_gradient_error(model: &Autoencoder, batch: &Array2<f64>, h: f64, floor: f64) -> f64 {
    let analytic = model.gradients(batch.view()).unwrap().to_flat();
    let theta = model.params.to_flat();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let mut t = theta.clone();
        t[j] = theta[j] + h;
        probe.params.set_flat(&t);
        let up = probe.loss(batch.view()).unwrap();
        t[j] = theta[j] - h;
        probe.params.set_flat(&t);
        let down = probe.loss(batch.view()).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[j] - numeric).abs() / analytic[j].abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}

pub fn brute_roc_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// `Σ (Rₙ − Rₙ₋₁) Pₙ` over the distinct scores as thresholds `s ≥ t`.
pub fn brute_average_precision(s: &[f64], y: &[u8]) -> f64 {
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let predicted: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
        let tp = predicted.iter().filter(|&&i| y[i] == 1).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / predicted.len() as f64);
        prev_recall = recall;
    }
    ap
}

/// Max F1 over `{q : s(q) > s(p)}` for every `p`; empty sets score 0.
pub fn brute_optimal_f1(s: &[f64], y: &[u8]) -> f64 {
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let mut best: f64 = 0.0;
    for p in 0..s.len() {
        let predicted: Vec<usize> = (0..s.len()).filter(|&q| s[q] > s[p]).collect();
        if predicted.is_empty() {
            continue;
        }
        let tp = predicted.iter().filter(|&&i| y[i] == 1).count() as f64;
        let precision = tp / predicted.len() as f64;
        let recall = tp / pos;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        best = best.max(f1);
    }
    best
}

pub fn brute_precision_at_k(s: &[f64], y: &[u8], k: usize) -> f64 {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
    idx[..k].iter().filter(|&&i| y[i] == 1).count() as f64 / k as f64
}

/// Random labelled scores with both classes and, usually, ties.
pub fn random_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = r.random_range(2..=12);
    let levels = r.random_range(1..=n);
    let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 * 0.25).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_bool(0.4) as u8).collect();
    let first = r.random_range(0..n);
    labels[first] = 1;
    let second = (first + 1 + r.random_range(0..n - 1)) % n;
    labels[second] = 0;
    (scores, labels)
}

/// Union, disjointness, sortedness and size spread of a partition.
pub fn check_partition(p: &Partition, n: usize, k: usize) -> Result<(), String> {
    if p.k() != k || p.n() != n {
        return Err(format!("shape {}x{} instead of {k}x{n}", p.k(), p.n()));
    }
    let mut seen = vec![false; n];
    for part in p.parts() {
        if part.windows(2).any(|w| w[0] >= w[1]) {
            return Err("part not strictly ascending".into());
        }
        for &i in part {
            if i >= n || seen[i] {
                return Err(format!("index {i} out of range or repeated"));
            }
            seen[i] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err("indices missing".into());
    }
    let sizes: Vec<usize> = p.parts().iter().map(Vec::len).collect();
    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
    if spread > 1 {
        return Err(format!("size spread {spread}"));
    }
    Ok(())
}

/// Every cluster of at most `c` indices misses at least one part.
pub fn pigeonhole_holds(p: &Partition, c: usize) -> bool {
    let assignment = p.assignment();
    let n = assignment.len();
    let mut cluster: Vec<usize> = Vec::new();
    fn rec(start: usize, n: usize, c: usize, cluster: &mut Vec<usize>, assignment: &[usize], k: usize) -> bool {
        let mut hit = vec![false; k];
        for &i in cluster.iter() {
            hit[assignment[i]] = true;
        }
        if hit.iter().all(|&h| h) {
            return false;
        }
        if cluster.len() == c {
            return true;
        }
        for i in start..n {
            cluster.push(i);
            let ok = rec(i + 1, n, c, cluster, assignment, k);
            cluster.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    rec(0, n, c, &mut cluster, &assignment, p.k())
}

/// Sort-based quantile with linear interpolation, computed independently.
pub fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() as f64 - 1.0);
    let (i, frac) = (pos as usize, pos.fract());
    if i + 1 < v.len() {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    } else {
        v[i]
    }
}
