//! Statistics checked against values frozen from scipy / statsmodels
//! (`scripts/stat_reference.py`).

use potatoes::stats::{ks_normality, paired_t_test, shapiro_wilk, PairedSample};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

fn reference() -> Value {
    serde_json::from_str(include_str!("data/stat_reference.json")).unwrap()
}

fn vector(r: &Value, name: &str) -> Vec<f64> {
    r["vectors"][name].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn t_test_matches_reference() {
    let r = reference();
    let ps = PairedSample::new(vector(&r, "paired10_a"), vector(&r, "paired10_b")).unwrap();
    let t = paired_t_test(&ps).unwrap();
    let want = &r["ttest"]["paired10"];
    assert!((t.t - want["t"].as_f64().unwrap()).abs() < 1e-9);
    assert!(rel(t.p, want["p"].as_f64().unwrap()) < 1e-6, "p = {}", t.p);

    let g = vector(&r, "gauss20");
    let shifted: Vec<f64> = g.iter().map(|v| v + 0.4).collect();
    let t = paired_t_test(&PairedSample::new(shifted, vec![0.0; g.len()]).unwrap()).unwrap();
    let want = &r["ttest"]["gauss20_shifted"];
    assert!((t.t - want["t"].as_f64().unwrap()).abs() < 1e-9);
    assert!(rel(t.p, want["p"].as_f64().unwrap()) < 1e-6);
}

#[test]
fn shapiro_wilk_matches_reference() {
    let r = reference();
    for name in ["gauss50", "expo50", "unif200", "gauss20"] {
        let sw = shapiro_wilk(&vector(&r, name)).unwrap();
        let want = &r["shapiro"][name];
        let (w, p) = (want["w"].as_f64().unwrap(), want["p"].as_f64().unwrap());
        assert!((sw.statistic - w).abs() < 1e-6, "{name}: W {} vs {w}", sw.statistic);
        assert!(rel(sw.p, p) < 0.1, "{name}: p {} vs {p}", sw.p);
    }
    assert!(shapiro_wilk(&vector(&r, "expo50")).unwrap().p < 0.01);
}

#[test]
fn lilliefors_matches_reference() {
    let r = reference();
    for name in ["gauss50", "expo50", "unif200", "gauss20"] {
        let ks = ks_normality(&vector(&r, name)).unwrap();
        let want = &r["lilliefors"][name];
        let (d, p) = (want["d"].as_f64().unwrap(), want["p"].as_f64().unwrap());
        assert!((ks.statistic - d).abs() < 1e-9, "{name}: D {} vs {d}", ks.statistic);
        assert!(rel(ks.p, p) < 0.1, "{name}: p {} vs {p}", ks.p);
    }
    assert!(ks_normality(&vector(&r, "gauss50")).unwrap().p > 0.05);
    assert!(ks_normality(&vector(&r, "unif200")).unwrap().p < 0.01);
}

#[test]
fn t_test_invariances() {
    let r = reference();
    let (a, b) = (vector(&r, "paired10_a"), vector(&r, "paired10_b"));
    let ps = PairedSample::new(a.clone(), b.clone()).unwrap();
    let base = paired_t_test(&ps).unwrap();

    let swapped = paired_t_test(&ps.swapped()).unwrap();
    assert_eq!(swapped.t, -base.t);
    assert_eq!(swapped.p, base.p);

    let shift = |v: &[f64]| v.iter().map(|x| x + 3.25).collect::<Vec<_>>();
    let shifted = paired_t_test(&PairedSample::new(shift(&a), shift(&b)).unwrap()).unwrap();
    assert!((shifted.t - base.t).abs() < 1e-9);
    assert!((shifted.p - base.p).abs() < 1e-12);

    let scale = |v: &[f64]| v.iter().map(|x| x * 17.0).collect::<Vec<_>>();
    let scaled = paired_t_test(&PairedSample::new(scale(&a), scale(&b)).unwrap()).unwrap();
    assert!((scaled.p - base.p).abs() < 1e-12);
}

#[test]
fn t_test_null_calibration() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let reps = 1000;
    let mut rejections = 0;
    for _ in 0..reps {
        let a: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
        if paired_t_test(&PairedSample::new(a, b).unwrap()).unwrap().p < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
}
