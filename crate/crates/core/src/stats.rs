//! Significance tests for paired metric comparisons.
//!
//! The pipeline checks that the paired differences look normal (Shapiro-Wilk
//! and a Kolmogorov-Smirnov test with Lilliefors correction) and then runs a
//! two-sided paired t-test on them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Metric values of two models over the same datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::shape(format!("{} paired values", a.len()), b.len()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::config("paired values must be finite"));
        }
        Ok(PairedSample { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `a_i − b_i`.
    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a - b).collect()
    }

    pub fn swapped(&self) -> Self {
        PairedSample { a: self.b.clone(), b: self.a.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    /// `W` for Shapiro-Wilk, `D` for Kolmogorov-Smirnov.
    pub statistic: f64,
    pub p: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`n − 1` denominator).
fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Paired two-sample t-test: `t = mean(d) / (sd(d) / √n)` with `n − 1`
/// degrees of freedom.
pub fn paired_t_test(ps: &PairedSample) -> Result<TTest> {
    let n = ps.len();
    if n < 2 {
        return Err(Error::config(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d = ps.differences();
    let sd = sample_sd(&d);
    if sd == 0.0 {
        return Err(Error::DegenerateSample("paired differences have zero variance".into()));
    }
    let t = mean(&d) / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df: n - 1 })
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro-Wilk W with Royston's (1995, AS R94) coefficient and p-value
/// approximations, valid for `3 ≤ n ≤ 5000`.
pub fn shapiro_wilk(x: &[f64]) -> Result<NormalityTest> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];

    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::config(format!("Shapiro-Wilk needs 3 <= n <= 5000, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("Shapiro-Wilk input must be finite"));
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs[0] == xs[n - 1] {
        return Err(Error::DegenerateSample("Shapiro-Wilk input is constant".into()));
    }

    // Coefficients for the lower half, a[i] pairing x[i] with x[n-1-i].
    let half = n / 2;
    let an = n as f64;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let std_normal = Normal::standard();
        let m: Vec<f64> = (1..=half)
            .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first_free, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first_free..half {
            a[i] = -m[i] / fac;
        }
    }

    let mu = mean(&xs);
    let ssq: f64 = xs.iter().map(|v| (v - mu) * (v - mu)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (xs[n - 1 - i] - xs[i])).sum();
    let w = (num * num / ssq).min(1.0);

    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        return Ok(NormalityTest { statistic: w, p: p.clamp(0.0, 1.0) });
    }

    let mut y = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok(NormalityTest { statistic: w, p: 1e-99 });
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    let p = Normal::new(m, s).expect("positive scale").sf(y);
    Ok(NormalityTest { statistic: w, p })
}

/// One-sample Kolmogorov-Smirnov test against the normal distribution with
/// mean and standard deviation estimated from `x`, with the Lilliefors
/// p-value approximation (Dallal-Wilkinson below 0.1, Stephens' modified
/// statistic above).
pub fn ks_normality(x: &[f64]) -> Result<NormalityTest> {
    let n = x.len();
    if n < 5 {
        return Err(Error::config(format!("Lilliefors test needs n >= 5, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("KS input must be finite"));
    }
    let sd = sample_sd(x);
    if sd == 0.0 {
        return Err(Error::DegenerateSample("KS input is constant".into()));
    }
    let mu = mean(x);
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let std_normal = Normal::standard();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, v) in xs.iter().enumerate() {
        let f = std_normal.cdf((v - mu) / sd);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(NormalityTest { statistic: d, p: lilliefors_p(d, n) })
}

fn lilliefors_p(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    let (kd, nd) = if n <= 100 { (d, nf) } else { (d * (nf / 100.0).powf(0.49), 100.0) };
    let p = (-7.01256 * kd * kd * (nd + 2.78019) + 2.99587 * kd * (nd + 2.78019).sqrt() - 0.122119
        + 0.974598 / nd.sqrt()
        + 1.67997 / nd)
        .exp();
    if p <= 0.1 {
        return p;
    }
    let kk = (nf.sqrt() - 0.01 + 0.85 / nf.sqrt()) * d;
    let p = if kk <= 0.302 {
        1.0
    } else if kk <= 0.5 {
        2.76773 - 19.828315 * kk + 80.709644 * kk.powi(2) - 138.55152 * kk.powi(3) + 81.218052 * kk.powi(4)
    } else if kk <= 0.9 {
        -4.901232 + 40.662806 * kk - 97.490286 * kk.powi(2) + 94.029866 * kk.powi(3) - 32.355711 * kk.powi(4)
    } else if kk <= 1.31 {
        6.198765 - 19.558097 * kk + 23.186922 * kk.powi(2) - 12.234627 * kk.powi(3) + 2.423045 * kk.powi(4)
    } else {
        0.0
    };
    p.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Left edges of every bin plus the right edge of the last.
    pub fn edges(&self) -> Vec<f64> {
        let bins = self.counts.len();
        (0..=bins).map(|i| self.min + (self.max - self.min) * i as f64 / bins as f64).collect()
    }
}

/// Equal-width histogram of the paired differences over `[min, max]`; the
/// maximum falls into the last bin.
pub fn difference_histogram(ps: &PairedSample, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    let d = ps.differences();
    if d.is_empty() {
        return Err(Error::config("histogram of an empty sample"));
    }
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins];
    let width = max - min;
    for v in d {
        let bin = if width > 0.0 {
            (((v - min) / width * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(Histogram { min, max, counts })
}
