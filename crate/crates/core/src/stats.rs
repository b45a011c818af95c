//! Sample statistics used by the acceptance checks.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Moments of a pooled sample plus its KS distance to `N(0, 1)`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StatSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance_to_std_normal: f64,
    /// Raw moments `E x^p`, `p = 1..6`.
    pub moment_list: [f64; 6],
}

impl StatSummary {
    pub fn from_sample(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = mean(xs);
        let mut c = [0.0; 5];
        let mut raw = [0.0; 6];
        for &x in xs {
            let d = x - mean;
            let mut pd = 1.0;
            for v in c.iter_mut().skip(1) {
                pd *= d;
                *v += pd;
            }
            let mut px = 1.0;
            for v in raw.iter_mut() {
                px *= x;
                *v += px;
            }
        }
        let nf = n.max(1) as f64;
        raw.iter_mut().for_each(|v| *v /= nf);
        let m2 = c[2] / nf;
        let m3 = c[3] / nf;
        let m4 = c[4] / nf;
        let variance = if n > 1 { c[2] / (nf - 1.0) } else { 0.0 };
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            n,
            mean,
            variance,
            skewness,
            excess_kurtosis,
            ks_distance_to_std_normal: ks_std_normal(xs),
            moment_list: raw,
        }
    }

    /// Raw fourth moment.
    pub fn fourth_moment(&self) -> f64 {
        self.moment_list[3]
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "covariance needs equal lengths");
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

pub fn variance(a: &[f64]) -> f64 {
    covariance(a, a)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `sup_x |F_n(x) - F(x)|`.
pub fn ks_distance<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

pub fn ks_std_normal(xs: &[f64]) -> f64 {
    let normal = Normal::standard();
    ks_distance(xs, |x| normal.cdf(x))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// CDF of the semicircle law on `[-2r, 2r]`.
pub fn semicircle_cdf(x: f64, radius: f64) -> f64 {
    let t = (x / radius).clamp(-2.0, 2.0);
    0.5 + (t * (4.0 - t * t).sqrt() / 4.0 + (t / 2.0).asin()) / std::f64::consts::PI
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len(), "regression needs equal lengths");
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let slope_stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_stderr }
}

/// Fit `y ~ x^slope` on a log-log scale.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    least_squares(&lx, &ly)
}
