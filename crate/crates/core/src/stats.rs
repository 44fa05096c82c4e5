//! Small statistics toolkit shared by the estimators.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    /// `None` when fewer than two samples were available.
    pub stderr: Option<f64>,
    pub count: usize,
}

pub fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len();
    if n == 0 {
        return MeanStderr { mean: 0.0, stderr: None, count: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let stderr = (n >= 2).then(|| {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    MeanStderr { mean, stderr, count: n }
}

/// Sample covariance of the means of two paired samples, i.e. cov(x,y)/n.
pub fn covariance_of_means(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let cov = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1) as f64;
    cov / n as f64
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

impl WilsonInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }
}

pub fn wilson(successes: u64, trials: u64, z: f64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { estimate: 0.0, low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    WilsonInterval {
        estimate: p,
        low: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        high: if successes == trials { 1.0 } else { (center + half).min(1.0) },
    }
}

/// Result of a (weighted) least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    /// Standard error of the slope under the usual homoscedastic model;
    /// `None` with fewer than three points.
    pub slope_stderr: Option<f64>,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let w = vec![1.0; xs.len()];
    fit_line_weighted(xs, ys, &w)
}

pub fn fit_line_weighted(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || ws.len() != n {
        return None;
    }
    let sw: f64 = ws.iter().sum();
    if sw <= 0.0 {
        return None;
    }
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
        syy += w * (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = (n >= 3).then(|| {
        // Rescale weights to sum to n so the residual variance is per point.
        let scale = n as f64 / sw;
        ((ss_res * scale / (n - 2) as f64) / (sxx * scale)).sqrt()
    });
    Some(LineFit { slope, intercept, r_squared, slope_stderr })
}

/// Upper tail probability of a chi-square variable.
pub fn chi_square_sf(statistic: f64, df: f64) -> f64 {
    match ChiSquared::new(df) {
        Ok(dist) => 1.0 - dist.cdf(statistic),
        Err(_) => f64::NAN,
    }
}

/// Two-sided normal threshold at family-wise level equal to the 3σ level,
/// split across `comparisons` tests (Bonferroni).
pub fn bonferroni_z(comparisons: usize) -> f64 {
    let m = comparisons.max(1) as f64;
    let three_sigma_two_sided = 2.0 * (1.0 - standard_normal().cdf(3.0));
    let alpha = three_sigma_two_sided / m;
    standard_normal().inverse_cdf(1.0 - alpha / 2.0)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// Binomial standard deviation of an empirical proportion.
pub fn binomial_sd(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
