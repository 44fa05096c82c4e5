//! Drift, Green speed (the entropy), volume growth, the fundamental
//! inequality `h ≤ ℓv`, the dimension prediction `ℓ_G/(εℓ)` and
//! comparisons between two walks on one group.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{lumped_log_hitting, GreenOracle};
use crate::groups::{Element, GroupModel};
use crate::hypcheck::MetricHandle;
use crate::rng::{derive_seed, trial_rng};
use crate::stats::{bonferroni_z, covariance_of_means, fit_line, mean_stderr, LineFit};
use crate::walks::{walk_with, StepLaw};

pub const DEFAULT_STEPS: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 200;

/// Mean of per-trial `d(e, Z_n)/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub mean: f64,
    /// `None` for a single trial.
    pub stderr: Option<f64>,
    pub n_steps: usize,
    pub trials: usize,
    pub metric: String,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl RateEstimate {
    fn from_samples(samples: Vec<f64>, n_steps: usize, metric: String) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("non-finite rate sample for {metric}")));
        }
        let m = mean_stderr(&samples);
        Ok(Self { mean: m.mean, stderr: m.stderr, n_steps, trials: samples.len(), metric, samples })
    }

    /// Standard error, 0 when undefined.
    pub fn se(&self) -> f64 {
        self.stderr.unwrap_or(0.0)
    }
}

fn check_run(n: usize, trials: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("walk length n must be positive".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    Ok(())
}

/// Endpoints `Z_n` of `trials` independent walks; trial `i` uses stream
/// `(seed, i)`.
pub fn endpoints(law: &StepLaw, n: usize, trials: usize, seed: u64) -> Vec<Element> {
    let model = law.model();
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            model.settle(walk_with(law, n, &mut rng, |_, _| {}))
        })
        .collect()
}

/// `Z_t` at each of the sorted `times` along one walk per trial.
pub fn positions_at(law: &StepLaw, times: &[usize], trials: usize, seed: u64) -> Vec<Vec<Element>> {
    let model = law.model();
    let last = times.iter().copied().max().unwrap_or(0);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut words = vec![Vec::new(); times.len()];
            walk_with(law, last, &mut rng, |k, w| {
                for (slot, &t) in times.iter().enumerate() {
                    if t == k {
                        words[slot] = w.to_vec();
                    }
                }
            });
            words.into_iter().map(|w| model.settle(w)).collect()
        })
        .collect()
}

fn rates(metric: &MetricHandle, ends: &[Element], n: usize) -> Result<Vec<f64>> {
    let e = Element::identity();
    ends.par_iter().map(|z| Ok(metric.distance(&e, z)? / n as f64)).collect()
}

/// `ℓ = lim d(e, Z_n)/n` in `metric`.
pub fn drift(law: &StepLaw, metric: &MetricHandle, n: usize, trials: usize, seed: u64) -> Result<RateEstimate> {
    check_run(n, trials)?;
    let ends = endpoints(law, n, trials, seed);
    RateEstimate::from_samples(rates(metric, &ends, n)?, n, metric.name())
}

/// `ℓ_G = lim d_G(e, Z_n)/n`, which equals the asymptotic entropy `h`.
pub fn green_speed(oracle: &GreenOracle, n: usize, trials: usize, seed: u64) -> Result<RateEstimate> {
    check_run(n, trials)?;
    let ends = endpoints(oracle.law(), n, trials, seed);
    let e = Element::identity();
    let samples: Vec<f64> = ends
        .par_iter()
        .map(|z| Ok(oracle.green_distance(&e, z)? / n as f64))
        .collect::<Result<_>>()?;
    RateEstimate::from_samples(samples, n, format!("green[{}]", oracle.method()))
}

/// Margin added to `|Z_n|` for the ball radius of the independent check.
pub const CHECK_MARGIN: u32 = 25;

/// Green speed and its independent recomputation on the same paths, with
/// `−log F(e, Z_n)` from the lumped ball recursion at radius `|Z_n| + 25`
/// instead of the first-step fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenSpeedCheck {
    pub green_speed: RateEstimate,
    pub independent: RateEstimate,
    pub difference: f64,
    /// `|difference| ≤ 2·stderr`.
    pub agrees: bool,
}

pub fn green_speed_check(oracle: &GreenOracle, n: usize, trials: usize, seed: u64) -> Result<GreenSpeedCheck> {
    check_run(n, trials)?;
    let law = oracle.law();
    let ends = endpoints(law, n, trials, seed);
    let e = Element::identity();
    let main: Vec<f64> = ends
        .par_iter()
        .map(|z| Ok(oracle.green_distance(&e, z)? / n as f64))
        .collect::<Result<_>>()?;
    let alt: Vec<f64> = ends
        .par_iter()
        .map(|z| Ok(-lumped_log_hitting(law, z, z.len() as u32 + CHECK_MARGIN)? / n as f64))
        .collect::<Result<_>>()?;
    let green_speed = RateEstimate::from_samples(main, n, format!("green[{}]", oracle.method()))?;
    let independent = RateEstimate::from_samples(alt, n, "green[lumped_ball]".into())?;
    let difference = green_speed.mean - independent.mean;
    let agrees = difference.abs() <= 2.0 * green_speed.se().max(independent.se());
    Ok(GreenSpeedCheck { green_speed, independent, difference, agrees })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeGrowth {
    /// Least-squares slope of `log|B(R)|` over `R ∈ [Rmax/2, Rmax]`.
    pub slope: f64,
    pub fit: LineFit,
    /// Exact rate for free groups and free products.
    pub exact: Option<f64>,
    pub ball_sizes: Vec<u64>,
}

pub fn volume_growth(model: &GroupModel, rmax: u32) -> Result<VolumeGrowth> {
    if rmax < 2 {
        return Err(Error::InvalidParameter("volume growth needs Rmax ≥ 2".into()));
    }
    let required = model.ball_size_estimate(rmax);
    if required > model.element_budget() {
        return Err(Error::BudgetExceeded { required, budget: model.element_budget() });
    }
    let spheres = model.sphere_sizes(rmax)?;
    let ball_sizes: Vec<u64> = spheres
        .iter()
        .scan(0u64, |acc, &s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let lo = (rmax / 2) as usize;
    let xs: Vec<f64> = (lo..=rmax as usize).map(|r| r as f64).collect();
    let ys: Vec<f64> = (lo..=rmax as usize).map(|r| (ball_sizes[r] as f64).ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::InvalidParameter("degenerate growth fit".into()))?;
    Ok(VolumeGrowth { slope: fit.slope, fit, exact: model.exact_growth_rate(), ball_sizes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapClass {
    EqualityConsistent,
    StrictlyNegative,
    /// Positive beyond the threshold, which the inequality forbids.
    Violation,
}

/// `h − ℓv` from paired per-trial samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub h: f64,
    pub h_stderr: f64,
    pub l: f64,
    pub l_stderr: f64,
    pub v: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    /// `gap/gap_stderr`, with the stderr floored at [`NUMERICAL_FLOOR`].
    pub z: f64,
    pub threshold: f64,
    pub class: GapClass,
}

/// Paired per-trial word drift and Green speed on the same paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePair {
    pub word: RateEstimate,
    pub green: RateEstimate,
}

pub fn rate_pair(oracle: &GreenOracle, n: usize, trials: usize, seed: u64) -> Result<RatePair> {
    check_run(n, trials)?;
    let law = oracle.law();
    let model = law.model();
    let ends = endpoints(law, n, trials, seed);
    let e = Element::identity();
    let pairs: Vec<(f64, f64)> = ends
        .par_iter()
        .map(|z| Ok((model.word_length(z)? as f64 / n as f64, oracle.green_distance(&e, z)? / n as f64)))
        .collect::<Result<_>>()?;
    let (w, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(RatePair {
        word: RateEstimate::from_samples(w, n, "word".into())?,
        green: RateEstimate::from_samples(g, n, format!("green[{}]", oracle.method()))?,
    })
}

fn classify(z: f64, threshold: f64) -> GapClass {
    if z <= -threshold {
        GapClass::StrictlyNegative
    } else if z >= threshold {
        GapClass::Violation
    } else {
        GapClass::EqualityConsistent
    }
}

/// Floor on standard errors so that identities which hold exactly (such as
/// `h = ℓv` for simple walks on trees) are not classified by rounding noise.
pub const NUMERICAL_FLOOR: f64 = 1e-12;

fn z_score(value: f64, se: f64) -> f64 {
    value / se.max(NUMERICAL_FLOOR)
}

/// `h − ℓv` with `h = ℓ_G`, the word drift `ℓ` and growth `v`, classified
/// at 3σ split over `comparisons` reported comparisons.
pub fn fundamental_gap(pair: &RatePair, v: f64, comparisons: usize) -> Result<GapReport> {
    let (g, w) = (&pair.green.samples, &pair.word.samples);
    if g.len() != w.len() || g.is_empty() {
        return Err(Error::InvalidParameter("gap needs paired samples".into()));
    }
    let diffs: Vec<f64> = g.iter().zip(w).map(|(h, l)| h - v * l).collect();
    let m = mean_stderr(&diffs);
    let gap_stderr = m.stderr.unwrap_or(0.0);
    let threshold = bonferroni_z(comparisons);
    let z = z_score(m.mean, gap_stderr);
    Ok(GapReport {
        h: pair.green.mean,
        h_stderr: pair.green.se(),
        l: pair.word.mean,
        l_stderr: pair.word.se(),
        v,
        gap: m.mean,
        gap_stderr,
        z,
        threshold,
        class: classify(z, threshold),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionPrediction {
    pub epsilon: f64,
    /// `ℓ_G/(εℓ)`.
    pub value: f64,
    pub stderr: f64,
    /// `v/ε`.
    pub ceiling: f64,
}

/// `ℓ_G/(εℓ)`, with a delta-method stderr that uses the pairing of the
/// two rates on the same paths.
pub fn dimension_prediction(pair: &RatePair, epsilon: f64, v: f64) -> Result<DimensionPrediction> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("ε must be positive".into()));
    }
    let (lg, l) = (pair.green.mean, pair.word.mean);
    if l <= 3.0 * pair.word.se() || l <= 0.0 {
        return Err(Error::Refused(format!("drift {l} is consistent with 0")));
    }
    let ratio = lg / l;
    let cov = covariance_of_means(&pair.green.samples, &pair.word.samples);
    let var = (pair.green.se().powi(2) + ratio * ratio * pair.word.se().powi(2) - 2.0 * ratio * cov) / (l * l);
    Ok(DimensionPrediction {
        epsilon,
        value: ratio / epsilon,
        stderr: var.max(0.0).sqrt() / epsilon,
        ceiling: v / epsilon,
    })
}

/// `lim −(1/n) log G_B(e, Z_n^A)`: walk A measured in the Green metric of
/// law B.
pub fn cross_green_speed(law_a: &StepLaw, oracle_b: &GreenOracle, n: usize, trials: usize, seed: u64) -> Result<RateEstimate> {
    check_run(n, trials)?;
    if law_a.model().kind() != oracle_b.law().model().kind() {
        return Err(Error::InvalidParameter("both laws must live on the same group".into()));
    }
    let ends = endpoints(law_a, n, trials, seed);
    let log_diag = oracle_b.diagonal()?.value.ln();
    let e = Element::identity();
    let samples: Vec<f64> = ends
        .par_iter()
        .map(|z| Ok((oracle_b.green_distance(&e, z)? - log_diag) / n as f64))
        .collect::<Result<_>>()?;
    RateEstimate::from_samples(samples, n, format!("green[{}:{}]", oracle_b.law().name(), oracle_b.method()))
}

/// Cross Green speed against the entropy of the walked law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossComparison {
    pub walked: String,
    pub measured_in: String,
    pub cross: f64,
    pub entropy: f64,
    pub difference: f64,
    pub stderr: f64,
    pub z: f64,
    pub threshold: f64,
    /// Cross speed exceeds the entropy beyond the threshold, which means
    /// the two harmonic measures are singular.
    pub strictly_greater: bool,
}

/// Compares `cross_green_speed(A, B)` with `h_A` on the same paths.
pub fn compare_walks(
    oracle_a: &GreenOracle,
    oracle_b: &GreenOracle,
    n: usize,
    trials: usize,
    seed: u64,
    comparisons: usize,
) -> Result<CrossComparison> {
    let cross = cross_green_speed(oracle_a.law(), oracle_b, n, trials, seed)?;
    let h = green_speed(oracle_a, n, trials, seed)?;
    let diffs: Vec<f64> = cross.samples.iter().zip(&h.samples).map(|(c, h)| c - h).collect();
    let m = mean_stderr(&diffs);
    let stderr = m.stderr.unwrap_or(0.0);
    let z = z_score(m.mean, stderr);
    let threshold = bonferroni_z(comparisons);
    Ok(CrossComparison {
        walked: oracle_a.law().name().into(),
        measured_in: oracle_b.law().name().into(),
        cross: cross.mean,
        entropy: h.mean,
        difference: m.mean,
        stderr,
        z,
        threshold,
        strictly_greater: z >= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QiDefect {
    pub radii: Vec<u32>,
    /// `max_{|x| ≤ R} |d1(e,x) − s·d2(e,x)|` per radius.
    pub defects: Vec<f64>,
    /// Strictly increasing across the nested balls.
    pub growing: bool,
}

pub const QI_RADII: [u32; 4] = [2, 4, 6, 8];

/// Quasi-isometry defect of `d1` against `s·d2` over nested balls.
pub fn quasi_isometry_defect(d1: &MetricHandle, d2: &MetricHandle, s: f64, radii: &[u32]) -> Result<QiDefect> {
    let model = d1.model();
    if model.kind() != d2.model().kind() {
        return Err(Error::InvalidParameter("metrics must live on the same group".into()));
    }
    let rmax = radii.iter().copied().max().unwrap_or(0);
    let ball = model.ball_enumerate(rmax)?;
    let e = Element::identity();
    let per_point: Vec<(usize, f64)> = ball
        .par_iter()
        .map(|x| Ok((model.word_length(x)?, (d1.distance(&e, x)? - s * d2.distance(&e, x)?).abs())))
        .collect::<Result<_>>()?;
    let defects: Vec<f64> = radii
        .iter()
        .map(|&r| per_point.iter().filter(|(l, _)| *l <= r as usize).map(|p| p.1).fold(0.0, f64::max))
        .collect();
    let growing = defects.len() >= 2 && defects.windows(2).all(|w| w[1] > w[0] + 1e-9);
    Ok(QiDefect { radii: radii.to_vec(), defects, growing })
}

/// Subadditivity surrogate `E d(Z_{m+n}) ≤ E d(Z_m) + E d(Z_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubadditivityCheck {
    pub mean_m: f64,
    pub mean_n: f64,
    pub mean_sum: f64,
    pub stderr: f64,
    pub holds: bool,
}

pub fn subadditivity_check(
    law: &StepLaw,
    metric: &MetricHandle,
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SubadditivityCheck> {
    check_run(m.min(n), trials)?;
    let e = Element::identity();
    let paths = positions_at(law, &[m, n, m + n], trials, seed);
    let rows: Vec<[f64; 3]> = paths
        .par_iter()
        .map(|p| {
            Ok([metric.distance(&e, &p[0])?, metric.distance(&e, &p[1])?, metric.distance(&e, &p[2])?])
        })
        .collect::<Result<_>>()?;
    let slack: Vec<f64> = rows.iter().map(|r| r[0] + r[1] - r[2]).collect();
    let s = mean_stderr(&slack);
    let col = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
    let stderr = s.stderr.unwrap_or(0.0);
    Ok(SubadditivityCheck {
        mean_m: col(0),
        mean_n: col(1),
        mean_sum: col(2),
        stderr,
        holds: s.mean >= -2.0 * stderr,
    })
}

/// Seed for a labelled sub-experiment.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    derive_seed(seed, label)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesRow {
    pub law: String,
    pub metric: String,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: Option<f64>,
}

impl RatesRow {
    pub fn new(law: &str, r: &RateEstimate) -> Self {
        Self { law: law.into(), metric: r.metric.clone(), n: r.n_steps, trials: r.trials, mean: r.mean, stderr: r.stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub h: f64,
    pub l: f64,
    pub v: f64,
    pub gap: f64,
    pub z: f64,
}

impl From<&GapReport> for GapRow {
    fn from(g: &GapReport) -> Self {
        Self { h: g.h, l: g.l, v: g.v, gap: g.gap, z: g.z }
    }
}
