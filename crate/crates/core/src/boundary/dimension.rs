use serde::Serialize;

use super::{sample_boundary, BoundaryPoint, CylinderMass, EmpiricalMeasure, DEFAULT_CONFIRM_MARGIN, MIN_SHADOW_SAMPLES};
use crate::error::{Error, Result};
use crate::green::tree_hitting_solve;
use crate::stats::{fit_line, mean_stderr};
use crate::walks::StepLaw;

/// Expected samples per cylinder required at the deepest depth of a
/// dimension fit.
pub const MIN_CELL_HITS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimRow {
    pub depth: usize,
    pub r: f64,
    /// Geometric mean of `ν̂(cyl_D(a))` over samples, after the
    /// Miller–Madow correction.
    pub nu_mass: f64,
    pub log_ratio: f64,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub epsilon: f64,
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub samples: u64,
    pub excluded_samples: u64,
    pub rows: Vec<DimRow>,
    /// Depths with no occupied cylinder.
    pub excluded_depths: Vec<usize>,
}

/// Slope of `log ν̂(B_ε(a, r))` against `log r` on the depth grid, with
/// `r_D = e^{−εD}` so that the ball is the depth-`D` cylinder.
pub fn pointwise_dimension(
    law: &StepLaw,
    epsilon: f64,
    samples: usize,
    depths: &[usize],
    seed: u64,
) -> Result<DimensionReport> {
    Ok(pointwise_dimension_with_measure(law, epsilon, samples, depths, seed)?.0)
}

/// [`pointwise_dimension`], also returning the boundary sample.
pub fn pointwise_dimension_with_measure(
    law: &StepLaw,
    epsilon: f64,
    samples: usize,
    depths: &[usize],
    seed: u64,
) -> Result<(DimensionReport, EmpiricalMeasure)> {
    let max_depth = check_grid(epsilon, depths)?;
    let sphere = law.model().sphere_sizes(max_depth as u32)?;
    let hits = samples as f64 / sphere[max_depth] as f64;
    if hits < MIN_CELL_HITS {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples give {hits:.1} expected hits per depth-{max_depth} cylinder, need {MIN_CELL_HITS}"
        )));
    }
    let measure = sample_boundary(law, samples, max_depth, DEFAULT_CONFIRM_MARGIN, seed)?;
    Ok((dimension_from_measure(&measure, epsilon, depths)?, measure))
}

fn check_grid(epsilon: f64, depths: &[usize]) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    if depths.len() < 2 || depths.windows(2).any(|w| w[0] >= w[1]) || depths[0] == 0 {
        return Err(Error::InvalidParameter("depth grid must be increasing, positive, with two or more depths".into()));
    }
    Ok(*depths.last().unwrap())
}

/// The fit on an existing sample.
///
/// Averaging `log ν̂(cyl_D(a))` over the samples gives minus the plug-in
/// entropy of the depth-`D` partition; it is corrected by `(K−1)/(2N)`
/// with `K` occupied cells. The stderr treats each sample's regression
/// contribution `Σ_D w_D log ν̂(cyl_D(a))` as i.i.d.
pub fn dimension_from_measure(m: &EmpiricalMeasure, epsilon: f64, depths: &[usize]) -> Result<DimensionReport> {
    let max_depth = check_grid(epsilon, depths)?;
    if max_depth > m.depth {
        return Err(Error::InsufficientDepth { required: max_depth });
    }
    let n = m.total as f64;
    let mut used = Vec::new();
    let mut excluded_depths = Vec::new();
    let mut ys = Vec::new();
    for &d in depths {
        let counts = m.counts(d);
        if counts.is_empty() {
            excluded_depths.push(d);
            continue;
        }
        let plugin: f64 = counts.values().map(|&c| (c as f64 / n) * (c as f64 / n).ln()).sum();
        let k = counts.len() as f64;
        used.push(d);
        ys.push(plugin - (k - 1.0) / (2.0 * n));
    }
    let xs: Vec<f64> = used.iter().map(|&d| -epsilon * d as f64).collect();
    let fit = fit_line(&xs, &ys).ok_or(Error::Refused("fewer than two usable depths".into()))?;

    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let weights: Vec<f64> = xs.iter().map(|x| (x - mx) / sxx).collect();
    let contributions: Vec<f64> = m
        .points
        .iter()
        .map(|a| {
            used.iter()
                .zip(&weights)
                .map(|(&d, w)| w * (m.count(&a.word()[..d]) as f64 / n).ln())
                .sum()
        })
        .collect();
    let stderr = mean_stderr(&contributions).stderr.unwrap_or(0.0);

    let rows = used
        .iter()
        .zip(&xs)
        .zip(&ys)
        .map(|((&depth, &x), &y)| DimRow {
            depth,
            r: x.exp(),
            nu_mass: y.exp(),
            log_ratio: y / x,
            slope: fit.slope,
            stderr,
        })
        .collect();
    Ok(DimensionReport {
        epsilon,
        slope: fit.slope,
        stderr,
        r_squared: fit.r_squared,
        samples: m.total,
        excluded_samples: m.excluded,
        rows,
        excluded_depths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub max_ratio: f64,
    pub tested: usize,
    pub skipped: usize,
}

/// `ν(B_ε(a, 2r)) / ν(B_ε(a, r))` over centres and radii.
///
/// A closed visual ball `{b : e^{−ε(a|b)} ≤ r}` is the cylinder of depth
/// `⌈−ln r / ε⌉`. Pairs deeper than the centre or the measure, or with an
/// empty inner ball, are skipped.
pub fn doubling_check(
    measure: &dyn CylinderMass,
    centres: &[BoundaryPoint],
    radii: &[f64],
    epsilon: f64,
) -> Result<DoublingReport> {
    if !(epsilon > 0.0) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter("epsilon and radii must be positive".into()));
    }
    let depth_of = |r: f64| (-r.ln() / epsilon - 1e-9).ceil().max(0.0) as usize;
    let degenerate = measure.support(&[]).is_some_and(|n| n < 2);
    let mut report = DoublingReport { max_ratio: 0.0, tested: 0, skipped: 0 };
    for a in centres {
        for &r in radii {
            let inner = depth_of(r);
            let outer = depth_of(2.0 * r);
            if degenerate || inner > a.depth() || inner > measure.max_depth() {
                report.skipped += 1;
                continue;
            }
            let small = measure.mass(&a.word()[..inner]);
            if small <= 0.0 {
                report.skipped += 1;
                continue;
            }
            let big = measure.mass(&a.word()[..outer]);
            report.max_ratio = report.max_ratio.max(big / small);
            report.tested += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhlforsRow {
    pub depth: usize,
    pub cells: usize,
    /// Cells with fewer than the minimum sample count, left out of the range.
    pub flagged: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhlforsReport {
    pub epsilon: f64,
    pub rows: Vec<AhlforsRow>,
    /// Smallest `C` with every unflagged ratio in `[1/C, C]`.
    pub c: f64,
}

/// `ν̂(B^G_ε(a, r)) / r^{1/ε}` in the Green visual metric, with `r` chosen
/// as `e^{−ε d_G(e, p)}` so the ball is the cylinder of the prefix `p`.
pub fn ahlfors_check(law: &StepLaw, measure: &EmpiricalMeasure, epsilon: f64, depths: &[usize]) -> Result<AhlforsReport> {
    let table = tree_hitting_solve(law)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut c: f64 = 1.0;
    for &depth in depths {
        if depth > measure.depth {
            return Err(Error::InsufficientDepth { required: depth });
        }
        let counts = measure.counts(depth);
        let mut row = AhlforsRow { depth, cells: counts.len(), flagged: 0, min_ratio: f64::INFINITY, max_ratio: 0.0 };
        for (p, count) in counts {
            if count < MIN_SHADOW_SAMPLES {
                row.flagged += 1;
                continue;
            }
            let r = (-epsilon * table.green_distance(&p)).exp();
            let ratio = count as f64 / measure.total as f64 / r.powf(1.0 / epsilon);
            row.min_ratio = row.min_ratio.min(ratio);
            row.max_ratio = row.max_ratio.max(ratio);
            c = c.max(ratio).max(1.0 / ratio);
        }
        rows.push(row);
    }
    Ok(AhlforsReport { epsilon, rows, c })
}
