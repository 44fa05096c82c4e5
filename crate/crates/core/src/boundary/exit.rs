use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{common_prefix, DEFAULT_CONFIRM_MARGIN, STEP_CAP};
use crate::error::{Error, Result};
use crate::green::tree_hitting_solve;
use crate::groups::{Element, Gen};
use crate::rng::trial_rng;
use crate::stats::{binomial_sd, bonferroni_z, fit_line_weighted, mean_stderr, MeanStderr};
use crate::walks::StepLaw;

/// Word-metric radius of the neighbourhood searched for a heavy atom.
pub const EXIT_NEIGHBOURHOOD: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitRow {
    pub radius: f64,
    pub element: String,
    pub length: usize,
    pub count: u64,
    pub mass: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitReport {
    pub radius: f64,
    pub trials: u64,
    pub excluded: u64,
    #[serde(skip)]
    pub atoms: BTreeMap<Element, u64>,
    /// `e^{−R}`.
    pub bound: f64,
    pub max_atom: f64,
    pub max_atom_sd: f64,
    /// `max_atom − 3·sd ≤ e^{−R}`.
    pub upper_ok: bool,
    /// `min_x max_{d(x,y) ≤ 2} ν̂(y) · e^{R}` over visited atoms.
    pub c2: f64,
    pub first_letter_mass: Vec<f64>,
    /// Largest first-letter deviation from uniform, in standard deviations.
    pub symmetry_z: f64,
    pub symmetric: bool,
}

impl ExitReport {
    pub fn rows(&self, law: &StepLaw) -> Vec<ExitRow> {
        let n = (self.trials - self.excluded).max(1) as f64;
        self.atoms
            .iter()
            .map(|(x, &count)| ExitRow {
                radius: self.radius,
                element: law.model().format(x),
                length: x.len(),
                count,
                mass: count as f64 / n,
                bound: self.bound,
            })
            .collect()
    }
}

/// First position with `d_G(e, Z_n) > R`, sampled over `trials` walks.
///
/// The Green distance is accumulated letter by letter; the exit test
/// allows a relative tolerance of 1e−12 so words whose distance equals `R`
/// in exact arithmetic do not exit through rounding.
pub fn exit_measure(law: &StepLaw, radius: f64, trials: usize, seed: u64) -> Result<ExitReport> {
    let table = tree_hitting_solve(law)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("exit radius must be positive".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let model = law.model();
    let threshold = radius * (1.0 + 1e-12);
    let exits: Vec<Option<Element>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut w: Vec<Gen> = Vec::new();
            for _ in 0..STEP_CAP {
                let a = law.sample_index(&mut rng);
                model.step_word(&mut w, law.support()[a].word());
                let d: f64 = w.iter().map(|&g| table.letter_weight(g)).sum();
                if d > threshold {
                    return Some(Element::from_normal_word(w));
                }
            }
            None
        })
        .collect();
    let excluded = exits.iter().filter(|e| e.is_none()).count() as u64;
    let mut atoms: BTreeMap<Element, u64> = BTreeMap::new();
    for x in exits.into_iter().flatten() {
        *atoms.entry(x).or_insert(0) += 1;
    }
    let n = trials as u64 - excluded;
    if n == 0 {
        return Err(Error::Refused("every exit walk hit the step cap".into()));
    }
    let nf = n as f64;
    let bound = (-radius).exp();
    let max_count = atoms.values().copied().max().unwrap_or(0);
    let max_atom = max_count as f64 / nf;
    let max_atom_sd = binomial_sd(max_atom, n);

    let visited: Vec<(&Element, f64)> = atoms.iter().map(|(x, &c)| (x, c as f64 / nf)).collect();
    let c2 = visited
        .iter()
        .map(|(x, _)| {
            visited
                .iter()
                .filter(|(y, _)| tree_distance(x.word(), y.word()) <= EXIT_NEIGHBOURHOOD)
                .map(|&(_, p)| p)
                .fold(0.0, f64::max)
                / bound
        })
        .fold(f64::INFINITY, f64::min);

    let gens = model.num_generators();
    let mut first = vec![0u64; gens];
    for (x, &c) in &atoms {
        if let Some(&g) = x.word().first() {
            first[g as usize] += c;
        }
    }
    let first_letter_mass: Vec<f64> = first.iter().map(|&c| c as f64 / nf).collect();
    let uniform = 1.0 / gens as f64;
    let sd = binomial_sd(uniform, n).max(1e-12);
    let symmetry_z = first_letter_mass.iter().map(|p| (p - uniform).abs() / sd).fold(0.0, f64::max);

    Ok(ExitReport {
        radius,
        trials: trials as u64,
        excluded,
        atoms,
        bound,
        max_atom,
        max_atom_sd,
        upper_ok: max_atom - 3.0 * max_atom_sd <= bound,
        c2,
        first_letter_mass,
        symmetry_z,
        symmetric: symmetry_z <= bonferroni_z(gens),
    })
}

fn tree_distance(a: &[Gen], b: &[Gen]) -> usize {
    let c = common_prefix(a, b);
    a.len() + b.len() - 2 * c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    #[serde(rename = "D")]
    pub d: usize,
    pub tail_prob: f64,
    pub fitted_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub n: usize,
    pub trials: u64,
    pub excluded: u64,
    pub rows: Vec<DeviationRow>,
    /// Decay rate `b` of `P[d(Z_n, ray) ≥ D] ≈ C e^{−bD}`.
    pub b: f64,
    pub r_squared: f64,
    /// Tail probabilities never increase along the grid.
    pub monotone: bool,
}

/// Tail of the distance from `Z_n` to the ray `[e, Z_∞)`.
///
/// After step `n` the walk continues until its length exceeds `|Z_n|` by
/// the confirmation margin; the prefix of length `|Z_n|` is then the
/// prefix of `Z_∞` up to probability `f_max^{margin+1}`. On a tree the
/// distance to the ray is `|Z_n|` minus the common prefix length.
/// The fit weights each `log P̂` by its tail count, the inverse Poisson
/// variance of a log count.
pub fn deviation_profile(law: &StepLaw, n: usize, trials: usize, grid: &[usize], seed: u64) -> Result<DeviationReport> {
    tree_hitting_solve(law)?;
    if trials == 0 || grid.len() < 2 {
        return Err(Error::InvalidParameter("need trials and at least two grid points".into()));
    }
    let model = law.model();
    let distances: Vec<Option<usize>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut w: Vec<Gen> = Vec::new();
            for _ in 0..n {
                let a = law.sample_index(&mut rng);
                model.step_word(&mut w, law.support()[a].word());
            }
            let zn = w.clone();
            let goal = zn.len() + DEFAULT_CONFIRM_MARGIN;
            for _ in 0..STEP_CAP {
                if w.len() >= goal {
                    return Some(zn.len() - common_prefix(&zn, &w));
                }
                let a = law.sample_index(&mut rng);
                model.step_word(&mut w, law.support()[a].word());
            }
            None
        })
        .collect();
    let excluded = distances.iter().filter(|d| d.is_none()).count() as u64;
    let kept: Vec<usize> = distances.into_iter().flatten().collect();
    let total = kept.len() as u64;
    if total == 0 {
        return Err(Error::Refused("every deviation walk hit the step cap".into()));
    }
    let tails: Vec<f64> = grid
        .iter()
        .map(|&d| kept.iter().filter(|&&x| x >= d).count() as f64 / total as f64)
        .collect();
    let monotone = tails.windows(2).all(|w| w[1] <= w[0]);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (&d, &p) in grid.iter().zip(&tails) {
        if p > 0.0 {
            xs.push(d as f64);
            ys.push(p.ln());
            ws.push(total as f64 * p);
        }
    }
    let fit = fit_line_weighted(&xs, &ys, &ws).ok_or(Error::Refused("fewer than two non-empty tail points".into()))?;
    let b = -fit.slope;
    let rows = grid
        .iter()
        .zip(&tails)
        .map(|(&d, &tail_prob)| DeviationRow { d, tail_prob, fitted_b: b })
        .collect();
    Ok(DeviationReport { n, trials: trials as u64, excluded, rows, b, r_squared: fit.r_squared, monotone })
}

/// `E[(Z_m | Z_{m+n+k})_{Z_{m+n}}]` in the word metric of a tree.
pub fn gromov_control(law: &StepLaw, m: usize, n: usize, k: usize, trials: usize, seed: u64) -> Result<MeanStderr> {
    tree_hitting_solve(law)?;
    let model = law.model();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut w: Vec<Gen> = Vec::new();
            let mut snaps = Vec::with_capacity(3);
            for t in 1..=m + n + k {
                let a = law.sample_index(&mut rng);
                model.step_word(&mut w, law.support()[a].word());
                if t == m || t == m + n {
                    snaps.push(w.clone());
                }
            }
            if m == 0 {
                snaps.insert(0, Vec::new());
            }
            if n == 0 {
                snaps.insert(1, snaps[0].clone());
            }
            let (x, base, y) = (&snaps[0], &snaps[1], &w);
            let dxb = tree_distance(x, base) as f64;
            let dyb = tree_distance(y, base) as f64;
            let dxy = tree_distance(x, y) as f64;
            (dxb + dyb - dxy) / 2.0
        })
        .collect();
    Ok(mean_stderr(&samples))
}
