//! Symmetric step laws and reproducible random-walk trajectories.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{Element, Gen, GroupModel};
use crate::rng::{trial_seed, TrialRng};
use crate::stats::chi_square_sf;

pub const SUM_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_GENERATION_DEPTH: usize = 4;
/// p-value below which an increment histogram is flagged.
pub const INCREMENT_FLAG_P: f64 = 1e-6;

/// Finitely supported symmetric probability measure on a group.
///
/// Atoms are stored in shortlex order; an atom and its inverse share one
/// probability cell, so `μ(γ) = μ(γ⁻¹)` holds bit for bit.
#[derive(Debug, Clone)]
pub struct StepLaw {
    model: Arc<GroupModel>,
    name: String,
    atoms: Vec<Element>,
    inverse_atom: Vec<usize>,
    cell: Vec<usize>,
    cells: Vec<f64>,
    cdf: Vec<f64>,
}

impl StepLaw {
    /// Builds a law from `(element, probability)` entries. Missing inverses
    /// are added with the same probability; an inverse listed explicitly
    /// must carry the same probability.
    pub fn new(model: Arc<GroupModel>, name: &str, entries: &[(Element, f64)]) -> Result<Self> {
        Self::with_generation_depth(model, name, entries, DEFAULT_GENERATION_DEPTH)
    }

    pub fn from_words(model: Arc<GroupModel>, name: &str, entries: &[(&str, f64)]) -> Result<Self> {
        let parsed = entries
            .iter()
            .map(|(w, p)| Ok((model.element(w)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, name, &parsed)
    }

    pub fn with_generation_depth(
        model: Arc<GroupModel>,
        name: &str,
        entries: &[(Element, f64)],
        depth: usize,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        let mut given: Vec<(Element, f64)> = Vec::new();
        for (x, p) in entries {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::InvalidLaw(format!(
                    "probability {p} of {} is not strictly positive",
                    model.format(x)
                )));
            }
            if given.iter().any(|(y, _)| y == x) {
                return Err(Error::InvalidLaw(format!("atom {} listed twice", model.format(x))));
            }
            given.push((x.clone(), *p));
        }
        let mut atoms: Vec<Element> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (x, p) in &given {
            if atoms.contains(x) {
                continue;
            }
            let xi = model.inverse(x);
            if let Some((_, q)) = given.iter().find(|(y, _)| *y == xi) {
                if q != p {
                    return Err(Error::InvalidLaw(format!(
                        "asymmetric law: mu({}) = {p} but mu({}) = {q}",
                        model.format(x),
                        model.format(&xi)
                    )));
                }
            }
            atoms.push(x.clone());
            probs.push(*p);
            if xi != *x {
                atoms.push(xi);
                probs.push(*p);
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total} after inverse closure"
            )));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| atoms[i].cmp(&atoms[j]));
        let atoms: Vec<Element> = order.iter().map(|&i| atoms[i].clone()).collect();
        let probs: Vec<f64> = order.iter().map(|&i| probs[i]).collect();

        let inverse_atom: Vec<usize> = atoms
            .iter()
            .map(|x| {
                let xi = model.inverse(x);
                atoms.iter().position(|y| *y == xi).expect("inverse closure")
            })
            .collect();
        let mut cell = vec![usize::MAX; atoms.len()];
        let mut cells = Vec::new();
        for i in 0..atoms.len() {
            if cell[i] == usize::MAX {
                cell[i] = cells.len();
                cell[inverse_atom[i]] = cells.len();
                cells.push(probs[i]);
            }
        }
        let mut cdf = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for i in 0..atoms.len() {
            acc += cells[cell[i]];
            cdf.push(acc);
        }
        let law = Self { model, name: name.to_string(), atoms, inverse_atom, cell, cells, cdf };
        law.check_generation(depth)?;
        Ok(law)
    }

    /// Simple random walk: uniform on the symmetric generating set.
    pub fn srw(model: Arc<GroupModel>) -> Self {
        let n = model.num_generators();
        let entries: Vec<(Element, f64)> = model
            .generators()
            .ids()
            .map(|g| (model.generator(g), 1.0 / n as f64))
            .collect();
        // Uniform weights over a generating set always pass validation up to
        // rounding of the sum, which is exact to well below the tolerance.
        Self::new(model, "srw", &entries).expect("uniform law on generators is valid")
    }

    /// Products of at most `depth` atoms must contain every generator.
    fn check_generation(&self, depth: usize) -> Result<()> {
        let mut seen: HashSet<Element> = HashSet::new();
        let mut frontier = vec![Element::identity()];
        seen.insert(Element::identity());
        for _ in 0..depth {
            let mut next = Vec::new();
            for x in &frontier {
                for a in &self.atoms {
                    let y = self.model.multiply(x, a);
                    if seen.insert(y.clone()) {
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        let missing: Vec<String> = self
            .model
            .generators()
            .ids()
            .filter(|&g| !seen.contains(&self.model.generator(g)))
            .map(|g| self.model.generators().symbol(g).to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidLaw(format!(
                "support does not generate the group within {depth} steps; missing {}",
                missing.join(",")
            )))
        }
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<GroupModel> {
        &self.model
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn support(&self) -> &[Element] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.cells[self.cell[i]]
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.prob(i)).collect()
    }

    pub fn inverse_atom(&self, i: usize) -> usize {
        self.inverse_atom[i]
    }

    /// Mass of the identity (laziness), zero when absent from the support.
    pub fn identity_mass(&self) -> f64 {
        self.atoms
            .iter()
            .position(Element::is_identity)
            .map_or(0.0, |i| self.prob(i))
    }

    /// True when every atom is a generator or the identity.
    pub fn is_nearest_neighbour(&self) -> bool {
        self.atoms.iter().all(|a| a.len() <= 1)
    }

    /// `μ(g)` for generator `g` of a nearest-neighbour law.
    pub fn generator_mass(&self, g: Gen) -> f64 {
        self.atoms
            .iter()
            .position(|a| a.word() == [g])
            .map_or(0.0, |i| self.prob(i))
    }

    /// Inverse-CDF draw over the fixed support order.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.atoms.len() - 1)
    }
}

/// Sampled path `Z_0 = e, Z_1, …, Z_n`. Positions are replayed from the
/// increments on demand rather than stored.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub law: String,
    pub support_len: usize,
    pub increments: Vec<u32>,
    #[serde(skip)]
    pub final_position: Element,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    /// Iterator over `Z_0, …, Z_n`.
    pub fn positions<'a>(&'a self, law: &'a StepLaw) -> impl Iterator<Item = Element> + 'a {
        let model = law.model();
        let mut word: Vec<Gen> = Vec::new();
        std::iter::once(Element::identity()).chain(self.increments.iter().map(move |&i| {
            model.step_word(&mut word, law.support()[i as usize].word());
            model.settle(word.clone())
        }))
    }
}

/// Samples `n` steps from a stream seeded with `seed`.
pub fn sample_path(law: &StepLaw, n: usize, seed: u64) -> Trajectory {
    let mut rng = TrialRng::seed_from_u64(seed);
    let model = law.model();
    let mut increments = Vec::with_capacity(n);
    let mut word = Vec::new();
    for _ in 0..n {
        let i = law.sample_index(&mut rng);
        model.step_word(&mut word, law.support()[i].word());
        increments.push(i as u32);
    }
    Trajectory {
        seed,
        law: law.name().to_string(),
        support_len: law.len(),
        increments,
        final_position: model.settle(word),
    }
}

/// Trial `index` of a run with master seed `master`.
pub fn sample_trial(law: &StepLaw, n: usize, master: u64, index: u64) -> Trajectory {
    sample_path(law, n, trial_seed(master, index))
}

/// Runs a walk from the identity, calling `visit(step, word)` after every
/// step with the working word (see [`GroupModel::step_word`]).
pub fn walk_with<R: Rng + ?Sized>(
    law: &StepLaw,
    n: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, &[Gen]),
) -> Vec<Gen> {
    let model = law.model();
    let mut word = Vec::new();
    for k in 1..=n {
        let i = law.sample_index(rng);
        model.step_word(&mut word, law.support()[i].word());
        visit(k, &word);
    }
    word
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementCheck {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub flagged: bool,
}

/// Pearson chi-square of the increment histogram against the law.
pub fn empirical_increment_check(traj: &Trajectory, law: &StepLaw) -> Result<IncrementCheck> {
    if traj.support_len != law.len() || traj.law != law.name() {
        return Err(Error::SupportMismatch(format!(
            "trajectory of law {:?} ({} atoms) checked against {:?} ({} atoms)",
            traj.law,
            traj.support_len,
            law.name(),
            law.len()
        )));
    }
    let df = law.len().saturating_sub(1);
    let n = traj.steps();
    if n == 0 {
        return Ok(IncrementCheck { statistic: 0.0, degrees_of_freedom: df, p_value: 1.0, flagged: false });
    }
    let mut counts = vec![0u64; law.len()];
    for &i in &traj.increments {
        let slot = counts
            .get_mut(i as usize)
            .ok_or_else(|| Error::SupportMismatch(format!("increment index {i} out of range")))?;
        *slot += 1;
    }
    let statistic: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let expected = n as f64 * law.prob(i);
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let p_value = if df == 0 { 1.0 } else { chi_square_sf(statistic, df as f64) };
    Ok(IncrementCheck { statistic, degrees_of_freedom: df, p_value, flagged: p_value < INCREMENT_FLAG_P })
}
