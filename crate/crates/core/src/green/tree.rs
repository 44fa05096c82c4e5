//! Exact hitting probabilities for nearest-neighbour walks on trees.
//!
//! On a tree every path from `x` to `y` passes through each vertex of the
//! geodesic, so `F(x, y)` is the product of one-letter hitting
//! probabilities `f_s = F(e, s)` along the normal form of `x⁻¹y`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{Element, Gen};
use crate::walks::StepLaw;

pub const TREE_RESIDUAL_TOLERANCE: f64 = 1e-14;
const MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct TreeHittingTable {
    /// `f[s] = F(e, s)` for each generator id.
    pub f: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Checks that `law` lives on a tree Cayley graph with generator support.
pub fn require_tree(law: &StepLaw) -> Result<()> {
    if !law.model().is_tree() {
        return Err(Error::NotTreeModel(format!(
            "{} has a Cayley graph with cycles",
            law.model().describe()
        )));
    }
    if !law.is_nearest_neighbour() {
        return Err(Error::NotTreeModel(format!(
            "law {} charges elements beyond the generators",
            law.name()
        )));
    }
    Ok(())
}

fn first_step_map(mu: &[f64], lazy: f64, inv: &[Gen], f: &[f64], out: &mut [f64]) {
    // Mass of stepping to a neighbour t of e and then coming back.
    let back: Vec<f64> = (0..mu.len()).map(|t| mu[t] * f[inv[t] as usize]).collect();
    let total_back: f64 = back.iter().sum();
    for s in 0..mu.len() {
        let loop_mass = lazy + total_back - back[s];
        out[s] = mu[s] + loop_mass * f[s];
    }
}

/// Minimal solution of `f_s = μ(s) + (μ(e) + Σ_{t≠s} μ(t) f_{t⁻¹}) f_s`,
/// reached by monotone iteration from zero.
pub fn tree_hitting_solve(law: &StepLaw) -> Result<TreeHittingTable> {
    require_tree(law)?;
    let model = law.model();
    let gens = model.generators();
    let mu: Vec<f64> = gens.ids().map(|g| law.generator_mass(g)).collect();
    let inv: Vec<Gen> = gens.ids().map(|g| gens.inverse(g)).collect();
    let lazy = law.identity_mass();
    let n = mu.len();
    let mut f = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        first_step_map(&mu, lazy, &inv, &f, &mut next);
        iterations += 1;
        let change = f
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut f, &mut next);
        // Stop once updates are at the level of rounding.
        if change <= 1e-16 || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    first_step_map(&mu, lazy, &inv, &f, &mut next);
    let residual = f
        .iter()
        .zip(&next)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if residual >= TREE_RESIDUAL_TOLERANCE || f.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::NonFinite(format!(
            "first-step iteration stalled with residual {residual:e} after {iterations} iterations"
        )));
    }
    Ok(TreeHittingTable { f, residual, iterations })
}

impl TreeHittingTable {
    /// `F(e, g)` for a normal-form element.
    pub fn hitting(&self, g: &Element) -> f64 {
        g.word().iter().map(|&s| self.f[s as usize]).product()
    }

    /// `d_G(e, g) = Σ −ln f_s` over the letters of `g`.
    pub fn green_distance(&self, g: &Element) -> f64 {
        g.word().iter().map(|&s| -self.f[s as usize].ln()).sum()
    }

    pub fn letter_weight(&self, s: Gen) -> f64 {
        -self.f[s as usize].ln()
    }

    pub fn max_f(&self) -> f64 {
        self.f.iter().copied().fold(0.0, f64::max)
    }

    /// Return probability `U = μ(e) + Σ_t μ(t) f_{t⁻¹}`.
    pub fn return_probability(&self, law: &StepLaw) -> f64 {
        let gens = law.model().generators();
        law.identity_mass()
            + gens
                .ids()
                .map(|t| law.generator_mass(t) * self.f[gens.inverse(t) as usize])
                .sum::<f64>()
    }

    /// `G(e, e) = 1/(1 − U)`.
    pub fn green_diagonal(&self, law: &StepLaw) -> f64 {
        1.0 / (1.0 - self.return_probability(law))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupModel;
    use std::sync::Arc;

    #[test]
    fn srw_free_group_is_one_third() {
        let law = StepLaw::srw(Arc::new(GroupModel::free_group(2).unwrap()));
        let t = tree_hitting_solve(&law).unwrap();
        for &f in &t.f {
            assert!((f - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(t.residual < TREE_RESIDUAL_TOLERANCE);
        assert!((t.green_diagonal(&law) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn srw_z2_cubed_is_one_half() {
        let law = StepLaw::srw(Arc::new(GroupModel::free_product(&[2, 2, 2]).unwrap()));
        let t = tree_hitting_solve(&law).unwrap();
        for &f in &t.f {
            assert!((f - 0.5).abs() < 1e-15);
        }
        assert!((t.green_diagonal(&law) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn biased_law_matches_frozen_values() {
        let g = Arc::new(GroupModel::free_group(2).unwrap());
        let law = StepLaw::from_words(g, "biased", &[("a", 0.4), ("b", 0.1)]).unwrap();
        let t = tree_hitting_solve(&law).unwrap();
        // Independent high-precision solution of the two-equation system.
        assert!((t.f[0] - 0.532_650_476_643_810_4).abs() < 1e-13);
        assert!((t.f[2] - 0.179_891_555_312_304_1).abs() < 1e-13);
        assert_eq!(t.f[0], t.f[1]);
    }

    #[test]
    fn lazy_law_solves_the_rescaled_system() {
        // A lazy walk hits the same sets as the non-lazy one.
        let g = Arc::new(GroupModel::free_group(2).unwrap());
        let law = StepLaw::from_words(g, "lazy", &[("1", 0.2), ("a", 0.2), ("b", 0.2)]).unwrap();
        let t = tree_hitting_solve(&law).unwrap();
        assert!((t.f[0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn refuses_non_tree_models() {
        let g = Arc::new(GroupModel::free_product(&[3, 2]).unwrap());
        assert!(matches!(tree_hitting_solve(&StepLaw::srw(g)), Err(Error::NotTreeModel(_))));
        let g = Arc::new(GroupModel::free_group(2).unwrap());
        let law = StepLaw::from_words(g, "x", &[("a", 0.25), ("ab", 0.25)]).unwrap();
        assert!(matches!(tree_hitting_solve(&law), Err(Error::NotTreeModel(_))));
    }
}
