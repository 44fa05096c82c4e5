//! Hitting probabilities of the walk killed on leaving a finite ball.
//!
//! `F_R(e, g)` is the probability of reaching `g` before leaving `B(e, R)`.
//! It increases to `F(e, g)` as `R` grows. Two backends compute it:
//!
//! * a lumped recursion for nearest-neighbour laws on trees, where the
//!   subtree beyond any edge is determined by its entry letter and the
//!   remaining depth, so radii of 30–40 cost microseconds;
//! * Gauss–Seidel sweeps over an enumerated ball for everything else.

use std::collections::HashMap;

use serde::Serialize;

use super::tree::{require_tree, tree_hitting_solve};
use crate::error::{Error, Result};
use crate::groups::{Element, Gen, GroupModel};
use crate::walks::StepLaw;

pub const SOLVER_TOLERANCE: f64 = 1e-13;
pub const MAX_SWEEPS: usize = 1_000_000;

/// One ball-solver answer with its certified gap `F − F_R ≤ gap_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallValue {
    pub value: f64,
    /// `None` when no certified bound is available.
    pub gap_bound: Option<f64>,
    pub residual: f64,
    pub sweeps: usize,
}

/// Return probabilities `q(t, r)` into a vertex from its neighbour across
/// letter `t` whose subtree has `r` further levels inside the ball;
/// `q(·, −1) = 0`. Row `r + 1` of the table holds `q(·, r)`.
struct LumpedTree {
    mu: Vec<f64>,
    inv: Vec<Gen>,
    lazy: f64,
    q: Vec<Vec<f64>>,
}

impl LumpedTree {
    fn new(law: &StepLaw, radius: u32) -> Self {
        let gens = law.model().generators();
        let mu: Vec<f64> = gens.ids().map(|g| law.generator_mass(g)).collect();
        let inv: Vec<Gen> = gens.ids().map(|g| gens.inverse(g)).collect();
        let lazy = law.identity_mass();
        let n = mu.len();
        let mut q = vec![vec![0.0; n]];
        for r in 0..radius as usize {
            let prev = &q[r];
            let row: Vec<f64> = (0..n)
                .map(|t| {
                    let ti = inv[t] as usize;
                    let stay: f64 = (0..n).filter(|&s| s != ti).map(|s| mu[s] * prev[s]).sum();
                    mu[ti] / (1.0 - lazy - stay)
                })
                .collect();
            q.push(row);
        }
        Self { mu, inv, lazy, q }
    }

    fn q(&self, t: usize, r: i64) -> f64 {
        if r < 0 {
            0.0
        } else {
            self.q[r as usize + 1][t]
        }
    }

    /// `F_R(e, g)` along the path `g_1 g_2 … g_k`.
    fn hitting(&self, word: &[Gen], radius: u32) -> f64 {
        self.log_hitting(word, radius).exp()
    }

    /// `log F_R(e, g)`, summed to avoid underflow on long words.
    fn log_hitting(&self, word: &[Gen], radius: u32) -> f64 {
        let n = self.mu.len();
        let mut prev_alpha = 0.0;
        let mut log = 0.0;
        for (i, &next) in word.iter().enumerate() {
            let next = next as usize;
            let back = if i == 0 { None } else { Some(self.inv[word[i - 1] as usize] as usize) };
            let depth = radius as i64 - i as i64 - 1;
            let mut loop_mass = self.lazy;
            for t in 0..n {
                if t == next || Some(t) == back {
                    continue;
                }
                loop_mass += self.mu[t] * self.q(t, depth);
            }
            if let Some(b) = back {
                loop_mass += self.mu[b] * prev_alpha;
            }
            let alpha = self.mu[next] / (1.0 - loop_mass);
            log += alpha.ln();
            prev_alpha = alpha;
        }
        log
    }

    fn return_probability(&self, radius: u32) -> f64 {
        let depth = radius as i64 - 1;
        self.lazy + (0..self.mu.len()).map(|t| self.mu[t] * self.q(t, depth)).sum::<f64>()
    }
}

/// Enumerated ball with precomputed transitions for every support atom.
pub struct BallGraph {
    radius: u32,
    elements: Vec<Element>,
    index: Option<HashMap<Element, u32>>,
    /// `targets[v * atoms + a]`, `u32::MAX` when the step leaves the ball.
    targets: Vec<u32>,
    probs: Vec<f64>,
    lazy: f64,
}

const EXIT: u32 = u32::MAX;

impl BallGraph {
    pub fn build(law: &StepLaw, radius: u32) -> Result<Self> {
        let model = law.model();
        let elements = model.ball_enumerate(radius)?;
        let atoms: Vec<&Element> = law.support().iter().filter(|a| !a.is_identity()).collect();
        let probs: Vec<f64> = (0..law.len())
            .filter(|&i| !law.support()[i].is_identity())
            .map(|i| law.prob(i))
            .collect();
        let na = atoms.len();
        let mut targets = vec![EXIT; elements.len() * na];
        let index = match model.cayley_ball() {
            Some(ball) => {
                // Table ids coincide with shortlex positions.
                for (v, x) in elements.iter().enumerate() {
                    debug_assert_eq!(ball.locate(x.word()), Some(v as u32));
                    for (a, atom) in atoms.iter().enumerate() {
                        if let Some(t) = ball.walk(v as u32, atom.word()) {
                            if ball.level(t) <= radius {
                                targets[v * na + a] = t;
                            }
                        }
                    }
                }
                None
            }
            None => {
                let index: HashMap<Element, u32> =
                    elements.iter().enumerate().map(|(i, x)| (x.clone(), i as u32)).collect();
                for (v, x) in elements.iter().enumerate() {
                    for (a, atom) in atoms.iter().enumerate() {
                        let y = model.multiply(x, atom);
                        if let Some(&t) = index.get(&y) {
                            targets[v * na + a] = t;
                        }
                    }
                }
                Some(index)
            }
        };
        Ok(Self { radius, elements, index, targets, probs, lazy: law.identity_mass() })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn index_of(&self, model: &GroupModel, x: &Element) -> Option<u32> {
        match &self.index {
            Some(index) => index.get(x).copied(),
            None => {
                let v = model.cayley_ball()?.locate(x.word())?;
                ((v as usize) < self.elements.len()).then_some(v)
            }
        }
    }

    /// Solves `h = P h` off `target`, `h(target) = 1`, `h = 0` outside, by
    /// Gauss–Seidel from zero. Iterates increase monotonically, so every
    /// sweep is a lower bound for the killed-chain hitting probability.
    pub fn hitting_field(&self, target: u32) -> FieldSolution {
        let n = self.elements.len();
        let na = self.probs.len();
        let mut h = vec![0.0; n];
        h[target as usize] = 1.0;
        let scale = 1.0 / (1.0 - self.lazy);
        let mut sweeps = 0;
        let mut residual = f64::INFINITY;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut change: f64 = 0.0;
            for v in 0..n {
                if v == target as usize {
                    continue;
                }
                let row = &self.targets[v * na..(v + 1) * na];
                let mut acc = 0.0;
                for (a, &t) in row.iter().enumerate() {
                    if t != EXIT {
                        acc += self.probs[a] * h[t as usize];
                    }
                }
                let new = acc * scale;
                change = change.max(new - h[v]);
                h[v] = new;
            }
            residual = change;
            if change < SOLVER_TOLERANCE {
                break;
            }
        }
        FieldSolution { h, sweeps, residual }
    }

    /// Probability of returning to the identity inside the ball.
    pub fn return_probability(&self, field_to_identity: &FieldSolution) -> f64 {
        let na = self.probs.len();
        self.lazy
            + (0..na)
                .map(|a| {
                    let t = self.targets[a];
                    if t == EXIT {
                        0.0
                    } else {
                        self.probs[a] * field_to_identity.h[t as usize]
                    }
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub h: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

/// Which solver handles a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BallBackend {
    TreeLumped,
    Enumerated,
}

pub fn backend_for(law: &StepLaw) -> BallBackend {
    if require_tree(law).is_ok() {
        BallBackend::TreeLumped
    } else {
        BallBackend::Enumerated
    }
}

/// Certified bound on `F − F_R`: the walk must first escape (probability at
/// most `1 − F_R`), and on trees it then sits at distance at least
/// `R + 1 − |g|` from `g`, from where it hits `g` with probability at most
/// `f_max` to that power.
fn hitting_gap(law: &StepLaw, value: f64, g_len: usize, radius: u32) -> f64 {
    let escape = (1.0 - value).max(0.0);
    match tree_hitting_solve(law) {
        Ok(table) => escape * table.max_f().powi((radius as i32 + 1 - g_len as i32).max(0)),
        Err(_) => escape,
    }
}

/// Certified bound on `G(e,e) − G_R(e,e)` for tree models.
fn diagonal_gap(law: &StepLaw, u_r: f64, radius: u32) -> Option<f64> {
    let table = tree_hitting_solve(law).ok()?;
    let du = (1.0 - u_r) * table.max_f().powi(radius as i32 + 1);
    let denom = (1.0 - u_r - du) * (1.0 - u_r);
    (denom > 0.0).then(|| du / denom)
}

/// `F_R(x, y)`: the walk started at `x` must reach `y` without leaving the
/// ball of radius `R` centred at `x`.
pub fn ball_solver(law: &StepLaw, x: &Element, y: &Element, radius: u32) -> Result<BallValue> {
    let model = law.model();
    let g = model.between(x, y);
    let len = model.word_length(&g)?;
    if len as u64 > u64::from(radius) {
        return Err(Error::InvalidParameter(format!(
            "target at distance {len} lies outside the ball of radius {radius}"
        )));
    }
    if g.is_identity() {
        return Ok(BallValue { value: 1.0, gap_bound: Some(0.0), residual: 0.0, sweeps: 0 });
    }
    match backend_for(law) {
        BallBackend::TreeLumped => {
            let lumped = LumpedTree::new(law, radius);
            let value = lumped.hitting(g.word(), radius);
            Ok(BallValue { value, gap_bound: Some(hitting_gap(law, value, len, radius)), residual: 0.0, sweeps: 0 })
        }
        BallBackend::Enumerated => {
            let graph = BallGraph::build(law, radius)?;
            let target = graph
                .index_of(model, &g)
                .ok_or_else(|| Error::UnverifiedGeodesic { length: len, radius })?;
            let field = graph.hitting_field(target);
            let value = field.h[0];
            Ok(BallValue {
                value,
                gap_bound: Some(hitting_gap(law, value, len, radius)),
                residual: field.residual,
                sweeps: field.sweeps,
            })
        }
    }
}

/// `log F_R(e, g)` from the lumped tree recursion, for words too long for
/// `F_R` itself to be representable.
pub fn lumped_log_hitting(law: &StepLaw, g: &Element, radius: u32) -> Result<f64> {
    require_tree(law)?;
    if g.len() > radius as usize {
        return Err(Error::InvalidParameter(format!(
            "target at distance {} lies outside the ball of radius {radius}",
            g.len()
        )));
    }
    Ok(LumpedTree::new(law, radius).log_hitting(g.word(), radius))
}

/// `G_R(e, e) = 1/(1 − U_R)` for the killed chain, a lower bound on `G(e, e)`.
pub fn ball_green_diagonal(law: &StepLaw, radius: u32) -> Result<BallValue> {
    match backend_for(law) {
        BallBackend::TreeLumped => {
            let lumped = LumpedTree::new(law, radius);
            let u = lumped.return_probability(radius);
            Ok(BallValue {
                value: 1.0 / (1.0 - u),
                gap_bound: diagonal_gap(law, u, radius),
                residual: 0.0,
                sweeps: 0,
            })
        }
        BallBackend::Enumerated => {
            let graph = BallGraph::build(law, radius)?;
            let field = graph.hitting_field(0);
            let u = graph.return_probability(&field);
            Ok(BallValue {
                value: 1.0 / (1.0 - u),
                gap_bound: None,
                residual: field.residual,
                sweeps: field.sweeps,
            })
        }
    }
}
