//! Hitting probabilities `F`, the Green function `G`, the Green metric
//! `d_G = −log F`, and the kernels built from them.

mod ball;
mod kernels;
mod monte_carlo;
mod tree;

pub use ball::{
    backend_for, ball_green_diagonal, ball_solver, lumped_log_hitting, BallBackend, BallGraph, BallValue, FieldSolution,
    MAX_SWEEPS, SOLVER_TOLERANCE,
};
pub use kernels::{
    ancona_ratio, fit_ed, fit_ed_with, green_gromov_product, kernel_row, martin_kernel,
    naim_from_estimates, naim_kernel, sample_ancona, AnconaSample, AnconaSummary, EdFit, KernelRow,
    NaimValue,
};
pub use monte_carlo::{default_horizon, monte_carlo_hit, MonteCarloValue, DEFAULT_HORIZON};
pub use tree::{require_tree, tree_hitting_solve, TreeHittingTable, TREE_RESIDUAL_TOLERANCE};

use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::Element;
use crate::walks::StepLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    TreeExact,
    BallSolver { radius: u32 },
    MonteCarlo { trials: u64, horizon: u64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TreeExact => f.write_str("tree_exact"),
            Method::BallSolver { radius } => write!(f, "ball_solver(R={radius})"),
            Method::MonteCarlo { trials, horizon } => {
                write!(f, "monte_carlo(trials={trials},horizon={horizon})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Exact,
    LowerBound,
    TwoSided,
}

/// A value of `F` (or `G`) with its provenance and error.
///
/// `error` is 0 for exact values, a one-sided gap bound for the ball
/// solver, and a 95% half-width for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub method: Method,
    pub error: f64,
    pub direction: Direction,
}

/// How an oracle evaluates hitting probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    TreeExact,
    BallSolver { radius: u32 },
    MonteCarlo { trials: u64, horizon: u64, seed: u64 },
}

enum Backend {
    Tree(TreeHittingTable),
    Ball { radius: u32, graph: Option<BallGraph> },
    MonteCarlo { trials: u64, horizon: u64, seed: u64 },
}

/// Evaluates `F(x, y)` with one fixed method and caches results per
/// `x⁻¹y`. Values are deterministic, so concurrent writers of the same key
/// store identical entries.
pub struct GreenOracle {
    law: StepLaw,
    backend: Backend,
    cache: DashMap<Element, GreenEstimate>,
    fields: DashMap<u32, Arc<FieldSolution>>,
    diagonal: std::sync::OnceLock<GreenEstimate>,
}

impl GreenOracle {
    pub fn new(law: &StepLaw, spec: MethodSpec) -> Result<Self> {
        let backend = match spec {
            MethodSpec::TreeExact => Backend::Tree(tree_hitting_solve(law)?),
            MethodSpec::BallSolver { radius } => {
                let graph = match backend_for(law) {
                    BallBackend::TreeLumped => None,
                    BallBackend::Enumerated => Some(BallGraph::build(law, radius)?),
                };
                Backend::Ball { radius, graph }
            }
            MethodSpec::MonteCarlo { trials, horizon, seed } => {
                if trials == 0 {
                    return Err(Error::InvalidParameter("monte carlo needs trials ≥ 1".into()));
                }
                Backend::MonteCarlo { trials, horizon, seed }
            }
        };
        Ok(Self {
            law: law.clone(),
            backend,
            cache: DashMap::new(),
            fields: DashMap::new(),
            diagonal: std::sync::OnceLock::new(),
        })
    }

    /// Tree-exact when possible, otherwise the ball solver on the largest
    /// radius that is both verified and within budget.
    pub fn auto(law: &StepLaw) -> Result<Self> {
        if require_tree(law).is_ok() {
            return Self::new(law, MethodSpec::TreeExact);
        }
        let model = law.model();
        let mut radius = model.verified_radius().unwrap_or(12);
        while radius > 1 && model.ball_size_estimate(radius) > model.element_budget() {
            radius -= 1;
        }
        Self::new(law, MethodSpec::BallSolver { radius })
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn method(&self) -> Method {
        match &self.backend {
            Backend::Tree(_) => Method::TreeExact,
            Backend::Ball { radius, .. } => Method::BallSolver { radius: *radius },
            Backend::MonteCarlo { trials, horizon, .. } => {
                Method::MonteCarlo { trials: *trials, horizon: *horizon }
            }
        }
    }

    pub fn tree_table(&self) -> Option<&TreeHittingTable> {
        match &self.backend {
            Backend::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn ball_graph(&self) -> Option<&BallGraph> {
        match &self.backend {
            Backend::Ball { graph, .. } => graph.as_ref(),
            _ => None,
        }
    }

    /// `F(e, g)`.
    pub fn hitting_from_identity(&self, g: &Element) -> Result<GreenEstimate> {
        if let Some(hit) = self.cache.get(g) {
            return Ok(*hit);
        }
        let est = self.compute(g)?;
        self.cache.insert(g.clone(), est);
        Ok(est)
    }

    /// `F(x, y) = F(e, x⁻¹y)`.
    pub fn hitting(&self, x: &Element, y: &Element) -> Result<GreenEstimate> {
        self.hitting_from_identity(&self.law.model().between(x, y))
    }

    fn compute(&self, g: &Element) -> Result<GreenEstimate> {
        let method = self.method();
        if g.is_identity() {
            return Ok(GreenEstimate { value: 1.0, method, error: 0.0, direction: Direction::Exact });
        }
        match &self.backend {
            Backend::Tree(t) => Ok(GreenEstimate {
                value: t.hitting(g),
                method,
                error: 0.0,
                direction: Direction::Exact,
            }),
            Backend::Ball { radius, graph: None } => {
                let v = ball_solver(&self.law, &Element::identity(), g, *radius)?;
                Ok(GreenEstimate {
                    value: v.value,
                    method,
                    error: v.gap_bound.unwrap_or(1.0),
                    direction: Direction::LowerBound,
                })
            }
            Backend::Ball { radius, graph: Some(graph) } => {
                let model = self.law.model();
                let len = model.word_length(g)?;
                let target = graph
                    .index_of(model, g)
                    .ok_or(Error::UnverifiedGeodesic { length: len, radius: *radius })?;
                let field = self.field(target);
                let value = field.h[0];
                Ok(GreenEstimate {
                    value,
                    method,
                    error: (1.0 - value).max(0.0),
                    direction: Direction::LowerBound,
                })
            }
            Backend::MonteCarlo { trials, horizon, seed } => {
                let v = monte_carlo_hit(&self.law, &Element::identity(), g, *trials, *horizon, *seed)?;
                Ok(GreenEstimate {
                    value: v.interval.estimate,
                    method,
                    error: v.interval.half_width(),
                    direction: Direction::TwoSided,
                })
            }
        }
    }

    /// Hitting field towards ball vertex `target`, cached.
    pub(crate) fn field(&self, target: u32) -> Arc<FieldSolution> {
        if let Some(f) = self.fields.get(&target) {
            return f.clone();
        }
        let graph = self.ball_graph().expect("enumerated ball backend");
        let f = Arc::new(graph.hitting_field(target));
        self.fields.insert(target, f.clone());
        f
    }

    /// `G(e, e)`.
    pub fn diagonal(&self) -> Result<GreenEstimate> {
        if let Some(d) = self.diagonal.get() {
            return Ok(*d);
        }
        let method = self.method();
        let est = match &self.backend {
            Backend::Tree(t) => GreenEstimate {
                value: t.green_diagonal(&self.law),
                method,
                error: 0.0,
                direction: Direction::Exact,
            },
            Backend::Ball { radius, graph: None } => {
                let v = ball_green_diagonal(&self.law, *radius)?;
                GreenEstimate {
                    value: v.value,
                    method,
                    error: v.gap_bound.unwrap_or(0.0),
                    direction: Direction::LowerBound,
                }
            }
            Backend::Ball { graph: Some(graph), .. } => {
                let field = self.field(0);
                let u = graph.return_probability(&field);
                GreenEstimate { value: 1.0 / (1.0 - u), method, error: 0.0, direction: Direction::LowerBound }
            }
            Backend::MonteCarlo { .. } => {
                // U = Σ μ(t) F(t, e) from the same Monte Carlo method.
                let model = self.law.model();
                let mut u = 0.0;
                let mut var = 0.0;
                for (i, atom) in self.law.support().iter().enumerate() {
                    let f = self.hitting_from_identity(&model.inverse(atom))?;
                    u += self.law.prob(i) * f.value;
                    var += (self.law.prob(i) * f.error).powi(2);
                }
                let g = 1.0 / (1.0 - u);
                GreenEstimate { value: g, method, error: g * g * var.sqrt(), direction: Direction::TwoSided }
            }
        };
        let _ = self.diagonal.set(est);
        Ok(est)
    }

    /// `G(x, y) = F(x, y)·G(e, e)`.
    pub fn green(&self, x: &Element, y: &Element) -> Result<f64> {
        Ok(self.hitting(x, y)?.value * self.diagonal()?.value)
    }

    /// `d_G(x, y) = −log F(x, y)`, summed letter by letter on trees.
    pub fn green_distance(&self, x: &Element, y: &Element) -> Result<f64> {
        self.green_distance_from_identity(&self.law.model().between(x, y))
    }

    pub fn green_distance_from_identity(&self, g: &Element) -> Result<f64> {
        if let Backend::Tree(t) = &self.backend {
            return Ok(t.green_distance(g));
        }
        let f = self.hitting_from_identity(g)?.value;
        if f > 0.0 {
            Ok(-f.ln())
        } else {
            Err(Error::NonFinite(format!(
                "hitting estimate 0 for {}; Green distance undefined",
                self.law.model().format(g)
            )))
        }
    }
}

/// `d_G(x, y)` for the law's default oracle.
pub fn green_metric(oracle: &GreenOracle, x: &Element, y: &Element) -> Result<f64> {
    oracle.green_distance(x, y)
}

/// `G(e, e)` with its method tag.
pub fn green_diagonal(oracle: &GreenOracle) -> Result<GreenEstimate> {
    oracle.diagonal()
}

#[cfg(test)]
mod tests;
