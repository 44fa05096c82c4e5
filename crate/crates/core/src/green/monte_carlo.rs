//! Monte Carlo hitting estimates with Wilson intervals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::Element;
use crate::rng::trial_rng;
use crate::stats::{wilson, WilsonInterval, Z95};
use crate::walks::StepLaw;

pub const DEFAULT_HORIZON: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloValue {
    pub hits: u64,
    pub trials: u64,
    pub horizon: u64,
    pub interval: WilsonInterval,
}

/// Horizon `10·|g|/ℓ̂` when a drift estimate is known, else the default.
pub fn default_horizon(target_len: usize, drift: Option<f64>) -> u64 {
    match drift {
        Some(l) if l > 0.0 => ((10.0 * target_len.max(1) as f64 / l).ceil() as u64).max(1),
        _ => DEFAULT_HORIZON,
    }
}

/// Fraction of `trials` walks from `x` that visit `y` within `horizon`
/// steps. Trial `i` uses its own stream derived from `(seed, i)`.
pub fn monte_carlo_hit(
    law: &StepLaw,
    x: &Element,
    y: &Element,
    trials: u64,
    horizon: u64,
    seed: u64,
) -> Result<MonteCarloValue> {
    if trials == 0 {
        return Err(Error::InvalidParameter("monte carlo needs at least one trial".into()));
    }
    let model = law.model();
    let g = model.between(x, y);
    if g.is_identity() {
        let interval = WilsonInterval { estimate: 1.0, low: 1.0, high: 1.0 };
        return Ok(MonteCarloValue { hits: trials, trials, horizon, interval });
    }
    let target = g.word().to_vec();
    let target_len = target.len();
    let ball = model.cayley_ball();
    let target_vertex = ball.and_then(|b| b.locate(&target));
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut word = Vec::new();
            for _ in 0..horizon {
                let a = law.sample_index(&mut rng);
                model.step_word(&mut word, law.support()[a].word());
                let hit = match (ball, target_vertex) {
                    (Some(b), Some(t)) => word.len() <= b.radius() as usize && b.locate(&word) == Some(t),
                    (Some(_), None) => false,
                    (None, _) => word.len() == target_len && word == target,
                };
                if hit {
                    return 1;
                }
            }
            0
        })
        .sum();
    Ok(MonteCarloValue { hits, trials, horizon, interval: wilson(hits, trials, Z95) })
}
