//! Experiment configs, validation and the runner that writes reports.
//!
//! A config names a group, a set of step laws and one experiment kind.
//! Runs are deterministic: every random stream derives from the config
//! seed, and reports are written single-threaded at the end.

mod kinds;
mod report;

pub use report::{format_float, write_csv, Check, Estimate, Summary};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{BallOptions, GroupModel};
use crate::walks::StepLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Kernels,
    Hyperbolicity,
    Rates,
    Dimension,
    Shadows,
    Exit,
    Deviation,
    TreeApprox,
    CompareWalks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Kernels,
        ExperimentKind::Hyperbolicity,
        ExperimentKind::Rates,
        ExperimentKind::Dimension,
        ExperimentKind::Shadows,
        ExperimentKind::Exit,
        ExperimentKind::Deviation,
        ExperimentKind::TreeApprox,
        ExperimentKind::CompareWalks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Kernels => "kernels",
            ExperimentKind::Hyperbolicity => "hyperbolicity",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Dimension => "dimension",
            ExperimentKind::Shadows => "shadows",
            ExperimentKind::Exit => "exit",
            ExperimentKind::Deviation => "deviation",
            ExperimentKind::TreeApprox => "tree-approx",
            ExperimentKind::CompareWalks => "compare-walks",
        }
    }

    /// Parameters the kind reads, with their defaults.
    pub fn parameters(self) -> &'static str {
        match self {
            ExperimentKind::Kernels => "law, radius (4)",
            ExperimentKind::Hyperbolicity => "sizes ([1, 10, 100, 1000])",
            ExperimentKind::Rates => "law, n (10000), trials (200)",
            ExperimentKind::Dimension => "law, epsilon (1), samples (100000), depths (1..6), n (10000), trials (200)",
            ExperimentKind::Shadows => "law, samples (100000), radius (6), radii ([0])",
            ExperimentKind::Exit => "law, radii ([2, 4, 6]), trials (100000)",
            ExperimentKind::Deviation => "law, n (1000), trials (100000), depths (0..8)",
            ExperimentKind::TreeApprox => "metric (log-perturbed), points (12), configs (100), radius (4)",
            ExperimentKind::CompareWalks => "law, law_b, n (10000), trials (200)",
        }
    }

    /// The statement a run of this kind checks.
    pub fn claim(self) -> &'static str {
        match self {
            ExperimentKind::Kernels => "F ≤ 1, Martin kernel K = F(x,y)/F(e,y), Naïm identity log Θ = 2(x|y)^G − log G(e,e)",
            ExperimentKind::Hyperbolicity => "log-perturbed word metric is not hyperbolic: quasiruler defect log((1+n)²/(1+2n)) grows",
            ExperimentKind::Rates => "ℓ_G equals the entropy h and h ≤ ℓv",
            ExperimentKind::Dimension => "dim ν = ℓ_G/(εℓ)",
            ExperimentKind::Shadows => "ν(℧(x)) ≍ e^{−d_G(e,x)} (shadow lemma)",
            ExperimentKind::Exit => "exit atoms on d_G-spheres are at most e^{−R}",
            ExperimentKind::Deviation => "P[d(Z_n, [e, Z_∞)) ≥ D] decays exponentially in D",
            ExperimentKind::TreeApprox => "|x−y|−2kδ ≤ |φ(x)−φ(y)| ≤ |x−y|",
            ExperimentKind::CompareWalks => "h_A ≤ lim −(1/n) log G_B(e, Z^A_n), strict iff harmonic measures are singular",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One catalog line per experiment kind.
pub fn catalog() -> String {
    let mut out = String::new();
    for k in ExperimentKind::ALL {
        out.push_str(&format!("{}: checks {}\n    params: {}\n", k.name(), k.claim(), k.parameters()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Free {
        rank: usize,
    },
    FreeProduct {
        orders: Vec<u32>,
    },
    Surface {
        genus: usize,
        #[serde(default)]
        radius: Option<u32>,
        #[serde(default)]
        budget: Option<u64>,
    },
    SmallCancellation {
        alphabet: String,
        relators: Vec<String>,
        #[serde(default)]
        radius: Option<u32>,
        #[serde(default)]
        budget: Option<u64>,
    },
}

impl GroupSpec {
    pub fn build(&self) -> Result<GroupModel> {
        let options = |radius: &Option<u32>, budget: &Option<u64>| {
            let d = BallOptions::default();
            BallOptions { max_radius: radius.unwrap_or(d.max_radius), element_budget: budget.unwrap_or(d.element_budget) }
        };
        match self {
            GroupSpec::Free { rank } => GroupModel::free_group(*rank),
            GroupSpec::FreeProduct { orders } => GroupModel::free_product(orders),
            GroupSpec::Surface { genus, radius, budget } => GroupModel::surface_group(*genus, options(radius, budget)),
            GroupSpec::SmallCancellation { alphabet, relators, radius, budget } => {
                let rels: Vec<&str> = relators.iter().map(String::as_str).collect();
                GroupModel::small_cancellation(alphabet, &rels, options(radius, budget))
            }
        }
    }
}

/// A step law: simple random walk, or weights on words (inverses are
/// added with the same weight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Srw,
    Weights { weights: BTreeMap<String, f64> },
}

impl LawSpec {
    pub fn build(&self, model: Arc<GroupModel>, name: &str) -> Result<StepLaw> {
        match self {
            LawSpec::Srw => Ok(StepLaw::srw(model).with_name(name)),
            LawSpec::Weights { weights } => {
                let entries: Vec<(&str, f64)> = weights.iter().map(|(w, p)| (w.as_str(), *p)).collect();
                StepLaw::from_words(model, name, &entries)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    Word,
    Green,
    LogPerturbed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub law: Option<String>,
    pub law_b: Option<String>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
    pub depths: Option<Vec<usize>>,
    pub radii: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub radius: Option<u32>,
    pub sizes: Option<Vec<u64>>,
    pub metric: Option<MetricName>,
    pub points: Option<usize>,
    pub configs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub group: GroupSpec,
    #[serde(default)]
    pub laws: BTreeMap<String, LawSpec>,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub params: Params,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks law references and parameter ranges for the kind, without
    /// building any group.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let bad = |msg: String| Err(Error::Config(msg));
        for name in [&p.law, &p.law_b].into_iter().flatten() {
            if !self.laws.contains_key(name) {
                return bad(format!("law {name:?} is not defined"));
            }
        }
        let needs_law = !matches!(self.experiment, ExperimentKind::Hyperbolicity | ExperimentKind::TreeApprox);
        if needs_law && self.laws.is_empty() {
            return bad(format!("{} needs at least one law", self.experiment));
        }
        if needs_law && p.law.is_none() && self.laws.len() > 1 {
            return bad("several laws defined: choose one with params.law".into());
        }
        if self.experiment == ExperimentKind::CompareWalks && p.law_b.is_none() {
            return bad("compare-walks needs params.law_b".into());
        }
        let positive = |v: Option<usize>, what: &str| match v {
            Some(0) => Err(Error::Config(format!("{what} must be positive"))),
            _ => Ok(()),
        };
        positive(p.n, "n")?;
        positive(p.trials, "trials")?;
        positive(p.samples, "samples")?;
        positive(p.configs, "configs")?;
        if let Some(eps) = p.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return bad("epsilon must be positive".into());
            }
        }
        if let Some(radii) = &p.radii {
            let allow_zero = self.experiment == ExperimentKind::Shadows;
            if radii.is_empty() || radii.iter().any(|&r| !r.is_finite() || r < 0.0 || (r == 0.0 && !allow_zero)) {
                return bad("radii must be non-empty and positive".into());
            }
        }
        if let Some(d) = &p.depths {
            if d.is_empty() || d.windows(2).any(|w| w[0] >= w[1]) {
                return bad("depths must be a non-empty increasing list".into());
            }
        }
        if let Some(s) = &p.sizes {
            if s.is_empty() || s.iter().any(|&n| n == 0 || n > 1_000_000) {
                return bad("sizes must lie in 1..=1000000".into());
            }
        }
        if let Some(pts) = p.points {
            if !(4..=crate::hypcheck::EXHAUSTIVE_LIMIT).contains(&pts) {
                return bad(format!("points must lie in 4..={}", crate::hypcheck::EXHAUSTIVE_LIMIT));
            }
        }
        if let Some(r) = p.radius {
            if r == 0 || r > 12 {
                return bad("radius must lie in 1..=12".into());
            }
        }
        Ok(())
    }

    /// Name of the walked law.
    pub fn law_name(&self) -> Result<&str> {
        match &self.params.law {
            Some(l) => Ok(l),
            None => self.laws.keys().next().map(String::as_str).ok_or(Error::Config("no law defined".into())),
        }
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.summary.status == "pass"
    }
}

/// Validates, runs and writes every report into `out` (default: the
/// config's output directory, else `reports/<name>`).
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let output_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("reports").join(&config.name));
    let model = Arc::new(config.group.build().map_err(config_error)?);
    let mut laws = BTreeMap::new();
    for (name, spec) in &config.laws {
        laws.insert(name.clone(), spec.build(model.clone(), name).map_err(config_error)?);
    }
    let group = model.describe();
    let ctx = kinds::Context { config, model, laws };
    let result = kinds::run_kind(&ctx)?;
    std::fs::create_dir_all(&output_dir)?;
    let mut files = Vec::new();
    for table in &result.tables {
        std::fs::write(output_dir.join(&table.file), &table.bytes)?;
        files.push(table.file.clone());
    }
    let summary = Summary::new(config, group, result.estimates, result.checks, result.flags, files);
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    std::fs::write(output_dir.join("summary.json"), json)?;
    Ok(RunOutcome { summary, output_dir })
}

fn config_error(e: Error) -> Error {
    match e {
        Error::BudgetExceeded { .. } => e,
        other => Error::Config(other.to_string()),
    }
}

/// Process exit status for an error: 2 for an exceeded budget, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests;
