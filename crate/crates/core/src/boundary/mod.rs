//! Boundary of tree models: sampled harmonic measure, exact cylinder
//! measures, visual distances, shadows and Busemann functions.
//!
//! A boundary point is an infinite reduced word, represented by a finite
//! prefix. On a tree every shadow and every visual ball is a cylinder, so
//! all measure statements reduce to cylinder masses.

mod dimension;
mod exit;

pub use dimension::{
    ahlfors_check, dimension_from_measure, doubling_check, pointwise_dimension, pointwise_dimension_with_measure, AhlforsReport, AhlforsRow, DimRow, DimensionReport, DoublingReport, MIN_CELL_HITS};
pub use exit::{
    deviation_profile, exit_measure, gromov_control, DeviationReport, DeviationRow, ExitReport, ExitRow,
    EXIT_NEIGHBOURHOOD,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{require_tree, TreeHittingTable};
use crate::groups::{Element, Gen, GroupModel};
use crate::hypcheck::MetricHandle;
use crate::rng::trial_rng;
use crate::walks::StepLaw;

pub const DEFAULT_CONFIRM_MARGIN: usize = 30;
pub const STEP_CAP: usize = 1_000_000;
/// Fewest samples in a shadow or cell before its estimate is flagged.
pub const MIN_SHADOW_SAMPLES: u64 = 30;

/// A boundary point known through a prefix of its reduced word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BoundaryPoint {
    pub prefix: Element,
}

impl BoundaryPoint {
    pub fn new(prefix: Element) -> Self {
        Self { prefix }
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    pub fn word(&self) -> &[Gen] {
        self.prefix.word()
    }
}

fn common_prefix(a: &[Gen], b: &[Gen]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn prefix(word: &[Gen], k: usize) -> Element {
    Element::from_normal_word(word[..k].to_vec())
}

fn require_tree_model(model: &GroupModel) -> Result<()> {
    if model.is_tree() {
        Ok(())
    } else {
        Err(Error::NotTreeModel(format!("boundary tools need a tree model, got {}", model.describe())))
    }
}

/// Boundary samples: one confirmed depth-`depth` prefix per successful
/// trial, kept sorted so cylinder counts are range lookups.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMeasure {
    pub depth: usize,
    pub confirm_margin: usize,
    /// Confirmed prefixes in trial order.
    #[serde(skip)]
    pub points: Vec<Element>,
    #[serde(skip)]
    sorted: Vec<Vec<Gen>>,
    pub total: u64,
    pub excluded: u64,
    /// Certified per-sample probability that a recorded prefix is not the
    /// prefix of the limit point.
    pub error_bound: f64,
}

impl EmpiricalMeasure {
    pub fn from_points(points: Vec<Element>, depth: usize, confirm_margin: usize, excluded: u64, error_bound: f64) -> Self {
        let mut sorted: Vec<Vec<Gen>> = points.iter().map(|p| p.word().to_vec()).collect();
        sorted.sort_unstable();
        Self { depth, confirm_margin, total: points.len() as u64, points, sorted, excluded, error_bound }
    }

    /// Number of samples whose prefix starts with `p`.
    pub fn count(&self, p: &[Gen]) -> u64 {
        let k = p.len();
        if k > self.depth {
            return 0;
        }
        let lo = self.sorted.partition_point(|w| &w[..k] < p);
        let hi = self.sorted.partition_point(|w| &w[..k] <= p);
        (hi - lo) as u64
    }

    /// Sample counts of every occupied depth-`k` cylinder.
    pub fn counts(&self, k: usize) -> BTreeMap<Element, u64> {
        let mut out = BTreeMap::new();
        for w in &self.sorted {
            *out.entry(prefix(w, k.min(w.len()))).or_insert(0) += 1;
        }
        out
    }
}

/// Exact cylinder masses.
pub trait CylinderMass {
    fn mass(&self, p: &[Gen]) -> f64;
    /// Samples supporting the mass, `None` for exact measures.
    fn support(&self, _p: &[Gen]) -> Option<u64> {
        None
    }
    fn max_depth(&self) -> usize {
        usize::MAX
    }
}

impl CylinderMass for EmpiricalMeasure {
    fn mass(&self, p: &[Gen]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(p) as f64 / self.total as f64
    }

    fn support(&self, p: &[Gen]) -> Option<u64> {
        Some(self.count(p))
    }

    fn max_depth(&self) -> usize {
        self.depth
    }
}

/// Walks until the depth-`depth` prefix is confirmed: the word length
/// reaches `depth + confirm_margin`, from where changing the prefix needs a
/// return to depth `depth − 1`, of probability at most `f_max^{margin+1}`.
pub fn sample_boundary(
    law: &StepLaw,
    count: usize,
    depth: usize,
    confirm_margin: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    let table = crate::green::tree_hitting_solve(law)?;
    if depth == 0 {
        return Err(Error::InvalidParameter("target depth must be at least 1".into()));
    }
    let model = law.model();
    let goal = depth + confirm_margin;
    let results: Vec<Option<Element>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut w: Vec<Gen> = Vec::with_capacity(goal + 1);
            for _ in 0..STEP_CAP {
                let a = law.sample_index(&mut rng);
                model.step_word(&mut w, law.support()[a].word());
                if w.len() >= goal {
                    return Some(prefix(&w, depth));
                }
            }
            None
        })
        .collect();
    let excluded = results.iter().filter(|r| r.is_none()).count() as u64;
    let points: Vec<Element> = results.into_iter().flatten().collect();
    let error_bound = table.max_f().powi(confirm_margin as i32 + 1);
    Ok(EmpiricalMeasure::from_points(points, depth, confirm_margin, excluded, error_bound))
}

/// Exact measures on the boundary of a tree model.
#[derive(Debug, Clone)]
pub enum CylinderMeasure {
    /// The uniform (Patterson–Sullivan) measure: `1/|S_D|` per depth-`D`
    /// cylinder.
    Uniform { sphere_sizes: Vec<f64> },
    /// Harmonic measure of a nearest-neighbour tree walk.
    Harmonic(TreeHittingTable, Vec<Gen>),
}

impl CylinderMeasure {
    pub fn uniform(model: &GroupModel, max_depth: u32) -> Result<Self> {
        require_tree_model(model)?;
        let sphere_sizes = model.sphere_sizes(max_depth)?.into_iter().map(|s| s as f64).collect();
        Ok(CylinderMeasure::Uniform { sphere_sizes })
    }

    pub fn harmonic(law: &StepLaw) -> Result<Self> {
        require_tree(law)?;
        let gens = law.model().generators();
        let inv = gens.ids().map(|g| gens.inverse(g)).collect();
        Ok(CylinderMeasure::Harmonic(crate::green::tree_hitting_solve(law)?, inv))
    }
}

impl CylinderMass for CylinderMeasure {
    fn mass(&self, p: &[Gen]) -> f64 {
        match self {
            CylinderMeasure::Uniform { sphere_sizes } => 1.0 / sphere_sizes[p.len()],
            CylinderMeasure::Harmonic(t, inv) => harmonic_cylinder(t, inv, p),
        }
    }

    fn max_depth(&self) -> usize {
        match self {
            CylinderMeasure::Uniform { sphere_sizes } => sphere_sizes.len() - 1,
            CylinderMeasure::Harmonic(..) => usize::MAX,
        }
    }
}

/// `ν(cyl(x)) = F(e,x)·(1 − f_{s⁻¹})/(1 − f_s f_{s⁻¹})` with `s` the last
/// letter of `x`: hit `x`, then leave for infinity inside its cone.
fn harmonic_cylinder(t: &TreeHittingTable, inv: &[Gen], p: &[Gen]) -> f64 {
    let Some(&s) = p.last() else { return 1.0 };
    let hit: f64 = p.iter().map(|&g| t.f[g as usize]).product();
    let fs = t.f[s as usize];
    let fi = t.f[inv[s as usize] as usize];
    hit * (1.0 - fi) / (1.0 - fs * fi)
}

/// `ν(cyl(x))` for the harmonic measure of a tree law.
pub fn harmonic_cylinder_mass(law: &StepLaw, x: &Element) -> Result<f64> {
    Ok(CylinderMeasure::harmonic(law)?.mass(x.word()))
}

/// Uniform boundary measure of the cylinder of `prefix`.
pub fn ps_cylinder(model: &GroupModel, prefix: &Element) -> Result<f64> {
    require_tree_model(model)?;
    if model.normal_form(prefix.word())?.word() != prefix.word() {
        return Err(Error::InvalidParameter("cylinder prefix must be a reduced word".into()));
    }
    let s = model.sphere_sizes(prefix.len() as u32)?;
    Ok(1.0 / s[prefix.len()] as f64)
}

/// How a confluence prefix is measured.
#[derive(Debug, Clone, Copy)]
pub enum Confluence<'a> {
    Word,
    Green(&'a TreeHittingTable),
}

impl Confluence<'_> {
    pub fn length(&self, p: &[Gen]) -> f64 {
        match self {
            Confluence::Word => p.len() as f64,
            Confluence::Green(t) => p.iter().map(|&g| t.letter_weight(g)).sum(),
        }
    }
}

/// `d_ε(a, b) = e^{−ε(a|b)}`.
pub fn visual_distance(a: &BoundaryPoint, b: &BoundaryPoint, epsilon: f64, metric: Confluence<'_>) -> Result<f64> {
    let c = common_prefix(a.word(), b.word());
    if c >= a.depth().min(b.depth()) {
        return Err(Error::InsufficientDepth { required: c + 1 });
    }
    Ok((-epsilon * metric.length(&a.word()[..c])).exp())
}

/// Shortest prefix `p` of `x` with `len(p) ≥ len(x) − R`: the shadow
/// `{a : (a|x) ≥ d(e,x) − R}` is the cylinder of `p`.
pub fn shadow_prefix(x: &Element, r: f64, metric: Confluence<'_>) -> Element {
    let w = x.word();
    let need = metric.length(w) - r;
    let mut acc = 0.0;
    if need <= 0.0 {
        return Element::identity();
    }
    for (k, &g) in w.iter().enumerate() {
        acc += metric.length(&[g]);
        // Tolerance for letter sums that land on the threshold.
        if acc >= need - 1e-12 * need.max(1.0) {
            return prefix(w, k + 1);
        }
    }
    x.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowRow {
    pub x: String,
    pub r: f64,
    pub mass: f64,
    /// Samples in the shadow, empty for exact measures.
    pub samples: Option<u64>,
    pub predicted: f64,
    /// `mass / predicted`.
    pub ratio: f64,
    pub wide_ci: bool,
}

/// Measure of the shadow of `x`, paired with a predicted scale.
pub fn shadow_measure(
    model: &GroupModel,
    measure: &dyn CylinderMass,
    x: &Element,
    r: f64,
    metric: Confluence<'_>,
    predicted: f64,
) -> Result<ShadowRow> {
    require_tree_model(model)?;
    let p = shadow_prefix(x, r, metric);
    if p.len() > measure.max_depth() {
        return Err(Error::InsufficientDepth { required: p.len() });
    }
    let mass = measure.mass(p.word());
    let samples = measure.support(p.word());
    Ok(ShadowRow {
        x: model.format(x),
        r,
        mass,
        samples,
        predicted,
        ratio: mass / predicted,
        wide_ci: samples.is_some_and(|s| s < MIN_SHADOW_SAMPLES),
    })
}

/// Shadow-lemma band over every `x` with `|x| ≤ max_len`: the smallest `C`
/// with `ratio ∈ [1/C, C]` over rows that are not flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowBand {
    pub rows: Vec<ShadowRow>,
    pub c: f64,
    pub flagged: usize,
}

/// Harmonic shadows `ν(℧(x, R))·e^{d_G(e,x)}` in the Green metric.
pub fn harmonic_shadow_band(
    law: &StepLaw,
    measure: &dyn CylinderMass,
    max_len: u32,
    r: f64,
) -> Result<ShadowBand> {
    let table = crate::green::tree_hitting_solve(law)?;
    let model = law.model();
    let conf = Confluence::Green(&table);
    let rows: Vec<ShadowRow> = model
        .ball_enumerate(max_len)?
        .iter()
        .filter(|x| !x.is_identity())
        .map(|x| shadow_measure(model, measure, x, r, conf, (-table.green_distance(x)).exp()))
        .collect::<Result<_>>()?;
    let flagged = rows.iter().filter(|r| r.wide_ci).count();
    let c = rows
        .iter()
        .filter(|r| !r.wide_ci)
        .map(|r| if r.ratio > 0.0 { r.ratio.max(1.0 / r.ratio) } else { f64::INFINITY })
        .fold(1.0, f64::max);
    Ok(ShadowBand { rows, c, flagged })
}

/// `β_a(x, y) = lim d(x, a_n) − d(y, a_n)`, exact once the prefix of `a`
/// passes both confluence points.
pub fn busemann(metric: &MetricHandle, a: &BoundaryPoint, x: &Element, y: &Element) -> Result<f64> {
    require_tree_model(metric.model())?;
    let cx = common_prefix(a.word(), x.word());
    let cy = common_prefix(a.word(), y.word());
    if cx >= a.depth() || cy >= a.depth() {
        return Err(Error::InsufficientDepth { required: x.len().max(y.len()) + 1 });
    }
    Ok(metric.distance(x, &a.prefix)? - metric.distance(y, &a.prefix)?)
}

/// All boundary directions of depth `depth`.
pub fn enumerate_directions(model: &GroupModel, depth: u32) -> Result<Vec<BoundaryPoint>> {
    require_tree_model(model)?;
    Ok(model
        .ball_enumerate(depth)?
        .into_iter()
        .filter(|x| x.len() == depth as usize)
        .map(BoundaryPoint::new)
        .collect())
}

/// `max_a β_a(x, y)` over the given directions.
pub fn busemann_recovery(metric: &MetricHandle, directions: &[BoundaryPoint], x: &Element, y: &Element) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in directions {
        best = best.max(busemann(metric, a, x, y)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryHistRow {
    pub prefix: String,
    pub depth: usize,
    pub count: u64,
    pub mass: f64,
}

pub fn boundary_hist(model: &GroupModel, m: &EmpiricalMeasure, depth: usize) -> Vec<BoundaryHistRow> {
    m.counts(depth)
        .into_iter()
        .map(|(p, count)| BoundaryHistRow {
            prefix: model.format(&p),
            depth,
            count,
            mass: count as f64 / m.total.max(1) as f64,
        })
        .collect()
}
