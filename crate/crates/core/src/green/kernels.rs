//! Martin and Naïm kernels, the Green Gromov product, the exponential decay
//! fit and Ancona ratios.

use rand::Rng;
use serde::Serialize;

use super::{Backend, GreenEstimate, GreenOracle, Method};
use crate::error::{Error, Result};
use crate::groups::Element;
use crate::rng::trial_rng;
use crate::stats::fit_line;
use crate::walks::StepLaw;

/// `K(x, y) = F(x, y)/F(e, y)`.
pub fn martin_kernel(oracle: &GreenOracle, x: &Element, y: &Element) -> Result<f64> {
    if oracle.tree_table().is_some() {
        let e = Element::identity();
        return Ok((oracle.green_distance(&e, y)? - oracle.green_distance(x, y)?).exp());
    }
    Ok(oracle.hitting(x, y)?.value / oracle.hitting(&Element::identity(), y)?.value)
}

/// `(x|y)_w` for the Green metric.
pub fn green_gromov_product(oracle: &GreenOracle, w: &Element, x: &Element, y: &Element) -> Result<f64> {
    let wx = oracle.green_distance(w, x)?;
    let wy = oracle.green_distance(w, y)?;
    let xy = oracle.green_distance(x, y)?;
    Ok(0.5 * (wx + wy - xy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NaimValue {
    pub theta: f64,
    pub log_theta: f64,
    /// `(x|y)_e` in the Green metric.
    pub gromov_product: f64,
    pub log_diagonal: f64,
    /// `|log Θ − (2(x|y)_e − log G(e,e))|`, with `log Θ` taken from the
    /// Green values directly.
    pub identity_residual: f64,
    pub mixed_methods: bool,
}

/// Θ from the four ingredients `F(x,y)`, `F(e,x)`, `F(e,y)`, `G(e,e)`.
pub fn naim_from_estimates(
    fxy: GreenEstimate,
    fex: GreenEstimate,
    fey: GreenEstimate,
    diagonal: GreenEstimate,
) -> NaimValue {
    let g = diagonal.value;
    let (gxy, gex, gey) = (fxy.value * g, fex.value * g, fey.value * g);
    let theta = gxy / (gex * gey);
    let log_theta = gxy.ln() - gex.ln() - gey.ln();
    let (dxy, dex, dey) = (-fxy.value.ln(), -fex.value.ln(), -fey.value.ln());
    let gromov_product = 0.5 * (dex + dey - dxy);
    let log_diagonal = g.ln();
    let identity_residual = (log_theta - (2.0 * gromov_product - log_diagonal)).abs();
    let m = fxy.method;
    let mixed_methods = fex.method != m || fey.method != m || diagonal.method != m;
    NaimValue { theta, log_theta, gromov_product, log_diagonal, identity_residual, mixed_methods }
}

/// `Θ(x, y) = G(x, y)/(G(e, x) G(e, y))`.
pub fn naim_kernel(oracle: &GreenOracle, x: &Element, y: &Element) -> Result<NaimValue> {
    let e = Element::identity();
    Ok(naim_from_estimates(
        oracle.hitting(x, y)?,
        oracle.hitting(&e, x)?,
        oracle.hitting(&e, y)?,
        oracle.diagonal()?,
    ))
}

/// One row of a kernel table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub x_word: String,
    pub y_word: String,
    pub method: String,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "dG")]
    pub d_g: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Theta")]
    pub theta: f64,
    pub err: f64,
    pub mixed_methods: bool,
}

pub fn kernel_row(oracle: &GreenOracle, x: &Element, y: &Element) -> Result<KernelRow> {
    let model = oracle.law().model();
    let f = oracle.hitting(x, y)?;
    let naim = naim_kernel(oracle, x, y)?;
    Ok(KernelRow {
        x_word: model.format(x),
        y_word: model.format(y),
        method: f.method.to_string(),
        f: f.value,
        d_g: oracle.green_distance(x, y)?,
        k: martin_kernel(oracle, x, y)?,
        theta: naim.theta,
        err: f.error,
        mixed_methods: naim.mixed_methods,
    })
}

/// Least-squares fit `log G(e,γ) ≈ log C − c1·|γ|` over a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdFit {
    pub c1: f64,
    /// Smallest constant with `G(e,γ) ≤ C1 e^{−c1|γ|}` on every fitted point.
    pub big_c1: f64,
    pub intercept: f64,
    /// Largest amount by which a point lies above the fitted line.
    pub max_positive_residual: f64,
    pub points: usize,
    pub radius: u32,
    pub method: Method,
}

/// `(|γ|, log G(e, γ))` for every `γ` with `|γ| ≤ rmax`.
fn decay_points(oracle: &GreenOracle, rmax: u32) -> Result<Vec<(f64, f64)>> {
    let law = oracle.law();
    let model = law.model();
    let log_diag = oracle.diagonal()?.value.ln();
    match &oracle.backend {
        Backend::Ball { radius, graph: Some(graph) } => {
            if rmax > *radius {
                return Err(Error::InsufficientDepth { required: rmax as usize });
            }
            // Symmetric killed chains satisfy G_D(e,γ) = F_D(γ,e) G_D(e,e).
            let field = oracle.field(0);
            let mut out = Vec::new();
            for (v, x) in graph.elements().iter().enumerate() {
                let len = model.word_length(x)?;
                if len as u32 > rmax {
                    continue;
                }
                let h = field.h[v];
                if h <= 0.0 {
                    return Err(Error::NonFinite(format!("zero killed Green value at {}", model.format(x))));
                }
                out.push((len as f64, h.ln() + log_diag));
            }
            Ok(out)
        }
        _ => model
            .ball_enumerate(rmax)?
            .iter()
            .map(|x| Ok((x.len() as f64, log_diag - oracle.green_distance_from_identity(x)?)))
            .collect(),
    }
}

pub fn fit_ed(law: &StepLaw, rmax: u32) -> Result<EdFit> {
    fit_ed_with(&GreenOracle::auto(law)?, rmax)
}

pub fn fit_ed_with(oracle: &GreenOracle, rmax: u32) -> Result<EdFit> {
    if rmax == 0 {
        return Err(Error::InvalidParameter("decay fit needs rmax ≥ 1".into()));
    }
    let points = decay_points(oracle, rmax)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let line = fit_line(&xs, &ys)
        .ok_or_else(|| Error::InvalidParameter("decay fit needs two distinct lengths".into()))?;
    let max_positive_residual = points
        .iter()
        .map(|(x, y)| y - line.intercept - line.slope * x)
        .fold(0.0, f64::max);
    Ok(EdFit {
        c1: -line.slope,
        big_c1: (line.intercept + max_positive_residual).exp(),
        intercept: line.intercept,
        max_positive_residual,
        points: points.len(),
        radius: rmax,
        method: oracle.method(),
    })
}

/// `F(x,y)/(F(x,v)F(v,y))` for `v` within `r` of the geodesic from `x` to `y`.
///
/// With an enumerated ball all three values share the killing region
/// `x·B(e,R)`, so the strong Markov bound `≥ 1` holds up to solver
/// tolerance.
pub fn ancona_ratio(oracle: &GreenOracle, x: &Element, v: &Element, y: &Element, r: usize) -> Result<f64> {
    let model = oracle.law().model();
    let g = model.between(x, y);
    let w = model.between(x, v);
    let path = model.geodesic_vertices(&g)?;
    let mut near = usize::MAX;
    for p in &path {
        near = near.min(model.distance(p, &w)?);
    }
    if near > r {
        return Err(Error::InvalidParameter(format!(
            "{} lies at distance {near} > {r} from the geodesic",
            model.format(v)
        )));
    }
    if let Some(graph) = oracle.ball_graph() {
        let radius = graph.radius();
        let locate = |z: &Element| {
            let len = model.word_length(z)?;
            graph.index_of(model, z).ok_or(Error::UnverifiedGeodesic { length: len, radius })
        };
        let (gi, wi) = (locate(&g)?, locate(&w)?);
        let to_g = oracle.field(gi);
        let to_w = oracle.field(wi);
        return Ok(to_g.h[0] / (to_w.h[0] * to_g.h[wi as usize]));
    }
    if oracle.tree_table().is_some() {
        let d = oracle.green_distance(x, v)? + oracle.green_distance(v, y)? - oracle.green_distance(x, y)?;
        return Ok(d.exp());
    }
    Ok(oracle.hitting(x, y)?.value / (oracle.hitting(x, v)?.value * oracle.hitting(v, y)?.value))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnconaSample {
    pub x: String,
    pub v: String,
    pub y: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnconaSummary {
    pub samples: Vec<AnconaSample>,
    pub min_ratio: f64,
    /// Empirical `C(r)`.
    pub max_ratio: f64,
    pub r: usize,
}

/// Ancona ratios on `count` random triples with `1 ≤ |x⁻¹y| ≤ max_len`.
/// `x` is the endpoint of a short walk, `x⁻¹y` is uniform on the ball and
/// `v` is a uniform geodesic vertex moved by at most `r` generators.
pub fn sample_ancona(
    oracle: &GreenOracle,
    count: usize,
    max_len: u32,
    r: usize,
    seed: u64,
) -> Result<AnconaSummary> {
    let law = oracle.law();
    let model = law.model();
    let candidates: Vec<Element> = match oracle.ball_graph() {
        Some(graph) => graph
            .elements()
            .iter()
            .filter(|z| !z.is_identity() && z.len() <= max_len as usize)
            .cloned()
            .collect(),
        None => model.ball_enumerate(max_len)?.into_iter().filter(|z| !z.is_identity()).collect(),
    };
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate targets".into()));
    }
    let gens: Vec<Element> = model.generators().ids().map(|s| model.generator(s)).collect();
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = trial_rng(seed, i as u64);
        let mut xw = Vec::new();
        for _ in 0..8 {
            let a = law.sample_index(&mut rng);
            model.step_word(&mut xw, law.support()[a].word());
        }
        let x = model.settle(xw);
        let g = candidates[rng.gen_range(0..candidates.len())].clone();
        let path = model.geodesic_vertices(&g)?;
        let mut w = path[rng.gen_range(0..path.len())].clone();
        for _ in 0..rng.gen_range(0..=r) {
            w = model.multiply(&w, &gens[rng.gen_range(0..gens.len())]);
        }
        let y = model.multiply(&x, &g);
        let v = model.multiply(&x, &w);
        let ratio = ancona_ratio(oracle, &x, &v, &y, r)?;
        samples.push(AnconaSample { x: model.format(&x), v: model.format(&v), y: model.format(&y), ratio });
    }
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(AnconaSummary { samples, min_ratio, max_ratio, r })
}
