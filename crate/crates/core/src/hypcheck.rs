//! Hyperbolicity diagnostics over realized metrics: Gromov products, sampled
//! four-point δ, quasiruler defects, approximate trees and finite shadows.
//!
//! Distances are stored split as `base + corr`, where `base` is an exact
//! integer (the word length) for word-type metrics. Gromov products then
//! cancel the large integer parts exactly and only the small log
//! corrections carry rounding, which keeps defects accurate to 1e−12 even
//! at distances of 10⁶.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::GreenOracle;
use crate::groups::{Element, Gen, GroupModel};
use crate::rng::trial_rng;

/// A left-invariant metric on a group.
#[derive(Clone)]
pub enum MetricHandle {
    Word(Arc<GroupModel>),
    Green(Arc<GreenOracle>),
    /// `d(x, y) = |x⁻¹y| + log(1 + |x⁻¹y|)`.
    LogPerturbedWord(Arc<GroupModel>),
}

/// A distance split into an exact part and a small correction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitDistance {
    pub base: f64,
    pub corr: f64,
}

impl SplitDistance {
    pub fn total(self) -> f64 {
        self.base + self.corr
    }
}

impl MetricHandle {
    pub fn name(&self) -> String {
        match self {
            MetricHandle::Word(_) => "word".into(),
            MetricHandle::Green(o) => format!("green[{}]", o.method()),
            MetricHandle::LogPerturbedWord(_) => "log_perturbed_word".into(),
        }
    }

    pub fn model(&self) -> &GroupModel {
        match self {
            MetricHandle::Word(m) | MetricHandle::LogPerturbedWord(m) => m,
            MetricHandle::Green(o) => o.law().model(),
        }
    }

    fn from_length(&self, len: usize) -> SplitDistance {
        let base = len as f64;
        match self {
            MetricHandle::LogPerturbedWord(_) => SplitDistance { base, corr: base.ln_1p() },
            _ => SplitDistance { base, corr: 0.0 },
        }
    }

    /// `d(e, g)`.
    pub fn norm_split(&self, g: &Element) -> Result<SplitDistance> {
        match self {
            MetricHandle::Green(o) => {
                Ok(SplitDistance { base: o.green_distance_from_identity(g)?, corr: 0.0 })
            }
            _ => Ok(self.from_length(self.model().word_length(g)?)),
        }
    }

    pub fn distance_split(&self, x: &Element, y: &Element) -> Result<SplitDistance> {
        self.norm_split(&self.model().between(x, y))
    }

    pub fn distance(&self, x: &Element, y: &Element) -> Result<f64> {
        Ok(self.distance_split(x, y)?.total())
    }
}

/// `(x|y)_w = ½(d(w,x) + d(w,y) − d(x,y))`.
pub fn gromov_product(metric: &MetricHandle, w: &Element, x: &Element, y: &Element) -> Result<f64> {
    let wx = metric.distance_split(w, x)?;
    let wy = metric.distance_split(w, y)?;
    let xy = metric.distance_split(x, y)?;
    Ok(0.5 * ((wx.base + wy.base - xy.base) + (wx.corr + wy.corr - xy.corr)))
}

/// Pairwise distances of a finite point set.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    base: Vec<f64>,
    corr: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(metric: &MetricHandle, points: &[Element]) -> Result<Self> {
        let n = points.len();
        let rows: Vec<Vec<SplitDistance>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Ok(SplitDistance::default()) } else { metric.distance_split(&points[i], &points[j]) })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Self::from_rows(rows)
    }

    /// Points `g_{i}` = prefixes of a geodesic word, at the given positions.
    /// Word-type metrics use `|g_i⁻¹ g_j| = |i − j|`, which holds because
    /// subwords of geodesic words are geodesic.
    pub fn on_geodesic(metric: &MetricHandle, word: &[Gen], positions: &[usize]) -> Result<Self> {
        let model = metric.model();
        let whole = model.normal_form(word)?;
        if whole.word() != word || model.word_length(&whole)? != word.len() {
            return Err(Error::InvalidParameter("path word is not a verified geodesic normal form".into()));
        }
        if positions.iter().any(|&p| p > word.len()) {
            return Err(Error::InvalidParameter("position beyond the end of the geodesic".into()));
        }
        let n = positions.len();
        let rows: Vec<Vec<SplitDistance>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (a, b) = (positions[i].min(positions[j]), positions[i].max(positions[j]));
                        match metric {
                            MetricHandle::Green(_) => metric.norm_split(&model.normal_form(&word[a..b])?),
                            _ => Ok(metric.from_length(b - a)),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<Vec<SplitDistance>>) -> Result<Self> {
        let n = rows.len();
        let mut base = Vec::with_capacity(n * n);
        let mut corr = Vec::with_capacity(n * n);
        for row in rows {
            for d in row {
                if !d.base.is_finite() || !d.corr.is_finite() {
                    return Err(Error::NonFinite("non-finite distance in point set".into()));
                }
                base.push(d.base);
                corr.push(d.corr);
            }
        }
        Ok(Self { n, base, corr })
    }

    /// Builds a matrix from plain distances.
    pub fn from_distances(n: usize, d: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| SplitDistance { base: d(i, j), corr: 0.0 }).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.base[i * self.n + j] + self.corr[i * self.n + j]
    }

    fn split(&self, i: usize, j: usize) -> (f64, f64) {
        (self.base[i * self.n + j], self.corr[i * self.n + j])
    }

    /// `(x_i | x_j)_{x_w}`.
    pub fn gromov(&self, w: usize, i: usize, j: usize) -> f64 {
        let (b1, c1) = self.split(w, i);
        let (b2, c2) = self.split(w, j);
        let (b3, c3) = self.split(i, j);
        0.5 * ((b1 + b2 - b3) + (c1 + c2 - c3))
    }

    /// δ of one unordered quadruple: half the gap between the two largest
    /// of the three pair sums. This equals the maximum over base points and
    /// labellings of `min((x|y)_w, (x|z)_w) − (y|z)_w`.
    pub fn quadruple_delta(&self, q: [usize; 4]) -> f64 {
        let [a, b, c, d] = q;
        let pair = |i, j, k, l| {
            let (b1, c1) = self.split(i, j);
            let (b2, c2) = self.split(k, l);
            (b1 + b2, c1 + c2)
        };
        let mut sums = [pair(a, b, c, d), pair(a, c, b, d), pair(a, d, b, c)];
        sums.sort_by(|x, y| (y.0 + y.1).total_cmp(&(x.0 + x.1)));
        (0.5 * ((sums[0].0 - sums[1].0) + (sums[0].1 - sums[1].1))).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaEstimate {
    /// A lower bound for the hyperbolicity constant.
    pub delta_hat: f64,
    pub quadruples: u64,
    pub exhaustive: bool,
    pub argmax: [usize; 4],
}

/// Largest point set for which exhaustive quadruple enumeration is offered.
pub const EXHAUSTIVE_LIMIT: usize = 300;

/// δ̂ over `count` sampled quadruples of distinct points. Quadruple `i`
/// draws from its own stream, so a larger count only adds quadruples.
pub fn four_point_delta(m: &DistanceMatrix, count: u64, seed: u64) -> Result<DeltaEstimate> {
    let n = m.len();
    if n < 4 {
        return Err(Error::InvalidParameter("four-point delta needs at least 4 points".into()));
    }
    let best = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let q = rand::seq::index::sample(&mut rng, n, 4);
            let q = [q.index(0), q.index(1), q.index(2), q.index(3)];
            (m.quadruple_delta(q), q)
        })
        .reduce(|| (0.0, [0, 1, 2, 3]), pick_max);
    Ok(DeltaEstimate { delta_hat: best.0, quadruples: count, exhaustive: false, argmax: best.1 })
}

fn pick_max(a: (f64, [usize; 4]), b: (f64, [usize; 4])) -> (f64, [usize; 4]) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Exact δ of the point set over all quadruples.
pub fn four_point_delta_exhaustive(m: &DistanceMatrix) -> Result<DeltaEstimate> {
    let n = m.len();
    if n < 4 {
        return Err(Error::InvalidParameter("four-point delta needs at least 4 points".into()));
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "exhaustive delta limited to {EXHAUSTIVE_LIMIT} points, got {n}"
        )));
    }
    let best = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut best = (0.0, [0, 1, 2, 3]);
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        best = pick_max(best, (m.quadruple_delta([a, b, c, d]), [a, b, c, d]));
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, [0, 1, 2, 3]), pick_max);
    let quadruples = (n as u64) * (n as u64 - 1) * (n as u64 - 2) * (n as u64 - 3) / 24;
    Ok(DeltaEstimate { delta_hat: best.0, quadruples, exhaustive: true, argmax: best.1 })
}

/// Positions on a geodesic of length `len` that carry the extremal
/// configurations for line-like metrics: both ends, the midpoint region
/// and dyadic offsets from each end.
pub fn geodesic_probe_positions(len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mid = len / 2;
    for k in 0..=4 {
        out.push(k.min(len));
        out.push(len.saturating_sub(k));
        out.push(mid.saturating_sub(k));
        out.push((mid + k).min(len));
    }
    let mut p = 1;
    while p <= len {
        out.push(p);
        out.push(len - p);
        out.push(mid.saturating_sub(p / 2));
        out.push((mid + p / 2).min(len));
        p *= 2;
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasirulerDefect {
    /// `max (g(s)|g(u))_{g(t)}` over `s < t < u`.
    pub tau_hat: f64,
    /// `max d(s,t) + d(t,u) − d(s,u)`, which is `2·tau_hat`.
    pub additivity_defect: f64,
    pub argmax: [usize; 3],
}

/// Quasiruler defect of a path given by its distance matrix, in path order.
pub fn quasiruler_defect(m: &DistanceMatrix) -> Result<QuasirulerDefect> {
    let n = m.len();
    if n < 3 {
        return Err(Error::InvalidParameter("a path needs at least 3 points".into()));
    }
    let mut best = (f64::NEG_INFINITY, [0, 1, 2]);
    for s in 0..n {
        for t in s + 1..n {
            for u in t + 1..n {
                let g = m.gromov(t, s, u);
                if g > best.0 {
                    best = (g, [s, t, u]);
                }
            }
        }
    }
    Ok(QuasirulerDefect { tau_hat: best.0, additivity_defect: 2.0 * best.0, argmax: best.1 })
}

/// `d(0,n) + d(n,2n) − d(0,2n)` for the log-perturbed metric along a word
/// geodesic, i.e. `log((1+n)²/(1+2n))`, without building elements.
pub fn log_perturbed_line_defect(n: u64) -> f64 {
    let n = n as f64;
    2.0 * n.ln_1p() - (2.0 * n).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Distance from the root.
    pub height: f64,
}

/// A rooted weighted tree approximating a finite metric space.
#[derive(Debug, Clone, Serialize)]
pub struct TreeApprox {
    pub nodes: Vec<TreeNode>,
    /// Leaf node of each input point.
    pub leaf: Vec<usize>,
    pub base: usize,
    /// `(x|y)′`, the widest-chain value of the Gromov products at the base.
    pub chain_products: Vec<Vec<f64>>,
    pub delta_used: f64,
    pub k: u32,
    pub max_distortion: f64,
    pub bound: f64,
    /// Whether every pair satisfies `|φx − φy| ≤ d(x,y)` and the distortion
    /// bound `2kδ̂` holds.
    pub contract_holds: bool,
}

impl TreeApprox {
    pub fn tree_distance(&self, i: usize, j: usize) -> f64 {
        let (mut a, mut b) = (self.leaf[i], self.leaf[j]);
        let (ha, hb) = (self.nodes[a].height, self.nodes[b].height);
        // Node ids grow towards the root, so climb the smaller id.
        while a != b {
            if a < b {
                a = self.nodes[a].parent.expect("not root");
            } else {
                b = self.nodes[b].parent.expect("not root");
            }
        }
        ha + hb - 2.0 * self.nodes[a].height
    }
}

/// `k` in the distortion bound `2kδ` for `n` points.
pub fn distortion_k(n: usize) -> u32 {
    if n <= 3 {
        0
    } else {
        ((n - 2) as f64).log2().ceil() as u32
    }
}

/// `(x|y)′` for all pairs: the best chain minimum, read off a maximum
/// spanning tree of the complete graph weighted by `(x|y)_w`.
pub fn chain_products(m: &DistanceMatrix, base: usize) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = m.get(base, i);
    }
    // Prim's algorithm for the maximum spanning tree.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut link = vec![usize::MAX; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    best[0] = f64::INFINITY;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .max_by(|&a, &b| best[a].total_cmp(&best[b]).then(b.cmp(&a)))
            .expect("vertex left");
        in_tree[v] = true;
        // Bottleneck from every earlier vertex through the new edge.
        if link[v] != usize::MAX {
            let u = link[v];
            let w = m.gromov(base, u, v);
            for &z in &order {
                let through = if z == u { w } else { f64::min(out[z][u], w) };
                out[z][v] = through;
                out[v][z] = through;
            }
        }
        order.push(v);
        for z in 0..n {
            if !in_tree[z] {
                let w = m.gromov(base, v, z);
                if w > best[z] {
                    best[z] = w;
                    link[z] = v;
                }
            }
        }
    }
    out
}

/// `(x|y)′` by maximizing over every chain of distinct intermediate points.
/// Exponential; intended for `|P| ≤ 7`.
pub fn chain_products_brute_force(m: &DistanceMatrix, base: usize) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = m.get(base, i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut used = vec![false; n];
            used[i] = true;
            extend_chain(m, base, i, j, f64::INFINITY, &mut used, &mut best);
            out[i][j] = best;
        }
    }
    out
}

fn extend_chain(m: &DistanceMatrix, base: usize, at: usize, goal: usize, value: f64, used: &mut [bool], best: &mut f64) {
    let direct = value.min(m.gromov(base, at, goal));
    *best = best.max(direct);
    for next in 0..used.len() {
        if used[next] || next == goal {
            continue;
        }
        used[next] = true;
        extend_chain(m, base, next, goal, value.min(m.gromov(base, at, next)), used, best);
        used[next] = false;
    }
}

/// Builds the 0-hyperbolic tree `|x−y|′ = d(x,w) + d(y,w) − 2(x|y)′` and
/// checks its distortion against `2kδ̂`, with `δ̂` computed exhaustively on
/// the point set.
pub fn tree_approximation(m: &DistanceMatrix, base: usize) -> Result<TreeApprox> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidParameter("tree approximation needs at least 2 points".into()));
    }
    if base >= n {
        return Err(Error::InvalidParameter("base point index out of range".into()));
    }
    let chain = chain_products(m, base);
    // Kruskal-style merging in decreasing product order.
    let mut nodes: Vec<TreeNode> =
        (0..n).map(|i| TreeNode { parent: None, height: m.get(base, i) }).collect();
    let leaf: Vec<usize> = (0..n).collect();
    let mut top: Vec<usize> = (0..n).collect();
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((chain[i][j], i, j));
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for (h, i, j) in edges {
        let (ci, cj) = (cluster[i], cluster[j]);
        if ci == cj {
            continue;
        }
        let id = nodes.len();
        nodes.push(TreeNode { parent: None, height: h });
        nodes[top[ci]].parent = Some(id);
        nodes[top[cj]].parent = Some(id);
        for c in cluster.iter_mut() {
            if *c == cj {
                *c = ci;
            }
        }
        top[ci] = id;
    }
    let root = nodes.len();
    nodes.push(TreeNode { parent: None, height: 0.0 });
    let last = top[cluster[0]];
    nodes[last].parent = Some(root);

    let delta_used = if n >= 4 { four_point_delta_exhaustive(m)?.delta_hat } else { 0.0 };
    let k = distortion_k(n);
    let bound = 2.0 * k as f64 * delta_used;
    let mut approx = TreeApprox {
        nodes,
        leaf,
        base,
        chain_products: chain,
        delta_used,
        k,
        max_distortion: 0.0,
        bound,
        contract_holds: true,
    };
    let mut max_distortion: f64 = 0.0;
    let mut holds = true;
    for i in 0..n {
        for j in i + 1..n {
            let t = approx.tree_distance(i, j);
            let d = m.get(i, j);
            if t > d + 1e-9 {
                holds = false;
            }
            max_distortion = max_distortion.max(d - t);
        }
    }
    approx.max_distortion = max_distortion;
    approx.contract_holds = holds && max_distortion <= bound + 1e-9;
    Ok(approx)
}

/// `(y_far | x)_w ≥ d(w, x) − R`.
pub fn shadow_membership_finite(
    metric: &MetricHandle,
    w: &Element,
    x: &Element,
    y_far: &Element,
    r: f64,
) -> Result<bool> {
    Ok(gromov_product(metric, w, y_far, x)? >= metric.distance(w, x)? - r)
}

/// Uniform sample of `count` distinct points from a ball.
pub fn sample_ball_points(model: &GroupModel, radius: u32, count: usize, seed: u64) -> Result<Vec<Element>> {
    let ball = model.ball_enumerate(radius)?;
    if count > ball.len() {
        return Err(Error::InvalidParameter(format!("ball has only {} points", ball.len())));
    }
    let mut rng = trial_rng(seed, 0);
    let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, ball.len(), count).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| ball[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub metric: String,
    pub sample_size: u64,
    pub delta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RulerRow {
    pub path_len: usize,
    pub tau_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeApproxRow {
    pub n_points: usize,
    pub k: u32,
    pub delta_hat: f64,
    pub max_distortion: f64,
    pub bound: f64,
}
