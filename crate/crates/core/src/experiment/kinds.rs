use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::report::{Check, Estimate, Table};
use super::{ExperimentConfig, ExperimentKind, MetricName};
use crate::asymptotics::{
    compare_walks, dimension_prediction, fundamental_gap, green_speed_check, rate_pair, sub_seed, volume_growth,
    GapClass, GapRow, RatesRow,
};
use crate::boundary::{
    boundary_hist, deviation_profile, exit_measure, gromov_control, harmonic_shadow_band,
    pointwise_dimension_with_measure, sample_boundary, DEFAULT_CONFIRM_MARGIN,
};
use crate::error::{Error, Result};
use crate::green::{fit_ed_with, kernel_row, naim_kernel, GreenOracle};
use crate::groups::{Element, Gen, GroupModel};
use crate::hypcheck::{
    four_point_delta_exhaustive, geodesic_probe_positions, log_perturbed_line_defect, quasiruler_defect,
    sample_ball_points, tree_approximation, DeltaRow, DistanceMatrix, MetricHandle, RulerRow, TreeApproxRow,
};
use crate::walks::StepLaw;

pub(crate) struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub model: Arc<GroupModel>,
    pub laws: BTreeMap<String, StepLaw>,
}

impl Context<'_> {
    fn law(&self) -> Result<&StepLaw> {
        let name = self.config.law_name()?;
        self.laws.get(name).ok_or(Error::Config(format!("law {name:?} is not defined")))
    }

    fn law_b(&self) -> Result<&StepLaw> {
        let name = self.config.params.law_b.as_deref().ok_or(Error::Config("params.law_b missing".into()))?;
        self.laws.get(name).ok_or(Error::Config(format!("law {name:?} is not defined")))
    }

    fn seed(&self, label: &str) -> u64 {
        sub_seed(self.config.seed, label)
    }

    /// Exact growth rate, else the slope fit over the verified ball.
    fn growth_rate(&self) -> Result<f64> {
        match self.model.exact_growth_rate() {
            Some(v) => Ok(v),
            None => {
                let r = self.model.verified_radius().unwrap_or(4);
                Ok(volume_growth(&self.model, r)?.slope)
            }
        }
    }
}

#[derive(Default)]
pub(crate) struct KindResult {
    pub tables: Vec<Table>,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    pub flags: BTreeMap<String, String>,
}

impl KindResult {
    fn table<T: Serialize>(&mut self, file: &str, rows: &[T]) -> Result<()> {
        self.tables.push(Table::new(file, rows)?);
        Ok(())
    }

    fn estimate(&mut self, name: &str, value: f64, stderr: Option<f64>, units: &str, method: &str) {
        self.estimates.push(Estimate::new(name, value, stderr, units, method));
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }
}

pub(crate) fn run_kind(ctx: &Context<'_>) -> Result<KindResult> {
    match ctx.config.experiment {
        ExperimentKind::Kernels => kernels(ctx),
        ExperimentKind::Hyperbolicity => hyperbolicity(ctx),
        ExperimentKind::Rates => rates(ctx),
        ExperimentKind::Dimension => dimension(ctx),
        ExperimentKind::Shadows => shadows(ctx),
        ExperimentKind::Exit => exit(ctx),
        ExperimentKind::Deviation => deviation(ctx),
        ExperimentKind::TreeApprox => tree_approx(ctx),
        ExperimentKind::CompareWalks => compare(ctx),
    }
}

fn kernels(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let radius = ctx.config.params.radius.unwrap_or(4);
    let oracle = GreenOracle::auto(law)?;
    let method = oracle.method().to_string();
    let model = &ctx.model;
    let ball = model.ball_enumerate(radius)?;
    let starts = model.ball_enumerate(1)?;
    let mut rows = Vec::new();
    let mut max_f: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    for x in &starts {
        for y in &ball {
            let row = kernel_row(&oracle, x, y)?;
            max_f = max_f.max(row.f);
            max_residual = max_residual.max(naim_kernel(&oracle, x, y)?.identity_residual);
            rows.push(row);
        }
    }
    let mut out = KindResult::default();
    out.table("kernels.csv", &rows)?;
    let first = model.generator(0);
    let f = oracle.hitting_from_identity(&first)?;
    out.estimate(&format!("F(e,{})", model.format(&first)), f.value, Some(f.error), "probability", &method);
    let diag = oracle.diagonal()?;
    out.estimate("G(e,e)", diag.value, Some(diag.error), "expected visits", &method);
    out.estimate("naim_identity_max_residual", max_residual, None, "log", &method);
    if let Ok(fit) = fit_ed_with(&oracle, radius) {
        out.estimate("c1", fit.c1, None, "per word-length unit", &method);
        out.estimate("C1", fit.big_c1, None, "expected visits", &method);
    }
    out.check("hitting_at_most_one", max_f <= 1.0 + 1e-12, format!("max F = {max_f:.17e}"));
    out.check("naim_identity", max_residual < 1e-9, format!("max residual = {max_residual:.3e} (tolerance 1e-9)"));
    Ok(out)
}

/// Alternating word in the first two non-inverse generators.
fn straight_word(model: &GroupModel, len: usize) -> Result<Vec<Gen>> {
    let gens = model.generators();
    let g0: Gen = 0;
    let g1 = gens
        .ids()
        .find(|&g| g != g0 && g != gens.inverse(g0))
        .ok_or(Error::InvalidModel("need two independent generators".into()))?;
    Ok((0..len).map(|i| if i % 2 == 0 { g0 } else { g1 }).collect())
}

fn hyperbolicity(ctx: &Context<'_>) -> Result<KindResult> {
    let sizes = ctx.config.params.sizes.clone().unwrap_or_else(|| vec![1, 10, 100, 1000]);
    let model = &ctx.model;
    let word_metric = MetricHandle::Word(model.clone());
    let log_metric = MetricHandle::LogPerturbedWord(model.clone());
    let mut out = KindResult::default();
    let mut deltas = Vec::new();
    let mut rulers = Vec::new();
    let mut log_deltas = Vec::new();
    for &n in &sizes {
        let n = n as usize;
        let word = straight_word(model, 2 * n)?;
        let ruler = quasiruler_defect(&DistanceMatrix::on_geodesic(&log_metric, &word, &[0, n, 2 * n])?)?;
        let expected = log_perturbed_line_defect(n as u64);
        let diff = (ruler.additivity_defect - expected).abs();
        out.check(
            &format!("quasiruler_formula_n={n}"),
            diff < 1e-12,
            format!("defect {:.17e} vs log((1+n)²/(1+2n)) {:.17e}", ruler.additivity_defect, expected),
        );
        rulers.push(RulerRow { path_len: n, tau_hat: ruler.tau_hat });
        let probes = geodesic_probe_positions(2 * n);
        if probes.len() < 4 {
            continue;
        }
        for metric in [&word_metric, &log_metric] {
            let d = four_point_delta_exhaustive(&DistanceMatrix::on_geodesic(metric, &word, &probes)?)?;
            out.estimate(&format!("delta_hat[{}] n={n}", metric.name()), d.delta_hat, None, "word-length units", "exhaustive four-point on geodesic probes");
            if matches!(metric, MetricHandle::LogPerturbedWord(_)) {
                log_deltas.push(d.delta_hat);
            } else if model.is_tree() {
                out.check(&format!("tree_word_delta_zero_n={n}"), d.delta_hat.abs() < 1e-12, format!("δ̂ = {:.3e}", d.delta_hat));
            }
            deltas.push(DeltaRow { metric: metric.name(), sample_size: n as u64, delta_hat: d.delta_hat });
        }
    }
    if log_deltas.len() >= 2 {
        let (first, last) = (log_deltas[0], *log_deltas.last().unwrap());
        out.check("log_perturbed_delta_grows", last > first, format!("δ̂ from {first:.6} to {last:.6}"));
    }
    out.table("delta_report.csv", &deltas)?;
    out.table("ruler_report.csv", &rulers)?;
    Ok(out)
}

fn rates(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let p = &ctx.config.params;
    let (n, trials) = (p.n.unwrap_or(10_000), p.trials.unwrap_or(200));
    let oracle = GreenOracle::auto(law)?;
    let method = oracle.method().to_string();
    let seed = ctx.seed("rates");
    let pair = rate_pair(&oracle, n, trials, seed)?;
    let v = ctx.growth_rate()?;
    let gap = fundamental_gap(&pair, v, 1)?;
    let mut out = KindResult::default();
    let mut rows = vec![RatesRow::new(law.name(), &pair.word), RatesRow::new(law.name(), &pair.green)];
    out.estimate("drift", pair.word.mean, pair.word.stderr, "word length per step", "simulation");
    out.estimate("green_speed", pair.green.mean, pair.green.stderr, "nats per step", &method);
    out.estimate("growth_rate", v, None, "nats per word-length unit", "growth series");
    out.estimate("gap", gap.gap, Some(gap.gap_stderr), "nats per step", "paired h − ℓv");
    if ctx.model.is_tree() {
        let c = green_speed_check(&oracle, n, trials, seed)?;
        rows.push(RatesRow::new(law.name(), &c.independent));
        out.estimate("green_speed_independent", c.independent.mean, c.independent.stderr, "nats per step", "lumped ball recursion");
        out.check("green_speed_independent_agrees", c.agrees, format!("difference {:.3e}", c.difference));
    }
    out.check("fundamental_inequality", gap.class != GapClass::Violation, format!("z = {:.3}, class {:?}", gap.z, gap.class));
    out.flags.insert("gap_class".into(), format!("{:?}", gap.class));
    out.table("rates_report.csv", &rows)?;
    out.table("gap_report.csv", &[GapRow::from(&gap)])?;
    Ok(out)
}

fn dimension(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let p = &ctx.config.params;
    let eps = p.epsilon.unwrap_or(1.0);
    let depths = p.depths.clone().unwrap_or_else(|| (1..=6).collect());
    let (report, measure) =
        pointwise_dimension_with_measure(law, eps, p.samples.unwrap_or(100_000), &depths, ctx.seed("boundary"))?;
    let oracle = GreenOracle::auto(law)?;
    let pair = rate_pair(&oracle, p.n.unwrap_or(10_000), p.trials.unwrap_or(200), ctx.seed("rates"))?;
    let v = ctx.growth_rate()?;
    let pred = dimension_prediction(&pair, eps, v)?;
    let mut out = KindResult::default();
    out.estimate("dimension_slope", report.slope, Some(report.stderr), "visual-metric dimension", "cylinder regression, Miller–Madow");
    out.estimate("dimension_prediction", pred.value, Some(pred.stderr), "visual-metric dimension", "ℓ_G/(εℓ)");
    out.estimate("dimension_ceiling", pred.ceiling, None, "visual-metric dimension", "v/ε");
    let combined = report.stderr.hypot(pred.stderr);
    let diff = (report.slope - pred.value).abs();
    out.check("dimension_matches_prediction", diff <= 2.0 * combined, format!("|Δ| = {diff:.3e}, 2σ = {:.3e}", 2.0 * combined));
    out.check(
        "dimension_below_ceiling",
        report.slope - 3.0 * report.stderr <= pred.ceiling,
        format!("slope {:.6} vs ceiling {:.6}", report.slope, pred.ceiling),
    );
    out.table("dim_report.csv", &report.rows)?;
    out.table("boundary_hist.csv", &boundary_hist(&ctx.model, &measure, *depths.last().unwrap()))?;
    Ok(out)
}

fn shadows(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let p = &ctx.config.params;
    let max_len = p.radius.unwrap_or(6);
    let r = p.radii.as_ref().map_or(0.0, |v| v[0]);
    let measure = sample_boundary(law, p.samples.unwrap_or(100_000), max_len as usize, DEFAULT_CONFIRM_MARGIN, ctx.seed("boundary"))?;
    let band = harmonic_shadow_band(law, &measure, max_len, r)?;
    let mut out = KindResult::default();
    out.estimate("shadow_band_C", band.c, None, "ratio", "ν̂(℧(x))·e^{d_G(e,x)} over cells with ≥ 30 samples");
    out.estimate("flagged_shadows", band.flagged as f64, None, "count", "fewer than 30 samples");
    out.check("shadow_band_at_most_4", band.c <= 4.0, format!("C = {:.6}", band.c));
    out.table("shadow_report.csv", &band.rows)?;
    Ok(out)
}

fn exit(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let p = &ctx.config.params;
    let radii = p.radii.clone().unwrap_or_else(|| vec![2.0, 4.0, 6.0]);
    let trials = p.trials.unwrap_or(100_000);
    let gens = ctx.model.generators();
    let uniform = gens.ids().all(|g| (law.generator_mass(g) - law.generator_mass(0)).abs() < 1e-15)
        && law.identity_mass() == 0.0
        && law.is_nearest_neighbour();
    let mut out = KindResult::default();
    let mut rows = Vec::new();
    for &r in &radii {
        let e = exit_measure(law, r, trials, ctx.seed(&format!("exit{r}")))?;
        out.estimate(&format!("max_atom R={r}"), e.max_atom, Some(e.max_atom_sd), "probability", "simulation");
        out.estimate(&format!("C2 R={r}"), e.c2, None, "ratio", "heaviest atom within word distance 2, times e^R");
        out.check(
            &format!("max_atom_bound_R={r}"),
            e.upper_ok,
            format!("max atom {:.6e} ± {:.1e} vs e^-R {:.6e}", e.max_atom, e.max_atom_sd, e.bound),
        );
        if uniform {
            out.check(&format!("first_letter_symmetry_R={r}"), e.symmetric, format!("max |z| = {:.3}", e.symmetry_z));
        }
        rows.extend(e.rows(law));
    }
    out.table("exit_report.csv", &rows)?;
    Ok(out)
}

fn deviation(ctx: &Context<'_>) -> Result<KindResult> {
    let law = ctx.law()?;
    let p = &ctx.config.params;
    let n = p.n.unwrap_or(1000);
    let trials = p.trials.unwrap_or(100_000);
    let grid = p.depths.clone().unwrap_or_else(|| (0..=8).collect());
    let d = deviation_profile(law, n, trials, &grid, ctx.seed("deviation"))?;
    let control = gromov_control(law, n, n, n, trials.min(10_000), ctx.seed("control"))?;
    let mut out = KindResult::default();
    out.estimate("decay_rate_b", d.b, None, "per word-length unit", "count-weighted log-linear fit");
    out.estimate("r_squared", d.r_squared, None, "dimensionless", "count-weighted log-linear fit");
    out.estimate("gromov_control_mean", control.mean, control.stderr, "word-length units", "E[(Z_n|Z_3n)_{Z_2n}]");
    out.check("tail_monotone", d.monotone, "P̂[d ≥ D] non-increasing".into());
    out.check("decay_rate_positive", d.b > 0.0, format!("b = {:.6}", d.b));
    out.check("log_linear_fit", d.r_squared >= 0.98, format!("R² = {:.6}", d.r_squared));
    out.table("deviation_report.csv", &d.rows)?;
    Ok(out)
}

fn tree_approx(ctx: &Context<'_>) -> Result<KindResult> {
    let p = &ctx.config.params;
    let (points, configs, radius) = (p.points.unwrap_or(12), p.configs.unwrap_or(100), p.radius.unwrap_or(4));
    let metric = match p.metric.unwrap_or(MetricName::LogPerturbed) {
        MetricName::Word => MetricHandle::Word(ctx.model.clone()),
        MetricName::LogPerturbed => MetricHandle::LogPerturbedWord(ctx.model.clone()),
        MetricName::Green => MetricHandle::Green(Arc::new(GreenOracle::auto(ctx.law()?)?)),
    };
    let mut rows = Vec::new();
    let mut holds = 0;
    let mut worst: f64 = 0.0;
    for c in 0..configs {
        let pts: Vec<Element> = sample_ball_points(&ctx.model, radius, points, ctx.seed(&format!("config{c}")))?;
        let t = tree_approximation(&DistanceMatrix::new(&metric, &pts)?, 0)?;
        holds += t.contract_holds as usize;
        worst = worst.max(t.max_distortion);
        rows.push(TreeApproxRow { n_points: points, k: t.k, delta_hat: t.delta_used, max_distortion: t.max_distortion, bound: t.bound });
    }
    let mut out = KindResult::default();
    out.estimate("max_distortion", worst, None, "metric units", &metric.name());
    out.check("distortion_bound", holds == configs, format!("{holds}/{configs} configurations within 2kδ̂"));
    if ctx.model.is_tree() && matches!(metric, MetricHandle::Word(_)) {
        out.check("tree_metric_exact", worst <= 1e-12, format!("max distortion {worst:.3e}"));
    }
    out.table("tree_approx_report.csv", &rows)?;
    Ok(out)
}

fn compare(ctx: &Context<'_>) -> Result<KindResult> {
    let (a, b) = (ctx.law()?, ctx.law_b()?);
    let p = &ctx.config.params;
    let (n, trials) = (p.n.unwrap_or(10_000), p.trials.unwrap_or(200));
    let (oa, ob) = (GreenOracle::auto(a)?, GreenOracle::auto(b)?);
    let seed = ctx.seed("compare");
    let ab = compare_walks(&oa, &ob, n, trials, seed, 2)?;
    let ba = compare_walks(&ob, &oa, n, trials, seed, 2)?;
    let mut out = KindResult::default();
    for c in [&ab, &ba] {
        let tag = format!("{} in {}", c.walked, c.measured_in);
        out.estimate(&format!("cross_speed[{tag}]"), c.cross, None, "nats per step", "paired simulation");
        out.estimate(&format!("entropy[{}]", c.walked), c.entropy, None, "nats per step", "green speed");
        out.estimate(&format!("cross_minus_entropy[{tag}]"), c.difference, Some(c.stderr), "nats per step", "paired simulation");
        out.check(&format!("fundamental_inequality[{tag}]"), c.z >= -c.threshold, format!("z = {:.3}", c.z));
    }
    let singular = ab.strictly_greater || ba.strictly_greater;
    out.flags.insert(
        "harmonic measures".into(),
        if singular { "singular (3σ)" } else { "not distinguished (3σ)" }.into(),
    );
    out.table("compare_report.csv", &[ab, ba])?;
    Ok(out)
}
