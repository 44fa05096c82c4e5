//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Every criterion is evaluated even when an earlier one fails; the test
//! fails at the end if any line reads FAIL.

use std::sync::Arc;

use greenlab_core::asymptotics::{
    dimension_prediction, drift, fundamental_gap, green_speed_check, rate_pair, volume_growth, GapClass,
};
use greenlab_core::boundary::{
    busemann_recovery, deviation_profile, enumerate_directions, exit_measure, harmonic_shadow_band,
    pointwise_dimension, sample_boundary, DEFAULT_CONFIRM_MARGIN,
};
use greenlab_core::experiment::{run, ExperimentConfig};
use greenlab_core::green::{
    ancona_ratio, naim_kernel, sample_ancona, tree_hitting_solve, GreenOracle, MethodSpec,
};
use greenlab_core::groups::{BallOptions, Element, GroupModel};
use greenlab_core::hypcheck::{
    chain_products, chain_products_brute_force, four_point_delta_exhaustive, geodesic_probe_positions,
    log_perturbed_line_defect, quasiruler_defect, sample_ball_points, tree_approximation, DistanceMatrix,
    MetricHandle,
};
use greenlab_core::walks::StepLaw;
use greenlab_core::Result;

const TREE_RESIDUAL: f64 = 1e-14;
const BALL_TOLERANCE: f64 = 1e-6;
const MC_TRIALS: u64 = 100_000;
const MC_HORIZON: u64 = 1_000;
const DRIFT_STEPS: usize = 10_000;
const DRIFT_TRIALS: usize = 200;
const DRIFT_BIAS: f64 = 0.01;
const GROWTH_TOLERANCE: f64 = 1e-3;
const GAP_TRIALS: usize = 400;
const DIM_SAMPLES: usize = 100_000;
const DIM_RELATIVE: f64 = 0.05;
const NAIM_TOLERANCE: f64 = 1e-9;
const TREE_ANCONA_TOLERANCE: f64 = 1e-12;
const SURFACE_ANCONA_SLACK: f64 = 1e-9;
const SURFACE_ANCONA_RADIUS: u32 = 10;
const SURFACE_ANCONA_LEN: u32 = 8;
const SURFACE_ANCONA_TRIPLES: usize = 200;
const DISTORTION_TOLERANCE: f64 = 1e-12;
const RULER_TOLERANCE: f64 = 1e-12;
const DELTA_THRESHOLD: f64 = 3.0;
const SHADOW_C: f64 = 4.0;
const DEVIATION_R2: f64 = 0.98;
const EXIT_TRIALS: usize = 100_000;

fn f2() -> Arc<GroupModel> {
    Arc::new(GroupModel::free_group(2).unwrap())
}

fn z2cubed() -> Arc<GroupModel> {
    Arc::new(GroupModel::free_product(&[2, 2, 2]).unwrap())
}

fn biased() -> StepLaw {
    StepLaw::from_words(f2(), "biased", &[("a", 0.4), ("b", 0.1)]).unwrap()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn hitting_probability() -> Result<Outcome> {
    let law = StepLaw::srw(f2());
    let a = law.model().element("a")?;
    let t = tree_hitting_solve(&law)?;
    let exact = (t.f[0] - 1.0 / 3.0).abs() < 1e-15 && t.residual < TREE_RESIDUAL;
    let ball = GreenOracle::new(&law, MethodSpec::BallSolver { radius: 30 })?.hitting_from_identity(&a)?.value;
    let mc = GreenOracle::new(&law, MethodSpec::MonteCarlo { trials: MC_TRIALS, horizon: MC_HORIZON, seed: 1 })?
        .hitting_from_identity(&a)?;
    let (lo, hi) = (mc.value - mc.error, mc.value + mc.error);
    let in_ci = lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi;
    outcome(
        exact && (ball - 1.0 / 3.0).abs() < BALL_TOLERANCE && in_ci,
        format!("tree f_a = {:.17}, residual {:.1e}; ball R=30 {ball:.10}; MC {:.5} ∈ [{lo:.5}, {hi:.5}]", t.f[0], t.residual, mc.value),
    )
}

fn green_diagonal() -> Result<Outcome> {
    let g_f2 = GreenOracle::new(&StepLaw::srw(f2()), MethodSpec::BallSolver { radius: 30 })?.diagonal()?.value;
    let g_z = GreenOracle::new(&StepLaw::srw(z2cubed()), MethodSpec::BallSolver { radius: 30 })?.diagonal()?.value;
    outcome(
        (g_f2 - 1.5).abs() < BALL_TOLERANCE && (g_z - 2.0).abs() < BALL_TOLERANCE,
        format!("F_2 {g_f2:.10}, Z2*Z2*Z2 {g_z:.10}"),
    )
}

fn drift_values() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, target) in [(f2(), 0.5), (z2cubed(), 1.0 / 3.0)] {
        let law = StepLaw::srw(model.clone());
        let d = drift(&law, &MetricHandle::Word(model.clone()), DRIFT_STEPS, DRIFT_TRIALS, 11)?;
        let bias = d.mean - target;
        ok &= bias.abs() <= 3.0 * d.se() && bias.abs() < DRIFT_BIAS;
        detail.push(format!("{} ℓ = {:.5} ± {:.5}", model.describe(), d.mean, d.se()));
    }
    outcome(ok, detail.join("; "))
}

fn green_speed_entropy() -> Result<Outcome> {
    let o = GreenOracle::new(&StepLaw::srw(f2()), MethodSpec::TreeExact)?;
    let c = green_speed_check(&o, DRIFT_STEPS, DRIFT_TRIALS, 12)?;
    let target = 0.5 * 3f64.ln();
    let g = &c.green_speed;
    outcome(
        (g.mean - target).abs() <= 3.0 * g.se() && c.agrees,
        format!("ℓ_G = {:.6} ± {:.6} (target {target:.6}); independent {:.6}", g.mean, g.se(), c.independent.mean),
    )
}

fn volume_growth_rates() -> Result<Outcome> {
    let f3 = GroupModel::free_group(3)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, r, target) in [(f2().as_ref().clone(), 10, 3f64.ln()), (z2cubed().as_ref().clone(), 14, 2f64.ln()), (f3, 8, 5f64.ln())] {
        let v = volume_growth(&model, r)?;
        ok &= (v.slope - target).abs() < GROWTH_TOLERANCE;
        detail.push(format!("{} slope {:.5} vs {target:.5}", model.describe(), v.slope));
    }
    outcome(ok, detail.join("; "))
}

fn fundamental_inequality() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (law, v, expect) in [
        (StepLaw::srw(f2()), 3f64.ln(), GapClass::EqualityConsistent),
        (StepLaw::srw(z2cubed()), 2f64.ln(), GapClass::EqualityConsistent),
        (biased(), 3f64.ln(), GapClass::StrictlyNegative),
    ] {
        let o = GreenOracle::new(&law, MethodSpec::TreeExact)?;
        let trials = if expect == GapClass::StrictlyNegative { GAP_TRIALS } else { DRIFT_TRIALS };
        let gap = fundamental_gap(&rate_pair(&o, DRIFT_STEPS, trials, 13)?, v, 1)?;
        ok &= gap.class == expect;
        detail.push(format!("{} {}: gap {:.2e}, z {:.2}, {:?}", law.model().describe(), law.name(), gap.gap, gap.z, gap.class));
    }
    outcome(ok, detail.join("; "))
}

fn dimension_formula() -> Result<Outcome> {
    let depths: Vec<usize> = (1..=6).collect();
    let ln3 = 3f64.ln();
    let srw = pointwise_dimension(&StepLaw::srw(f2()), 1.0, DIM_SAMPLES, &depths, 14)?;
    let law = biased();
    let b = pointwise_dimension(&law, 1.0, DIM_SAMPLES, &depths, 15)?;
    let o = GreenOracle::new(&law, MethodSpec::TreeExact)?;
    let pred = dimension_prediction(&rate_pair(&o, DRIFT_STEPS, DRIFT_TRIALS, 16)?, 1.0, ln3)?;
    let combined = b.stderr.hypot(pred.stderr);
    let srw_ok = (srw.slope - ln3).abs() < DIM_RELATIVE * ln3;
    let pred_ok = (b.slope - pred.value).abs() <= 2.0 * combined;
    let below = ln3 - b.slope >= 3.0 * b.stderr;
    outcome(
        srw_ok && pred_ok && below,
        format!(
            "SRW slope {:.5} (log 3 = {ln3:.5}); biased slope {:.5} ± {:.5} vs ℓ_G/ℓ {:.5} ± {:.5}",
            srw.slope, b.slope, b.stderr, pred.value, pred.stderr
        ),
    )
}

fn naim_identity() -> Result<Outcome> {
    let law = StepLaw::srw(f2());
    let o = GreenOracle::new(&law, MethodSpec::TreeExact)?;
    let xs = sample_ball_points(law.model(), 6, 100, 17)?;
    let ys = sample_ball_points(law.model(), 6, 100, 18)?;
    let mut worst: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys.iter().rev()) {
        worst = worst.max(naim_kernel(&o, x, y)?.identity_residual);
    }
    outcome(worst < NAIM_TOLERANCE, format!("max residual {worst:.2e} over 100 pairs"))
}

fn ancona() -> Result<Outcome> {
    let law = StepLaw::srw(f2());
    let model = law.model();
    let o = GreenOracle::new(&law, MethodSpec::TreeExact)?;
    let xs = sample_ball_points(model, 5, 100, 19)?;
    let ys = sample_ball_points(model, 5, 100, 20)?;
    let mut tree_worst: f64 = 0.0;
    for (i, (x, y)) in xs.iter().zip(ys.iter().rev()).enumerate() {
        let path = model.geodesic_vertices(&model.between(x, y))?;
        let v = model.multiply(x, &path[i % path.len()]);
        tree_worst = tree_worst.max((ancona_ratio(&o, x, &v, y, 0)? - 1.0).abs());
    }
    let tree_ok = tree_worst < TREE_ANCONA_TOLERANCE;

    // The specified scale first; it needs a ball of ~3·10⁸ vertices.
    let surface = Arc::new(GroupModel::surface_group(2, BallOptions { max_radius: SURFACE_ANCONA_RADIUS, ..Default::default() })?);
    let slaw = StepLaw::srw(surface.clone());
    let full = GreenOracle::new(&slaw, MethodSpec::BallSolver { radius: SURFACE_ANCONA_RADIUS })
        .and_then(|o| sample_ancona(&o, SURFACE_ANCONA_TRIPLES, SURFACE_ANCONA_LEN, 0, 21));
    let (surface_ok, surface_detail) = match full {
        Ok(s) => (
            s.min_ratio >= 1.0 - SURFACE_ANCONA_SLACK && s.max_ratio.is_finite(),
            format!("genus 2 R=10: min {:.12}, sup {:.4}", s.min_ratio, s.max_ratio),
        ),
        Err(e) => {
            let reduced = GreenOracle::new(&slaw, MethodSpec::BallSolver { radius: 6 })?;
            let s = sample_ancona(&reduced, SURFACE_ANCONA_TRIPLES, 4, 0, 21)?;
            (
                false,
                format!(
                    "genus 2 R=10 refused ({e}); reduced R=6, |x⁻¹y| ≤ 4, {} triples: min {:.12}, sup {:.4}",
                    s.samples.len(),
                    s.min_ratio,
                    s.max_ratio
                ),
            )
        }
    };
    outcome(tree_ok && surface_ok, format!("trees: max |ratio − 1| {tree_worst:.1e}; {surface_detail}"))
}

fn tree_approximation_criterion() -> Result<Outcome> {
    let mut exact_worst: f64 = 0.0;
    for (i, model) in [f2(), z2cubed()].into_iter().enumerate() {
        let metric = MetricHandle::Word(model.clone());
        for c in 0..20 {
            let pts = sample_ball_points(&model, 5, 12, 100 * i as u64 + c)?;
            let t = tree_approximation(&DistanceMatrix::new(&metric, &pts)?, 0)?;
            exact_worst = exact_worst.max(t.max_distortion);
        }
    }
    let model = f2();
    let log_metric = MetricHandle::LogPerturbedWord(model.clone());
    let mut chains_equal = true;
    for c in 0..50 {
        let n = 3 + (c % 4) as usize;
        let pts = sample_ball_points(&model, 4, n, 300 + c)?;
        let m = DistanceMatrix::new(&log_metric, &pts)?;
        chains_equal &= chain_products(&m, 0) == chain_products_brute_force(&m, 0);
    }
    let mut holds = 0;
    for c in 0..100 {
        let pts = sample_ball_points(&model, 4, 12, 500 + c)?;
        holds += tree_approximation(&DistanceMatrix::new(&log_metric, &pts)?, 0)?.contract_holds as usize;
    }
    outcome(
        exact_worst <= DISTORTION_TOLERANCE && chains_equal && holds == 100,
        format!("tree-metric distortion {exact_worst:.1e}; MST = brute force: {chains_equal}; bound holds {holds}/100"),
    )
}

fn non_hyperbolicity() -> Result<Outcome> {
    let model = f2();
    let metric = MetricHandle::LogPerturbedWord(model.clone());
    let mut worst: f64 = 0.0;
    let mut deltas = Vec::new();
    let mut grows = true;
    for n in [1usize, 10, 1_000, 1_000_000] {
        let word: Vec<u8> = (0..2 * n).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
        let r = quasiruler_defect(&DistanceMatrix::on_geodesic(&metric, &word, &[0, n, 2 * n])?)?;
        worst = worst.max((r.additivity_defect - log_perturbed_line_defect(n as u64)).abs());
        if n >= 1_000 {
            let d = four_point_delta_exhaustive(&DistanceMatrix::on_geodesic(&metric, &word, &geodesic_probe_positions(2 * n))?)?;
            grows &= d.delta_hat > DELTA_THRESHOLD;
            deltas.push(format!("n={n}: δ̂ {:.4}", d.delta_hat));
        }
    }
    outcome(worst < RULER_TOLERANCE && grows, format!("max ruler error {worst:.1e}; {}", deltas.join(", ")))
}

fn shadow_lemma() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (law, seed) in [(StepLaw::srw(f2()), 22), (biased(), 23)] {
        let s = sample_boundary(&law, DIM_SAMPLES, 6, DEFAULT_CONFIRM_MARGIN, seed)?;
        let band = harmonic_shadow_band(&law, &s, 6, 0.0)?;
        ok &= band.c <= SHADOW_C;
        detail.push(format!("{}: C {:.4} ({} sparse cells flagged)", law.name(), band.c, band.flagged));
    }
    outcome(ok, detail.join("; "))
}

fn deviation_tail() -> Result<Outcome> {
    let grid: Vec<usize> = (0..=8).collect();
    let d = deviation_profile(&StepLaw::srw(f2()), 1_000, 100_000, &grid, 24)?;
    outcome(
        d.monotone && d.b > 0.0 && d.r_squared >= DEVIATION_R2,
        format!("monotone {}, b {:.4} (log 3 = {:.4}), R² {:.5}", d.monotone, d.b, 3f64.ln(), d.r_squared),
    )
}

fn exit_measure_criterion() -> Result<Outcome> {
    let law = StepLaw::srw(f2());
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [2.0, 4.0, 6.0] {
        let e = exit_measure(&law, r, EXIT_TRIALS, 25)?;
        ok &= e.upper_ok && e.symmetric;
        detail.push(format!("R={r}: max {:.5} vs e^-R {:.5}, symmetry z {:.2}", e.max_atom, e.bound, e.symmetry_z));
    }
    outcome(ok, detail.join("; "))
}

fn busemann_criterion() -> Result<Outcome> {
    let model = f2();
    let metric = MetricHandle::Word(model.clone());
    let dirs = enumerate_directions(&model, 6)?;
    let xs = sample_ball_points(&model, 4, 50, 26)?;
    let ys = sample_ball_points(&model, 4, 50, 27)?;
    let mut exact = 0;
    for (x, y) in xs.iter().zip(ys.iter().rev()) {
        exact += (busemann_recovery(&metric, &dirs, x, y)? == model.distance(x, y)? as f64) as usize;
    }
    outcome(exact == 50, format!("{exact}/50 pairs exact over {} directions", dirs.len()))
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(greenlab_core::Error::from)?;
    let configs = [
        r#"{"name": "d1", "group": {"type": "free", "rank": 2}, "laws": {"srw": {"kind": "srw"}},
            "experiment": "dimension", "params": {"samples": 20000, "depths": [1, 2, 3, 4], "n": 1000, "trials": 50}, "seed": 9}"#,
        r#"{"name": "d2", "group": {"type": "free", "rank": 2}, "laws": {"srw": {"kind": "srw"}},
            "experiment": "exit", "params": {"radii": [2.0, 4.0], "trials": 5000}, "seed": 9}"#,
        r#"{"name": "d3", "group": {"type": "free_product", "orders": [2, 2, 2]}, "experiment": "tree-approx",
            "params": {"metric": "log-perturbed", "configs": 10}, "seed": 9}"#,
    ];
    let mut identical = 0;
    let mut files = 0;
    for (i, text) in configs.iter().enumerate() {
        let c = ExperimentConfig::from_json(text)?;
        let a = run(&c, Some(&dir.path().join(format!("{i}a"))))?;
        let b = run(&c, Some(&dir.path().join(format!("{i}b"))))?;
        for f in &a.summary.files {
            files += 1;
            let same = std::fs::read(a.output_dir.join(f)).ok() == std::fs::read(b.output_dir.join(f)).ok();
            identical += same as usize;
        }
    }
    outcome(identical == files && files > 0, format!("{identical}/{files} CSV files byte-identical across reruns"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Result<Outcome>); 16] = [
        ("hitting probability", hitting_probability),
        ("green diagonal", green_diagonal),
        ("drift", drift_values),
        ("green speed = entropy", green_speed_entropy),
        ("volume growth", volume_growth_rates),
        ("fundamental equality/inequality", fundamental_inequality),
        ("dimension formula", dimension_formula),
        ("naim identity", naim_identity),
        ("ancona on trees and surface group", ancona),
        ("tree approximation", tree_approximation_criterion),
        ("non-hyperbolicity", non_hyperbolicity),
        ("shadow lemma surrogate", shadow_lemma),
        ("deviation tail", deviation_tail),
        ("exit measure", exit_measure_criterion),
        ("busemann recovery", busemann_criterion),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (passed, detail) = match f() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {name}: {detail} ({:.1}s)", i + 1, start.elapsed().as_secs_f64());
        if !passed {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

#[test]
fn unit_ancona_ratio_is_one_on_identity_geodesic() {
    let law = StepLaw::srw(f2());
    let o = GreenOracle::new(&law, MethodSpec::TreeExact).unwrap();
    let e = Element::identity();
    let y = law.model().element("ab").unwrap();
    assert!((ancona_ratio(&o, &e, &e, &y, 0).unwrap() - 1.0).abs() < 1e-15);
}
