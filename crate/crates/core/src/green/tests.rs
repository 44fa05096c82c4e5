use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::groups::{BallOptions, GroupModel};

fn f2() -> Arc<GroupModel> {
    Arc::new(GroupModel::free_group(2).unwrap())
}

fn srw_f2() -> StepLaw {
    StepLaw::srw(f2())
}

fn biased() -> StepLaw {
    StepLaw::from_words(f2(), "biased", &[("a", 0.4), ("b", 0.1)]).unwrap()
}

fn el(law: &StepLaw, w: &str) -> Element {
    law.model().element(w).unwrap()
}

#[test]
fn tree_oracle_products() {
    let law = srw_f2();
    let o = GreenOracle::new(&law, MethodSpec::TreeExact).unwrap();
    assert_eq!(o.hitting_from_identity(&Element::identity()).unwrap().value, 1.0);
    assert!((o.hitting_from_identity(&el(&law, "ab")).unwrap().value - 1.0 / 9.0).abs() < 1e-15);
    for w in ["aab", "BAb", "abA"] {
        assert!((o.hitting_from_identity(&el(&law, w)).unwrap().value - 1.0 / 27.0).abs() < 1e-15);
    }
    assert!((o.diagonal().unwrap().value - 1.5).abs() < 1e-14);
    let d = o.green_distance(&Element::identity(), &el(&law, "abab")).unwrap();
    assert!((d - 4.0 * 3f64.ln()).abs() < 1e-13);
}

#[test]
fn z2_cubed_diagonal_and_metric() {
    let law = StepLaw::srw(Arc::new(GroupModel::free_product(&[2, 2, 2]).unwrap()));
    let o = GreenOracle::auto(&law).unwrap();
    assert_eq!(o.method(), Method::TreeExact);
    assert!((o.diagonal().unwrap().value - 2.0).abs() < 1e-13);
    let x = el(&law, "abc");
    assert!((o.green_distance(&Element::identity(), &x).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-13);
}

#[test]
fn lumped_ball_agrees_with_enumerated_gauss_seidel() {
    // A tree law handled by both backends: the enumerated one is forced by
    // building the graph directly.
    for law in [srw_f2(), biased()] {
        for radius in [2u32, 4, 6] {
            let graph = BallGraph::build(&law, radius).unwrap();
            for w in ["a", "ab", "Ba"] {
                let g = el(&law, w);
                if g.len() > radius as usize {
                    continue;
                }
                let lumped = ball_solver(&law, &Element::identity(), &g, radius).unwrap().value;
                let field = graph.hitting_field(graph.index_of(law.model(), &g).unwrap());
                assert!((lumped - field.h[0]).abs() < 1e-11, "{w} R={radius}: {lumped} vs {}", field.h[0]);
            }
            let field = graph.hitting_field(0);
            let u = graph.return_probability(&field);
            let lumped = ball_green_diagonal(&law, radius).unwrap().value;
            assert!((lumped - 1.0 / (1.0 - u)).abs() < 1e-11);
        }
    }
}

#[test]
fn ball_solver_converges_monotonically() {
    let law = srw_f2();
    let a = el(&law, "a");
    let vals: Vec<f64> = [10, 20, 30]
        .iter()
        .map(|&r| ball_solver(&law, &Element::identity(), &a, r).unwrap().value)
        .collect();
    assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
    assert!((vals[2] - 1.0 / 3.0).abs() < 1e-6);
    let v = ball_solver(&law, &a, &a, 3).unwrap();
    assert_eq!(v.value, 1.0);
}

#[test]
fn ball_gap_bound_is_certified() {
    let law = biased();
    let table = tree_hitting_solve(&law).unwrap();
    for w in ["a", "ab", "bbA"] {
        let g = el(&law, w);
        for r in [4u32, 8, 16] {
            let v = ball_solver(&law, &Element::identity(), &g, r).unwrap();
            let exact = table.hitting(&g);
            assert!(v.value <= exact + 1e-15);
            assert!(exact - v.value <= v.gap_bound.unwrap() + 1e-15);
        }
    }
}

#[test]
fn biased_law_cross_checks_with_ball_solver_at_radius_40() {
    let law = biased();
    let table = tree_hitting_solve(&law).unwrap();
    for (w, s) in [("a", 0usize), ("b", 2)] {
        let v = ball_solver(&law, &Element::identity(), &el(&law, w), 40).unwrap();
        assert!((v.value - table.f[s]).abs() < 1e-10);
    }
    assert!(table.f[0] > table.f[2]);
}

#[test]
fn ball_solver_refuses_targets_outside() {
    let law = srw_f2();
    assert!(ball_solver(&law, &Element::identity(), &el(&law, "abab"), 3).is_err());
}

#[test]
fn monte_carlo_matches_one_third() {
    let law = srw_f2();
    let v = monte_carlo_hit(&law, &Element::identity(), &el(&law, "a"), 100_000, 1_000, 11).unwrap();
    assert!(v.interval.contains(1.0 / 3.0), "{:?}", v.interval);
    let same = monte_carlo_hit(&law, &el(&law, "b"), &el(&law, "b"), 5, 10, 0).unwrap();
    assert_eq!(same.interval.estimate, 1.0);
    assert_eq!(same.interval.half_width(), 0.0);
    let zero = monte_carlo_hit(&law, &Element::identity(), &el(&law, "a"), 50, 0, 0).unwrap();
    assert_eq!(zero.interval.estimate, 0.0);
    assert!(monte_carlo_hit(&law, &Element::identity(), &el(&law, "a"), 0, 5, 0).is_err());
}

#[test]
fn monte_carlo_is_reproducible() {
    let law = srw_f2();
    let g = el(&law, "ab");
    let a = monte_carlo_hit(&law, &Element::identity(), &g, 2000, 200, 5).unwrap();
    let b = monte_carlo_hit(&law, &Element::identity(), &g, 2000, 200, 5).unwrap();
    assert_eq!(a.hits, b.hits);
}

#[test]
fn horizon_default() {
    assert_eq!(default_horizon(3, None), DEFAULT_HORIZON);
    assert_eq!(default_horizon(3, Some(0.5)), 60);
}

#[test]
fn martin_kernel_values() {
    let law = srw_f2();
    let o = GreenOracle::auto(&law).unwrap();
    let e = Element::identity();
    let y = el(&law, "ab");
    assert!((martin_kernel(&o, &e, &y).unwrap() - 1.0).abs() < 1e-15);
    assert!((martin_kernel(&o, &el(&law, "a"), &el(&law, "aa")).unwrap() - 3.0).abs() < 1e-12);
    assert!((martin_kernel(&o, &el(&law, "a"), &el(&law, "bb")).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn naim_kernel_values() {
    let law = srw_f2();
    let o = GreenOracle::auto(&law).unwrap();
    let e = Element::identity();
    let n = naim_kernel(&o, &e, &e).unwrap();
    assert!((n.theta - 1.0 / 1.5).abs() < 1e-14);
    let n = naim_kernel(&o, &el(&law, "a"), &el(&law, "b")).unwrap();
    assert!((n.theta - 2.0 / 3.0).abs() < 1e-12);
    assert!(n.gromov_product.abs() < 1e-12);
    assert!(!n.mixed_methods);
}

#[test]
fn naim_flags_mixed_methods() {
    let est = |m| GreenEstimate { value: 0.5, method: m, error: 0.0, direction: Direction::Exact };
    let n = naim_from_estimates(
        est(Method::TreeExact),
        est(Method::TreeExact),
        est(Method::BallSolver { radius: 5 }),
        GreenEstimate { value: 1.5, ..est(Method::TreeExact) },
    );
    assert!(n.mixed_methods);
}

#[test]
fn naim_identity_on_ball_pairs() {
    let law = biased();
    let o = GreenOracle::auto(&law).unwrap();
    let ball = law.model().ball_enumerate(6).unwrap();
    let mut rng = crate::rng::trial_rng(3, 0);
    use rand::Rng;
    for _ in 0..100 {
        let x = &ball[rng.gen_range(0..ball.len())];
        let y = &ball[rng.gen_range(0..ball.len())];
        assert!(naim_kernel(&o, x, y).unwrap().identity_residual < 1e-9);
    }
}

#[test]
fn kernel_row_for_generator() {
    let law = srw_f2();
    let o = GreenOracle::auto(&law).unwrap();
    let row = kernel_row(&o, &Element::identity(), &el(&law, "a")).unwrap();
    assert_eq!(row.method, "tree_exact");
    assert_eq!(row.x_word, "1");
    assert!((row.f - 1.0 / 3.0).abs() < 1e-15);
    assert!((row.d_g - 3f64.ln()).abs() < 1e-15);
}

#[test]
fn decay_fit_on_trees() {
    let fit = fit_ed(&srw_f2(), 8).unwrap();
    assert!((fit.c1 - 3f64.ln()).abs() < 1e-12);
    assert!(fit.max_positive_residual < 1e-12);
    assert!((fit.big_c1 - 1.5).abs() < 1e-10);
    let z = StepLaw::srw(Arc::new(GroupModel::free_product(&[2, 2, 2]).unwrap()));
    assert!((fit_ed(&z, 8).unwrap().c1 - 2f64.ln()).abs() < 1e-12);
    let law = biased();
    let t = tree_hitting_solve(&law).unwrap();
    let fit = fit_ed(&law, 8).unwrap();
    assert!(fit.c1 > -t.f[0].ln() && fit.c1 < -t.f[2].ln());
}

#[test]
fn ancona_ratio_is_one_on_trees() {
    let law = biased();
    let o = GreenOracle::auto(&law).unwrap();
    let s = sample_ancona(&o, 100, 8, 0, 9).unwrap();
    assert!((s.max_ratio - 1.0).abs() < 1e-12 && (s.min_ratio - 1.0).abs() < 1e-12);
    let x = el(&law, "ab");
    let y = el(&law, "abBa");
    let v = el(&law, "ba");
    assert!(ancona_ratio(&o, &x, &v, &y, 0).is_err());
    assert!((ancona_ratio(&o, &x, &x, &y, 0).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn ancona_ratio_off_geodesic_exceeds_one_on_trees() {
    let law = srw_f2();
    let o = GreenOracle::auto(&law).unwrap();
    let e = Element::identity();
    let r = ancona_ratio(&o, &e, &el(&law, "b"), &el(&law, "aa"), 1).unwrap();
    assert!((r - 9.0).abs() < 1e-12);
}

#[test]
fn surface_group_ancona_lower_bound() {
    let model = Arc::new(GroupModel::surface_group(2, BallOptions { max_radius: 6, ..Default::default() }).unwrap());
    let law = StepLaw::srw(model);
    let o = GreenOracle::new(&law, MethodSpec::BallSolver { radius: 5 }).unwrap();
    let s = sample_ancona(&o, 20, 3, 0, 1).unwrap();
    assert!(s.min_ratio >= 1.0 - 1e-9, "{}", s.min_ratio);
    assert!(s.max_ratio.is_finite());
}

#[test]
fn surface_group_ball_values_increase_with_radius() {
    let model = Arc::new(GroupModel::surface_group(2, BallOptions { max_radius: 5, ..Default::default() }).unwrap());
    let law = StepLaw::srw(model);
    let a = el(&law, "a");
    let mut prev = 0.0;
    for r in 1..=5 {
        let v = ball_solver(&law, &Element::identity(), &a, r).unwrap();
        assert!(v.value >= prev);
        assert!(v.residual < SOLVER_TOLERANCE);
        prev = v.value;
    }
    let o = GreenOracle::new(&law, MethodSpec::BallSolver { radius: 5 }).unwrap();
    assert!((o.hitting_from_identity(&a).unwrap().value - prev).abs() < 1e-12);
    assert!(o.diagonal().unwrap().value >= 1.0);
}

/// `Σ_n μ^n(g)` for SRW on F_2 from the radial chain on `ℕ`, which moves
/// 0 → 1 surely and k → k±1 with probabilities 3/4, 1/4.
fn radial_green(len: usize, steps: usize) -> f64 {
    let width = steps + 2;
    let mut p = vec![0.0; width];
    p[0] = 1.0;
    let sphere = if len == 0 { 1.0 } else { 4.0 * 3f64.powi(len as i32 - 1) };
    let mut total = p[len] / sphere;
    for _ in 0..steps {
        let mut q = vec![0.0; width];
        q[1] += p[0];
        for k in 1..width - 1 {
            q[k + 1] += 0.75 * p[k];
            q[k - 1] += 0.25 * p[k];
        }
        p = q;
        total += p[len] / sphere;
    }
    total
}

#[test]
fn green_equals_f_times_diagonal() {
    let law = srw_f2();
    let o = GreenOracle::auto(&law).unwrap();
    for w in ["1", "a", "ab", "abA"] {
        let g = el(&law, w);
        let direct = radial_green(g.len(), 400);
        let via_f = o.green(&Element::identity(), &g).unwrap();
        assert!((direct - via_f).abs() < 1e-10, "{w}: {direct} vs {via_f}");
    }
}

#[test]
fn properness_on_trees() {
    let law = biased();
    let o = GreenOracle::auto(&law).unwrap();
    let ball = law.model().ball_enumerate(6).unwrap();
    let mut best = vec![0.0f64; 7];
    for x in &ball {
        let g = o.green(&Element::identity(), x).unwrap();
        best[x.len()] = best[x.len()].max(g);
    }
    assert!(best.windows(2).all(|w| w[1] < w[0]));
}

fn word_strategy() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..4, 0..7)
}

proptest! {
    #[test]
    fn green_metric_axioms(a in word_strategy(), b in word_strategy(), c in word_strategy()) {
        let law = biased();
        let o = GreenOracle::auto(&law).unwrap();
        let m = law.model();
        let (x, y, z) = (m.normal_form(&a).unwrap(), m.normal_form(&b).unwrap(), m.normal_form(&c).unwrap());
        let dxy = o.green_distance(&x, &y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy == 0.0, x == y);
        prop_assert!((dxy - o.green_distance(&y, &x).unwrap()).abs() < 1e-12);
        let dxz = o.green_distance(&x, &z).unwrap();
        let dzy = o.green_distance(&z, &y).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12);
    }

    #[test]
    fn ball_values_are_lower_bounds(a in word_strategy(), r in 6u32..14) {
        let law = biased();
        let m = law.model();
        let g = m.normal_form(&a).unwrap();
        let t = tree_hitting_solve(&law).unwrap();
        let lo = ball_solver(&law, &Element::identity(), &g, r).unwrap().value;
        let hi = ball_solver(&law, &Element::identity(), &g, r + 1).unwrap().value;
        prop_assert!(lo <= hi + 1e-16);
        prop_assert!(hi <= t.hitting(&g) + 1e-15);
    }
}
