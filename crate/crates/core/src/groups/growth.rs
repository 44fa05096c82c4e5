//! Exact growth data for free products of finite cyclic groups.

/// Number of syllables of each length in a cyclic factor of order `m` with
/// generators `{g, g⁻¹}`: `counts[l]` exponents have geodesic length `l`.
fn syllable_counts(m: u32) -> Vec<u64> {
    let mut counts = vec![0u64; (m / 2) as usize + 1];
    for e in 1..m {
        counts[e.min(m - e) as usize] += 1;
    }
    counts
}

/// Sphere sizes `|S(r)|` for `r = 0..=rmax`, saturating at `u64::MAX`.
pub fn free_product_sphere_sizes(orders: &[u32], rmax: u32) -> Vec<u64> {
    let rmax = rmax as usize;
    let syllables: Vec<Vec<u64>> = orders.iter().map(|&m| syllable_counts(m)).collect();
    let mut total = vec![0u128; rmax + 1];
    // ending[f][r]: words of length r whose last syllable lies in factor f
    let mut ending = vec![vec![0u128; rmax + 1]; orders.len()];
    total[0] = 1;
    for r in 1..=rmax {
        for (f, counts) in syllables.iter().enumerate() {
            let mut acc = 0u128;
            for (l, &c) in counts.iter().enumerate().skip(1) {
                if l <= r {
                    let prev = total[r - l] - ending[f][r - l];
                    acc = acc.saturating_add(prev.saturating_mul(u128::from(c)));
                }
            }
            ending[f][r] = acc;
        }
        total[r] = ending.iter().fold(0u128, |a, e| a.saturating_add(e[r]));
    }
    total.into_iter().map(|t| u64::try_from(t).unwrap_or(u64::MAX)).collect()
}

/// Exponential growth rate `v = −ln z*`, where `z*` is the root in `(0,1)` of
/// `Σ_f P_f(z)/(1+P_f(z)) = 1` and `P_f` is the syllable length polynomial.
pub fn free_product_growth_rate(orders: &[u32]) -> f64 {
    let syllables: Vec<Vec<u64>> = orders.iter().map(|&m| syllable_counts(m)).collect();
    let lhs = |z: f64| -> f64 {
        syllables
            .iter()
            .map(|c| {
                let p: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(l, &n)| n as f64 * z.powi(l as i32))
                    .sum();
                p / (1.0 + p)
            })
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    -(0.5 * (lo + hi)).ln()
}
