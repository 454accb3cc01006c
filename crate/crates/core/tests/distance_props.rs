use proptest::prelude::*;
use stein_ustat::distance::{empirical_dk, empirical_dw, poisson_exact_dk};
use stein_ustat::measure::stream_rng;
use stein_ustat::stein::normal_cdf;

use rand::Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn kolmogorov_below_twice_root_wasserstein(xs in prop::collection::vec(-5.0..5.0f64, 1..60)) {
        let dk = empirical_dk(&xs).unwrap();
        let dw = empirical_dw(&xs).unwrap();
        prop_assert!((0.0..=1.0).contains(&dk));
        prop_assert!(dk <= 2.0 * dw.sqrt());
    }

    #[test]
    fn wasserstein_is_translation_lipschitz(xs in prop::collection::vec(-4.0..4.0f64, 1..40), c in -2.0..2.0f64) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((empirical_dw(&shifted).unwrap() - empirical_dw(&xs).unwrap()).abs() <= c.abs() + 1e-12);
    }

    #[test]
    fn kolmogorov_ignores_order(mut xs in prop::collection::vec(-4.0..4.0f64, 1..40)) {
        let before = empirical_dk(&xs).unwrap();
        xs.reverse();
        prop_assert_eq!(before, empirical_dk(&xs).unwrap());
    }
}

/// Midpoint-rule `∫_{-10}^{10} |F̂ - Φ|` with step `1e-4`.
fn riemann_dw(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = 1e-4;
    let n = sorted.len() as f64;
    let steps = (20.0 / h) as usize;
    let mut below = 0;
    let mut total = 0.0;
    for i in 0..steps {
        let s = -10.0 + (i as f64 + 0.5) * h;
        while below < sorted.len() && sorted[below] <= s {
            below += 1;
        }
        total += (below as f64 / n - normal_cdf(s)).abs() * h;
    }
    total
}

#[test]
fn wasserstein_matches_riemann_sum() {
    let mut rng = stream_rng(70, 0);
    for _ in 0..5 {
        // Samples on the midpoint grid keep the Riemann sum exact at the jumps.
        let xs: Vec<f64> = (0..25)
            .map(|_| {
                let x: f64 = rng.sample::<f64, _>(StandardNormal) * 1.3 + 0.2;
                ((x + 10.0) / 1e-4).round() * 1e-4 - 10.0
            })
            .collect();
        let exact = empirical_dw(&xs).unwrap();
        let riemann = riemann_dw(&xs);
        assert!((exact - riemann).abs() <= 1e-6, "{exact} vs {riemann}");
    }
}

#[test]
fn kolmogorov_smoke_test_for_normal_samples() {
    let mut rng = stream_rng(71, 0);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
    assert!(empirical_dk(&xs).unwrap() < 1.95 / 100.0);
}

/// `sup |P(Y ≤ m) - Φ|` over `m ≤ 40` from factorial-form pmf sums in `f64`.
fn poisson_one_oracle() -> f64 {
    let e = (-1.0f64).exp();
    let mut cdf = 0.0;
    let mut fact = 1.0;
    let mut best: f64 = 0.0;
    for m in 0..=40 {
        if m > 0 {
            fact *= m as f64;
        }
        let before = cdf;
        cdf += e / fact;
        let phi = normal_cdf(m as f64 - 1.0);
        best = best.max((cdf - phi).abs()).max((phi - before).abs());
    }
    best
}

#[test]
fn poisson_at_unit_mean_matches_direct_summation() {
    let r = poisson_exact_dk(1.0).unwrap();
    assert!((r.dk - poisson_one_oracle()).abs() < 1e-14);
}

#[test]
fn poisson_rate_stabilizes() {
    let scaled: Vec<f64> = [64.0, 128.0, 256.0, 512.0, 1024.0]
        .iter()
        .map(|&t: &f64| poisson_exact_dk(t).unwrap().dk * t.sqrt())
        .collect();
    for w in scaled.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.8..=1.25).contains(&ratio), "{scaled:?}");
    }
    for t in [1.0, 3.0, 17.5, 300.0] {
        let v = poisson_exact_dk(t).unwrap().dk * f64::sqrt(t);
        assert!(v > 0.0 && v <= 8.0);
    }
}
