//! Distances between a law on the real line and the standard normal: the
//! one-sample Kolmogorov statistic, the exact Wasserstein-1 distance of an
//! empirical measure, and the exact Kolmogorov distance of a standardized
//! Poisson variable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimate::{Estimate, Welford};
use crate::measure::stream_rng;
use crate::stein::{normal_cdf, normal_pdf, normal_quantile};
use crate::{Error, Result};

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

fn dk_sorted(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = normal_cdf(x);
            ((i + 1) as f64 / n - p).max(p - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// `sup_s |F̂_n(s) - Φ(s)|`, attained at a jump of the empirical CDF.
pub fn empirical_dk(samples: &[f64]) -> Result<f64> {
    Ok(dk_sorted(&sorted(samples)?))
}

/// Antiderivative of `Φ`.
fn cdf_integral(s: f64) -> f64 {
    if s.is_infinite() {
        return if s > 0.0 { f64::INFINITY } else { 0.0 };
    }
    s * normal_cdf(s) + normal_pdf(s)
}

/// `∫_a^b |c - Φ(s)| ds`.
fn level_gap(c: f64, a: f64, b: f64) -> f64 {
    let above = |lo: f64, hi: f64| cdf_integral(hi) - cdf_integral(lo) - c * (hi - lo);
    let q = normal_quantile(c);
    if q <= a {
        above(a, b)
    } else if q >= b {
        -above(a, b)
    } else {
        -above(a, q) + above(q, b)
    }
}

fn dw_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    let first = xs[0];
    let last = xs[n - 1];
    // Tails: ∫_{-∞}^{x_1} Φ and ∫_{x_n}^{∞} (1 - Φ).
    let mut total = cdf_integral(first) + normal_pdf(last) - last * normal_cdf(-last);
    for (i, w) in xs.windows(2).enumerate() {
        if w[1] > w[0] {
            total += level_gap((i + 1) as f64 / n as f64, w[0], w[1]).max(0.0);
        }
    }
    total
}

/// `∫ |F̂_n(s) - Φ(s)| ds`, integrated exactly piece by piece.
pub fn empirical_dw(samples: &[f64]) -> Result<f64> {
    let xs = sorted(samples)?;
    if xs.iter().any(|x| x.is_infinite()) {
        return Err(Error::NonFinite("sample"));
    }
    Ok(dw_sorted(&xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistances {
    pub dk: Estimate,
    pub dw: Estimate,
}

/// Empirical `d_K` and `d_W` with bootstrap standard errors.
pub fn empirical_distances(samples: &[f64], resamples: usize, seed: u64) -> Result<EmpiricalDistances> {
    let xs = sorted(samples)?;
    if xs.iter().any(|x| x.is_infinite()) {
        return Err(Error::NonFinite("sample"));
    }
    let dk = dk_sorted(&xs);
    let dw = dw_sorted(&xs);
    let mut boot_k = Welford::default();
    let mut boot_w = Welford::default();
    let mut rng = stream_rng(seed, 0);
    let mut draw = vec![0.0; xs.len()];
    for _ in 0..resamples {
        for slot in draw.iter_mut() {
            *slot = xs[rng.random_range(0..xs.len())];
        }
        draw.sort_by(f64::total_cmp);
        boot_k.push(dk_sorted(&draw));
        boot_w.push(dw_sorted(&draw));
    }
    let se = |w: &Welford| if resamples >= 2 { w.variance().sqrt() } else { 0.0 };
    Ok(EmpiricalDistances {
        dk: Estimate::new(dk, se(&boot_k)),
        dw: Estimate::new(dw, se(&boot_w)),
    })
}

/// Tail probability that ends the exact scan.
pub const POISSON_TAIL_TARGET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonKolmogorov {
    pub t: f64,
    pub dk: f64,
    /// Jump at which the supremum is attained.
    pub argmax: u64,
    /// Last jump examined.
    pub last_jump: u64,
    /// Chernoff bound on `P(Y > last_jump)`.
    pub tail_bound: f64,
}

/// `ln P(Y ≥ m)` upper bound `-t + m (1 + ln t - ln m)` for `m > t`.
fn log_chernoff_tail(t: f64, m: f64) -> f64 {
    -t + m * (1.0 + t.ln() - m.ln())
}

/// Exact `sup_s |P((Y - t)/√t ≤ s) - Φ(s)|` for `Y ~ Poisson(t)`.
///
/// Both one-sided gaps are evaluated at every jump up to a point beyond which
/// the Poisson tail is certified below [`POISSON_TAIL_TARGET`].
pub fn poisson_exact_dk(t: f64) -> Result<PoissonKolmogorov> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidIntensity(format!("Poisson mean must be positive and finite, got {t}")));
    }
    let sd = t.sqrt();
    let mut last = (t + 12.0 * sd).ceil() as u64;
    while log_chernoff_tail(t, (last + 1) as f64) >= POISSON_TAIL_TARGET.ln() {
        last += 1;
    }
    let log_t = t.ln();
    let mut log_pmf = -t;
    let mut cdf = 0.0;
    let mut comp = 0.0;
    let mut best = (0.0, 0);
    for m in 0..=last {
        if m > 0 {
            log_pmf += log_t - (m as f64).ln();
        }
        let before = cdf;
        // Kahan summation of the CDF.
        let y = log_pmf.exp() - comp;
        let sum = cdf + y;
        comp = (sum - cdf) - y;
        cdf = sum;
        let phi = normal_cdf((m as f64 - t) / sd);
        let gap = (cdf - phi).abs().max((phi - before).abs());
        if gap > best.0 {
            best = (gap, m);
        }
    }
    Ok(PoissonKolmogorov {
        t,
        dk: best.0,
        argmax: best.1,
        last_jump: last,
        tail_bound: log_chernoff_tail(t, (last + 1) as f64).exp(),
    })
}
