//! Standard normal distribution helpers and the bounded solution `g_s` of
//! Stein's equation `g'(w) - w g(w) = 1(w ≤ s) - Φ(s)`.

use serde::{Deserialize, Serialize};

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// `√(2π) / 4`, the sup of `g_s` over `s` and `w`.
pub const G_SUP: f64 = 0.626_657_068_657_750_1;

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `Φ(x)` through `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Φ^{-1}(p)` for `p ∈ (0, 1)`; infinite at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    // Halley steps against the erfc-based CDF, measured on the smaller tail.
    for _ in 0..2 {
        let e = if x < 0.0 { normal_cdf(x) - p } else { (1.0 - p) - normal_sf(x) };
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x ≥ 0`.
fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        0.5 * libm::erfc(x / SQRT_2) * SQRT_2PI * (0.5 * x * x).exp()
    } else {
        mills_continued_fraction(x)
    }
}

/// `1/(x + 1/(x + 2/(x + 3/(x + ...))))`, accurate for large `x`.
fn mills_continued_fraction(x: f64) -> f64 {
    let mut tail = x;
    for n in (1..=40).rev() {
        tail = x + n as f64 / tail;
    }
    1.0 / tail
}

/// `g_s(w) = √(2π) e^{w²/2} Φ(min(w, s)) (1 - Φ(max(w, s)))`, arranged so that
/// no factor overflows for large `|w|`.
pub fn g(s: f64, w: f64) -> f64 {
    if w <= s {
        if w <= 0.0 {
            normal_sf(s) * mills_ratio(-w)
        } else {
            normal_cdf(w) * mills_ratio(s) * (0.5 * (w * w - s * s)).exp()
        }
    } else if w >= 0.0 {
        normal_cdf(s) * mills_ratio(w)
    } else {
        normal_sf(w) * mills_ratio(-s) * (0.5 * (w * w - s * s)).exp()
    }
}

/// `g_s'(w) = w g_s(w) + 1(w ≤ s) - Φ(s)`; at `w = s` this is the left limit.
pub fn g_prime(s: f64, w: f64) -> f64 {
    let indicator = if w <= s { 1.0 } else { 0.0 };
    w * g(s, w) + indicator - normal_cdf(s)
}

/// `g_s''(w) = g_s(w) + w g_s'(w)`, the left limit at `w = s`.
pub fn g_second(s: f64, w: f64) -> f64 {
    g(s, w) + w * g_prime(s, w)
}

/// `g_s` for a fixed test point `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinSolution {
    pub s: f64,
}

impl SteinSolution {
    pub fn new(s: f64) -> Self {
        Self { s }
    }

    pub fn value(&self, w: f64) -> f64 {
        g(self.s, w)
    }

    pub fn derivative(&self, w: f64) -> f64 {
        g_prime(self.s, w)
    }

    pub fn second_derivative(&self, w: f64) -> f64 {
        g_second(self.s, w)
    }

    /// `g_s'(s+) - g_s'(s-)`, from the right limit of Stein's equation.
    pub fn jump(&self) -> f64 {
        let right = self.s * g(self.s, self.s) - normal_cdf(self.s);
        right - g_prime(self.s, self.s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinGrid {
    pub w_min: f64,
    pub w_max: f64,
    pub w_step: f64,
    pub s_values: Vec<f64>,
}

impl Default for SteinGrid {
    fn default() -> Self {
        Self {
            w_min: -8.0,
            w_max: 8.0,
            w_step: 0.01,
            s_values: vec![-2.0, 0.0, 1.0],
        }
    }
}

impl SteinGrid {
    pub fn points(&self) -> Vec<f64> {
        if !(self.w_step > 0.0) || self.w_max < self.w_min {
            return Vec::new();
        }
        let n = ((self.w_max - self.w_min) / self.w_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.w_min + i as f64 * self.w_step).collect()
    }
}

/// Smallest slack of each inequality over the grid; a margin of zero means
/// the bound is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinReport {
    pub points_checked: usize,
    pub min_g: f64,
    /// `min(√(2π)/4 - g)`.
    pub g_upper_margin: f64,
    /// `min(1 - |g'|)`.
    pub g_prime_margin: f64,
    /// `min(1 - |w g|)`.
    pub wg_margin: f64,
    /// `min(√(2π)/4 + |w| - |g''|)`.
    pub g_second_margin: f64,
    /// `max |g'(s+) - g'(s-) + 1|` over the grid's `s` values.
    pub jump_error: f64,
    pub passed: bool,
}

/// Rounding allowance when a bound is attained with equality.
pub const MARGIN_TOLERANCE: f64 = 1e-14;

pub fn check_stein_properties(grid: &SteinGrid) -> SteinReport {
    let ws = grid.points();
    let mut report = SteinReport {
        points_checked: 0,
        min_g: f64::INFINITY,
        g_upper_margin: f64::INFINITY,
        g_prime_margin: f64::INFINITY,
        wg_margin: f64::INFINITY,
        g_second_margin: f64::INFINITY,
        jump_error: 0.0,
        passed: false,
    };
    for &s in &grid.s_values {
        let sol = SteinSolution::new(s);
        report.jump_error = report.jump_error.max((sol.jump() + 1.0).abs());
        for &w in &ws {
            let gv = sol.value(w);
            let gp = sol.derivative(w);
            let gs = sol.second_derivative(w);
            report.points_checked += 1;
            report.min_g = report.min_g.min(gv);
            report.g_upper_margin = report.g_upper_margin.min(G_SUP - gv);
            report.g_prime_margin = report.g_prime_margin.min(1.0 - gp.abs());
            report.wg_margin = report.wg_margin.min(1.0 - (w * gv).abs());
            report.g_second_margin = report.g_second_margin.min(G_SUP + w.abs() - gs.abs());
        }
    }
    report.passed = report.points_checked > 0
        && report.min_g > 0.0
        && [
            report.g_upper_margin,
            report.g_prime_margin,
            report.wg_margin,
            report.g_second_margin,
        ]
        .iter()
        .all(|m| *m >= -MARGIN_TOLERANCE)
        && report.jump_error <= 1e-10;
    report
}
