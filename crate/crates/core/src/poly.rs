use serde::{Deserialize, Serialize};

/// Dense univariate polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

/// Sub-intervals scanned for sign changes when integrating `|p|`.
const SIGN_SCAN_CELLS: usize = 4096;

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.0.is_empty() || other.0.is_empty() {
            return Polynomial(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial(out)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + c / (i + 1) as f64)
            * x
    }

    /// Exact `∫_a^b p(x) dx`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// `∫_a^b |p(x)| w(x) dx` for a weight `w ≥ 0` on `[a, b]`.
    ///
    /// The interval is split at the sign changes of `p`, located by a scan of
    /// `SIGN_SCAN_CELLS` cells followed by bisection; on each piece the exact
    /// polynomial integral of `p * w` is taken in absolute value.
    pub fn abs_weighted_integral(&self, weight: &Polynomial, a: f64, b: f64) -> f64 {
        let pw = self.mul(weight);
        let mut cuts = vec![a];
        let h = (b - a) / SIGN_SCAN_CELLS as f64;
        let mut x0 = a;
        let mut f0 = self.eval(x0);
        for cell in 1..=SIGN_SCAN_CELLS {
            let x1 = if cell == SIGN_SCAN_CELLS { b } else { a + h * cell as f64 };
            let f1 = self.eval(x1);
            if f1 == 0.0 && cell < SIGN_SCAN_CELLS {
                cuts.push(x1);
            } else if f0 != 0.0 && f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
                cuts.push(self.bisect_root(x0, x1, f0));
            }
            x0 = x1;
            f0 = f1;
        }
        cuts.push(b);
        cuts.windows(2).map(|w| pw.integral(w[0], w[1]).abs()).sum()
    }

    fn bisect_root(&self, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
        let lo_negative = f_lo < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `sup_{[a,b]} |p|` estimated on a fine scan; used for validation only.
    pub(crate) fn scan_abs_max(&self, a: f64, b: f64) -> f64 {
        (0..=SIGN_SCAN_CELLS)
            .map(|i| self.eval(a + (b - a) * i as f64 / SIGN_SCAN_CELLS as f64).abs())
            .fold(0.0, f64::max)
    }
}
