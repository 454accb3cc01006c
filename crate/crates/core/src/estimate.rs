//! Point estimates carrying a Monte Carlo standard error.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A value together with its standard error. Exact quantities have `stderr == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        stderr: 0.0,
    };

    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Sample mean with standard error `sd / sqrt(n)`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let acc: Welford = samples.iter().copied().collect();
        acc.mean_estimate()
    }

    pub fn is_exact(&self) -> bool {
        self.stderr == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.stderr.is_finite()
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            stderr: self.stderr * c.abs(),
        }
    }

    /// `sqrt` with delta-method error propagation. Negative values (possible
    /// only through noise) are clamped to zero.
    pub fn sqrt(self) -> Self {
        let v = self.value.max(0.0);
        let root = v.sqrt();
        let stderr = if self.stderr == 0.0 {
            0.0
        } else if root > 0.0 {
            self.stderr / (2.0 * root)
        } else {
            self.stderr.sqrt()
        };
        Self {
            value: root,
            stderr,
        }
    }

    /// `value^p` for `p > 0`, clamping negative values to zero.
    pub fn powf(self, p: f64) -> Self {
        let v = self.value.max(0.0);
        let stderr = if self.stderr == 0.0 {
            0.0
        } else if v > 0.0 {
            p * v.powf(p - 1.0) * self.stderr
        } else {
            self.stderr.powf(p)
        };
        Self {
            value: v.powf(p),
            stderr,
        }
    }

    /// Product of two independent estimates (first-order error propagation).
    pub fn product(self, other: Estimate) -> Self {
        Self {
            value: self.value * other.value,
            stderr: (self.value * other.stderr).hypot(other.value * self.stderr),
        }
    }

    /// Quotient of two independent estimates (first-order error propagation).
    pub fn ratio(self, other: Estimate) -> Self {
        let q = self.value / other.value;
        Self {
            value: q,
            stderr: (self.stderr / other.value).hypot(q * other.stderr / other.value).abs(),
        }
    }

    /// `|self - target| <= sigmas * stderr + abs_floor`.
    ///
    /// `abs_floor` absorbs floating-point rounding for quantities whose
    /// Monte Carlo error is identically zero.
    pub fn within(&self, target: f64, sigmas: f64, abs_floor: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr + abs_floor
    }

    /// Relative error `stderr / |value|`, infinite when the value is zero but
    /// the error is not.
    pub fn relative_error(&self) -> f64 {
        if self.stderr == 0.0 {
            0.0
        } else if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.stderr / self.value.abs()
        }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            stderr: self.stderr.hypot(rhs.stderr),
        }
    }
}

impl Sub for Estimate {
    type Output = Estimate;
    fn sub(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value - rhs.value,
            stderr: self.stderr.hypot(rhs.stderr),
        }
    }
}

impl Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, rhs: f64) -> Estimate {
        self.scale(rhs)
    }
}

impl std::iter::Sum for Estimate {
    fn sum<I: Iterator<Item = Estimate>>(iter: I) -> Estimate {
        iter.fold(Estimate::ZERO, |a, b| a + b)
    }
}

/// Welford running mean / variance. Constant input yields an exact mean and
/// zero variance, which the Monte Carlo integrator relies on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn mean_estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate::ZERO;
        }
        Estimate::new(self.mean, (self.variance() / self.n as f64).sqrt())
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Welford::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Unbiased sample variance with a large-sample standard error
/// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)`.
pub fn variance_estimate(samples: &[f64]) -> Estimate {
    let n = samples.len();
    if n < 2 {
        return Estimate::ZERO;
    }
    let acc: Welford = samples.iter().copied().collect();
    let mean = acc.mean();
    let s2 = acc.variance();
    let nf = n as f64;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let var_of_s2 = ((m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    Estimate::new(s2, var_of_s2.sqrt())
}
