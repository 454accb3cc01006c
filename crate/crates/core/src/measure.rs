//! State space, intensity measure and Poisson sampling.
//!
//! The state space is an axis-aligned box in R^d. The intensity measure is
//! `μ_t = t · density · Lebesgue`, where `density` is bounded by a declared
//! supremum that rejection sampling relies on.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::estimate::{Estimate, Welford};
use crate::poly::Polynomial;
use crate::{Error, Result};

/// Samples used when the total mass has no closed form.
const MASS_MC_SAMPLES: usize = 1 << 20;
const MASS_MC_SEED: u64 = 0x6d61_7373;
/// Proposals tried per accepted point before rejection sampling gives up.
const MAX_REJECTIONS: usize = 10_000_000;

/// Random stream used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic sub-seed for an independent purpose (`tag`) under a master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Random stream for replication `index` under `seed`. Streams with distinct
/// indices are independent, so results never depend on the thread schedule.
pub fn stream_rng(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` once per replication in parallel, each with its own stream.
/// The output is in replication order.
pub fn replicate<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut stream_rng(seed, i as u64), i))
        .collect()
}

/// Fallible variant of [`replicate`]; the first error (in replication order) wins.
pub fn try_replicate<T, F>(seed: u64, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng, usize) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut stream_rng(seed, i as u64), i))
        .collect()
}

/// User-supplied density on the box.
#[derive(Clone)]
pub struct CustomDensity {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    sup: f64,
    integral: Option<f64>,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("sup", &self.sup)
            .field("integral", &self.integral)
            .finish_non_exhaustive()
    }
}

/// Density of the base measure with respect to Lebesgue measure on the box.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    Constant { value: f64 },
    /// Polynomial in the first coordinate with a declared supremum.
    Polynomial { coeffs: Polynomial, sup: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl Default for Density {
    fn default() -> Self {
        Density::Constant { value: 1.0 }
    }
}

impl Density {
    pub fn constant(value: f64) -> Self {
        Density::Constant { value }
    }

    pub fn polynomial(coeffs: Vec<f64>, sup: f64) -> Self {
        Density::Polynomial {
            coeffs: Polynomial::new(coeffs),
            sup,
        }
    }

    /// Arbitrary density with declared supremum and, optionally, its exact
    /// Lebesgue integral over the box.
    pub fn custom<F>(f: F, sup: f64, integral: Option<f64>) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Density::Custom(CustomDensity {
            f: Arc::new(f),
            sup,
            integral,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Density::Constant { value } => *value,
            Density::Polynomial { coeffs, .. } => coeffs.eval(x[0]),
            Density::Custom(c) => (c.f)(x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Density::Constant { value } => *value,
            Density::Polynomial { sup, .. } => *sup,
            Density::Custom(c) => c.sup,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Density::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// The density as a polynomial in the first coordinate, when it is one.
    pub fn as_polynomial(&self) -> Option<Polynomial> {
        match self {
            Density::Constant { value } => Some(Polynomial::new(vec![*value])),
            Density::Polynomial { coeffs, .. } => Some(coeffs.clone()),
            Density::Custom(_) => None,
        }
    }

    fn lebesgue_integral(&self, bounds: &[(f64, f64)]) -> Option<f64> {
        let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
        match self {
            Density::Constant { value } => Some(value * volume),
            Density::Polynomial { coeffs, .. } => {
                let (a, b) = bounds[0];
                Some(coeffs.integral(a, b) * volume / (b - a))
            }
            Density::Custom(c) => c.integral,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntensity {
    #[serde(rename = "box")]
    bounds: Vec<(f64, f64)>,
    #[serde(default)]
    density: Density,
    scale: f64,
}

/// The measure `μ_t = t · density · Lebesgue` on a box.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawIntensity")]
pub struct IntensitySpec {
    #[serde(rename = "box")]
    bounds: Vec<(f64, f64)>,
    density: Density,
    scale: f64,
}

impl TryFrom<RawIntensity> for IntensitySpec {
    type Error = Error;
    fn try_from(raw: RawIntensity) -> Result<Self> {
        IntensitySpec::new(raw.bounds, raw.density, raw.scale)
    }
}

impl IntensitySpec {
    pub fn new(bounds: Vec<(f64, f64)>, density: Density, scale: f64) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidIntensity("box must have at least one dimension".into()));
        }
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidIntensity(format!(
                    "box[{d}] = ({lo}, {hi}) must satisfy lo < hi"
                )));
            }
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "scale must be finite and nonnegative, got {scale}"
            )));
        }
        let sup = density.sup();
        if !(sup.is_finite() && sup >= 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "density.sup must be finite and nonnegative, got {sup}"
            )));
        }
        match &density {
            Density::Constant { value } if !(*value >= 0.0) => {
                return Err(Error::InvalidIntensity(format!(
                    "density.value must be nonnegative, got {value}"
                )));
            }
            Density::Polynomial { coeffs, sup } => {
                let (a, b) = bounds[0];
                let max = coeffs.scan_abs_max(a, b);
                if max > *sup * (1.0 + 1e-12) {
                    return Err(Error::InvalidIntensity(format!(
                        "density.sup = {sup} is below the polynomial's maximum {max} on the box"
                    )));
                }
                if coeffs.eval(a) < 0.0 || coeffs.eval(b) < 0.0 {
                    return Err(Error::InvalidIntensity(
                        "density.coeffs give a negative density on the box".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self {
            bounds,
            density,
            scale,
        })
    }

    /// Lebesgue measure on `[0,1]^dim` scaled by `t`.
    pub fn unit_cube(dim: usize, scale: f64) -> Result<Self> {
        Self::new(vec![(0.0, 1.0); dim], Density::default(), scale)
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.bounds.clone(), self.density.clone(), scale)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Density of `μ_t` itself: `t · density(x)`.
    pub fn intensity_at(&self, x: &[f64]) -> f64 {
        self.scale * self.density.eval(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// `t · ∫ density`, when it has a closed form.
    pub fn analytic_mass(&self) -> Option<f64> {
        if self.scale == 0.0 {
            return Some(0.0);
        }
        self.density
            .lebesgue_integral(&self.bounds)
            .map(|i| self.scale * i)
    }

    /// `μ_t(box)`: analytic when possible, otherwise a fixed-seed Monte Carlo
    /// estimate with its standard error.
    pub fn total_mass(&self) -> Result<Estimate> {
        let est = match self.analytic_mass() {
            Some(m) => Estimate::exact(m),
            None => {
                let mut rng = stream_rng(MASS_MC_SEED, 0);
                let vol = self.volume();
                let mut acc = Welford::default();
                let mut x = vec![0.0; self.dim()];
                for _ in 0..MASS_MC_SAMPLES {
                    self.fill_uniform(&mut x, &mut rng);
                    acc.push(self.intensity_at(&x) * vol);
                }
                acc.mean_estimate()
            }
        };
        if !est.is_finite() {
            return Err(Error::NonFinite("total mass"));
        }
        Ok(est)
    }

    fn fill_uniform<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) {
        for (xi, (lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *xi = rng.random_range(*lo..*hi);
        }
    }

    /// One accept/reject trial against the declared sup.
    fn accept<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<bool> {
        if let Density::Constant { .. } = self.density {
            return Ok(true);
        }
        let sup = self.density.sup();
        let value = self.density.eval(x);
        if value > sup {
            return Err(Error::DensityExceedsSup {
                value,
                sup,
                point: x.to_vec(),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeDensity {
                value,
                point: x.to_vec(),
            });
        }
        Ok(rng.random::<f64>() * sup < value)
    }

    /// Draws one point from the normalized measure `μ / μ(box)` into `x`.
    pub fn sample_point_into<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) -> Result<()> {
        for _ in 0..MAX_REJECTIONS {
            self.fill_uniform(x, rng);
            if self.accept(x, rng)? {
                return Ok(());
            }
        }
        Err(Error::InvalidIntensity(
            "rejection sampling failed: density is (almost) zero on the box".into(),
        ))
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        self.sample_point_into(&mut x, rng)?;
        Ok(x)
    }

    /// Realization of the Poisson process with intensity `μ_t`.
    ///
    /// With a known mass the count is drawn first and points are placed by
    /// rejection sampling; otherwise a dominating homogeneous process of
    /// intensity `t · sup` is thinned.
    pub fn sample_point_process<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointConfiguration> {
        let dim = self.dim();
        let mut config = PointConfiguration::new(dim);
        let mut x = vec![0.0; dim];
        match self.analytic_mass() {
            Some(mass) => {
                let count = poisson_count(mass, rng);
                config.coords.reserve(count * dim);
                for _ in 0..count {
                    self.sample_point_into(&mut x, rng)?;
                    config.push(&x);
                }
            }
            None => {
                let dominating = self.scale * self.density.sup() * self.volume();
                let count = poisson_count(dominating, rng);
                for _ in 0..count {
                    self.fill_uniform(&mut x, rng);
                    if self.accept(&x, rng)? {
                        config.push(&x);
                    }
                }
            }
        }
        Ok(config)
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(rng) as usize
}

/// A finite realization of the point process. Points are stored flat; their
/// order carries no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    dim: usize,
    coords: Vec<f64>,
}

impl PointConfiguration {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut config = Self::new(dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::InvalidIntensity(format!(
                    "point of dimension {} in a {dim}-dimensional configuration",
                    p.len()
                )));
            }
            config.push(p);
        }
        Ok(config)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.points().collect()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
    }

    /// `η + δ_z`.
    pub fn with_point(&self, z: &[f64]) -> Self {
        let mut out = self.clone();
        out.push(z);
        out
    }
}

/// Plain Monte Carlo estimate of `∫ g dμ_t^n`.
///
/// Each of the `n` arguments is drawn i.i.d. from `μ_t / μ_t(box)` and the
/// sample mean is scaled by `mass^n`. When the mass has no closed form the
/// arguments are drawn uniformly and weighted by the intensity instead.
pub fn mc_integral<G, R>(
    mut g: G,
    intensity: &IntensitySpec,
    n: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate>
where
    G: FnMut(&[&[f64]]) -> f64,
    R: Rng + ?Sized,
{
    if samples == 0 {
        return Err(Error::ZeroCount { what: "samples" });
    }
    if n == 0 {
        let v = g(&[]);
        return if v.is_finite() {
            Ok(Estimate::exact(v))
        } else {
            Err(Error::NonFinite("integrand"))
        };
    }
    let dim = intensity.dim();
    let mut buf = vec![0.0; n * dim];
    let mut acc = Welford::default();
    let factor = match intensity.analytic_mass() {
        Some(mass) => {
            if mass == 0.0 {
                return Ok(Estimate::ZERO);
            }
            for _ in 0..samples {
                for x in buf.chunks_exact_mut(dim) {
                    intensity.sample_point_into(x, rng)?;
                }
                let args: SmallVec<[&[f64]; 8]> = buf.chunks_exact(dim).collect();
                let v = g(&args);
                if !v.is_finite() {
                    return Err(Error::NonFinite("integrand"));
                }
                acc.push(v);
            }
            mass.powi(n as i32)
        }
        None => {
            let vol = intensity.volume();
            for _ in 0..samples {
                let mut weight = 1.0;
                for x in buf.chunks_exact_mut(dim) {
                    intensity.fill_uniform(x, rng);
                    weight *= intensity.intensity_at(x) * vol;
                }
                let args: SmallVec<[&[f64]; 8]> = buf.chunks_exact(dim).collect();
                let v = g(&args) * weight;
                if !v.is_finite() {
                    return Err(Error::NonFinite("integrand"));
                }
                acc.push(v);
            }
            1.0
        }
    };
    Ok(acc.mean_estimate().scale(factor))
}
