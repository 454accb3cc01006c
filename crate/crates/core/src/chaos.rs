//! Chaos kernels `f_i = C(k,i) ∫ f(x_1..x_i, y) dμ^{k-i}(y)` of a U-statistic,
//! the variance identity `Var F = Σ i! ‖f_i‖²`, empirical kernels from
//! `f_n = E D^n F / n!`, and the first-order Wiener–Itô integral.

use std::sync::OnceLock;

use smallvec::SmallVec;

use crate::estimate::Estimate;
use crate::kernels::{Marginals, SymmetricKernel};
use crate::measure::{derive_seed, mc_integral, stream_rng, try_replicate, IntensitySpec, PointConfiguration};
use crate::ustat::{binomial, factorial, iterated_difference};
use crate::{Error, Result};

/// Largest kernel order supported by the chaos and bound machinery.
pub const MAX_ORDER: usize = 4;

pub(crate) fn ensure_order(kernel: &SymmetricKernel) -> Result<()> {
    let k = kernel.order();
    if (1..=MAX_ORDER).contains(&k) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "kernel order k",
            value: k,
            lo: 1,
            hi: MAX_ORDER,
        })
    }
}

/// Sample count and seed for a Monte Carlo integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 4096,
            seed: 0x5eed_cafe,
        }
    }
}

/// Partial integrals of a kernel against a fixed intensity.
///
/// Closed forms are used when the kernel has them. Otherwise each partial
/// integral is a Monte Carlo estimate that reuses the same random numbers for
/// every argument tuple, so the result is a deterministic, smooth function of
/// its arguments. The full integrals `∫ f dμ^k` and `∫ |f| dμ^k` are cached.
pub struct MarginalEvaluator<'a> {
    kernel: &'a SymmetricKernel,
    intensity: &'a IntensitySpec,
    analytic: Option<Marginals>,
    fallback: McConfig,
    full: OnceLock<Result<Estimate>>,
    full_abs: OnceLock<Result<Estimate>>,
}

impl<'a> MarginalEvaluator<'a> {
    pub fn new(kernel: &'a SymmetricKernel, intensity: &'a IntensitySpec, fallback: McConfig) -> Self {
        Self {
            kernel,
            intensity,
            analytic: kernel.marginals(intensity),
            fallback,
            full: OnceLock::new(),
            full_abs: OnceLock::new(),
        }
    }

    pub fn kernel(&self) -> &'a SymmetricKernel {
        self.kernel
    }

    pub fn intensity(&self) -> &'a IntensitySpec {
        self.intensity
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    /// `∫ f(args, y) dμ^{k-m}(y)` with `m = args.len()` (of `|f|` when `abs`).
    pub fn partial(&self, args: &[&[f64]], abs: bool) -> Result<Estimate> {
        let k = self.kernel.order();
        let m = args.len();
        if m > k {
            return Err(Error::OutOfRange {
                what: "number of fixed arguments",
                value: m,
                lo: 0,
                hi: k,
            });
        }
        if m == k {
            let v = if abs { self.kernel.abs_eval(args) } else { self.kernel.eval(args) };
            return Ok(Estimate::exact(v));
        }
        if m == 0 {
            let cell = if abs { &self.full_abs } else { &self.full };
            return cell.get_or_init(|| self.integrate(args, abs, 16)).clone();
        }
        self.integrate(args, abs, 1)
    }

    fn integrate(&self, args: &[&[f64]], abs: bool, boost: usize) -> Result<Estimate> {
        if let Some(marg) = &self.analytic {
            let v = if abs { marg.eval_abs(args) } else { marg.eval(args) };
            return Ok(Estimate::exact(v));
        }
        let k = self.kernel.order();
        let m = args.len();
        let mut rng = stream_rng(derive_seed(self.fallback.seed, m as u64), u64::from(abs));
        let kernel = self.kernel;
        mc_integral(
            |ys: &[&[f64]]| {
                let full: SmallVec<[&[f64]; 8]> = args.iter().chain(ys.iter()).copied().collect();
                if abs {
                    kernel.abs_eval(&full)
                } else {
                    kernel.eval(&full)
                }
            },
            self.intensity,
            k - m,
            self.fallback.samples * boost,
            &mut rng,
        )
    }

    /// `f_i(points)` (`f̄_i` when `abs`), with `i = points.len()`.
    pub fn chaos_kernel(&self, points: &[&[f64]], abs: bool) -> Result<Estimate> {
        let i = points.len();
        let k = self.kernel.order();
        if i == 0 || i > k {
            return Err(Error::OutOfRange {
                what: "chaos index i",
                value: i,
                lo: 1,
                hi: k,
            });
        }
        Ok(self.partial(points, abs)?.scale(binomial(k, i)))
    }
}

/// `f_i(points)` with `i = points.len()`.
pub fn kernel_f_i(kernel: &SymmetricKernel, intensity: &IntensitySpec, i: usize, points: &[&[f64]]) -> Result<Estimate> {
    let k = kernel.order();
    if i == 0 || i > k || points.len() != i {
        return Err(Error::OutOfRange {
            what: "chaos index i",
            value: i,
            lo: 1,
            hi: k,
        });
    }
    MarginalEvaluator::new(kernel, intensity, McConfig::default()).chaos_kernel(points, false)
}

/// `f_n(points) = E D^n F / n!` estimated over `reps` configurations.
pub fn kernel_empirical(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    points: &[&[f64]],
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    let owned: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    Ok(kernel_empirical_batch(kernel, intensity, &[owned], reps, seed)?[0])
}

/// [`kernel_empirical`] for several probes, sharing the sampled
/// configurations across probes.
pub fn kernel_empirical_batch(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    probes: &[Vec<Vec<f64>>],
    reps: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if reps == 0 {
        return Err(Error::ZeroCount { what: "reps" });
    }
    let k = kernel.order();
    for probe in probes {
        if probe.is_empty() {
            return Err(Error::OutOfRange {
                what: "difference order n",
                value: 0,
                lo: 1,
                hi: k,
            });
        }
    }
    let rows = try_replicate(seed, reps, |rng, _| {
        let eta = intensity.sample_point_process(rng)?;
        probes
            .iter()
            .map(|probe| {
                if probe.len() > k {
                    return Ok(0.0);
                }
                let zs: Vec<&[f64]> = probe.iter().map(Vec::as_slice).collect();
                Ok(iterated_difference(kernel, &eta, &zs)? / factorial(zs.len()))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok((0..probes.len())
        .map(|p| {
            let column: Vec<f64> = rows.iter().map(|row| row[p]).collect();
            Estimate::from_samples(&column)
        })
        .collect())
}

/// Integration settings for `‖f_i‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationConfig {
    /// Outer samples for each `∫ f_i² dμ^i`.
    pub samples: usize,
    pub seed: u64,
    /// Used for partial integrals without a closed form.
    pub fallback: McConfig,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            samples: 1 << 16,
            seed: 0x7a11_0c0d,
            fallback: McConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub variance: Estimate,
    /// `i! ‖f_i‖²` for `i = 1..=k`.
    pub terms: Vec<Estimate>,
}

/// Runs `g` inside [`mc_integral`], turning an inner error into the result.
pub(crate) fn fallible_integral<G>(
    mut g: G,
    intensity: &IntensitySpec,
    n: usize,
    samples: usize,
    rng: &mut crate::measure::StreamRng,
) -> Result<Estimate>
where
    G: FnMut(&[&[f64]]) -> Result<f64>,
{
    let mut failure = None;
    let est = mc_integral(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        intensity,
        n,
        samples,
        rng,
    );
    match failure {
        Some(e) => Err(e),
        None => est,
    }
}

/// `Var F = Σ_i i! ‖f_i‖²`.
pub fn variance_from_kernels(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    config: &IntegrationConfig,
) -> Result<VarianceReport> {
    ensure_order(kernel)?;
    let marginals = MarginalEvaluator::new(kernel, intensity, config.fallback);
    let k = kernel.order();
    let terms = (1..=k)
        .map(|i| {
            let mut rng = stream_rng(derive_seed(config.seed, i as u64), 0);
            let norm = fallible_integral(
                |x| marginals.chaos_kernel(x, false).map(|e| e.value * e.value),
                intensity,
                i,
                config.samples,
                &mut rng,
            )?;
            Ok(norm.scale(factorial(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceReport {
        variance: terms.iter().copied().sum(),
        terms,
    })
}

/// `I_1(g) = Σ_{x ∈ η} g(x) - ∫ g dμ`, with the integral supplied by the caller.
pub fn wiener_ito_i1<G>(g: G, config: &PointConfiguration, integral: f64) -> f64
where
    G: Fn(&[f64]) -> f64,
{
    config.points().map(g).sum::<f64>() - integral
}
