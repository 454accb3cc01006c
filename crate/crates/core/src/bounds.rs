//! Normal-approximation bounds for U-statistics: the partition integrals
//! `M_ij`, the Kolmogorov and Wasserstein bounds built from them, the
//! fourth-moment bound, the variance terms `R_ij`, and Monte Carlo estimates
//! of the general Kolmogorov bound's terms for the standardized statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::chaos::{ensure_order, fallible_integral, variance_from_kernels, IntegrationConfig, MarginalEvaluator, McConfig};
use crate::estimate::{variance_estimate, Estimate, Welford};
use crate::kernels::SymmetricKernel;
use crate::measure::{derive_seed, stream_rng, try_replicate, IntensitySpec};
use crate::partitions::enumerate_partitions;
use crate::ustat::{add_one_cost, evaluate, inverse_ou_add_one_cost};
use crate::{Error, Result};

/// Largest number of integration variables in a contracted integrand.
pub const MAX_CONTRACTED_DIM: usize = 8;

/// `M_ij` estimates with `stderr / estimate` above this are flagged.
pub const UNRELIABLE_RELATIVE_ERROR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MijConfig {
    /// Samples per partition.
    pub samples: usize,
    pub seed: u64,
    pub fallback: McConfig,
}

impl Default for MijConfig {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 0x4d49_4a5f,
            fallback: McConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MijEstimate {
    pub i: usize,
    pub j: usize,
    pub estimate: Estimate,
    pub partitions: usize,
    pub unreliable: bool,
}

fn check_index(what: &'static str, value: usize, k: usize) -> Result<()> {
    if (1..=k).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value, lo: 1, hi: k })
    }
}

/// `M_ij = Σ_π ∫ (f̄_i ⊗ f̄_i ⊗ f̄_j ⊗ f̄_j)_π dμ^{|π|}`.
pub fn compute_mij(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    i: usize,
    j: usize,
    config: &MijConfig,
) -> Result<MijEstimate> {
    ensure_order(kernel)?;
    let marginals = MarginalEvaluator::new(kernel, intensity, config.fallback);
    compute_mij_with(&marginals, i, j, config)
}

fn compute_mij_with(marginals: &MarginalEvaluator<'_>, i: usize, j: usize, config: &MijConfig) -> Result<MijEstimate> {
    let k = marginals.kernel().order();
    check_index("chaos index i", i, k)?;
    check_index("chaos index j", j, k)?;
    let partitions = enumerate_partitions(i, j)?;
    let sizes = [i, i, j, j];
    let seed = derive_seed(config.seed, (i * 16 + j) as u64);
    let parts = partitions
        .par_iter()
        .enumerate()
        .map(|(p, partition)| {
            let dim = partition.len();
            if dim > MAX_CONTRACTED_DIM {
                return Err(Error::Unsupported(format!(
                    "contracted integral over {dim} variables exceeds {MAX_CONTRACTED_DIM}"
                )));
            }
            let labels = partition.assignment(i, j);
            let mut rng = stream_rng(seed, p as u64);
            fallible_integral(
                |ys| {
                    let mut product = 1.0;
                    let mut offset = 0;
                    for &n in &sizes {
                        let args: SmallVec<[&[f64]; 4]> = labels[offset..offset + n].iter().map(|&b| ys[b]).collect();
                        offset += n;
                        product *= marginals.chaos_kernel(&args, true)?.value;
                        if product == 0.0 {
                            break;
                        }
                    }
                    Ok(product)
                },
                marginals.intensity(),
                dim,
                config.samples,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate: Estimate = parts.into_iter().sum();
    Ok(MijEstimate {
        i,
        j,
        estimate,
        partitions: partitions.len(),
        unreliable: estimate.relative_error() > UNRELIABLE_RELATIVE_ERROR,
    })
}

/// All `M_ij` for `i, j = 1..=k`, row-major.
pub fn m_matrix(kernel: &SymmetricKernel, intensity: &IntensitySpec, config: &MijConfig) -> Result<Vec<Vec<MijEstimate>>> {
    ensure_order(kernel)?;
    let marginals = MarginalEvaluator::new(kernel, intensity, config.fallback);
    let k = kernel.order();
    (1..=k)
        .map(|i| (1..=k).map(|j| compute_mij_with(&marginals, i, j, config)).collect())
        .collect()
}

fn check_variance(var: Estimate) -> Result<()> {
    if var.value > 0.0 && var.value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveVariance(var.value))
    }
}

fn check_matrix(k: usize, m: &[Vec<Estimate>]) -> Result<()> {
    if m.len() != k || m.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidKernel(format!("M matrix must be {k}x{k}")));
    }
    if m.iter().flatten().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("M_ij"));
    }
    Ok(())
}

/// `d_K ≤ 19 k^5 Σ_{i,j} √M_ij / Var F`.
pub fn dk_bound(k: usize, m: &[Vec<Estimate>], var: Estimate) -> Result<Estimate> {
    check_matrix(k, m)?;
    check_variance(var)?;
    let sum: Estimate = m.iter().flatten().map(|e| e.sqrt()).sum();
    Ok(sum.scale(19.0 * (k as f64).powi(5)).ratio(var))
}

/// `d_W ≤ 2 k^{7/2} Σ_{i ≤ j} √M_ij / Var F`.
pub fn dw_bound(k: usize, m: &[Vec<Estimate>], var: Estimate) -> Result<Estimate> {
    check_matrix(k, m)?;
    check_variance(var)?;
    let sum: Estimate = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).map(|(i, j)| m[i][j].sqrt()).sum();
    Ok(sum.scale(2.0 * (k as f64).powf(3.5)).ratio(var))
}

/// `E(F - EF)^4 ≤ k² Σ_{i,j} M_ij + 3 k² (Var F)²`.
pub fn fourth_moment_bound(k: usize, m: &[Vec<Estimate>], var: Estimate) -> Result<Estimate> {
    check_matrix(k, m)?;
    let k2 = (k * k) as f64;
    let sum: Estimate = m.iter().flatten().copied().sum();
    Ok(sum.scale(k2) + var.product(var).scale(3.0 * k2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RijConfig {
    pub reps: usize,
    /// Points `z` per replication for the inner integral.
    pub z_samples: usize,
    pub seed: u64,
    pub fallback: McConfig,
}

impl Default for RijConfig {
    fn default() -> Self {
        Self {
            reps: 4000,
            z_samples: 256,
            seed: 0x5249_4a5f,
            fallback: McConfig::default(),
        }
    }
}

fn sampling_mass(intensity: &IntensitySpec) -> Result<f64> {
    Ok(intensity.total_mass()?.value)
}

/// `R_ij = Var ∫ I_{i-1}(f_i(z, ·)) I_{j-1}(f_j(z, ·)) dμ(z)` for `k ≤ 2`.
///
/// The `z`-integral is a Monte Carlo mean in every replication; its expected
/// inner variance is subtracted so the estimate is unbiased.
pub fn estimate_rij(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    i: usize,
    j: usize,
    config: &RijConfig,
) -> Result<Estimate> {
    let k = kernel.order();
    if k > 2 {
        return Err(Error::Unsupported(format!("R_ij needs k <= 2, got k = {k}")));
    }
    check_index("chaos index i", i, k)?;
    check_index("chaos index j", j, k)?;
    if config.reps < 2 {
        return Err(Error::ZeroCount { what: "reps (need at least 2)" });
    }
    if config.z_samples < 2 {
        return Err(Error::ZeroCount { what: "z samples (need at least 2)" });
    }
    let marginals = MarginalEvaluator::new(kernel, intensity, config.fallback);
    let mass = sampling_mass(intensity)?;
    let rows = try_replicate(config.seed, config.reps, |rng, _| {
        let eta = intensity.sample_point_process(rng)?;
        let points = eta.as_slices();
        let inner = |n: usize, z: &[f64]| -> Result<f64> {
            if n == 1 {
                Ok(marginals.chaos_kernel(&[z], false)?.value)
            } else {
                let sum: f64 = points.iter().map(|x| kernel.eval(&[z, x])).sum();
                Ok(sum - marginals.partial(&[z], false)?.value)
            }
        };
        let mut acc = Welford::default();
        for _ in 0..config.z_samples {
            let z = intensity.sample_point(rng)?;
            acc.push(inner(i, &z)? * inner(j, &z)?);
        }
        let mean = acc.mean_estimate();
        Ok((mass * mean.value, (mass * mean.stderr).powi(2)))
    })?;
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let noise: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(variance_estimate(&values) - Estimate::from_samples(&noise))
}

/// Default test points for the sup term: 41 points on `[-4, 4]`.
pub fn default_s_grid() -> Vec<f64> {
    (0..=40).map(|i| -4.0 + 0.2 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Config {
    pub reps: usize,
    pub z_samples: usize,
    pub s_grid: Vec<f64>,
    pub seed: u64,
    pub fallback: McConfig,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            reps: 10_000,
            z_samples: 64,
            s_grid: default_s_grid(),
            seed: 0x5431_5f5f,
            fallback: McConfig::default(),
        }
    }
}

/// Terms of the Kolmogorov bound for `G = (F - EF) / √Var F`, with
/// `T₁ = E|1 - ⟨DG, -DL⁻¹G⟩|` and `T₂ = E⟨(DG)², (DL⁻¹G)²⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Terms {
    pub t1: Estimate,
    pub t2: Estimate,
    /// `E⟨(DG)², (DG)²⟩`.
    pub dg_fourth: Estimate,
    /// `E⟨DG, DG⟩²`.
    pub dg_norm_squared: Estimate,
    /// `E G⁴`.
    pub g_fourth: Estimate,
    pub c_f: Estimate,
    /// Largest grid value of `E⟨D1(G > s), DG |DL⁻¹G|⟩`; a lower estimate of the sup over `s`.
    pub sup_term: Estimate,
    pub sup_argmax_s: f64,
    /// `T₁ + 2 c(F) √T₂ + sup_term`.
    pub bound: Estimate,
}

struct Theorem1Row {
    t1: f64,
    t2: f64,
    dg_fourth: f64,
    dg_norm_squared: f64,
    g_fourth: f64,
    sup: Vec<f64>,
}

/// Monte Carlo estimates of the general Kolmogorov bound's terms.
///
/// Inner products over `z` are Monte Carlo means over `z_samples` points drawn
/// from `μ / μ(box)` and scaled by the total mass. Errors combine first-order
/// propagation and ignore correlations between terms.
pub fn estimate_theorem1_terms(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    variance: Estimate,
    config: &Theorem1Config,
) -> Result<Theorem1Terms> {
    ensure_order(kernel)?;
    check_variance(variance)?;
    if config.reps == 0 {
        return Err(Error::ZeroCount { what: "reps" });
    }
    if config.z_samples < 2 {
        return Err(Error::ZeroCount { what: "z samples (need at least 2)" });
    }
    if config.s_grid.is_empty() {
        return Err(Error::ZeroCount { what: "s grid points" });
    }
    let standardized = kernel.scaled(1.0 / variance.value.sqrt());
    let marginals = MarginalEvaluator::new(&standardized, intensity, config.fallback);
    let mean = marginals.partial(&[], false)?.value;
    let mass = sampling_mass(intensity)?;
    let m = config.z_samples as f64;

    let rows = try_replicate(config.seed, config.reps, |rng, _| {
        let eta = intensity.sample_point_process(rng)?;
        let g = evaluate(&standardized, &eta).value - mean;
        let mut cross = 0.0;
        let mut t2 = 0.0;
        let mut sq = 0.0;
        let mut fourth = 0.0;
        let mut sup = vec![0.0; config.s_grid.len()];
        for _ in 0..config.z_samples {
            let z = intensity.sample_point(rng)?;
            let a = add_one_cost(&standardized, &eta, &z);
            let b = inverse_ou_add_one_cost(&marginals, &eta, &z)?;
            cross += a * b;
            t2 += a * a * b * b;
            sq += a * a;
            fourth += a * a * a * a;
            let weight = a * b.abs();
            for (slot, &s) in sup.iter_mut().zip(&config.s_grid) {
                let jump = f64::from(u8::from(g + a > s)) - f64::from(u8::from(g > s));
                *slot += jump * weight;
            }
        }
        sup.iter_mut().for_each(|v| *v *= mass / m);
        Ok(Theorem1Row {
            t1: (1.0 - mass * cross / m).abs(),
            t2: mass * t2 / m,
            dg_fourth: mass * fourth / m,
            // Unbiased for (∫ a² dμ)² from i.i.d. z's.
            dg_norm_squared: mass * mass * (sq * sq - fourth) / (m * (m - 1.0)),
            g_fourth: g.powi(4),
            sup,
        })
    })?;

    let column = |f: &dyn Fn(&Theorem1Row) -> f64| -> Estimate {
        let acc: Welford = rows.iter().map(f).collect();
        acc.mean_estimate()
    };
    let t1 = column(&|r| r.t1);
    let t2 = column(&|r| r.t2);
    let dg_fourth = column(&|r| r.dg_fourth);
    let dg_norm_squared = column(&|r| r.dg_norm_squared);
    let g_fourth = column(&|r| r.g_fourth);
    let (sup_index, sup_term) = (0..config.s_grid.len())
        .map(|idx| (idx, column(&|r| r.sup[idx])))
        .fold((0, Estimate::new(f64::NEG_INFINITY, 0.0)), |best, cur| {
            if cur.1.value > best.1.value {
                cur
            } else {
                best
            }
        });
    let c_f = dg_fourth.sqrt() + dg_norm_squared.powf(0.25).product(g_fourth.powf(0.25) + Estimate::exact(1.0));
    let bound = t1 + c_f.product(t2.sqrt()).scale(2.0) + sup_term;
    Ok(Theorem1Terms {
        t1,
        t2,
        dg_fourth,
        dg_norm_squared,
        g_fourth,
        c_f,
        sup_term,
        sup_argmax_s: config.s_grid[sup_index],
        bound,
    })
}

/// Everything needed to assemble a [`BoundReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub integration: IntegrationConfig,
    pub mij: MijConfig,
    /// `R_ij` are estimated when set and `k ≤ 2`.
    pub rij: Option<RijConfig>,
    pub theorem1: Option<Theorem1Config>,
}

impl BoundConfig {
    /// Derives every sub-seed from `seed`; `mc_samples` sets the `M_ij`
    /// sample count and `reps` the replication count of the optional parts.
    pub fn from_seed(seed: u64, mc_samples: usize, reps: Option<usize>) -> Self {
        let fallback = McConfig {
            seed: derive_seed(seed, 1),
            ..McConfig::default()
        };
        Self {
            integration: IntegrationConfig {
                seed: derive_seed(seed, 2),
                fallback,
                ..IntegrationConfig::default()
            },
            mij: MijConfig {
                samples: mc_samples,
                seed: derive_seed(seed, 3),
                fallback,
            },
            rij: reps.map(|reps| RijConfig {
                reps,
                seed: derive_seed(seed, 4),
                fallback,
                ..RijConfig::default()
            }),
            theorem1: reps.map(|reps| Theorem1Config {
                reps,
                seed: derive_seed(seed, 5),
                fallback,
                ..Theorem1Config::default()
            }),
        }
    }
}

/// Serialized bound summary. Every Monte Carlo quantity has a `_stderr` sibling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub t: f64,
    pub var_f: f64,
    pub var_f_stderr: f64,
    pub m: Vec<Vec<f64>>,
    pub m_stderr: Vec<Vec<f64>>,
    pub m_unreliable: Vec<Vec<bool>>,
    pub r: Option<Vec<Vec<f64>>>,
    pub r_stderr: Option<Vec<Vec<f64>>>,
    pub dk_bound: f64,
    pub dk_bound_stderr: f64,
    /// `min(dk_bound, 1)`.
    pub dk_bound_effective: f64,
    pub dw_bound: f64,
    pub dw_bound_stderr: f64,
    pub fourth_moment_bound: f64,
    pub fourth_moment_bound_stderr: f64,
    pub t1: Option<f64>,
    pub t1_stderr: Option<f64>,
    pub t2: Option<f64>,
    pub t2_stderr: Option<f64>,
    pub c_f: Option<f64>,
    pub c_f_stderr: Option<f64>,
    pub sup_term: Option<f64>,
    pub sup_term_stderr: Option<f64>,
    pub sup_term_is_grid_lower_estimate: bool,
    pub theorem1_bound: Option<f64>,
    pub theorem1_bound_stderr: Option<f64>,
}

impl BoundReport {
    pub fn any_unreliable(&self) -> bool {
        self.m_unreliable.iter().flatten().any(|u| *u)
    }
}

fn split(matrix: &[Vec<Estimate>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        matrix.iter().map(|row| row.iter().map(|e| e.value).collect()).collect(),
        matrix.iter().map(|row| row.iter().map(|e| e.stderr).collect()).collect(),
    )
}

pub fn compute_bound_report(kernel: &SymmetricKernel, intensity: &IntensitySpec, config: &BoundConfig) -> Result<BoundReport> {
    ensure_order(kernel)?;
    let k = kernel.order();
    let var = variance_from_kernels(kernel, intensity, &config.integration)?.variance;
    let mij = m_matrix(kernel, intensity, &config.mij)?;
    let m: Vec<Vec<Estimate>> = mij.iter().map(|row| row.iter().map(|e| e.estimate).collect()).collect();
    let dk = dk_bound(k, &m, var)?;
    let dw = dw_bound(k, &m, var)?;
    let fourth = fourth_moment_bound(k, &m, var)?;
    let r = match &config.rij {
        Some(rc) if k <= 2 => Some(
            (1..=k)
                .map(|i| (1..=k).map(|j| estimate_rij(kernel, intensity, i, j, rc)).collect())
                .collect::<Result<Vec<Vec<_>>>>()?,
        ),
        _ => None,
    };
    let terms = match &config.theorem1 {
        Some(tc) => Some(estimate_theorem1_terms(kernel, intensity, var, tc)?),
        None => None,
    };
    let (m_values, m_stderr) = split(&m);
    let (r_values, r_stderr) = match r {
        Some(r) => {
            let (v, s) = split(&r);
            (Some(v), Some(s))
        }
        None => (None, None),
    };
    let pick = |f: fn(&Theorem1Terms) -> Estimate| terms.as_ref().map(|t| f(t));
    Ok(BoundReport {
        k,
        t: intensity.scale(),
        var_f: var.value,
        var_f_stderr: var.stderr,
        m: m_values,
        m_stderr,
        m_unreliable: mij.iter().map(|row| row.iter().map(|e| e.unreliable).collect()).collect(),
        r: r_values,
        r_stderr,
        dk_bound: dk.value,
        dk_bound_stderr: dk.stderr,
        dk_bound_effective: dk.value.min(1.0),
        dw_bound: dw.value,
        dw_bound_stderr: dw.stderr,
        fourth_moment_bound: fourth.value,
        fourth_moment_bound_stderr: fourth.stderr,
        t1: pick(|t| t.t1).map(|e| e.value),
        t1_stderr: pick(|t| t.t1).map(|e| e.stderr),
        t2: pick(|t| t.t2).map(|e| e.value),
        t2_stderr: pick(|t| t.t2).map(|e| e.stderr),
        c_f: pick(|t| t.c_f).map(|e| e.value),
        c_f_stderr: pick(|t| t.c_f).map(|e| e.stderr),
        sup_term: pick(|t| t.sup_term).map(|e| e.value),
        sup_term_stderr: pick(|t| t.sup_term).map(|e| e.stderr),
        sup_term_is_grid_lower_estimate: terms.is_some(),
        theorem1_bound: pick(|t| t.bound).map(|e| e.value),
        theorem1_bound_stderr: pick(|t| t.bound).map(|e| e.stderr),
    })
}
