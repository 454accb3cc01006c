//! Intensity sweeps: for each `t`, the bound report next to the empirical
//! distances of the standardized U-statistic.

use serde::{Deserialize, Serialize};

use crate::bounds::{compute_bound_report, BoundConfig, BoundReport};
use crate::chaos::MarginalEvaluator;
use crate::distance::empirical_distances;
use crate::kernels::{make_kernel, KernelDescriptor, SymmetricKernel};
use crate::measure::{derive_seed, try_replicate, Density, IntensitySpec};
use crate::ustat::evaluate;
use crate::{Error, Result};

fn default_reps() -> usize {
    10_000
}

fn default_mc_samples() -> usize {
    200_000
}

fn default_z_samples() -> usize {
    64
}

fn default_bootstrap() -> usize {
    200
}

/// JSON sweep description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kernel: KernelDescriptor,
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    #[serde(default)]
    pub density: Density,
    /// Intensity scales to visit.
    pub t: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_z_samples")]
    pub z_samples: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Also estimate the terms of the general Kolmogorov bound.
    #[serde(default)]
    pub theorem1: bool,
    /// Fail instead of reporting `M_ij` flagged as unreliable.
    #[serde(default)]
    pub strict: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t.is_empty() {
            return Err(Error::InvalidIntensity("t: sweep needs at least one value".into()));
        }
        if let Some(bad) = self.t.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidIntensity(format!("t: values must be positive and finite, got {bad}")));
        }
        for (what, v) in [("reps", self.reps), ("mc_samples", self.mc_samples)] {
            if v == 0 {
                return Err(Error::ZeroCount { what });
            }
        }
        if self.reps < 2 {
            return Err(Error::ZeroCount { what: "reps (need at least 2)" });
        }
        if self.theorem1 && self.z_samples < 2 {
            return Err(Error::ZeroCount { what: "z_samples (need at least 2)" });
        }
        make_kernel(&self.kernel)?;
        self.intensity(self.t[0])?;
        Ok(())
    }

    pub fn intensity(&self, t: f64) -> Result<IntensitySpec> {
        IntensitySpec::new(self.bounds.clone(), self.density.clone(), t)
    }
}

/// One line of sweep output; `None` marks terms that were not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub var_f: f64,
    pub var_f_stderr: f64,
    pub dk_emp: f64,
    pub dk_emp_stderr: f64,
    pub dk_bound: f64,
    pub dk_bound_stderr: f64,
    pub dw_emp: f64,
    pub dw_emp_stderr: f64,
    pub dw_bound: f64,
    pub dw_bound_stderr: f64,
    pub t1: Option<f64>,
    pub t1_stderr: Option<f64>,
    pub t2: Option<f64>,
    pub t2_stderr: Option<f64>,
    pub sup_term: Option<f64>,
    pub sup_term_stderr: Option<f64>,
    pub m_unreliable: bool,
}

/// `(F - EF) / √var` over `reps` independent configurations.
pub fn standardized_samples(
    kernel: &SymmetricKernel,
    intensity: &IntensitySpec,
    mean: f64,
    variance: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    let sd = variance.sqrt();
    try_replicate(seed, reps, |rng, _| {
        let eta = intensity.sample_point_process(rng)?;
        Ok((evaluate(kernel, &eta).value - mean) / sd)
    })
}

/// `E F = ∫ f dμ^k`.
pub fn expectation(kernel: &SymmetricKernel, intensity: &IntensitySpec, seed: u64) -> Result<f64> {
    let fallback = crate::chaos::McConfig {
        seed,
        ..Default::default()
    };
    Ok(MarginalEvaluator::new(kernel, intensity, fallback).partial(&[], false)?.value)
}

/// Bound report and sweep row for a single intensity scale.
pub fn run_point(config: &SweepConfig, index: usize, t: f64) -> Result<(BoundReport, SweepRow)> {
    let kernel = make_kernel(&config.kernel)?;
    let intensity = config.intensity(t)?;
    let seed = derive_seed(config.seed, index as u64);
    let mut bound_config = BoundConfig::from_seed(seed, config.mc_samples, config.theorem1.then_some(config.reps));
    bound_config.rij = None;
    if let Some(tc) = bound_config.theorem1.as_mut() {
        tc.z_samples = config.z_samples;
    }
    let report = compute_bound_report(&kernel, &intensity, &bound_config)?;
    if config.strict && report.any_unreliable() {
        return Err(Error::Unreliable(format!(
            "M_ij at t = {t} has relative standard error above the reliability threshold"
        )));
    }
    let mean = expectation(&kernel, &intensity, derive_seed(seed, 6))?;
    let samples = standardized_samples(&kernel, &intensity, mean, report.var_f, config.reps, derive_seed(seed, 7))?;
    let distances = empirical_distances(&samples, config.bootstrap, derive_seed(seed, 8))?;
    let row = SweepRow {
        t,
        var_f: report.var_f,
        var_f_stderr: report.var_f_stderr,
        dk_emp: distances.dk.value,
        dk_emp_stderr: distances.dk.stderr,
        dk_bound: report.dk_bound,
        dk_bound_stderr: report.dk_bound_stderr,
        dw_emp: distances.dw.value,
        dw_emp_stderr: distances.dw.stderr,
        dw_bound: report.dw_bound,
        dw_bound_stderr: report.dw_bound_stderr,
        t1: report.t1,
        t1_stderr: report.t1_stderr,
        t2: report.t2,
        t2_stderr: report.t2_stderr,
        sup_term: report.sup_term,
        sup_term_stderr: report.sup_term_stderr,
        m_unreliable: report.any_unreliable(),
    };
    Ok((report, row))
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    config
        .t
        .iter()
        .enumerate()
        .map(|(index, &t)| run_point(config, index, t).map(|(_, row)| row))
        .collect()
}
