use stein_ustat::bounds::{compute_mij, dk_bound, dw_bound, estimate_theorem1_terms, fourth_moment_bound, m_matrix, MijConfig, Theorem1Config};
use stein_ustat::chaos::{variance_from_kernels, IntegrationConfig};
use stein_ustat::experiment::expectation;
use stein_ustat::kernels::{make_kernel, KernelDescriptor};
use stein_ustat::measure::replicate;
use stein_ustat::ustat::evaluate;
use stein_ustat::{Estimate, IntensitySpec, SymmetricKernel};

fn geometric() -> SymmetricKernel {
    make_kernel(&KernelDescriptor::GeometricIndicator { r: 0.1 }).unwrap()
}

fn small_config() -> MijConfig {
    MijConfig {
        samples: 50_000,
        ..MijConfig::default()
    }
}

#[test]
fn m_matrix_is_symmetric_and_nonnegative() {
    let spec = IntensitySpec::unit_cube(1, 20.0).unwrap();
    let m = m_matrix(&geometric(), &spec, &small_config()).unwrap();
    for row in &m {
        for e in row {
            assert!(e.estimate.value >= -4.0 * e.estimate.stderr);
            assert!(!e.unreliable);
        }
    }
    let (a, b) = (m[0][1].estimate, m[1][0].estimate);
    assert!((a.value - b.value).abs() <= 4.0 * a.stderr.hypot(b.stderr), "{a:?} vs {b:?}");
    assert_eq!(m[0][1].partitions, 16);
    assert_eq!(m[1][1].partitions, 200);
}

#[test]
fn bounds_are_scale_invariant() {
    let spec = IntensitySpec::unit_cube(1, 15.0).unwrap();
    let base = geometric();
    let scaled = base.scaled(3.0);
    let bounds = |kernel: &SymmetricKernel| {
        let var = variance_from_kernels(kernel, &spec, &IntegrationConfig::default()).unwrap().variance;
        let m: Vec<Vec<Estimate>> = m_matrix(kernel, &spec, &small_config())
            .unwrap()
            .iter()
            .map(|row| row.iter().map(|e| e.estimate).collect())
            .collect();
        (dk_bound(2, &m, var).unwrap().value, dw_bound(2, &m, var).unwrap().value)
    };
    let (dk, dw) = bounds(&base);
    let (dk3, dw3) = bounds(&scaled);
    assert!((dk - dk3).abs() <= 1e-10 * dk);
    assert!((dw - dw3).abs() <= 1e-10 * dw);
    assert!(dk >= 0.0 && dw >= 0.0);
}

#[test]
fn fourth_moment_bound_holds_for_geometric_kernel() {
    let kernel = geometric();
    let spec = IntensitySpec::unit_cube(1, 20.0).unwrap();
    let var = variance_from_kernels(&kernel, &spec, &IntegrationConfig::default()).unwrap().variance;
    let mij = m_matrix(&kernel, &spec, &small_config()).unwrap();
    let m: Vec<Vec<Estimate>> = mij.iter().map(|row| row.iter().map(|e| e.estimate).collect()).collect();
    let bound = fourth_moment_bound(2, &m, var).unwrap();
    assert!(bound.value >= 3.0 * 4.0 * var.value * var.value);
    let mean = expectation(&kernel, &spec, 0).unwrap();
    let fourth = replicate(61, 10_000, |rng, _| {
        (evaluate(&kernel, &spec.sample_point_process(rng).unwrap()).value - mean).powi(4)
    });
    let emp = Estimate::from_samples(&fourth);
    assert!(emp.value <= bound.value + 4.0 * emp.stderr.hypot(bound.stderr), "{emp:?} vs {bound:?}");

    // Each M_ij / Var² is below the excess kurtosis of the standardized statistic.
    let kurtosis = emp.scale(1.0 / (var.value * var.value));
    for row in &m {
        for e in row {
            let ratio = e.scale(1.0 / (var.value * var.value));
            assert!(
                ratio.value <= kurtosis.value - 3.0 + 4.0 * ratio.stderr.hypot(kurtosis.stderr),
                "{ratio:?} vs excess {:?}",
                kurtosis.value - 3.0
            );
        }
    }
}

#[test]
fn mij_rejects_bad_indices() {
    let spec = IntensitySpec::unit_cube(1, 5.0).unwrap();
    assert!(compute_mij(&geometric(), &spec, 3, 1, &small_config()).is_err());
    assert!(compute_mij(&geometric(), &spec, 0, 1, &small_config()).is_err());
}

#[test]
fn theorem1_terms_for_geometric_kernel_are_finite() {
    let kernel = geometric();
    let spec = IntensitySpec::unit_cube(1, 20.0).unwrap();
    let var = variance_from_kernels(&kernel, &spec, &IntegrationConfig::default()).unwrap().variance;
    let config = Theorem1Config {
        reps: 500,
        z_samples: 16,
        ..Theorem1Config::default()
    };
    let terms = estimate_theorem1_terms(&kernel, &spec, var, &config).unwrap();
    for e in [terms.t1, terms.t2, terms.c_f, terms.sup_term, terms.bound, terms.g_fourth] {
        assert!(e.is_finite() && e.value >= 0.0, "{terms:?}");
    }
    assert!(terms.bound.value >= terms.t1.value);
    assert!(estimate_theorem1_terms(&kernel, &spec, Estimate::exact(0.0), &config).is_err());
}
