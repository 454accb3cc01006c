use stein_ustat::kernels::{make_kernel, symmetry_check, KernelDescriptor};
use stein_ustat::measure::{mc_integral, stream_rng};
use stein_ustat::{Density, IntensitySpec, Polynomial, SymmetricKernel};

#[test]
fn builtin_kernels_are_symmetric() {
    let descriptors = [
        KernelDescriptor::Count {},
        KernelDescriptor::Constant { c: 2.0, k: 3 },
        KernelDescriptor::GeometricIndicator { r: 0.2 },
        KernelDescriptor::Product {
            k: 3,
            coeffs: Polynomial::new(vec![1.0, -2.0, 0.5]),
        },
    ];
    for d in descriptors {
        let kernel = make_kernel(&d).unwrap();
        assert!(symmetry_check(&kernel, 2, 200, &mut stream_rng(80, 0)), "{d:?}");
    }
    let skewed = SymmetricKernel::custom("difference", 2, |a| a[0][0] - a[1][0]).unwrap();
    assert!(!symmetry_check(&skewed, 1, 50, &mut stream_rng(80, 1)));
}

#[test]
fn product_marginals_under_polynomial_density() {
    let spec = IntensitySpec::new(vec![(0.0, 2.0)], Density::polynomial(vec![1.0, 0.5], 2.0), 3.0).unwrap();
    let kernel = make_kernel(&KernelDescriptor::Product {
        k: 2,
        coeffs: Polynomial::new(vec![-0.5, 1.0]),
    })
    .unwrap();
    let marg = kernel.marginals(&spec).unwrap();
    let mut rng = stream_rng(81, 0);
    let full = mc_integral(|a| kernel.eval(a), &spec, 2, 200_000, &mut rng).unwrap();
    assert!(full.within(marg.eval(&[]), 4.0, 0.0), "{full:?} vs {}", marg.eval(&[]));
    let abs = mc_integral(|a| kernel.abs_eval(a), &spec, 2, 200_000, &mut rng).unwrap();
    assert!(abs.within(marg.eval_abs(&[]), 4.0, 0.0));
    let x = [0.3];
    let abs_partial = mc_integral(|a| kernel.abs_eval(&[&x, a[0]]), &spec, 1, 200_000, &mut rng).unwrap();
    assert!(abs_partial.within(marg.eval_abs(&[&x]), 4.0, 0.0));
    assert!(abs.value > 0.0);
}

#[test]
fn descriptors_round_trip_through_json() {
    let d: KernelDescriptor = serde_json::from_str(r#"{"name": "geometric_indicator", "r": 0.05}"#).unwrap();
    assert_eq!(d, KernelDescriptor::GeometricIndicator { r: 0.05 });
    let text = serde_json::to_string(&d).unwrap();
    assert_eq!(serde_json::from_str::<KernelDescriptor>(&text).unwrap(), d);
    assert!(serde_json::from_str::<KernelDescriptor>(r#"{"name": "count", "r": 1}"#).is_err());
    assert!(make_kernel(&KernelDescriptor::GeometricIndicator { r: -1.0 }).is_err());
}
