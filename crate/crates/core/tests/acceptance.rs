//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::time::Instant;

use stein_ustat::bounds::{
    compute_mij, dk_bound, dw_bound, estimate_rij, estimate_theorem1_terms, fourth_moment_bound, m_matrix, MijConfig,
    RijConfig, Theorem1Config,
};
use stein_ustat::chaos::{variance_from_kernels, IntegrationConfig};
use stein_ustat::distance::{empirical_distances, poisson_exact_dk};
use stein_ustat::estimate::{variance_estimate, Estimate};
use stein_ustat::experiment::{expectation, standardized_samples};
use stein_ustat::kernels::{make_kernel, KernelDescriptor};
use stein_ustat::measure::{replicate, IntensitySpec};
use stein_ustat::partitions::enumerate_partitions;
use stein_ustat::stein::{check_stein_properties, g, g_prime, SteinGrid};
use stein_ustat::ustat::evaluate;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn count_kernel() -> stein_ustat::SymmetricKernel {
    make_kernel(&KernelDescriptor::Count {}).unwrap()
}

fn geometric(r: f64) -> stein_ustat::SymmetricKernel {
    make_kernel(&KernelDescriptor::GeometricIndicator { r }).unwrap()
}

fn unit(t: f64) -> IntensitySpec {
    IntensitySpec::unit_cube(1, t).unwrap()
}

// 1. Poisson Berry–Esseen.
fn berry_esseen() -> Outcome {
    let mut worst: f64 = 0.0;
    for e in 0..=10 {
        let t = f64::from(1u32 << e);
        let r = poisson_exact_dk(t).map_err(|e| e.to_string())?;
        let limit = 8.0 / t.sqrt();
        ensure(r.dk <= limit, format!("t={t}: d_K={} > 8/sqrt(t)={limit}", r.dk))?;
        ensure(r.tail_bound < 1e-12, format!("t={t}: tail certificate {}", r.tail_bound))?;
        worst = worst.max(r.dk * t.sqrt());
    }
    Ok(format!("max sqrt(t) d_K = {worst:.4} <= 8 for t = 1..1024"))
}

// 2. Partition enumeration against brute-force filtering of all set partitions.
fn all_set_partitions(n: usize) -> Vec<Vec<u8>> {
    // Restricted-growth strings in lexicographic order, generated by odometer.
    let mut out = Vec::new();
    let mut a = vec![0u8; n];
    let mut maxes = vec![0u8; n];
    loop {
        out.push(a.clone());
        let mut pos = n;
        loop {
            if pos <= 1 {
                return out;
            }
            pos -= 1;
            if a[pos] <= maxes[pos] {
                a[pos] += 1;
                break;
            }
        }
        for q in pos + 1..n {
            a[q] = 0;
            maxes[q] = maxes[q - 1].max(a[q - 1]);
        }
        if pos + 1 < n {
            maxes[pos + 1] = maxes[pos].max(a[pos]);
        }
    }
}

fn satisfies_bullets(rgs: &[u8], groups: &[u8]) -> bool {
    let blocks = usize::from(*rgs.iter().max().unwrap()) + 1;
    let mut sizes = vec![0usize; blocks];
    let mut sets = vec![[false; 4]; blocks];
    for (&b, &g) in rgs.iter().zip(groups) {
        let b = usize::from(b);
        if sets[b][usize::from(g)] {
            return false;
        }
        sets[b][usize::from(g)] = true;
        sizes[b] += 1;
    }
    if sizes.iter().any(|&s| s < 2) {
        return false;
    }
    // No proper bipartition {A1, A2} of the groups may contain every block's group set.
    for a1 in 1u8..8 {
        let in_a1 = |g: usize| g == 0 || a1 >> (g - 1) & 1 == 1;
        if (1..4).all(in_a1) {
            continue;
        }
        let separated = sets.iter().all(|set| {
            let members: Vec<usize> = (0..4).filter(|&g| set[g]).collect();
            members.iter().all(|&g| in_a1(g)) || members.iter().all(|&g| !in_a1(g))
        });
        if separated {
            return false;
        }
    }
    true
}

fn partition_oracle() -> Outcome {
    let mut checked = Vec::new();
    for i in 1..=4usize {
        for j in 1..=4usize {
            if 2 * i + 2 * j > 12 {
                continue;
            }
            let groups: Vec<u8> = [(0u8, i), (1, i), (2, j), (3, j)]
                .iter()
                .flat_map(|&(g, n)| std::iter::repeat(g).take(n))
                .collect();
            let expected: Vec<Vec<u8>> = all_set_partitions(groups.len())
                .into_iter()
                .filter(|rgs| satisfies_bullets(rgs, &groups))
                .collect();
            let got: Vec<Vec<u8>> = enumerate_partitions(i, j)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|p| p.assignment(i, j).iter().map(|&b| b as u8).collect())
                .collect();
            ensure(got == expected, format!("(i,j)=({i},{j}): {} enumerated vs {} brute force", got.len(), expected.len()))?;
            if (i, j) == (1, 1) {
                ensure(got.len() == 1, "count(1,1) != 1")?;
            }
            checked.push(format!("({i},{j})={}", got.len()));
        }
    }
    Ok(format!("identical lists for {}", checked.join(" ")))
}

// 3. Counting kernel closed forms.
fn counting_kernel() -> Outcome {
    let t = 25.0;
    let kernel = count_kernel();
    let spec = unit(t);
    let m11 = compute_mij(&kernel, &spec, 1, 1, &MijConfig::default()).map_err(|e| e.to_string())?;
    ensure(m11.estimate.within(t, 4.0, 1e-12), format!("M11 = {:?}, expected {t}", m11.estimate))?;
    let var = variance_from_kernels(&kernel, &spec, &IntegrationConfig::default())
        .map_err(|e| e.to_string())?
        .variance;
    let m = vec![vec![m11.estimate]];
    let dk = dk_bound(1, &m, var).map_err(|e| e.to_string())?.value;
    let dw = dw_bound(1, &m, var).map_err(|e| e.to_string())?.value;
    ensure((dk - 19.0 / t.sqrt()).abs() <= 1e-12, format!("dK bound {dk}"))?;
    ensure((dw - 2.0 / t.sqrt()).abs() <= 1e-12, format!("dW bound {dw}"))?;
    let bound = fourth_moment_bound(1, &m, var).map_err(|e| e.to_string())?.value;
    let exact = t + 3.0 * t * t;
    ensure((bound - exact).abs() <= 1e-12 * exact, format!("fourth-moment bound {bound} vs {exact}"))?;
    let fourth: Vec<f64> = replicate(0xacc3, 100_000, |rng, _| {
        let eta = spec.sample_point_process(rng).unwrap();
        (evaluate(&kernel, &eta).value - t).powi(4)
    });
    let emp = Estimate::from_samples(&fourth);
    ensure(emp.within(exact, 4.0, 0.0), format!("empirical fourth moment {emp:?} vs {exact}"))?;
    Ok(format!(
        "t={t}: M11={}, dK={dk}, dW={dw}, E(F-EF)^4={:.2}±{:.2} vs {exact}",
        m11.estimate.value, emp.value, emp.stderr
    ))
}

// 4. Variance identity.
fn variance_identity() -> Outcome {
    let kernel = make_kernel(&KernelDescriptor::Constant { c: 1.0, k: 2 }).unwrap();
    let spec = unit(1.0);
    let var = variance_from_kernels(&kernel, &spec, &IntegrationConfig::default())
        .map_err(|e| e.to_string())?
        .variance;
    ensure(var.within(6.0, 1.0, 1e-12), format!("Var from kernels {var:?}"))?;
    let values: Vec<f64> = replicate(0xacc4, 10_000, |rng, _| {
        evaluate(&kernel, &spec.sample_point_process(rng).unwrap()).value
    });
    let sample = variance_estimate(&values);
    ensure(
        (sample.value - var.value).abs() <= 4.0 * var.stderr.hypot(sample.stderr),
        format!("sample variance {sample:?} vs {var:?}"),
    )?;
    for t in [0.5, 1.0, 2.0, 5.0] {
        let v = variance_from_kernels(&kernel, &unit(t), &IntegrationConfig::default())
            .map_err(|e| e.to_string())?
            .variance
            .value;
        let analytic = 4.0 * t * t * t + 2.0 * t * t;
        ensure((v - analytic).abs() <= 1e-12 * analytic, format!("t={t}: {v} vs 4t^3+2t^2={analytic}"))?;
    }
    Ok(format!(
        "Var={} (kernels), sample variance {:.3}±{:.3}; 4t^3+2t^2 matched at t=0.5,1,2,5",
        var.value, sample.value, sample.stderr
    ))
}

struct GeometricBound {
    var: Estimate,
    dk: Estimate,
    dw: Estimate,
}

fn geometric_bound(r: f64, t: f64, seed: u64) -> Result<GeometricBound, String> {
    let kernel = geometric(r);
    let spec = unit(t);
    let var = variance_from_kernels(
        &kernel,
        &spec,
        &IntegrationConfig {
            seed,
            ..IntegrationConfig::default()
        },
    )
    .map_err(|e| e.to_string())?
    .variance;
    let mij = m_matrix(
        &kernel,
        &spec,
        &MijConfig {
            seed,
            ..MijConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let m: Vec<Vec<Estimate>> = mij.iter().map(|row| row.iter().map(|e| e.estimate).collect()).collect();
    Ok(GeometricBound {
        var,
        dk: dk_bound(2, &m, var).map_err(|e| e.to_string())?,
        dw: dw_bound(2, &m, var).map_err(|e| e.to_string())?,
    })
}

// 5. Bound certification for the geometric kernel.
fn bound_certification() -> Outcome {
    let r = 0.05;
    let kernel = geometric(r);
    let mut notes = Vec::new();
    for (idx, t) in [50.0, 100.0, 200.0].into_iter().enumerate() {
        let spec = unit(t);
        let b = geometric_bound(r, t, 0x5000 + idx as u64)?;
        let mean = expectation(&kernel, &spec, 1).map_err(|e| e.to_string())?;
        let samples =
            standardized_samples(&kernel, &spec, mean, b.var.value, 10_000, 0x5100 + idx as u64).map_err(|e| e.to_string())?;
        let d = empirical_distances(&samples, 200, 0x5200 + idx as u64).map_err(|e| e.to_string())?;
        ensure(
            d.dk.value <= b.dk.value + 4.0 * (d.dk.stderr + b.dk.stderr),
            format!("t={t}: empirical dK {:?} vs bound {:?}", d.dk, b.dk),
        )?;
        ensure(
            d.dw.value <= b.dw.value + 4.0 * (d.dw.stderr + b.dw.stderr),
            format!("t={t}: empirical dW {:?} vs bound {:?}", d.dw, b.dw),
        )?;
        ensure(d.dk.value <= 2.0 * d.dw.value.sqrt(), format!("t={t}: dK > 2 sqrt(dW)"))?;
        notes.push(format!(
            "t={t}: dK {:.4}<={:.1}, dW {:.4}<={:.2}",
            d.dk.value, b.dk.value, d.dw.value, b.dw.value
        ));
    }
    Ok(notes.join("; "))
}

// 6. General Kolmogorov bound terms for the Poisson example.
fn theorem1_poisson() -> Outcome {
    let t = 25.0;
    let config = Theorem1Config {
        reps: 10_000,
        seed: 0xacc6,
        ..Theorem1Config::default()
    };
    let terms = estimate_theorem1_terms(&count_kernel(), &unit(t), Estimate::exact(t), &config).map_err(|e| e.to_string())?;
    ensure(terms.t1.within(0.0, 3.0, 1e-12), format!("T1 = {:?}", terms.t1))?;
    ensure(terms.t2.within(1.0 / t, 4.0, 1e-12), format!("T2 = {:?}, expected {}", terms.t2, 1.0 / t))?;
    ensure(
        terms.g_fourth.within(3.0 + 1.0 / t, 4.0, 0.0),
        format!("E G^4 = {:?}, expected {}", terms.g_fourth, 3.0 + 1.0 / t),
    )?;
    Ok(format!(
        "t={t}: T1={:.1e}, T2={:.6}, E G^4={:.3}±{:.3}, grid sup={:.4}",
        terms.t1.value, terms.t2.value, terms.g_fourth.value, terms.g_fourth.stderr, terms.sup_term.value
    ))
}

// 7. R_ij against M_ij.
fn r_versus_m() -> Outcome {
    let (r, t) = (0.05, 50.0);
    let kernel = geometric(r);
    let spec = unit(t);
    let mij = m_matrix(&kernel, &spec, &MijConfig::default()).map_err(|e| e.to_string())?;
    let config = RijConfig {
        seed: 0xacc7,
        ..RijConfig::default()
    };
    let mut notes = Vec::new();
    for (i, j) in [(1, 1), (1, 2), (2, 2)] {
        let rij = estimate_rij(&kernel, &spec, i, j, &config).map_err(|e| e.to_string())?;
        let m = mij[i - 1][j - 1].estimate;
        ensure(
            rij.value <= m.value + 4.0 * rij.stderr.hypot(m.stderr),
            format!("R{i}{j} = {rij:?} exceeds M{i}{j} = {m:?}"),
        )?;
        notes.push(format!("R{i}{j}={:.3e}<=M{i}{j}={:.3e}", rij.value, m.value));
    }
    let r11 = estimate_rij(&count_kernel(), &unit(t), 1, 1, &config).map_err(|e| e.to_string())?;
    ensure(r11.value.abs() <= 1e-10, format!("counting kernel R11 = {r11:?}"))?;
    notes.push(format!("count R11={}", r11.value));
    Ok(notes.join(", "))
}

// 8. Stein solution properties.
const GL_NODES: [f64; 5] = [
    0.0,
    0.538_469_310_105_683_1,
    -0.538_469_310_105_683_1,
    0.906_179_845_938_664,
    -0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let panels = (((b - a).abs() / 0.02).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

fn phi_by_quadrature(s: f64) -> f64 {
    0.5 + quad(|u| (-0.5 * u * u).exp(), 0.0, s) / (2.0 * std::f64::consts::PI).sqrt()
}

/// `e^{w²/2} ∫_{-∞}^{w} (1(u ≤ s) - Φ(s)) e^{-u²/2} du` by direct quadrature.
fn g_by_quadrature(s: f64, w: f64) -> f64 {
    let cdf = phi_by_quadrature(s);
    let weight = |u: f64| (0.5 * (w * w - u * u)).exp();
    let top = w.min(s);
    let lower = (1.0 - cdf) * quad(weight, top - 40.0, top);
    let upper = if w > s { -cdf * quad(weight, s, w) } else { 0.0 };
    lower + upper
}

fn stein_properties() -> Outcome {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xacc8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s: f64 = rng.random_range(-3.0..3.0);
        let w: f64 = rng.random_range(-4.0..4.0);
        let err = (g(s, w) - g_by_quadrature(s, w)).abs();
        worst = worst.max(err);
    }
    ensure(worst <= 1e-8, format!("closed form vs quadrature: max error {worst:e}"))?;
    let report = check_stein_properties(&SteinGrid::default());
    ensure(report.passed, format!("grid bounds failed: {report:?}"))?;
    let mut jump_err: f64 = 0.0;
    let h = 1e-7;
    for s in [-2.0, 0.0, 1.0] {
        let right = (g(s, s + h) - g(s, s)) / h;
        jump_err = jump_err.max((right - g_prime(s, s) + 1.0).abs());
    }
    ensure(jump_err <= 1e-5, format!("jump relation error {jump_err:e}"))?;
    Ok(format!(
        "quadrature max error {worst:.1e}; grid margins g {:.1e}, g' {:.3}, wg {:.3}, g'' {:.1e}; jump error {jump_err:.1e}",
        report.g_upper_margin, report.g_prime_margin, report.wg_margin, report.g_second_margin
    ))
}

// 9. t^{-1/2} rate of the Kolmogorov bound.
fn rate_check() -> Outcome {
    for t in [1.0, 4.0, 25.0, 100.0, 400.0, 1024.0] {
        let m = vec![vec![Estimate::exact(t)]];
        let dk = dk_bound(1, &m, Estimate::exact(t)).map_err(|e| e.to_string())?.value;
        ensure((dk * f64::sqrt(t) - 19.0).abs() <= 1e-12, format!("count kernel t={t}: sqrt(t) dK = {}", dk * t.sqrt()))?;
    }
    let scaled: Vec<(f64, Estimate)> = [100.0, 200.0, 400.0]
        .into_iter()
        .enumerate()
        .map(|(idx, t)| geometric_bound(0.05, t, 0x9000 + idx as u64).map(|b| (t, b.dk.scale(f64::sqrt(t)))))
        .collect::<Result<_, _>>()?;
    let values: Vec<f64> = scaled.iter().map(|(_, e)| e.value).collect();
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    let spread = max / min - 1.0;
    let listing: Vec<String> = scaled.iter().map(|(t, e)| format!("t={t}: {:.1}±{:.1}", e.value, e.stderr)).collect();
    ensure(spread < 0.10, format!("geometric sqrt(t) dK spread {:.1}% ({})", 100.0 * spread, listing.join(", ")))?;
    Ok(format!("count: 19 exactly; geometric sqrt(t) dK {} (spread {:.1}%)", listing.join(", "), 100.0 * spread))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 Poisson Berry-Esseen d_K <= 8/sqrt(t)", berry_esseen),
        ("2 partition enumeration vs brute force", partition_oracle),
        ("3 counting-kernel closed forms", counting_kernel),
        ("4 variance identity", variance_identity),
        ("5 geometric bound certification", bound_certification),
        ("6 Poisson example bound terms", theorem1_poisson),
        ("7 R_ij <= M_ij", r_versus_m),
        ("8 Stein solution properties", stein_properties),
        ("9 t^(-1/2) rate of the d_K bound", rate_check),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

