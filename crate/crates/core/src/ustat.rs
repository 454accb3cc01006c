//! Pathwise U-statistics `F = Σ_{(x_1..x_k) ∈ η^k_≠} f(x_1..x_k)` and their
//! Malliavin operators: the add-one cost `D_z F`, iterated differences
//! `D^n F`, and `-L^{-1}(F - EF)` in its explicit U-statistic form.
//!
//! Sums run over ordered tuples of distinct points; since kernels are
//! symmetric each unordered combination is visited once and weighted by the
//! number of its orderings.

use std::convert::Infallible;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::chaos::MarginalEvaluator;
use crate::kernels::SymmetricKernel;
use crate::measure::{IntensitySpec, PointConfiguration};
use crate::{Error, Result};

/// Largest `n` accepted by [`iterated_difference`] (it visits `2^n` subsets).
pub const MAX_ITERATED_ORDER: usize = 20;

type Args<'a> = SmallVec<[&'a [f64]; 8]>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UStatValue {
    pub value: f64,
    /// Number of ordered k-tuples of distinct points, `n (n-1) ... (n-k+1)`.
    pub tuple_count: u128,
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn ordered_tuple_count(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    ((n - k + 1)..=n).map(|i| i as u128).product()
}

/// `Σ_{S ⊂ points, |S| = r} f(prefix ++ S)` over unordered combinations.
pub(crate) fn sum_combinations<'a, E, F>(
    points: &[&'a [f64]],
    r: usize,
    prefix: &[&'a [f64]],
    f: &mut F,
) -> std::result::Result<f64, E>
where
    F: FnMut(&[&'a [f64]]) -> std::result::Result<f64, E>,
{
    fn rec<'a, E, F>(
        points: &[&'a [f64]],
        start: usize,
        remaining: usize,
        args: &mut Args<'a>,
        f: &mut F,
        acc: &mut f64,
    ) -> std::result::Result<(), E>
    where
        F: FnMut(&[&'a [f64]]) -> std::result::Result<f64, E>,
    {
        if remaining == 0 {
            *acc += f(args)?;
            return Ok(());
        }
        for i in start..=points.len() - remaining {
            args.push(points[i]);
            rec(points, i + 1, remaining - 1, args, f, acc)?;
            args.pop();
        }
        Ok(())
    }

    if r > points.len() {
        return Ok(0.0);
    }
    let mut args: Args<'a> = prefix.iter().copied().collect();
    let mut acc = 0.0;
    rec(points, 0, r, &mut args, f, &mut acc)?;
    Ok(acc)
}

fn pure_sum<'a>(points: &[&'a [f64]], r: usize, prefix: &[&'a [f64]], f: impl Fn(&[&[f64]]) -> f64) -> f64 {
    let res: std::result::Result<f64, Infallible> = sum_combinations(points, r, prefix, &mut |a| Ok(f(a)));
    match res {
        Ok(v) => v,
        Err(e) => match e {},
    }
}

/// Ordered pairs within distance `r`, found with a sweep along the first axis.
fn geometric_pair_sum(kernel: &SymmetricKernel, points: &[&[f64]], r: f64, abs: bool) -> f64 {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut sum = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        let xi = points[i];
        for &j in &order[pos + 1..] {
            let xj = points[j];
            if xj[0] - xi[0] > r {
                break;
            }
            let v = kernel.eval(&[xi, xj]);
            sum += if abs { v.abs() } else { v };
        }
    }
    2.0 * sum
}

const SWEEP_MIN_POINTS: usize = 32;

fn evaluate_impl(kernel: &SymmetricKernel, config: &PointConfiguration, abs: bool) -> UStatValue {
    let k = kernel.order();
    let n = config.len();
    let tuple_count = ordered_tuple_count(n, k);
    if tuple_count == 0 {
        return UStatValue {
            value: 0.0,
            tuple_count,
        };
    }
    let points = config.as_slices();
    let value = match kernel.geometric_radius() {
        Some(r) if n >= SWEEP_MIN_POINTS => geometric_pair_sum(kernel, &points, r, abs),
        _ => {
            let sum = if abs {
                pure_sum(&points, k, &[], |a| kernel.abs_eval(a))
            } else {
                pure_sum(&points, k, &[], |a| kernel.eval(a))
            };
            factorial(k) * sum
        }
    };
    UStatValue { value, tuple_count }
}

/// `F(η)`.
pub fn evaluate(kernel: &SymmetricKernel, config: &PointConfiguration) -> UStatValue {
    evaluate_impl(kernel, config, false)
}

/// `F̄(η)`, the U-statistic of `|f|`.
pub fn evaluate_abs(kernel: &SymmetricKernel, config: &PointConfiguration) -> UStatValue {
    evaluate_impl(kernel, config, true)
}

/// `D_z F = F(η + δ_z) - F(η)`, computed from the `(k-1)`-tuples of existing
/// points only.
pub fn add_one_cost(kernel: &SymmetricKernel, config: &PointConfiguration, z: &[f64]) -> f64 {
    let k = kernel.order();
    let points = config.as_slices();
    factorial(k) * pure_sum(&points, k - 1, &[z], |a| kernel.eval(a))
}

/// `D^n_{z_1..z_n} F = Σ_{I ⊂ {1..n}} (-1)^{n+|I|} F(η + Σ_{i ∈ I} δ_{z_i})`.
///
/// Every subset is visited. `F(η + I) - F(η)` is assembled from the tuples
/// containing exactly a subset `J ⊂ I` of the new points, and the constant
/// `F(η)` is dropped since the signed subset sum annihilates it.
pub fn iterated_difference(kernel: &SymmetricKernel, config: &PointConfiguration, zs: &[&[f64]]) -> Result<f64> {
    let n = zs.len();
    if n == 0 || n > MAX_ITERATED_ORDER {
        return Err(Error::OutOfRange {
            what: "difference order n",
            value: n,
            lo: 1,
            hi: MAX_ITERATED_ORDER,
        });
    }
    let k = kernel.order();
    let points = config.as_slices();
    let kfact = factorial(k);
    let subsets = 1usize << n;

    // contribution[J]: ordered tuples made of exactly the new points J plus old points.
    let mut gain = vec![0.0; subsets];
    for (mask, slot) in gain.iter_mut().enumerate().skip(1) {
        let size = mask.count_ones() as usize;
        if size > k {
            continue;
        }
        let prefix: Args = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| zs[b]).collect();
        *slot = kfact * pure_sum(&points, k - size, &prefix, |a| kernel.eval(a));
    }
    // Subset-sum transform: gain[I] becomes F(η + I) - F(η).
    for bit in 0..n {
        for mask in 0..subsets {
            if mask >> bit & 1 == 1 {
                gain[mask] += gain[mask ^ (1 << bit)];
            }
        }
    }
    let total = gain
        .iter()
        .enumerate()
        .map(|(mask, v)| if (n - mask.count_ones() as usize) % 2 == 0 { *v } else { -*v })
        .sum();
    Ok(total)
}

/// `-L^{-1}(F - EF)(η)` for the U-statistic of `kernel`, using closed-form
/// marginals where available and fixed-seed Monte Carlo otherwise.
pub fn inverse_ou_pathwise(kernel: &SymmetricKernel, config: &PointConfiguration, intensity: &IntensitySpec) -> Result<f64> {
    let marginals = MarginalEvaluator::new(kernel, intensity, Default::default());
    inverse_ou_with(&marginals, config)
}

/// `-L^{-1}(F - EF) = Σ_{m=1}^k (1/m) [Σ_{η^m_≠} ∫ f(x, y) dμ^{k-m}(y) - ∫ f dμ^k]`.
pub fn inverse_ou_with(marginals: &MarginalEvaluator<'_>, config: &PointConfiguration) -> Result<f64> {
    let k = marginals.kernel().order();
    let points = config.as_slices();
    let full = marginals.partial(&[], false)?.value;
    let mut total = 0.0;
    for m in 1..=k {
        let tuples = factorial(m)
            * sum_combinations(&points, m, &[], &mut |a| marginals.partial(a, false).map(|e| e.value))?;
        total += (tuples - full) / m as f64;
    }
    Ok(total)
}

/// `-D_z L^{-1}(F - EF) = Σ_{m=1}^k (m-1)! Σ_{S ∈ η^{(m-1)}} ∫ f(z, S, y) dμ^{k-m}(y)`,
/// the add-one cost of [`inverse_ou_with`].
pub fn inverse_ou_add_one_cost(marginals: &MarginalEvaluator<'_>, config: &PointConfiguration, z: &[f64]) -> Result<f64> {
    let k = marginals.kernel().order();
    let points = config.as_slices();
    let mut total = 0.0;
    for m in 1..=k {
        total += factorial(m - 1)
            * sum_combinations(&points, m - 1, &[z], &mut |a| marginals.partial(a, false).map(|e| e.value))?;
    }
    Ok(total)
}
