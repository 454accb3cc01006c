//! Symmetric U-statistic kernels.
//!
//! A kernel of order `k` is a symmetric function on `box^k`. Built-in kernels
//! know their partial integrals `∫ f(x_1..x_i, y_1..y_{k-i}) dμ^{k-i}` in
//! closed form for the intensities where one exists; the binomial factor of
//! the chaos kernels is *not* included here (see [`crate::chaos`]).

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::measure::IntensitySpec;
use crate::poly::Polynomial;
use crate::{Error, Result};

pub type KernelFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;
pub type MarginalFn = Arc<dyn Fn(&IntensitySpec, &[&[f64]]) -> f64 + Send + Sync>;

/// Serializable name + parameters of a built-in kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelDescriptor {
    /// `k = 1`, `f ≡ 1`: the U-statistic is the number of points.
    Count {},
    Constant { c: f64, k: usize },
    /// `k = 2`, `f(x, y) = 1(|x - y| ≤ r)`: twice the edge count of the
    /// random geometric graph.
    GeometricIndicator { r: f64 },
    /// `f(x_1..x_k) = Π g(x_i)` with `g` a polynomial in the first coordinate.
    Product { k: usize, coeffs: Polynomial },
}

#[derive(Clone)]
enum Body {
    Constant(f64),
    Geometric { r: f64 },
    Product { g: Polynomial },
    Custom {
        f: KernelFn,
        marginals: Option<(MarginalFn, MarginalFn)>,
    },
}

/// An order-`k` symmetric kernel, optionally multiplied by a constant.
#[derive(Clone)]
pub struct SymmetricKernel {
    order: usize,
    name: String,
    descriptor: Option<KernelDescriptor>,
    scale: f64,
    body: Body,
}

impl fmt::Debug for SymmetricKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricKernel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("scale", &self.scale)
            .finish()
    }
}

/// Builds a kernel from its descriptor.
pub fn make_kernel(descriptor: &KernelDescriptor) -> Result<SymmetricKernel> {
    let (order, name, body) = match descriptor {
        KernelDescriptor::Count {} => (1, "count".to_string(), Body::Constant(1.0)),
        KernelDescriptor::Constant { c, k } => {
            if !c.is_finite() {
                return Err(Error::InvalidKernel(format!("constant c = {c} is not finite")));
            }
            (*k, format!("constant(c={c}, k={k})"), Body::Constant(*c))
        }
        KernelDescriptor::GeometricIndicator { r } => {
            if !(r.is_finite() && *r > 0.0) {
                return Err(Error::InvalidKernel(format!("geometric_indicator r = {r} must be positive")));
            }
            (2, format!("geometric_indicator(r={r})"), Body::Geometric { r: *r })
        }
        KernelDescriptor::Product { k, coeffs } => {
            if coeffs.coeffs().is_empty() || coeffs.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidKernel("product coeffs must be finite and non-empty".into()));
            }
            (*k, format!("product(k={k})"), Body::Product { g: coeffs.clone() })
        }
    };
    if order < 1 {
        return Err(Error::InvalidKernel(format!("order k = {order} must be at least 1")));
    }
    Ok(SymmetricKernel {
        order,
        name,
        descriptor: Some(descriptor.clone()),
        scale: 1.0,
        body,
    })
}

impl SymmetricKernel {
    /// A user kernel. Symmetry is the caller's responsibility (see
    /// [`symmetry_check`]); without marginals, dependent quantities fall back
    /// to Monte Carlo.
    pub fn custom<F>(name: impl Into<String>, order: usize, f: F) -> Result<Self>
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        if order < 1 {
            return Err(Error::InvalidKernel(format!("order k = {order} must be at least 1")));
        }
        Ok(Self {
            order,
            name: name.into(),
            descriptor: None,
            scale: 1.0,
            body: Body::Custom {
                f: Arc::new(f),
                marginals: None,
            },
        })
    }

    /// Attaches closed-form partial integrals of `f` and `|f|` to a user kernel.
    /// Both closures receive `i < k` leading arguments.
    pub fn with_marginals<M, A>(mut self, marginal: M, abs_marginal: A) -> Self
    where
        M: Fn(&IntensitySpec, &[&[f64]]) -> f64 + Send + Sync + 'static,
        A: Fn(&IntensitySpec, &[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        if let Body::Custom { marginals, .. } = &mut self.body {
            *marginals = Some((Arc::new(marginal), Arc::new(abs_marginal)));
        }
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn descriptor(&self) -> Option<&KernelDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale
    }

    /// The kernel `c · f`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// Radius of a geometric indicator kernel, for neighbour-search shortcuts.
    pub fn geometric_radius(&self) -> Option<f64> {
        match self.body {
            Body::Geometric { r } => Some(r),
            _ => None,
        }
    }

    /// True for built-ins whose kernel is nonnegative everywhere.
    pub fn is_nonnegative(&self) -> bool {
        self.scale >= 0.0
            && match &self.body {
                Body::Constant(c) => *c >= 0.0,
                Body::Geometric { .. } => true,
                _ => false,
            }
    }

    #[inline]
    pub fn eval(&self, args: &[&[f64]]) -> f64 {
        debug_assert_eq!(args.len(), self.order);
        self.scale * body_eval(&self.body, args)
    }

    #[inline]
    pub fn abs_eval(&self, args: &[&[f64]]) -> f64 {
        self.eval(args).abs()
    }

    /// Closed-form partial integrals for this intensity, if available.
    pub fn marginals(&self, intensity: &IntensitySpec) -> Option<Marginals> {
        let plan = match &self.body {
            Body::Constant(c) => Plan::Constant {
                c: *c,
                mass: intensity.analytic_mass()?,
            },
            Body::Geometric { r } => {
                let rho = intensity.density().constant_value()?;
                if intensity.dim() != 1 {
                    return None;
                }
                let (lo, hi) = intensity.bounds()[0];
                Plan::Geometric {
                    r: *r,
                    lo,
                    hi,
                    rate: intensity.scale() * rho,
                }
            }
            Body::Product { g } => {
                let q = intensity.density().as_polynomial()?;
                let (a, b) = intensity.bounds()[0];
                let other = intensity.volume() / (b - a);
                let t = intensity.scale();
                Plan::Product {
                    g: g.clone(),
                    integral: t * other * g.mul(&q).integral(a, b),
                    abs_integral: t * other * g.abs_weighted_integral(&q, a, b),
                }
            }
            Body::Custom { f, marginals } => {
                let (m, am) = marginals.as_ref()?;
                Plan::Custom {
                    f: f.clone(),
                    marginal: m.clone(),
                    abs_marginal: am.clone(),
                    intensity: intensity.clone(),
                }
            }
        };
        Some(Marginals {
            order: self.order,
            scale: self.scale,
            plan,
        })
    }
}

#[inline]
fn body_eval(body: &Body, args: &[&[f64]]) -> f64 {
    match body {
        Body::Constant(c) => *c,
        Body::Geometric { r } => {
            let d2: f64 = args[0]
                .iter()
                .zip(args[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= r * r {
                1.0
            } else {
                0.0
            }
        }
        Body::Product { g } => args.iter().map(|x| g.eval(x[0])).product(),
        Body::Custom { f, .. } => f(args),
    }
}

#[derive(Clone)]
enum Plan {
    Constant {
        c: f64,
        mass: f64,
    },
    Geometric {
        r: f64,
        lo: f64,
        hi: f64,
        rate: f64,
    },
    Product {
        g: Polynomial,
        integral: f64,
        abs_integral: f64,
    },
    Custom {
        f: KernelFn,
        marginal: MarginalFn,
        abs_marginal: MarginalFn,
        intensity: IntensitySpec,
    },
}

/// Partial integrals `∫ f(x_1..x_i, y) dμ^{k-i}` of a kernel for a fixed
/// intensity, with `i = 0..=k` (at `i = k` this is `f` itself).
#[derive(Clone)]
pub struct Marginals {
    order: usize,
    scale: f64,
    plan: Plan,
}

impl fmt::Debug for Marginals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Marginals")
            .field("order", &self.order)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl Marginals {
    pub fn eval(&self, args: &[&[f64]]) -> f64 {
        self.scale * self.raw(args, false)
    }

    /// Partial integral of `|f|`.
    pub fn eval_abs(&self, args: &[&[f64]]) -> f64 {
        self.scale.abs() * self.raw(args, true)
    }

    fn raw(&self, args: &[&[f64]], abs: bool) -> f64 {
        let m = args.len();
        debug_assert!(m <= self.order);
        let free = (self.order - m) as i32;
        let fold = |v: f64| if abs { v.abs() } else { v };
        match &self.plan {
            Plan::Constant { c, mass } => fold(*c) * mass.powi(free),
            Plan::Geometric { r, lo, hi, rate } => match m {
                2 => body_eval(&Body::Geometric { r: *r }, args),
                1 => {
                    let x = args[0][0];
                    rate * ((x + r).min(*hi) - (x - r).max(*lo)).max(0.0)
                }
                _ => {
                    let len = hi - lo;
                    let pair = if *r <= len { 2.0 * r * len - r * r } else { len * len };
                    rate * rate * pair
                }
            },
            Plan::Product {
                g,
                integral,
                abs_integral,
            } => {
                let head: f64 = args.iter().map(|x| fold(g.eval(x[0]))).product();
                head * if abs { abs_integral } else { integral }.powi(free)
            }
            Plan::Custom {
                f,
                marginal,
                abs_marginal,
                intensity,
            } => {
                if m == self.order {
                    fold(f(args))
                } else if abs {
                    abs_marginal(intensity, args)
                } else {
                    marginal(intensity, args)
                }
            }
        }
    }
}

/// Spot-checks symmetry: `trials` random argument tuples in `[0,1]^dim`, each
/// compared against a random permutation of itself to relative tolerance 1e-12.
pub fn symmetry_check<R: Rng + ?Sized>(
    kernel: &SymmetricKernel,
    dim: usize,
    trials: usize,
    rng: &mut R,
) -> bool {
    let k = kernel.order();
    let mut coords = vec![0.0; k * dim];
    for _ in 0..trials.max(1) {
        coords.iter_mut().for_each(|c| *c = rng.random());
        let args: SmallVec<[&[f64]; 8]> = coords.chunks_exact(dim).collect();
        let mut permuted = args.clone();
        permuted.shuffle(rng);
        let a = kernel.eval(&args);
        let b = kernel.eval(&permuted);
        if a != b && (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            return false;
        }
    }
    true
}
