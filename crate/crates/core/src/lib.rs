//! Stein–Malliavin normal-approximation bounds for U-statistics of Poisson
//! point processes, together with the Monte Carlo machinery used to certify
//! them empirically.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`]: boxes in R^d carrying an intensity measure `t * density`,
//!   Poisson sampling and plain Monte Carlo integration.
//! * [`kernels`]: symmetric U-statistic kernels with optional analytic marginals.
//! * [`ustat`]: pathwise U-statistics and their difference operators.
//! * [`chaos`]: chaos-expansion kernels, variance identity, first-order integrals.
//! * [`partitions`]: the constrained partition class indexing the `M_ij` integrals.
//! * [`bounds`]: `M_ij`, the Kolmogorov/Wasserstein bounds and Monte Carlo
//!   estimates of the general Kolmogorov bound's terms.
//! * [`stein`]: the normal CDF and the Stein solution `g_s`.
//! * [`distance`]: empirical and exact distances to the standard normal.
//! * [`experiment`]: intensity sweeps combining all of the above.

pub mod bounds;
pub mod chaos;
pub mod distance;
mod error;
pub mod estimate;
pub mod experiment;
pub mod kernels;
pub mod measure;
pub mod partitions;
mod poly;
pub mod stein;
pub mod ustat;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use kernels::{KernelDescriptor, SymmetricKernel};
pub use measure::{Density, IntensitySpec, PointConfiguration};
pub use poly::Polynomial;
