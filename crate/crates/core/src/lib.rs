//! Wasserstein distances and Sinkhorn divergences between discrete
//! probability measures, with the kernel-vector products of Sinkhorn's
//! iteration accelerated to O(n log n) by NFFT-based fast summation.
//!
//! The pieces, bottom up:
//!
//! - [`measures`]: discrete measures, image/sample/quantile construction,
//!   entropy and KL divergence.
//! - [`exact`]: exact transport at desk scale (transportation simplex and
//!   the 1-D CDF coupling), the oracle everything else is checked against.
//! - [`sinkhorn`]: dense matrix-scaling iteration with divergence bounds
//!   and convergence diagnostics.
//! - [`nfft`]: nonequispaced FFT (exact reference and windowed fast
//!   version).
//! - [`fastsum`]: fast Gauss/Laplace kernel summation by periodization and
//!   two NFFT passes, with nearfield correction for the r = 1 kernel.
//! - [`nfft_sinkhorn`]: the matrix-free iteration built on top; it never
//!   materializes the n x n-tilde kernel.
//!
//! Everything is generic over the scalar type through [`Real`] (`f32` or
//! `f64`); the aliases at the crate root fix `f64`, which the default
//! tolerances assume.

// `!(x > 0)` guards deliberately reject NaN parameters, which the
// suggested `x <= 0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod fastsum;
pub mod io;
pub mod measures;
pub mod nfft;
pub mod nfft_sinkhorn;
pub mod real;
pub mod sinkhorn;
mod taylor;
pub mod util;

pub use error::{Error, Result};
pub use real::Real;

/// `f64` aliases for the central types.
pub type Measure64 = measures::DiscreteMeasure<f64>;
pub type Image64 = measures::GrayscaleImage<f64>;
pub type CostSpec64 = exact::CostSpec<f64>;
pub type TransportPlan64 = exact::TransportPlan<f64>;
pub type KernelMatrix64 = sinkhorn::KernelMatrix<f64>;
pub type SinkhornResult64 = sinkhorn::SinkhornResult<f64>;
pub type SinkhornOptions64 = sinkhorn::SinkhornOptions<f64>;
pub type NfftPlan64 = nfft::NfftPlan<f64>;
pub type FastsumOperator64 = fastsum::FastsumOperator<f64>;
pub type NfftSinkhornConfig64 = nfft_sinkhorn::NfftSinkhornConfig<f64>;
