//! Numerical toolkit for the one-dimensional stochastic wave equation driven
//! by noise that is white in time and fractional in space with Hurst index
//! H in (1/4, 1/2), i.e. rougher than white-noise correlation length scales.
//!
//! The crate covers four layers:
//!
//! * [`fracspace`]: the fractional covariance Hilbert space of spatial test
//!   functions, in both its Fourier form (spectral density `c1 |xi|^{1-2H}`)
//!   and its difference form (singular weight `|y|^{2H-2}`), plus the
//!   Gaussian-mollified family that regularizes the rough product.
//! * [`noise`]: exact synthesis of the space-time noise increments (Cholesky
//!   and circulant embedding), the discrete Walsh integral, and its isometry
//!   and Burkholder-type diagnostics.
//! * [`kernels`] and [`swe`] / [`skeleton`]: the wave Green's function, its
//!   four-kernel factorization, the explicit Walsh scheme for the stochastic
//!   and controlled equations, and the Picard solver for the deterministic
//!   skeleton equation.
//! * [`ldp`]: Freidlin-Wentzell machinery at desk scale, a penalty-method
//!   minimizer for the rate function and a Monte-Carlo tail-probability
//!   ladder to compare against it.

#![forbid(unsafe_code)]

pub mod error;
pub mod grid;
pub mod quad;
pub mod hurst;
pub mod fft;
pub mod fracspace;
pub mod io;
pub mod noise;
pub mod kernels;
pub mod swe;
mod drift;
pub mod skeleton;
pub mod ldp;

pub use error::CoreError;
pub use grid::{Field, Grid, GridFunction};
pub use hurst::HurstParam;
