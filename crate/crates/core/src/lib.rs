//! Dyadic Calderon-Zygmund machinery for matrix-valued functions on the
//! periodic torus `[0,1)^n`, `n ∈ {1, 2}`.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyadic`]: grids, cubes, masks, conditional expectations.
//! * [`matfun`]: grid functions with matrix values and their trace calculus.
//! * [`cuculescu`]: the projection construction and the dilated projections.
//! * [`czdecomp`]: the good/bad splitting and its estimates.
//! * [`singint`]: discretized singular integral operators.
//! * [`pseudoloc`]: localization experiments and decay fits.
//! * [`counterex`]: finite-matrix counterexamples.
//! * [`fixtures`] and [`io`]: test data and serialization.

pub mod counterex;
pub mod cuculescu;
pub mod czdecomp;
pub mod dyadic;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod matfun;
pub mod pseudoloc;
pub mod singint;

pub use error::{CzError, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix used for cell values.
pub type Mat = nalgebra::DMatrix<C64>;
