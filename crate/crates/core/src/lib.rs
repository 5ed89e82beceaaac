//! Level-2 rough path numerics for the derivative process of rough differential
//! equations driven by Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] truncated tensor algebra, Chen products and the reversal contraction.
//! * [`special`] fractional factorials, the neo-classical inequality and the series
//!   constants that appear in factorial-decay estimates.
//! * [`path`] dyadic grids, sampled paths and discrete Hölder, p-variation and Besov norms.
//! * [`rough_path`] Brownian sampling, piecewise-linear lifts, Lyons extension and the
//!   partition functional.
//! * [`rde`] vector fields, the joint solve of an RDE with its Jacobian equation, the
//!   matrix-valued rough path `M` and the series representation of the Jacobian.
//! * [`moments`] Monte Carlo `L^r` estimates, growth exponents and tail fits.
//! * [`cli`] the batch experiment runner behind the `roughderiv` binary.

pub mod cli;
pub mod error;
pub mod io;
pub mod moments;
pub mod path;
pub mod rde;
pub mod rough_path;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
