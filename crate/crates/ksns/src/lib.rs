//! Numerical laboratory for the self-similar blowup of the three-dimensional
//! Keller-Segel system coupled to incompressible Navier-Stokes with buoyancy.
//!
//! The crate is organised bottom-up:
//!
//! * [`profile`]: the stationary profile `Q` and its companion closed forms.
//! * [`grids`]: mapped Chebyshev radial grids (one spherical-harmonic sector at a
//!   time) and a periodic Fourier box.
//! * [`linop`]: the linearized operator around `Q`, its exact drift-diffusion
//!   semigroup and resolvent.
//! * [`spectral`]: eigen-decompositions, unstable projections and the
//!   compactly supported modified unstable space.
//! * [`dynamics`]: self-similar and physical-frame time steppers, shooting on
//!   the unstable coefficient, bootstrap monitors and blowup-rate fits.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod grids;
pub mod linop;
pub mod profile;
pub mod spectral;

pub use error::{Error, Result};
