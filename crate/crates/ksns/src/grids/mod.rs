//! Discretizations of ℝ³: a mapped radial collocation grid used one
//! spherical-harmonic sector at a time, and a periodic Fourier box.

mod field;
mod fourier;
mod harmonics;
mod poisson;
mod radial;
pub mod snapshot;

pub use field::{BoxField, RadialField, VectorField};
pub use fourier::FourierGrid3;
pub(crate) use harmonics::gauss_legendre;
pub use harmonics::{real_sph_harm, shell_coefficient, transfer_radial_to_box};
pub use poisson::{poisson_matrix, poisson_sector, PoissonSolution};
pub use radial::{RadialGrid, DEFAULT_MAP_SCALE, DEFAULT_R_MAX};
