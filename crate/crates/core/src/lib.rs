//! Pseudo-spectral simulation of `∂t u + (-Δ)^s u = ∇_z f(u)` on a periodic
//! grid with homogeneous Gaussian random initial data, together with the
//! Monte Carlo estimators used to check its moment and dissipation laws.

pub mod ensemble_stats;
pub mod error;
pub mod estimate;
pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod mild_solver;
pub mod nonlinearity;
pub mod random_fields;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
pub use field::FieldRealization;
pub use grid::Grid;
