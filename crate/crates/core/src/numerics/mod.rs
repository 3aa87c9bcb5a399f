//! Linear algebra, ODE integration and quadrature.

pub mod linalg;
pub mod ode;
pub mod quadrature;

pub use linalg::{spd_inverse, sym_eig, Spectrum, SymMatrix, PSD_REL_TOL};
pub use ode::{integrate, integrate_fixed, DenseSolution, IntegratorOptions, TimeGrid};
