//! High-order finite-difference discretizations of the tempered fractional
//! Laplacian `(-Δ)^{α/2}_λ` on boxes, with fast operator application and a
//! conjugate-gradient solver for `(-Δ)^{α/2}_λ u - σΔu + νu = f`.
//!
//! The pipeline: [`symbols`] defines the generating function of the scheme,
//! [`coefficients`] turns it into Toeplitz generators by FFT, [`operators`]
//! applies them through circulant embedding and [`solver`] inverts the
//! resulting SPD system. [`problems`] and [`analysis`] provide test
//! functions, error norms and convergence tables; [`experiments`] wires them
//! into the reference tables.

pub mod analysis;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod operators;
pub mod params;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod symbols;

pub use coefficients::{
    coefficient_self_error, coefficient_self_error_ladder, compute_coefficients, CoefficientTensor,
};
pub use error::{Result, TflError};
pub use grid::{GridFunction, UniformGrid};
pub use operators::{
    apply_discrete_tfl, apply_laplacian, assemble_operator, CompositeOperator, LinearOperator,
};
pub use params::{SchemeOrder, TflParams};
pub use quadrature::{gauss_legendre, sphere_rule, QuadratureRule, SphereRule};
pub use solver::{pcg_solve, pcg_solve_observed, Preconditioner, SolveReport, SolverSettings};
