use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = TflError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TflError {
    #[error("invalid quadrature order {0}: expected 1..=1000")]
    InvalidOrder(usize),

    #[error("unsupported dimension {0}: expected 1, 2 or 3")]
    UnsupportedDimension(usize),

    #[error("unsupported scheme order {0}: expected 2, 4, 6 or 8")]
    UnsupportedSchemeOrder(u32),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("sphere rule of dimension {rule} does not match problem dimension {expected}")]
    QuadratureMismatch { rule: usize, expected: usize },

    #[error("frequency component {value} lies outside the band [-{bound}, {bound}]")]
    OutOfBand { value: f64, bound: f64 },

    #[error("imaginary residue {residue:e} exceeds tolerance for real part {value:e}")]
    ImaginaryResidue { value: f64, residue: f64 },

    #[error("FFT resolution {nf} is invalid for {n1} coefficients per dimension: {reason}")]
    Resolution {
        nf: usize,
        n1: usize,
        reason: &'static str,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("stencil of half-width {half_width} does not fit a grid with {n_cells} cells")]
    GridTooSmall { half_width: usize, n_cells: usize },

    #[error("fine step {fine_h} is not nested in coarse step {coarse_h}")]
    NotNested { coarse_h: f64, fine_h: f64 },

    #[error("query point {0:?} lies outside the domain")]
    OutOfDomain(Vec<f64>),

    #[error("conjugate gradient did not converge: {0}")]
    NotConverged(Box<SolveReport>),

    #[error("conjugate gradient breakdown at iteration {iteration}: <p, Ap> = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
