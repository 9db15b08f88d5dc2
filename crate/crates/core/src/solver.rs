//! Preconditioned conjugate gradients for `A U = f`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::for_each_index;
use crate::error::{Result, TflError};
use crate::fft::NdFft;
use crate::grid::GridFunction;
use crate::operators::{CompositeOperator, LinearOperator};

/// Smallest relative residual the solver will aim for.
pub const MIN_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Circulant,
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Circulant => "circulant",
        })
    }
}

impl FromStr for Preconditioner {
    type Err = TflError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "circulant" | "strang" => Ok(Self::Circulant),
            other => Err(TflError::Format(format!(
                "unknown preconditioner `{other}` (expected none or circulant)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Requested relative residual; values below [`MIN_TOLERANCE`] are raised
    /// to it and the report records both.
    pub tolerance: f64,
    /// Defaults to `10 (N₁ - 1)^d` when absent.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            preconditioner: Preconditioner::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative recursive residual `‖r_k‖/‖f‖` at exit.
    pub final_residual: f64,
    /// Relative residual `‖f - A U‖/‖f‖` recomputed from the returned iterate.
    pub true_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
    pub preconditioner: Preconditioner,
    pub requested_tolerance: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative residual after every iteration, starting with 1.
    pub residual_history: Vec<f64>,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations (residual {:.3e}, true {:.3e}, tol {:.1e}, precond {}, {:.3} s)",
            if self.converged { "converged" } else { "not converged" },
            self.iterations,
            self.final_residual,
            self.true_residual,
            self.tolerance,
            self.preconditioner,
            self.wall_time
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Strang circulant approximation of the operator on the `(N₁-1)^d` lattice.
///
/// Its first column takes `t_k` for `k ≤ n/2` and `t_{n-k}` above, per axis,
/// where `t` are the generators of `A`. Eigenvalues that come out
/// non-positive are raised to a small fraction of the largest one so the
/// preconditioner stays SPD.
#[derive(Debug, Clone)]
pub struct StrangPreconditioner {
    n: usize,
    dim: usize,
    fft: NdFft,
    inv_eigenvalues: Vec<f64>,
    clamped: usize,
}

impl StrangPreconditioner {
    pub fn new(op: &CompositeOperator) -> Self {
        let grid = op.grid();
        let n = grid.n_interior();
        let d = grid.dim();
        let fft = NdFft::new(&vec![n; d]);
        let mut buf = vec![Complex64::default(); n.pow(d as u32)];
        let mut k = 0;
        let mut folded = vec![0usize; d];
        for_each_index(n, d, |j| {
            for (f, &jl) in folded.iter_mut().zip(j) {
                *f = if jl <= n / 2 { jl } else { n - jl };
            }
            buf[k] = Complex64::new(op.generator(&folded), 0.0);
            k += 1;
        });
        fft.forward(&mut buf);
        let max = buf.iter().fold(0.0f64, |m, z| m.max(z.re));
        let floor = 1e-8 * max.max(f64::MIN_POSITIVE);
        let mut clamped = 0;
        let total = buf.len() as f64;
        let inv_eigenvalues = buf
            .iter()
            .map(|z| {
                let mut ev = z.re;
                if ev <= floor {
                    ev = floor;
                    clamped += 1;
                }
                1.0 / (ev * total)
            })
            .collect();
        Self {
            n,
            dim: d,
            fft,
            inv_eigenvalues,
            clamped,
        }
    }

    /// Number of eigenvalues that had to be raised to stay positive.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        debug_assert_eq!(r.len(), self.n.pow(self.dim as u32));
        let mut buf: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.inv_eigenvalues) {
            *b *= *s;
        }
        self.fft.inverse(&mut buf);
        for (o, b) in z.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
}

/// Solves `A U = f` from a zero initial guess.
///
/// Iterates until the recursive residual satisfies `‖r‖ ≤ tol ‖f‖`. A
/// curvature `⟨p, Ap⟩ ≤ 1e-30 ‖p‖²` is reported as a breakdown since it means
/// `A` is not SPD. Exhausting the iteration budget yields
/// [`TflError::NotConverged`] with the report attached.
pub fn pcg_solve(
    op: &CompositeOperator,
    f: &GridFunction,
    settings: &SolverSettings,
) -> Result<(GridFunction, SolveReport)> {
    pcg_solve_observed(op, f, settings, |_, _| {})
}

/// [`pcg_solve`] that hands every iterate `(k, U_k)` to `observe`.
pub fn pcg_solve_observed<F: FnMut(usize, &[f64])>(
    op: &CompositeOperator,
    f: &GridFunction,
    settings: &SolverSettings,
    mut observe: F,
) -> Result<(GridFunction, SolveReport)> {
    if !f.grid().same_as(op.grid()) {
        return Err(TflError::GridMismatch(
            "right-hand side does not live on the operator's grid".into(),
        ));
    }
    if !(settings.tolerance > 0.0) {
        return Err(TflError::InvalidParameter {
            name: "tolerance",
            value: settings.tolerance,
            reason: "must be positive",
        });
    }
    let start = Instant::now();
    let n = f.values().len();
    let tol = settings.tolerance.max(MIN_TOLERANCE);
    let max_iterations = settings.max_iterations.unwrap_or(10 * n);
    let precond = match settings.preconditioner {
        Preconditioner::Circulant => Some(StrangPreconditioner::new(op)),
        Preconditioner::None => None,
    };
    let apply_m = |r: &[f64], z: &mut [f64]| match &precond {
        Some(pc) => pc.apply_inverse(r, z),
        None => z.copy_from_slice(r),
    };

    let b = f.values();
    let norm_b = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        iterations: 0,
        final_residual: 0.0,
        true_residual: 0.0,
        converged: true,
        wall_time: 0.0,
        preconditioner: settings.preconditioner,
        requested_tolerance: settings.tolerance,
        tolerance: tol,
        max_iterations,
        residual_history: vec![],
    };
    if norm_b == 0.0 {
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((GridFunction::zeros(op.grid()), report));
    }

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_m(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    report.residual_history.push(rel);
    report.converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        op.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 1e-30 * dot(&p, &p) {
            return Err(TflError::Breakdown {
                iteration: iterations + 1,
                curvature,
            });
        }
        let step = rz / curvature;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        observe(iterations, &x);
        rel = dot(&r, &r).sqrt() / norm_b;
        report.residual_history.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        apply_m(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    op.apply_into(&x, &mut ap);
    let true_res: f64 = b.iter().zip(&ap).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt();
    report.iterations = iterations;
    report.final_residual = rel;
    report.true_residual = true_res / norm_b;
    report.wall_time = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(TflError::NotConverged(Box::new(report)));
    }
    Ok((GridFunction::from_raw(op.grid(), x), report))
}
