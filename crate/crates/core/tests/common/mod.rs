//! Independent oracles shared by the integration tests. Nothing here calls
//! into the FFT or circulant paths of the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use tfl_core::{CoefficientTensor, UniformGrid};

/// `h² ψ_h` written with cosines, straight from the stencil coefficients of
/// the classical schemes.
pub fn psi_cosine_form(p: u32, t: f64) -> f64 {
    match p {
        2 => 2.0 - 2.0 * t.cos(),
        4 => (2.0 * t).cos() / 6.0 - 8.0 / 3.0 * t.cos() + 2.5,
        6 => -(3.0 * t).cos() / 45.0 + 0.3 * (2.0 * t).cos() - 3.0 * t.cos() + 49.0 / 18.0,
        8 => {
            (4.0 * t).cos() / 280.0 - 16.0 / 315.0 * (3.0 * t).cos() + 0.4 * (2.0 * t).cos()
                - 3.2 * t.cos()
                + 205.0 / 72.0
        }
        _ => panic!("no scheme of order {p}"),
    }
}

/// One-dimensional generating function with principal-branch complex
/// powers, unnormalized: `(-1)^⌊α⌋ [(a+iφ)^α + (a-iφ)^α - 2a^α]`.
pub fn generating_1d(alpha: f64, a: f64, p: u32, eta: f64) -> f64 {
    let phi = psi_cosine_form(p, eta).max(0.0).sqrt() * eta.signum();
    let z = Complex64::new(a, phi);
    let zc = Complex64::new(a, -phi);
    let pow = |w: Complex64| if w.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { w.powf(alpha) };
    let v = pow(z) + pow(zc) - Complex64::new(2.0 * a.powf(alpha), 0.0);
    let sign = if alpha.floor() as i64 % 2 == 0 { 1.0 } else { -1.0 };
    sign * v.re
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    // split first so the oscillatory integrand is resolved from the start
    let pieces = 64;
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(&f, x0, x1, f0, fm, f1, whole, eps / pieces as f64, 40)
        })
        .sum()
}

/// `a_j = (1/2π) ∫_{-π}^{π} G(η) e^{-ijη} dη` for `d = 1`.
pub fn coefficient_1d(alpha: f64, lambda: f64, h: f64, p: u32, j: usize) -> f64 {
    let a = h * lambda;
    let integral = adaptive_simpson(|eta| generating_1d(alpha, a, p, eta) * (j as f64 * eta).cos(), 0.0, PI, 1e-14);
    integral / PI
}

/// Dense `h^{-α} [a_{|i-j|}]` on the interior lattice, entry by entry.
pub fn dense_tfl(grid: &UniformGrid, tensor: &CoefficientTensor) -> DMatrix<f64> {
    let n = grid.n_interior();
    let d = grid.dim();
    let len = grid.len();
    let unflatten = |mut k: usize| {
        let mut idx = vec![0usize; d];
        for l in (0..d).rev() {
            idx[l] = k % n;
            k /= n;
        }
        idx
    };
    let scale = grid.h().powf(-tensor.params().alpha);
    DMatrix::from_fn(len, len, |r, c| {
        let (ir, ic) = (unflatten(r), unflatten(c));
        let off: Vec<usize> = ir.iter().zip(&ic).map(|(&a, &b)| a.abs_diff(b)).collect();
        scale * tensor.get(&off)
    })
}

pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let x = a.clone().lu().solve(&DVector::from_column_slice(b)).expect("nonsingular");
    x.as_slice().to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
