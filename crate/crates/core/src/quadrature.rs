//! Gauss–Legendre rules and the angular rules built from them.
//!
//! The sphere rules discretize `∫_{‖θ‖=1} f(θ) dθ` for `d = 1, 2, 3`:
//!
//! * `d = 1`: the two points `θ = ±1` with unit weights (exact);
//! * `d = 2`: `θ = (cos t, sin t)` with `t` from a Gauss rule on `[0, 2π]`;
//! * `d = 3`: a tensor Gauss rule in `(t₁, t₂) ∈ [0, π] × [0, 2π]`,
//!   `θ = (cos t₂ sin t₁, sin t₂ sin t₁, cos t₁)`, with the `sin t₁` area
//!   factor folded into the weights.

use std::f64::consts::PI;

use crate::error::{Result, TflError};

pub const MAX_ORDER: usize = 1000;

/// Angular nodes per direction used by default for the sphere integrals.
pub const DEFAULT_SPHERE_ORDER: usize = 20;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in strictly increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights affinely mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Returns `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// The `order`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_order` are found by Newton iteration started from
/// Chebyshev-type points `cos(π(i - 1/4)/(n + 1/2))`. Only the non-negative
/// half is iterated; the other half is its mirror image, so the rule is
/// exactly symmetric.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(TflError::InvalidOrder(order));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
        } else {
            for _ in 0..NEWTON_MAX_ITER {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < NEWTON_TOL {
                    break;
                }
            }
        }
        let dp = legendre_with_derivative(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Quadrature on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    dim: usize,
    order: usize,
    /// Row-major `len × dim` unit directions.
    directions: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gauss nodes per angular direction (irrelevant for `d = 1`).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.directions.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exact surface measure of `S^{d-1}`: 2, 2π, 4π.
    pub fn measure(&self) -> f64 {
        sphere_measure(self.dim)
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.directions()
            .zip(&self.weights)
            .map(|(theta, &w)| w * f(theta))
            .sum()
    }
}

pub(crate) fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Angular rule for `∫_{‖θ‖=1} f(θ) dθ` in dimension `d`.
pub fn sphere_rule(d: usize, order: usize) -> Result<SphereRule> {
    match d {
        1 => Ok(SphereRule {
            dim: 1,
            order,
            directions: vec![-1.0, 1.0],
            weights: vec![1.0, 1.0],
        }),
        2 => {
            let gl = gauss_legendre(order)?;
            let mut directions = Vec::with_capacity(2 * order);
            let mut weights = Vec::with_capacity(order);
            for (t, w) in gl.mapped(0.0, 2.0 * PI) {
                directions.extend([t.cos(), t.sin()]);
                weights.push(w);
            }
            Ok(SphereRule {
                dim: 2,
                order,
                directions,
                weights,
            })
        }
        3 => {
            let gl = gauss_legendre(order)?;
            let mut directions = Vec::with_capacity(3 * order * order);
            let mut weights = Vec::with_capacity(order * order);
            for (polar, wp) in gl.mapped(0.0, PI) {
                let (sp, cp) = polar.sin_cos();
                for (azimuth, wa) in gl.mapped(0.0, 2.0 * PI) {
                    let (sa, ca) = azimuth.sin_cos();
                    directions.extend([ca * sp, sa * sp, cp]);
                    weights.push(wp * wa * sp);
                }
            }
            Ok(SphereRule {
                dim: 3,
                order,
                directions,
                weights,
            })
        }
        other => Err(TflError::UnsupportedDimension(other)),
    }
}
