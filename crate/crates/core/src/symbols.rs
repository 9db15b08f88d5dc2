//! Continuous and discrete symbols of the tempered fractional Laplacian.
//!
//! Every sphere integrand `(c + i ξ·θ)^α` is paired with its antipode
//! `(c - i ξ·θ)^α`, which turns it into `Re (c + i ξ·θ)^α`. The symmetrized
//! integrand is real for any angular rule, so the quadrature never has to
//! cancel imaginary parts between nodes. The certified entry points still
//! evaluate the complex power on the principal branch and check that the
//! discarded imaginary residue is at round-off level.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, TflError};
use crate::params::{SchemeOrder, TflParams};
use crate::quadrature::{sphere_measure, SphereRule};

/// Relative tolerance on the imaginary part thrown away by the certified path.
pub const IMAG_TOLERANCE: f64 = 1e-12;

/// A real symbol value together with the imaginary residue that was dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolValue {
    pub value: f64,
    pub imag_residue: f64,
}

impl SymbolValue {
    fn certify(z: Complex64) -> Result<Self> {
        let residue = z.im.abs();
        if residue > IMAG_TOLERANCE * z.re.abs().max(1.0) {
            return Err(TflError::ImaginaryResidue {
                value: z.re,
                residue,
            });
        }
        Ok(Self {
            value: z.re,
            imag_residue: residue,
        })
    }
}

/// `h² ψ_h(θ/h)`, the symbol of the stencil on the unit lattice.
///
/// Written as `-4 Σ_k w_k sin²(kθ/2)` so that small `θ` does not suffer the
/// cancellation of `w_0 + 2 Σ w_k cos(kθ)`.
pub fn unit_laplacian_symbol(order: SchemeOrder, theta: f64) -> f64 {
    let w = order.stencil();
    let mut acc = 0.0;
    for (k, &wk) in w.iter().enumerate().skip(1) {
        let s = (0.5 * k as f64 * theta).sin();
        acc += wk * s * s;
    }
    -4.0 * acc
}

/// `ψ_h(ξ)`, the symbol of the discrete negative Laplacian of order `p`.
pub fn laplacian_symbol(xi: f64, params: &TflParams) -> f64 {
    unit_laplacian_symbol(params.order, xi * params.h) / (params.h * params.h)
}

/// Odd root map `φ_h(η) = sign(η) h ψ_h(η/h)^{1/2}` on the unit lattice.
pub fn phi_unit(order: SchemeOrder, eta: f64) -> f64 {
    let r = unit_laplacian_symbol(order, eta).max(0.0).sqrt();
    if eta < 0.0 {
        -r
    } else {
        r
    }
}

pub fn phi(eta: f64, params: &TflParams) -> f64 {
    phi_unit(params.order, eta)
}

/// `ξ_h = φ_h(ξh)/h` componentwise.
pub fn xi_h(xi: f64, params: &TflParams) -> f64 {
    phi_unit(params.order, xi * params.h) / params.h
}

/// `Re (c + i t)^α` on the principal branch, with `0^α = 0`.
#[inline]
pub fn re_power(c: f64, t: f64, alpha: f64) -> f64 {
    let r2 = c * c + t * t;
    if r2 == 0.0 {
        return 0.0;
    }
    r2.powf(0.5 * alpha) * (alpha * t.abs().atan2(c)).cos()
}

fn check_rule(rule: &SphereRule, dim: usize) -> Result<()> {
    if rule.dim() != dim {
        return Err(TflError::QuadratureMismatch {
            rule: rule.dim(),
            expected: dim,
        });
    }
    Ok(())
}

/// `(-1)^⌊α⌋ ∫ ((c + i ξ·θ)^α - c^α) dθ` in complex arithmetic.
fn sphere_integral_complex(xi: &[f64], c: f64, alpha: f64, sign: f64, rule: &SphereRule) -> Complex64 {
    let power = |t: f64| {
        let plus = Complex64::new(c, t).powf(alpha);
        let minus = Complex64::new(c, -t).powf(alpha);
        0.5 * (plus + minus)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    if rule.dim() == 1 {
        acc += 2.0 * power(xi[0]);
    } else {
        for (theta, &w) in rule.directions().zip(rule.weights()) {
            let t: f64 = theta.iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += w * power(t);
        }
    }
    let base = sphere_measure(rule.dim()) * if c == 0.0 { 0.0 } else { c.powf(alpha) };
    sign * (acc - base)
}

/// `S^α_λ(ξ)` with the dropped imaginary residue reported.
pub fn continuous_tfl_symbol_certified(
    xi: &[f64],
    params: &TflParams,
    rule: &SphereRule,
) -> Result<SymbolValue> {
    check_rule(rule, params.dim)?;
    check_len(xi, params.dim)?;
    let z = sphere_integral_complex(xi, params.lambda, params.alpha, params.branch_sign(), rule);
    SymbolValue::certify(z)
}

/// Continuous symbol `S^α_λ(ξ)`. In `d = 1` the rule is the exact pair `±1`,
/// so this is the closed form `(-1)^⌊α⌋((λ+iξ)^α + (λ-iξ)^α - 2λ^α)`.
pub fn continuous_tfl_symbol(xi: &[f64], params: &TflParams, rule: &SphereRule) -> Result<f64> {
    continuous_tfl_symbol_certified(xi, params, rule).map(|v| v.value)
}

/// Discrete symbol `S^α_{λ,h}(ξ) = S^α_λ(ξ_h)` on the band `[-π/h, π/h]^d`.
pub fn discrete_tfl_symbol(xi: &[f64], params: &TflParams, rule: &SphereRule) -> Result<f64> {
    check_len(xi, params.dim)?;
    let bound = PI / params.h;
    let mut mapped = Vec::with_capacity(xi.len());
    for &x in xi {
        if !(x.abs() <= bound * (1.0 + 1e-14)) {
            return Err(TflError::OutOfBand { value: x, bound });
        }
        mapped.push(xi_h(x.clamp(-bound, bound), params));
    }
    continuous_tfl_symbol(&mapped, params, rule)
}

/// `g^{(α,hλ)}(η)`, the generating function whose Fourier coefficients are
/// the scheme weights. Includes the `1/(2π)^d` normalization.
pub fn generating_function(eta: &[f64], params: &TflParams, rule: &SphereRule) -> Result<f64> {
    generating_function_certified(eta, params, rule).map(|v| v.value)
}

pub fn generating_function_certified(
    eta: &[f64],
    params: &TflParams,
    rule: &SphereRule,
) -> Result<SymbolValue> {
    check_rule(rule, params.dim)?;
    check_len(eta, params.dim)?;
    let mut phis = Vec::with_capacity(eta.len());
    for &e in eta {
        if !(e.abs() <= PI * (1.0 + 1e-14)) {
            return Err(TflError::OutOfBand { value: e, bound: PI });
        }
        phis.push(phi_unit(params.order, e));
    }
    let z = sphere_integral_complex(
        &phis,
        params.scaled_lambda(),
        params.alpha,
        params.branch_sign(),
        rule,
    );
    let v = SymbolValue::certify(z)?;
    let norm = (2.0 * PI).powi(params.dim as i32);
    Ok(SymbolValue {
        value: v.value / norm,
        imag_residue: v.imag_residue / norm,
    })
}

fn check_len(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(TflError::GridMismatch(format!(
            "frequency vector has {} components, expected {dim}",
            x.len()
        )));
    }
    Ok(())
}

/// The right-hand side `2(λ² + |ξ|²)^{α/2}` of the symbol bounds.
pub fn symbol_bound(xi: &[f64], lambda: f64, alpha: f64) -> f64 {
    let r2: f64 = lambda * lambda + xi.iter().map(|x| x * x).sum::<f64>();
    2.0 * r2.powf(0.5 * alpha)
}

/// Real-arithmetic evaluator of `(2π)^d g(η)` used for bulk sampling.
///
/// Holds the angular rule flattened for the inner loop; the value matches
/// [`generating_function`] times `(2π)^d` to round-off.
#[derive(Debug, Clone)]
pub struct GeneratingKernel {
    dim: usize,
    order: SchemeOrder,
    alpha: f64,
    c: f64,
    sign: f64,
    base: f64,
    directions: Vec<f64>,
    weights: Vec<f64>,
}

impl GeneratingKernel {
    pub fn new(params: &TflParams, rule: &SphereRule) -> Result<Self> {
        check_rule(rule, params.dim)?;
        let c = params.scaled_lambda();
        let (directions, weights) = if params.dim == 1 {
            (vec![1.0], vec![2.0])
        } else {
            (
                rule.directions().flatten().copied().collect(),
                rule.weights().to_vec(),
            )
        };
        let c_pow = if c == 0.0 { 0.0 } else { c.powf(params.alpha) };
        Ok(Self {
            dim: params.dim,
            order: params.order,
            alpha: params.alpha,
            c,
            sign: params.branch_sign(),
            base: sphere_measure(params.dim) * c_pow,
            directions,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> SchemeOrder {
        self.order
    }

    /// Unnormalized value at already-mapped frequencies `φ = φ_h(η)`.
    #[inline]
    pub fn eval_phi(&self, phi: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for (theta, &w) in self.directions.chunks_exact(d).zip(&self.weights) {
            let mut t = 0.0;
            for l in 0..d {
                t += theta[l] * phi[l];
            }
            acc += w * re_power(self.c, t, self.alpha);
        }
        self.sign * (acc - self.base)
    }

    /// Unnormalized value `(2π)^d g(η)`.
    pub fn eval(&self, eta: &[f64]) -> f64 {
        let mut phis = [0.0; 3];
        for (p, &e) in phis.iter_mut().zip(eta) {
            *p = phi_unit(self.order, e);
        }
        self.eval_phi(&phis[..self.dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_rule;

    fn params(alpha: f64, lambda: f64, dim: usize, p: u32, h: f64) -> TflParams {
        TflParams::new(alpha, lambda, dim, SchemeOrder::from_u32(p).unwrap(), h).unwrap()
    }

    #[test]
    fn laplacian_symbol_examples() {
        for p in [2, 4, 6, 8] {
            assert_eq!(laplacian_symbol(0.0, &params(0.5, 0.0, 1, p, 0.1)), 0.0);
        }
        let h = 1.0 / 32.0;
        let v = laplacian_symbol(PI / h, &params(0.5, 0.0, 1, 4, h)) * h * h;
        assert!((v - 16.0 / 3.0).abs() < 1e-13);
        let v = laplacian_symbol(1.0, &params(0.5, 0.0, 1, 4, 1e-2));
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn laplacian_symbol_matches_cosine_form() {
        for order in SchemeOrder::ALL {
            let w = order.stencil();
            for k in 0..50 {
                let th = -PI + 2.0 * PI * k as f64 / 49.0;
                let direct: f64 = w[0]
                    + 2.0
                        * w[1..]
                            .iter()
                            .enumerate()
                            .map(|(m, wk)| wk * ((m + 1) as f64 * th).cos())
                            .sum::<f64>();
                assert!((unit_laplacian_symbol(order, th) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn phi_examples() {
        let p6 = params(0.5, 0.0, 1, 6, 0.1);
        assert_eq!(phi(0.0, &p6), 0.0);
        assert_eq!(phi(-1.3, &p6), -phi(1.3, &p6));
        let p4 = params(0.5, 0.0, 1, 4, 0.1);
        assert!((phi(PI, &p4) - (16.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn continuous_symbol_examples() {
        let rule = sphere_rule(1, 20).unwrap();
        let p = params(0.5, 0.0, 1, 4, 0.1);
        assert_eq!(continuous_tfl_symbol(&[0.0], &p, &rule).unwrap(), 0.0);
        let v = continuous_tfl_symbol(&[1.0], &p, &rule).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        let p = params(1.3, 0.0, 1, 4, 0.1);
        let a = continuous_tfl_symbol(&[0.7], &p, &rule).unwrap();
        let b = continuous_tfl_symbol(&[1.4], &p, &rule).unwrap();
        assert!((b - 2f64.powf(1.3) * a).abs() < 1e-13);
    }

    #[test]
    fn rule_dimension_must_match() {
        let rule = sphere_rule(2, 8).unwrap();
        let p = params(0.5, 0.2, 1, 4, 0.1);
        assert!(matches!(
            continuous_tfl_symbol(&[1.0], &p, &rule),
            Err(TflError::QuadratureMismatch { rule: 2, expected: 1 })
        ));
    }

    #[test]
    fn discrete_symbol_rejects_out_of_band() {
        let rule = sphere_rule(1, 1).unwrap();
        let p = params(0.5, 0.2, 1, 4, 0.1);
        assert_eq!(discrete_tfl_symbol(&[0.0], &p, &rule).unwrap(), 0.0);
        assert!(discrete_tfl_symbol(&[PI / 0.1], &p, &rule).is_ok());
        assert!(matches!(
            discrete_tfl_symbol(&[PI / 0.1 + 1e-6], &p, &rule),
            Err(TflError::OutOfBand { .. })
        ));
    }

    #[test]
    fn discrete_symbol_converges_at_scheme_order() {
        let rule = sphere_rule(1, 1).unwrap();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let p = params(0.4, 0.5, 1, 4, h);
                let c = continuous_tfl_symbol(&[1.0], &p, &rule).unwrap();
                let d = discrete_tfl_symbol(&[1.0], &p, &rule).unwrap();
                (c - d).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 3.9, "{errs:?}");
        }
    }

    #[test]
    fn generating_function_closed_form_in_1d() {
        let rule = sphere_rule(1, 1).unwrap();
        let p = params(0.6, 0.0, 1, 4, 0.1);
        let g = generating_function(&[1.0], &p, &rule).unwrap();
        let phi1 = phi(1.0, &p).abs();
        let expect = phi1.powf(0.6) * (0.3 * PI).cos() / PI;
        assert!((g - expect).abs() < 1e-15);
        assert_eq!(generating_function(&[0.0], &p, &rule).unwrap(), 0.0);
    }

    #[test]
    fn generating_function_is_even() {
        let rule = sphere_rule(2, 20).unwrap();
        let p = params(1.2, 0.5, 2, 6, 1.0 / 32.0);
        let a = generating_function(&[0.9, -2.1], &p, &rule).unwrap();
        let b = generating_function(&[-0.9, 2.1], &p, &rule).unwrap();
        let c = generating_function(&[0.9, 2.1], &p, &rule).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!((a - c).abs() < 1e-13);
    }

    #[test]
    fn kernel_matches_certified_path() {
        for dim in 1..=3 {
            let rule = sphere_rule(dim, 12).unwrap();
            for alpha in [0.4, 1.8] {
                let p = params(alpha, 0.5, dim, 8, 1.0 / 16.0);
                let kernel = GeneratingKernel::new(&p, &rule).unwrap();
                let norm = (2.0 * PI).powi(dim as i32);
                for k in 0..20 {
                    let eta: Vec<f64> = (0..dim)
                        .map(|l| -PI + 2.0 * PI * ((k * (l + 3)) % 20) as f64 / 19.0)
                        .collect();
                    let cert = generating_function_certified(&eta, &p, &rule).unwrap();
                    let fast = kernel.eval(&eta) / norm;
                    assert!((cert.value - fast).abs() <= 1e-13 * cert.value.abs().max(1e-3));
                    assert!(cert.imag_residue <= 1e-12 * cert.value.abs().max(1.0));
                }
            }
        }
    }
}
