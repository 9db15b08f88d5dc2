//! Test functions, manufactured sources, injection and sinc interpolation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coefficients::Resolution;
use crate::error::{Result, TflError};
use crate::grid::{GridFunction, UniformGrid};
use crate::operators::{assemble_operator, LinearOperator};
use crate::params::TflParams;

/// Built-in solutions and sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `u(x) = Π_l (1 - x_l²)_+^s`, supported on `[-1, 1]^d`.
    BumpPower { s: f64 },
    /// `u ≡ 1`.
    ConstantOne,
}

impl TestFunction {
    pub fn bump(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(TflError::InvalidParameter {
                name: "s",
                value: s,
                reason: "regularity exponent must be positive",
            });
        }
        Ok(Self::BumpPower { s })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match *self {
            Self::BumpPower { s } => x
                .iter()
                .map(|&xl| {
                    let base = (1.0 - xl * xl).max(0.0);
                    if base == 0.0 {
                        0.0
                    } else {
                        base.powf(s)
                    }
                })
                .product(),
            Self::ConstantOne => 1.0,
        }
    }

    pub fn sample(&self, grid: &UniformGrid) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.evaluate(x))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BumpPower { s } => write!(f, "bump:s={s}"),
            Self::ConstantOne => f.write_str("one"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = TflError;

    /// Accepts `bump:s=<value>` and `one`.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "one" || t == "constant_one" {
            return Ok(Self::ConstantOne);
        }
        let bad = || TflError::Format(format!("unknown problem `{t}` (expected `bump:s=<value>` or `one`)"));
        let rest = t
            .strip_prefix("bump:")
            .or_else(|| t.strip_prefix("bump_power:"))
            .ok_or_else(bad)?;
        let value = rest.trim().strip_prefix("s=").ok_or_else(bad)?;
        let s: f64 = value.trim().parse().map_err(|_| bad())?;
        Self::bump(s)
    }
}

/// Injection of a fine-grid function onto the nodes of a nested coarse grid.
pub fn restrict(fine: &GridFunction, coarse: &UniformGrid) -> Result<GridFunction> {
    let r = coarse.refinement_ratio(fine.grid())?;
    if r == 1 {
        return Ok(GridFunction::from_raw(coarse, fine.values().to_vec()));
    }
    let mut values = Vec::with_capacity(coarse.len());
    let mut fidx = vec![0; coarse.dim()];
    coarse.for_each_node(|idx| {
        for (f, &i) in fidx.iter_mut().zip(idx) {
            *f = (i + 1) * r - 1;
        }
        values.push(fine.get(&fidx));
    });
    Ok(GridFunction::from_raw(coarse, values))
}

/// `f = A U` evaluated on a grid of step `fine_h` nested in `coarse`, then
/// injected onto the coarse interior nodes.
pub fn manufacture_source(
    tf: &TestFunction,
    params: &TflParams,
    coarse: &UniformGrid,
    fine_h: f64,
    resolution: &Resolution,
) -> Result<GridFunction> {
    if fine_h > coarse.h() * (1.0 + 1e-12) {
        return Err(TflError::NotNested {
            coarse_h: coarse.h(),
            fine_h,
        });
    }
    let fine = coarse.refined(fine_h)?;
    let fine_params = params.with_h(fine.h())?;
    let coeffs = resolution.tensor(&fine_params, fine.n_cells())?;
    let op = assemble_operator(&fine_params, &fine, &coeffs)?;
    let f = op.apply(&tf.sample(&fine))?;
    restrict(&f, coarse)
}

/// `sin(πt)/(πt)` with exact zeros at nonzero integers.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.fract() == 0.0 {
        return 0.0;
    }
    // reduce the argument so sin(π r) keeps full relative accuracy
    let r = t - 2.0 * (0.5 * t).round();
    (PI * r).sin() / (PI * t)
}

/// `I u(y) = Σ_j Π_l sinc((y_l - x_{j,l})/h) u_j` over interior nodes.
pub fn sinc_interpolate(u: &GridFunction, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let grid = u.grid();
    let d = grid.dim();
    let n = grid.n_interior();
    let h = grid.h();
    let mut out = Vec::with_capacity(points.len());
    let mut kernels = vec![vec![0.0; n]; d];
    for y in points {
        if !grid.contains(y) {
            return Err(TflError::OutOfDomain(y.clone()));
        }
        for l in 0..d {
            // position in units of h measured from the first interior node
            let mut s = (y[l] - grid.lower()[l]) / h - 1.0;
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            for (i, k) in kernels[l].iter_mut().enumerate() {
                *k = sinc(s - i as f64);
            }
        }
        let vals = u.values();
        let v = match d {
            1 => kernels[0].iter().zip(vals).map(|(k, v)| k * v).sum(),
            2 => (0..n)
                .map(|i| {
                    let row = &vals[i * n..(i + 1) * n];
                    kernels[0][i] * kernels[1].iter().zip(row).map(|(k, v)| k * v).sum::<f64>()
                })
                .sum(),
            _ => {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let row = &vals[(i * n + j) * n..(i * n + j + 1) * n];
                        let inner: f64 = kernels[2].iter().zip(row).map(|(k, v)| k * v).sum();
                        acc += kernels[0][i] * kernels[1][j] * inner;
                    }
                }
                acc
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// `P` equispaced points strictly inside `(a, b)`: `a + j (b - a)/(P + 1)`.
pub fn nonmesh_points(a: f64, b: f64, count: usize) -> Vec<f64> {
    let step = (b - a) / (count as f64 + 1.0);
    (1..=count).map(|j| a + j as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_examples() {
        let b2 = TestFunction::bump(2.0).unwrap();
        assert_eq!(b2.evaluate(&[0.0, 0.0]), 1.0);
        assert_eq!(TestFunction::bump(3.7).unwrap().evaluate(&[1.0, 0.3]), 0.0);
        let b1 = TestFunction::bump(1.0).unwrap();
        assert!((b1.evaluate(&[0.5, 0.5]) - 0.5625).abs() < 1e-15);
        assert_eq!(b1.evaluate(&[1.5]), 0.0);
    }

    #[test]
    fn parse_round_trip() {
        for text in ["bump:s=6", "bump:s=3.6", "one"] {
            let tf: TestFunction = text.parse().unwrap();
            assert_eq!(tf.to_string(), text);
        }
        assert!("bump:q=2".parse::<TestFunction>().is_err());
        assert!("bump:s=-1".parse::<TestFunction>().is_err());
        assert!("wave".parse::<TestFunction>().is_err());
    }

    #[test]
    fn injection_matches_direct_sampling() {
        let tf = TestFunction::bump(2.5).unwrap();
        let coarse = UniformGrid::centered(2, 1.0, 0.125).unwrap();
        let fine = coarse.refined(0.125 / 4.0).unwrap();
        let r = restrict(&tf.sample(&fine), &coarse).unwrap();
        assert_eq!(r, tf.sample(&coarse));
    }

    #[test]
    fn sinc_is_exact_at_nodes() {
        let grid = UniformGrid::centered(1, 1.0, 1.0 / 16.0).unwrap();
        let u = GridFunction::from_fn(&grid, |x| (3.0 * x[0]).cos());
        let nodes: Vec<Vec<f64>> = (0..grid.n_interior()).map(|i| grid.node(&[i])).collect();
        let v = sinc_interpolate(&u, &nodes).unwrap();
        assert_eq!(v, u.values());
        assert!(matches!(
            sinc_interpolate(&u, &[vec![1.5]]),
            Err(TflError::OutOfDomain(_))
        ));
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert_eq!(sinc(3.0), 0.0);
        assert_eq!(sinc(-7.0), 0.0);
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
        assert!((sinc(100.5) - (PI * 100.5).sin() / (PI * 100.5)).abs() < 1e-13);
    }

    #[test]
    fn nonmesh_points_follow_the_layout() {
        let p = nonmesh_points(-1.0, 1.0, 3000);
        assert_eq!(p.len(), 3000);
        assert!((p[0] + 1.0 - 2.0 / 3001.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x > -1.0 && x < 1.0));
    }
}
