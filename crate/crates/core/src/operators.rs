//! Matrix-free operators on grid functions.
//!
//! The discrete TFL `h^{-α} Σ_j a_j u(x + jh)` restricted to the interior of
//! a box is a symmetric multilevel Toeplitz matrix. It is applied by
//! embedding the generators in a circulant on the `(2N₁)^d` lattice: the
//! input is zero-padded, transformed, multiplied by the (real) circulant
//! spectrum, transformed back and cropped. Zero padding is exactly the
//! volume constraint `u = 0` outside the box.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coefficients::{for_each_index, CoefficientTensor};
use crate::error::{Result, TflError};
use crate::fft::NdFft;
use crate::grid::{GridFunction, UniformGrid};
use crate::params::{SchemeOrder, TflParams};

/// A linear map between grid functions on one grid.
pub trait LinearOperator: Sync {
    fn grid(&self) -> &UniformGrid;

    /// `out = A u` on raw interior values.
    fn apply_into(&self, u: &[f64], out: &mut [f64]);

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if !u.grid().same_as(self.grid()) {
            return Err(TflError::GridMismatch(
                "grid function does not live on the operator's grid".into(),
            ));
        }
        let mut out = vec![0.0; u.values().len()];
        self.apply_into(u.values(), &mut out);
        Ok(GridFunction::from_raw(self.grid(), out))
    }
}

/// The discrete TFL on one grid, with its circulant spectrum precomputed.
#[derive(Debug, Clone)]
pub struct DiscreteTfl {
    grid: UniformGrid,
    fft: NdFft,
    /// Real spectrum of the embedded circulant, times `h^{-α}/M^d`.
    spectrum: Vec<f64>,
}

fn check_compatible(grid: &UniformGrid, coeffs: &CoefficientTensor) -> Result<()> {
    let p = coeffs.params();
    if p.dim != grid.dim() {
        return Err(TflError::GridMismatch(format!(
            "coefficients are {}-dimensional, grid is {}-dimensional",
            p.dim,
            grid.dim()
        )));
    }
    if coeffs.n_per_dim() != grid.n_cells() {
        return Err(TflError::GridMismatch(format!(
            "coefficients hold {} generators per side, grid has N1 = {}",
            coeffs.n_per_dim(),
            grid.n_cells()
        )));
    }
    if ((p.h - grid.h()) / grid.h()).abs() > 1e-12 {
        return Err(TflError::GridMismatch(format!(
            "coefficients were built for h = {}, grid has h = {}",
            p.h,
            grid.h()
        )));
    }
    Ok(())
}

impl DiscreteTfl {
    pub fn new(grid: &UniformGrid, coeffs: &CoefficientTensor) -> Result<Self> {
        check_compatible(grid, coeffs)?;
        let d = grid.dim();
        let n1 = grid.n_cells();
        let m = 2 * n1;
        let shape = vec![m; d];
        let fft = NdFft::new(&shape);
        let total = m.pow(d as u32);
        // c_k = a_{|k|} with k taken modulo M in (-N₁, N₁); c_{N₁} = 0.
        let fold = |k: usize| -> Option<usize> {
            if k < n1 {
                Some(k)
            } else if k > n1 {
                Some(m - k)
            } else {
                None
            }
        };
        let mut buf = vec![Complex64::default(); total];
        for_each_index(m, d, |k| {
            let mut idx = 0;
            let mut flat = 0;
            let mut inside = true;
            for &kl in k {
                match fold(kl) {
                    Some(f) => idx = idx * n1 + f,
                    None => inside = false,
                }
                flat = flat * m + kl;
            }
            if inside {
                buf[flat] = Complex64::new(coeffs.data()[idx], 0.0);
            }
        });
        fft.forward(&mut buf);
        let scale = coeffs.scale() / total as f64;
        let spectrum = buf.iter().map(|z| z.re * scale).collect();
        Ok(Self {
            grid: grid.clone(),
            fft,
            spectrum,
        })
    }

    /// Eigenvalues of the embedded circulant (including the `h^{-α}` factor).
    pub fn circulant_spectrum(&self) -> Vec<f64> {
        let total = self.spectrum.len() as f64;
        self.spectrum.iter().map(|s| s * total).collect()
    }
}

impl LinearOperator for DiscreteTfl {
    fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let n = self.grid.n_interior();
        let m = 2 * self.grid.n_cells();
        let mut buf = vec![Complex64::default(); self.spectrum.len()];
        scatter(u, &mut buf, n, m, d);
        self.fft.forward_pruned(&mut buf, n);
        buf.par_iter_mut()
            .zip(self.spectrum.par_iter())
            .for_each(|(z, s)| *z *= *s);
        self.fft.inverse_pruned(&mut buf, n);
        gather(&buf, out, n, m, d);
    }
}

/// Copies the `n^d` interior block into the corner of the `m^d` lattice.
fn scatter(u: &[f64], buf: &mut [Complex64], n: usize, m: usize, d: usize) {
    let rows = n.pow(d as u32 - 1);
    for r in 0..rows {
        let dst = padded_row_offset(r, n, m, d);
        for (z, &v) in buf[dst..dst + n].iter_mut().zip(&u[r * n..(r + 1) * n]) {
            *z = Complex64::new(v, 0.0);
        }
    }
}

fn gather(buf: &[Complex64], out: &mut [f64], n: usize, m: usize, d: usize) {
    let rows = n.pow(d as u32 - 1);
    for r in 0..rows {
        let src = padded_row_offset(r, n, m, d);
        for (o, z) in out[r * n..(r + 1) * n].iter_mut().zip(&buf[src..src + n]) {
            *o = z.re;
        }
    }
}

/// Start of interior row `r` (over the leading `d-1` axes) inside the padded
/// lattice.
fn padded_row_offset(mut r: usize, n: usize, m: usize, d: usize) -> usize {
    let mut off = 0;
    let mut stride = m;
    for _ in 0..d - 1 {
        off += (r % n) * stride;
        r /= n;
        stride *= m;
    }
    off
}

/// `h^{-α} Σ_j a_j u(x + jh)` on the interior of `u`'s grid.
pub fn apply_discrete_tfl(u: &GridFunction, coeffs: &CoefficientTensor) -> Result<GridFunction> {
    DiscreteTfl::new(u.grid(), coeffs)?.apply(u)
}

/// `-Δ_h` of order `p` with zero extension outside the box.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian {
    grid: UniformGrid,
    order: SchemeOrder,
}

impl DiscreteLaplacian {
    pub fn new(grid: &UniformGrid, order: SchemeOrder) -> Result<Self> {
        if order.half_width() > grid.n_interior() {
            return Err(TflError::GridTooSmall {
                half_width: order.half_width(),
                n_cells: grid.n_cells(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            order,
        })
    }

    pub fn order(&self) -> SchemeOrder {
        self.order
    }
}

impl LinearOperator for DiscreteLaplacian {
    fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let n = self.grid.n_interior();
        let w = self.order.stencil();
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        let c0 = d as f64 * w[0] * ih2;
        for (o, &v) in out.iter_mut().zip(u) {
            *o = c0 * v;
        }
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for c in 0..stride {
                    let base = o * n * stride + c;
                    for i in 0..n {
                        let mut acc = 0.0;
                        for (k, &wk) in w.iter().enumerate().skip(1) {
                            let mut pair = 0.0;
                            if i >= k {
                                pair += u[base + (i - k) * stride];
                            }
                            if i + k < n {
                                pair += u[base + (i + k) * stride];
                            }
                            acc += wk * pair;
                        }
                        out[base + i * stride] += acc * ih2;
                    }
                }
            }
        }
    }
}

/// `-Δ_h u` of order `p` with zero extension.
pub fn apply_laplacian(u: &GridFunction, order: SchemeOrder) -> Result<GridFunction> {
    DiscreteLaplacian::new(u.grid(), order)?.apply(u)
}

/// `A = A₀ + σ A₁ + ν I` with `A₀` the discrete TFL and `A₁ = -Δ_h`.
#[derive(Debug, Clone)]
pub struct CompositeOperator {
    params: TflParams,
    coeffs: CoefficientTensor,
    tfl: DiscreteTfl,
    laplacian: Option<DiscreteLaplacian>,
    laplacian_order: SchemeOrder,
}

impl CompositeOperator {
    /// Swaps the order of the local `-Δ_h` term, which otherwise matches the
    /// order of the fractional part. Low-regularity runs pair any TFL scheme
    /// with the 3-point Laplacian.
    pub fn with_laplacian_order(mut self, order: SchemeOrder) -> Result<Self> {
        if self.laplacian.is_some() {
            self.laplacian = Some(DiscreteLaplacian::new(self.tfl.grid(), order)?);
        }
        self.laplacian_order = order;
        Ok(self)
    }

    pub fn laplacian_order(&self) -> SchemeOrder {
        self.laplacian_order
    }

    pub fn params(&self) -> &TflParams {
        &self.params
    }

    pub fn coefficients(&self) -> &CoefficientTensor {
        &self.coeffs
    }

    pub fn tfl(&self) -> &DiscreteTfl {
        &self.tfl
    }

    /// Generator `t_j` of the full Toeplitz operator for `|j_l| < N₁`:
    /// `h^{-α} a_j` plus the stencil and reaction contributions.
    pub fn generator(&self, j: &[usize]) -> f64 {
        let p = &self.params;
        let mut t = self.coeffs.scale() * self.coeffs.get(j);
        if p.sigma != 0.0 {
            let w = self.laplacian_order.stencil();
            let ih2 = 1.0 / (p.h * p.h);
            let nonzero: Vec<usize> = j.iter().copied().filter(|&v| v != 0).collect();
            if nonzero.is_empty() {
                t += p.sigma * p.dim as f64 * w[0] * ih2;
            } else if nonzero.len() == 1 && nonzero[0] < w.len() {
                t += p.sigma * w[nonzero[0]] * ih2;
            }
        }
        if j.iter().all(|&v| v == 0) {
            t += p.nu;
        }
        t
    }
}

/// Builds the matrix-free composite operator, precomputing spectral data.
pub fn assemble_operator(
    params: &TflParams,
    grid: &UniformGrid,
    coeffs: &CoefficientTensor,
) -> Result<CompositeOperator> {
    params.validate()?;
    let cp = coeffs.params();
    if cp.alpha != params.alpha
        || cp.lambda != params.lambda
        || cp.order != params.order
        || cp.dim != params.dim
        || ((cp.h - params.h) / params.h).abs() > 1e-12
    {
        return Err(TflError::GridMismatch(
            "coefficient tensor was built for different parameters".into(),
        ));
    }
    let tfl = DiscreteTfl::new(grid, coeffs)?;
    let laplacian = if params.sigma != 0.0 {
        Some(DiscreteLaplacian::new(grid, params.order)?)
    } else {
        None
    };
    Ok(CompositeOperator {
        params: *params,
        coeffs: coeffs.clone(),
        tfl,
        laplacian,
        laplacian_order: params.order,
    })
}

impl LinearOperator for CompositeOperator {
    fn grid(&self) -> &UniformGrid {
        self.tfl.grid()
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.tfl.apply_into(u, out);
        if let Some(lap) = &self.laplacian {
            let mut tmp = vec![0.0; u.len()];
            lap.apply_into(u, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += self.params.sigma * t;
            }
        }
        if self.params.nu != 0.0 {
            for (o, v) in out.iter_mut().zip(u) {
                *o += self.params.nu * v;
            }
        }
    }
}

/// Dense matrix of a linear operator, row-major, by applying it to unit
/// vectors. Only for toy sizes.
pub fn densify<A: LinearOperator + ?Sized>(op: &A) -> Vec<f64> {
    let n = op.grid().len();
    let mut dense = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        op.apply_into(&e, &mut col);
        e[k] = 0.0;
        for i in 0..n {
            dense[i * n + k] = col[i];
        }
    }
    dense
}
