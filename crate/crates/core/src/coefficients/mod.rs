//! Toeplitz generators `a_j` extracted from the generating function by FFT.
//!
//! The generating function is sampled on the lattice `r h_F`,
//! `h_F = 2π/N_f`, and transformed:
//!
//! ```text
//! ã_j = h_F^d Σ_r g(r h_F) e^{-i j·r h_F},   r ∈ [0, N_f)^d,
//! ```
//!
//! the trapezoid rule for `a_j = ∫_{[-π,π]^d} g(η) e^{-i j·η} dη`. Since `g`
//! is even in every component, only the half lattice `r ∈ [0, N_f/2]^d` is
//! evaluated and each axis is transformed separately, one `(d-1)`-slice at a
//! time, so memory stays proportional to the half lattice of one slice.

mod cache;
mod csv_io;

pub use cache::{load_or_compute, read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use csv_io::{read_coefficients_csv, write_coefficients_csv};

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TflError};
use crate::fft::NdFft;
use crate::params::TflParams;
use crate::quadrature::{sphere_rule, DEFAULT_SPHERE_ORDER};
use crate::symbols::{phi_unit, GeneratingKernel, IMAG_TOLERANCE};

/// Real Toeplitz generators `ã_j` for `j ∈ [0, N₁)^d`, row-major.
///
/// Stored without the `h^{-α}` factor; see [`CoefficientTensor::scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTensor {
    params: TflParams,
    n_per_dim: usize,
    fft_resolution: usize,
    quadrature_order: usize,
    data: Vec<f64>,
}

impl CoefficientTensor {
    pub fn from_parts(
        params: TflParams,
        n_per_dim: usize,
        fft_resolution: usize,
        quadrature_order: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        params.validate()?;
        let expected = n_per_dim.checked_pow(params.dim as u32).unwrap_or(usize::MAX);
        if n_per_dim == 0 || data.len() != expected {
            return Err(TflError::Format(format!(
                "coefficient data has {} entries, expected {n_per_dim}^{}",
                data.len(),
                params.dim
            )));
        }
        Ok(Self {
            params,
            n_per_dim,
            fft_resolution,
            quadrature_order,
            data,
        })
    }

    pub fn params(&self) -> &TflParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    /// `N₁`, the number of stored generators per dimension.
    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    /// `N_f`, the sampling resolution of the generating function.
    pub fn fft_resolution(&self) -> usize {
        self.fft_resolution
    }

    /// `N_G`, the angular Gauss order used for the sphere integral.
    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `h^{-α}` factor applied when the operator acts on grid functions.
    pub fn scale(&self) -> f64 {
        self.params.h.powf(-self.params.alpha)
    }

    /// `ã_j` for a non-negative multi-index.
    pub fn get(&self, j: &[usize]) -> f64 {
        let mut idx = 0;
        for &jl in j {
            assert!(jl < self.n_per_dim, "coefficient index out of range");
            idx = idx * self.n_per_dim + jl;
        }
        self.data[idx]
    }

    /// `ã_j` for a signed multi-index, using `a_{-j} = a_j` componentwise.
    pub fn get_signed(&self, j: &[isize]) -> Option<f64> {
        let mut idx = 0;
        for &jl in j {
            let a = jl.unsigned_abs();
            if a >= self.n_per_dim {
                return None;
            }
            idx = idx * self.n_per_dim + a;
        }
        Some(self.data[idx])
    }

    /// The leading `m^d` block, identical to computing with `N₁ = m`.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_per_dim {
            return Err(TflError::Resolution {
                nf: self.fft_resolution,
                n1: m,
                reason: "truncation must keep between 1 and N1 entries per dimension",
            });
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(m.pow(d as u32));
        let n = self.n_per_dim;
        match d {
            1 => data.extend_from_slice(&self.data[..m]),
            2 => {
                for i in 0..m {
                    data.extend_from_slice(&self.data[i * n..i * n + m]);
                }
            }
            _ => {
                for i in 0..m {
                    for k in 0..m {
                        let start = (i * n + k) * n;
                        data.extend_from_slice(&self.data[start..start + m]);
                    }
                }
            }
        }
        Ok(Self {
            params: self.params,
            n_per_dim: m,
            fft_resolution: self.fft_resolution,
            quadrature_order: self.quadrature_order,
            data,
        })
    }
}

fn check_resolution(n1: usize, nf: usize) -> Result<()> {
    if n1 == 0 {
        return Err(TflError::Resolution {
            nf,
            n1,
            reason: "need at least one coefficient per dimension",
        });
    }
    if nf < 2 || !nf.is_power_of_two() {
        return Err(TflError::Resolution {
            nf,
            n1,
            reason: "N_f must be a power of two",
        });
    }
    if nf < n1 {
        return Err(TflError::Resolution {
            nf,
            n1,
            reason: "N_f must be at least N1",
        });
    }
    Ok(())
}

/// Transforms each lane of the half-lattice array `src` along `axis`.
///
/// Lanes have `nf/2 + 1` samples `x_0..x_{nf/2}` of an even sequence; the
/// output keeps `m` entries of `Σ_r x_{|r|} e^{-2πi jr/nf}` (real).
/// Returns the new array and the largest relative imaginary residue seen.
fn even_dft_axis(
    src: &[f64],
    shape: &[usize],
    axis: usize,
    plan: &dyn Fft<f64>,
    m: usize,
) -> (Vec<f64>, f64) {
    let nf = plan.len();
    let half = nf / 2;
    debug_assert_eq!(shape[axis], half + 1);
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; outer * m * inner];
    let mut residue: f64 = 0.0;
    let mut buf = vec![Complex64::default(); nf];
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    for o in 0..outer {
        for c in 0..inner {
            let base = o * (half + 1) * inner + c;
            let mut l1 = 0.0;
            for r in 0..nf {
                let k = if r <= half { r } else { nf - r };
                let v = src[base + k * inner];
                l1 += v.abs();
                buf[r] = Complex64::new(v, 0.0);
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            let obase = o * m * inner + c;
            for j in 0..m {
                let z = buf[j];
                if l1 > 0.0 {
                    residue = residue.max(z.im.abs() / l1);
                }
                out[obase + j * inner] = z.re;
            }
        }
    }
    (out, residue)
}

fn check_residue(residue: f64) -> Result<()> {
    if residue > IMAG_TOLERANCE {
        return Err(TflError::ImaginaryResidue {
            value: 0.0,
            residue,
        });
    }
    Ok(())
}

/// Computes `ã_j`, `j ∈ [0, n1)^d`, from `N_f^d` samples of the generating
/// function with an `N_G`-point angular rule.
pub fn compute_coefficients(
    params: &TflParams,
    n1: usize,
    nf: usize,
    ng: usize,
) -> Result<CoefficientTensor> {
    params.validate()?;
    check_resolution(n1, nf)?;
    let d = params.dim;
    let kernel = GeneratingKernel::new(params, &sphere_rule(d, ng)?)?;
    let half = nf / 2;
    let hf = 2.0 * PI / nf as f64;
    let phis: Vec<f64> = (0..=half)
        .map(|r| phi_unit(params.order, r as f64 * hf))
        .collect();
    let m = n1;
    let plan = FftPlanner::new().plan_fft_forward(nf);

    // Each row r₁ holds the transformed (d-1)-slice of length m^{d-1}.
    let rows: Vec<(Vec<f64>, f64)> = (0..=half)
        .into_par_iter()
        .map(|r1| {
            let p1 = phis[r1];
            match d {
                1 => (vec![kernel.eval_phi(&[p1])], 0.0),
                2 => {
                    let slice: Vec<f64> = phis.iter().map(|&p2| kernel.eval_phi(&[p1, p2])).collect();
                    even_dft_axis(&slice, &[half + 1], 0, plan.as_ref(), m)
                }
                _ => {
                    let mut slice = Vec::with_capacity((half + 1) * (half + 1));
                    for &p2 in &phis {
                        for &p3 in &phis {
                            slice.push(kernel.eval_phi(&[p1, p2, p3]));
                        }
                    }
                    let (a, r_a) = even_dft_axis(&slice, &[half + 1, half + 1], 1, plan.as_ref(), m);
                    let (b, r_b) = even_dft_axis(&a, &[half + 1, m], 0, plan.as_ref(), m);
                    (b, r_a.max(r_b))
                }
            }
        })
        .collect();

    let lane: usize = m.pow(d as u32 - 1);
    let mut slab = Vec::with_capacity((half + 1) * lane);
    let mut residue: f64 = 0.0;
    for (row, r) in rows {
        slab.extend_from_slice(&row);
        residue = residue.max(r);
    }
    let (mut data, r) = even_dft_axis(&slab, &[half + 1, lane], 0, plan.as_ref(), m);
    check_residue(residue.max(r))?;
    let norm = (nf as f64).powi(d as i32);
    for v in &mut data {
        *v /= norm;
    }
    CoefficientTensor::from_parts(*params, n1, nf, ng, data)
}

/// How the direct variant samples the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `g(r h_F)` with components above `π` shifted down by `2π`.
    Plain,
    /// `g(-r h_F)`; identical to `Plain` for an even generating function.
    Reflected,
}

/// Reference implementation: samples all `N_f^d` lattice points and runs one
/// `d`-dimensional complex FFT. Memory grows like `N_f^d`, so it is meant for
/// checks at small resolution.
pub fn compute_coefficients_direct(
    params: &TflParams,
    n1: usize,
    nf: usize,
    ng: usize,
    sampling: Sampling,
) -> Result<CoefficientTensor> {
    params.validate()?;
    check_resolution(n1, nf)?;
    let d = params.dim;
    let kernel = GeneratingKernel::new(params, &sphere_rule(d, ng)?)?;
    let hf = 2.0 * PI / nf as f64;
    let flip = match sampling {
        Sampling::Plain => 1.0,
        Sampling::Reflected => -1.0,
    };
    let eta_of = |r: usize| {
        let e = r as f64 * hf;
        flip * if e > PI { e - 2.0 * PI } else { e }
    };
    let total = nf.pow(d as u32);
    let mut buf: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut eta = [0.0; 3];
            let mut rest = idx;
            for l in (0..d).rev() {
                eta[l] = eta_of(rest % nf);
                rest /= nf;
            }
            Complex64::new(kernel.eval(&eta[..d]), 0.0)
        })
        .collect();
    let l1: f64 = buf.iter().map(|z| z.re.abs()).sum();
    NdFft::new(&vec![nf; d]).forward(&mut buf);
    let norm = total as f64;
    let mut data = Vec::with_capacity(n1.pow(d as u32));
    let mut residue: f64 = 0.0;
    for_each_index(n1, d, |j| {
        let mut idx = 0;
        for &jl in j {
            idx = idx * nf + jl;
        }
        let z = buf[idx];
        if l1 > 0.0 {
            residue = residue.max(z.im.abs() / l1);
        }
        data.push(z.re / norm);
    });
    check_residue(residue)?;
    CoefficientTensor::from_parts(*params, n1, nf, ng, data)
}

/// Visits `[0, n)^d` in row-major order.
pub(crate) fn for_each_index<F: FnMut(&[usize])>(n: usize, d: usize, mut f: F) {
    let mut j = vec![0usize; d];
    let total = n.pow(d as u32);
    for _ in 0..total {
        f(&j);
        for l in (0..d).rev() {
            j[l] += 1;
            if j[l] < n {
                break;
            }
            j[l] = 0;
        }
    }
}

/// `e(N_f)` from the tensors at resolutions `N_f` and `2N_f`.
///
/// Sums `|ã_j(N_f) - ã_j(2N_f)|²` over the signed range
/// `j ∈ [-N_f/2, N_f/2)^d`, normalized by `N_f^d`. Evenness folds the signed
/// range onto `[0, N_f/2]^d` with per-axis multiplicity 1 at `0` and `N_f/2`
/// and 2 in between. Both tensors need at least `N_f/2 + 1` entries per axis.
pub fn self_error_between(coarse: &CoefficientTensor, fine: &CoefficientTensor, nf: usize) -> Result<f64> {
    let d = coarse.dim();
    let half = nf / 2;
    if fine.dim() != d {
        return Err(TflError::GridMismatch("tensors of different dimension".into()));
    }
    if coarse.n_per_dim() < half + 1 || fine.n_per_dim() < half + 1 {
        return Err(TflError::Resolution {
            nf,
            n1: coarse.n_per_dim().min(fine.n_per_dim()),
            reason: "self-error needs N_f/2 + 1 coefficients per dimension",
        });
    }
    let weight = |j: usize| if j == 0 || j == half { 1.0 } else { 2.0 };
    let mut acc = 0.0;
    for_each_index(half + 1, d, |j| {
        let w: f64 = j.iter().map(|&jl| weight(jl)).product();
        let diff = coarse.get(j) - fine.get(j);
        acc += w * diff * diff;
    });
    Ok((acc / (nf as f64).powi(d as i32)).sqrt())
}

/// `e(N_f)` for one resolution; computes the tensors at `N_f` and `2N_f`.
pub fn coefficient_self_error(params: &TflParams, nf: usize, ng: usize) -> Result<f64> {
    let m = nf / 2 + 1;
    let coarse = compute_coefficients(params, m, nf, ng)?;
    let fine = compute_coefficients(params, m, 2 * nf, ng)?;
    self_error_between(&coarse, &fine, nf)
}

/// One row of an `e(N_f)` ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfErrorRow {
    pub nf: usize,
    pub error: f64,
    /// `log₂(e(N_f/2)/e(N_f))`, present from the second row on.
    pub rate: Option<f64>,
}

/// `e(N_f)` for consecutive doublings starting at `nf_start`. Each tensor is
/// computed once and shared between neighbouring rows.
pub fn coefficient_self_error_ladder(
    params: &TflParams,
    nf_start: usize,
    rows: usize,
    ng: usize,
) -> Result<Vec<SelfErrorRow>> {
    let mut out: Vec<SelfErrorRow> = Vec::with_capacity(rows);
    if rows == 0 {
        return Ok(out);
    }
    let mut nf = nf_start;
    let mut current = compute_coefficients(params, nf / 2 + 1, nf, ng)?;
    for _ in 0..rows {
        let next = compute_coefficients(params, nf + 1, 2 * nf, ng)?;
        let error = self_error_between(&current, &next, nf)?;
        let rate = out.last().map(|prev| (prev.error / error).log2());
        out.push(SelfErrorRow { nf, error, rate });
        current = next;
        nf *= 2;
    }
    Ok(out)
}

/// Default `N_f` for a grid with `n1` cells per side at desk scale:
/// `16 N₁` rounded up to a power of two, with a floor and a cap per dimension.
///
/// The aliasing error of the generators behaves like `(N₁/N_f)^{d+α}`, so a
/// fixed ratio keeps it roughly constant along an `h` ladder, where it
/// largely cancels in self-differences.
pub fn auto_fft_resolution(dim: usize, n1: usize) -> usize {
    let (floor, cap) = match dim {
        1 => (4096, 1 << 20),
        2 => (2048, 1 << 13),
        _ => (64, 1 << 8),
    };
    (16 * n1).max(floor).next_power_of_two().min(cap).max(n1.next_power_of_two())
}

/// How generator tensors are obtained for a given grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Fixed `N_f`; when absent [`auto_fft_resolution`] picks one per grid.
    pub fft_resolution: Option<usize>,
    /// Angular Gauss order `N_G`.
    pub quadrature_order: usize,
    /// Directory for the binary coefficient cache, if any.
    pub cache_dir: Option<PathBuf>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            fft_resolution: None,
            quadrature_order: DEFAULT_SPHERE_ORDER,
            cache_dir: None,
        }
    }
}

impl Resolution {
    pub fn fixed(nf: usize, ng: usize) -> Self {
        Self {
            fft_resolution: Some(nf),
            quadrature_order: ng,
            cache_dir: None,
        }
    }

    pub fn fft_resolution_for(&self, dim: usize, n1: usize) -> usize {
        self.fft_resolution
            .unwrap_or_else(|| auto_fft_resolution(dim, n1))
    }

    /// Generators for a grid with `n1` cells per side.
    pub fn tensor(&self, params: &TflParams, n1: usize) -> Result<CoefficientTensor> {
        let nf = self.fft_resolution_for(params.dim, n1);
        match &self.cache_dir {
            Some(dir) => load_or_compute(dir, params, n1, nf, self.quadrature_order),
            None => compute_coefficients(params, n1, nf, self.quadrature_order),
        }
    }
}
