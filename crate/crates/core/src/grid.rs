//! Uniform box grids and grid functions on their interior nodes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::coefficients::for_each_index;
use crate::error::{Result, TflError};

/// `Ω = Π_l (lower_l, lower_l + L)` with `N₁` cells of width `h` per side.
///
/// Interior nodes are `x_i = lower + (i + 1) h`, `i ∈ [0, N₁ - 1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    dim: usize,
    lower: Vec<f64>,
    length: f64,
    n_cells: usize,
    h: f64,
}

impl UniformGrid {
    pub fn new(lower: Vec<f64>, length: f64, n_cells: usize) -> Result<Self> {
        let dim = lower.len();
        if !(1..=3).contains(&dim) {
            return Err(TflError::UnsupportedDimension(dim));
        }
        if !(length.is_finite() && length > 0.0) || lower.iter().any(|v| !v.is_finite()) {
            return Err(TflError::InvalidParameter {
                name: "length",
                value: length,
                reason: "domain must be a finite box of positive size",
            });
        }
        if n_cells < 2 {
            return Err(TflError::InvalidParameter {
                name: "n_cells",
                value: n_cells as f64,
                reason: "need at least two cells per side",
            });
        }
        Ok(Self {
            dim,
            lower,
            length,
            n_cells,
            h: length / n_cells as f64,
        })
    }

    /// Grid of step `h`; `L/h` must be an integer to within `1e-12` relative.
    pub fn with_step(lower: Vec<f64>, length: f64, h: f64) -> Result<Self> {
        let n = (length / h).round();
        if !(h > 0.0) || !n.is_finite() || ((n * h - length) / length).abs() > 1e-12 {
            return Err(TflError::InvalidParameter {
                name: "h",
                value: h,
                reason: "step must divide the domain length",
            });
        }
        Self::new(lower, length, n as usize)
    }

    /// The cube `(-a, a)^d` with step `h`.
    pub fn centered(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        Self::with_step(vec![-half_width; dim], 2.0 * half_width, h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `N₁`.
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior nodes per side, `N₁ - 1`.
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    pub fn len(&self) -> usize {
        self.n_interior().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i + 1) as f64 * self.h
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(l, &i)| self.coordinate(l, i))
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.n_interior();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Same box and spacing up to round-off.
    pub fn same_as(&self, other: &Self) -> bool {
        let tol = 1e-12 * self.length.max(1.0);
        self.dim == other.dim
            && self.n_cells == other.n_cells
            && (self.length - other.length).abs() <= tol
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Ratio `r = h / fine.h` when `fine` refines this grid on the same box.
    pub fn refinement_ratio(&self, fine: &Self) -> Result<usize> {
        let not_nested = || TflError::NotNested {
            coarse_h: self.h,
            fine_h: fine.h,
        };
        let tol = 1e-12 * self.length.max(1.0);
        if self.dim != fine.dim
            || (self.length - fine.length).abs() > tol
            || self.lower.iter().zip(&fine.lower).any(|(a, b)| (a - b).abs() > tol)
        {
            return Err(not_nested());
        }
        if fine.n_cells % self.n_cells != 0 {
            return Err(not_nested());
        }
        Ok(fine.n_cells / self.n_cells)
    }

    /// A grid on the same box with step `fine_h`, which must divide `h`.
    pub fn refined(&self, fine_h: f64) -> Result<Self> {
        let ratio = self.h / fine_h;
        let r = ratio.round();
        if !(fine_h > 0.0) || r < 1.0 || (ratio - r).abs() > 1e-9 * r {
            return Err(TflError::NotNested {
                coarse_h: self.h,
                fine_h,
            });
        }
        Self::new(self.lower.clone(), self.length, self.n_cells * r as usize)
    }

    /// Interior index lattice in row-major order.
    pub fn for_each_node<F: FnMut(&[usize])>(&self, f: F) {
        for_each_index(self.n_interior(), self.dim, f)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.length.max(1.0);
        x.len() == self.dim
            && x.iter()
                .zip(&self.lower)
                .all(|(&v, &a)| v >= a - tol && v <= a + self.length + tol)
    }
}

/// Real values on the interior nodes of a grid, row-major; zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TflError::GridMismatch(format!(
                "{} values for a grid with {} interior nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(TflError::InvalidParameter {
                name: "grid value",
                value: *bad,
                reason: "grid function values must be finite",
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &UniformGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every interior node.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: &UniformGrid, mut f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut x = vec![0.0; grid.dim()];
        grid.for_each_node(|idx| {
            for (l, &i) in idx.iter().enumerate() {
                x[l] = grid.coordinate(l, i);
            }
            values.push(f(&x));
        });
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &UniformGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(TflError::GridMismatch("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Discrete inner product `h^d Σ u_j v_j`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(self.grid.h.powi(self.grid.dim as i32) * s)
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.h.powi(self.grid.dim as i32) * s).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    /// Writes `#` metadata (d, N₁, h, lower, length), then
    /// `i1,..,id,x1,..,xd,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        writeln!(out, "# d={}", g.dim)?;
        writeln!(out, "# n_cells={}", g.n_cells)?;
        writeln!(out, "# h={:e}", g.h)?;
        let lower: Vec<String> = g.lower.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "# lower={}", lower.join(" "))?;
        writeln!(out, "# length={:e}", g.length)?;
        let mut w = csv::Writer::from_writer(out);
        let d = g.dim;
        let mut header: Vec<String> = (1..=d).map(|l| format!("i{l}")).collect();
        header.extend((1..=d).map(|l| format!("x{l}")));
        header.push("value".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut k = 0;
        let mut res = Ok(());
        g.for_each_node(|idx| {
            if res.is_err() {
                return;
            }
            let mut rec: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            rec.extend(idx.iter().enumerate().map(|(l, &i)| format!("{:e}", g.coordinate(l, i))));
            rec.push(format!("{:e}", self.values[k]));
            k += 1;
            res = w.write_record(&rec).map_err(csv_err);
        });
        res?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut dim = None;
        let mut n_cells = None;
        let mut lower: Option<Vec<f64>> = None;
        let mut length = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| TflError::Format(format!("bad metadata line: {line}")))?;
                let value = value.trim();
                match key.trim() {
                    "d" => dim = Some(parse::<usize>(value)?),
                    "n_cells" => n_cells = Some(parse::<usize>(value)?),
                    "lower" => {
                        lower = Some(value.split_whitespace().map(parse::<f64>).collect::<Result<_>>()?)
                    }
                    "length" => length = Some(parse::<f64>(value)?),
                    _ => {}
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let missing = |k: &str| TflError::Format(format!("missing metadata `{k}`"));
        let dim = dim.ok_or_else(|| missing("d"))?;
        let lower = lower.ok_or_else(|| missing("lower"))?;
        if lower.len() != dim {
            return Err(TflError::Format(format!("`lower` has {} entries, d = {dim}", lower.len())));
        }
        let grid = UniformGrid::new(
            lower,
            length.ok_or_else(|| missing("length"))?,
            n_cells.ok_or_else(|| missing("n_cells"))?,
        )?;
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let mut values = Vec::with_capacity(grid.len());
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let v = rec
                .get(rec.len().saturating_sub(1))
                .ok_or_else(|| TflError::Format("empty grid row".into()))?;
            values.push(parse::<f64>(v)?);
        }
        Self::new(grid, values)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| TflError::Format(format!("cannot parse `{s}`: {e}")))
}

fn csv_err(e: csv::Error) -> TflError {
    TflError::Format(e.to_string())
}
