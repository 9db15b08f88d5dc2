//! Error norms and convergence-rate tables.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TflError};
use crate::grid::GridFunction;
use crate::problems::{restrict, sinc_interpolate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `max_j |u_j - v_j|`.
    Linf,
    /// `(h^d Σ_j |u_j - v_j|²)^{1/2}`.
    L2,
    /// Root mean square over off-grid query points.
    L2Nonmesh,
    /// The coefficient self-error `e(N_f)`.
    CoeffMse,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linf => "linf",
            Self::L2 => "l2",
            Self::L2Nonmesh => "l2_nonmesh",
            Self::CoeffMse => "coeff_mse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = TflError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linf" => Ok(Self::Linf),
            "l2" => Ok(Self::L2),
            "l2_nonmesh" => Ok(Self::L2Nonmesh),
            "coeff_mse" => Ok(Self::CoeffMse),
            other => Err(TflError::Format(format!("unknown metric `{other}`"))),
        }
    }
}

/// Distance between `u` and `v` on `u`'s grid. `v` may live on a nested
/// finer grid, in which case it is injected first.
///
/// [`Metric::L2Nonmesh`] uses the `P = 3000` points `-1 + j·2/(P+1)` mapped
/// onto each axis of the box and compares sinc interpolants; in `d > 1` the
/// points are taken along the diagonal.
pub fn grid_error(u: &GridFunction, v: &GridFunction, metric: Metric) -> Result<f64> {
    let v = if u.grid().same_as(v.grid()) {
        v.clone()
    } else {
        restrict(v, u.grid())?
    };
    let diff = u.axpy(-1.0, &v)?;
    match metric {
        Metric::Linf => Ok(diff.norm_inf()),
        Metric::L2 => Ok(diff.norm_l2()),
        Metric::L2Nonmesh => {
            let pts = default_nonmesh_points(u);
            let a = sinc_interpolate(&diff, &pts)?;
            Ok(rms(&a))
        }
        Metric::CoeffMse => Err(TflError::Format(
            "coeff_mse compares coefficient tensors, not grid functions".into(),
        )),
    }
}

fn default_nonmesh_points(u: &GridFunction) -> Vec<Vec<f64>> {
    let g = u.grid();
    let count = 3000;
    let step = g.length() / (count as f64 + 1.0);
    (1..=count)
        .map(|j| g.lower().iter().map(|&a| a + j as f64 * step).collect())
        .collect()
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// `(1/P Σ |exact(y) - I u(y)|²)^{1/2}` over the query points.
pub fn nonmesh_error<F: Fn(&[f64]) -> f64>(
    exact: F,
    u: &GridFunction,
    points: &[Vec<f64>],
) -> Result<f64> {
    let approx = sinc_interpolate(u, points)?;
    let diff: Vec<f64> = points
        .iter()
        .zip(&approx)
        .map(|(y, a)| exact(y) - a)
        .collect();
    Ok(rms(&diff))
}

/// `log₂(e_prev / e)`.
pub fn rate(previous: f64, current: f64) -> f64 {
    (previous / current).log2()
}

/// What the first column of a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// Spatial step `h`, halving down the table.
    H,
    /// Fourier resolution `N_f`, doubling down the table.
    Nf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// `h` or `N_f`, depending on the table's abscissa.
    pub step: f64,
    pub error: f64,
    pub rate: Option<f64>,
    /// `N_f` used for the generators on this rung (finest grid involved).
    pub nf: usize,
    /// Angular quadrature order.
    pub ng: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub id: String,
    pub metric: Metric,
    pub abscissa: Abscissa,
    /// Free-form configuration snapshot.
    pub config: serde_json::Value,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn new(id: impl Into<String>, metric: Metric, abscissa: Abscissa, config: serde_json::Value) -> Self {
        Self {
            id: id.into(),
            metric,
            abscissa,
            config,
            rows: Vec::new(),
        }
    }

    /// Appends a rung; the rate is filled in from the previous row.
    pub fn push(&mut self, step: f64, error: f64, nf: usize, ng: usize) {
        let rate = self.rows.last().map(|prev| rate(prev.error, error));
        self.rows.push(RateRow {
            step,
            error,
            rate,
            nf,
            ng,
        });
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    /// Errors positive and finite, steps strictly halving (or doubling for
    /// `N_f`), rates absent exactly on the first row.
    pub fn check(&self) -> Result<()> {
        for (k, row) in self.rows.iter().enumerate() {
            if !(row.error.is_finite() && row.error > 0.0) {
                return Err(TflError::Format(format!("row {k}: error {} is not positive", row.error)));
            }
            if (k == 0) != row.rate.is_none() {
                return Err(TflError::Format(format!("row {k}: rate presence is inconsistent")));
            }
            if k > 0 {
                let ratio = self.rows[k - 1].step / row.step;
                let expect = match self.abscissa {
                    Abscissa::H => 2.0,
                    Abscissa::Nf => 0.5,
                };
                if (ratio - expect).abs() > 1e-12 * expect {
                    return Err(TflError::Format(format!("row {k}: step does not follow a factor-2 ladder")));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# id={}", self.id)?;
        writeln!(out, "# metric={}", self.metric)?;
        writeln!(out, "# config={}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::Writer::from_writer(out);
        let first = match self.abscissa {
            Abscissa::H => "h",
            Abscissa::Nf => "nf_step",
        };
        w.write_record([first, "error", "rate", "nf", "ng"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                format!("{:e}", r.step),
                format!("{:e}", r.error),
                r.rate.map(|v| format!("{v:e}")).unwrap_or_default(),
                r.nf.to_string(),
                r.ng.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut id = None;
        let mut metric = None;
        let mut config = serde_json::Value::Null;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| TflError::Format(format!("bad metadata line: {line}")))?;
                match k.trim() {
                    "id" => id = Some(v.trim().to_string()),
                    "metric" => metric = Some(v.parse::<Metric>()?),
                    "config" => config = serde_json::from_str(v)?,
                    _ => {}
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let abscissa = match reader.headers().map_err(csv_err)?.get(0) {
            Some("h") => Abscissa::H,
            Some("nf_step") => Abscissa::Nf,
            other => return Err(TflError::Format(format!("unexpected first column {other:?}"))),
        };
        let mut table = Self::new(
            id.ok_or_else(|| TflError::Format("missing table id".into()))?,
            metric.ok_or_else(|| TflError::Format("missing metric".into()))?,
            abscissa,
            config,
        );
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let num = |s: String| -> Result<f64> {
                s.parse().map_err(|_| TflError::Format(format!("bad number `{s}`")))
            };
            let rate = match field(2).as_str() {
                "" => None,
                s => Some(num(s.to_string())?),
            };
            table.rows.push(RateRow {
                step: num(field(0))?,
                error: num(field(1))?,
                rate,
                nf: field(3).parse().map_err(|_| TflError::Format("bad nf".into()))?,
                ng: field(4).parse().map_err(|_| TflError::Format("bad ng".into()))?,
            });
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `<id>_<p>_<alpha>_<lambda>.csv`.
    pub fn file_name(id: &str, p: u32, alpha: f64, lambda: f64) -> String {
        format!("{id}_{p}_{alpha}_{lambda}.csv")
    }
}

fn csv_err(e: csv::Error) -> TflError {
    TflError::Format(e.to_string())
}

/// A table together with the first rung that failed, if any.
#[derive(Debug)]
pub struct LadderOutcome {
    pub table: RateTable,
    pub failure: Option<(usize, TflError)>,
}

impl LadderOutcome {
    pub fn into_result(self) -> Result<RateTable> {
        match self.failure {
            None => Ok(self.table),
            Some((_, e)) => Err(e),
        }
    }
}

/// Runs `rung` for every step of the schedule and assembles the table.
///
/// `rung` returns `(error, nf, ng)`. Rungs run in order; the first failure
/// stops the ladder and is returned next to the rows gathered so far.
pub fn convergence_ladder<F>(mut table: RateTable, steps: &[f64], mut rung: F) -> LadderOutcome
where
    F: FnMut(usize, f64) -> Result<(f64, usize, usize)>,
{
    for (k, &step) in steps.iter().enumerate() {
        match rung(k, step) {
            Ok((error, nf, ng)) => table.push(step, error, nf, ng),
            Err(e) => {
                return LadderOutcome {
                    table,
                    failure: Some((k, e)),
                }
            }
        }
    }
    LadderOutcome {
        table,
        failure: None,
    }
}
