//! Run settings: built-in defaults, overridden by a TOML file, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use tfl_core::analysis::Metric;
use tfl_core::coefficients::Resolution;
use tfl_core::experiments::NF_1D;
use tfl_core::problems::TestFunction;
use tfl_core::solver::DEFAULT_TOLERANCE;
use tfl_core::{Preconditioner, SchemeOrder, SolverSettings, TflParams, UniformGrid};

use crate::CliError;

/// Flags shared by every subcommand. Each one overrides the matching key of
/// the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file with [model], [grid], [coefficients], [solver],
    /// [problem] and [output] sections.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Scheme order: 2, 4, 6 or 8.
    #[arg(long)]
    pub p: Option<u32>,
    /// Spatial dimension: 1, 2 or 3.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub h: Option<f64>,
    /// FFT resolution N_f (power of two).
    #[arg(long)]
    pub nf: Option<usize>,
    /// Angular Gauss order N_G.
    #[arg(long)]
    pub ng: Option<usize>,
    /// `a` for (-a, a)^d, or `lo,hi` for (lo, hi)^d.
    #[arg(long)]
    pub domain: Option<String>,
    /// `bump:s=<value>` or `one`.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// `none` or `circulant`.
    #[arg(long)]
    pub precond: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for the binary coefficient cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    coefficients: CoefficientSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    problem: ProblemSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    alpha: Option<f64>,
    lambda: Option<f64>,
    sigma: Option<f64>,
    nu: Option<f64>,
    p: Option<u32>,
    d: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    h: Option<f64>,
    domain: Option<DomainValue>,
    schedule: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DomainValue {
    HalfWidth(f64),
    Interval([f64; 2]),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientSection {
    nf: Option<usize>,
    ng: Option<usize>,
    cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    tol: Option<f64>,
    maxiter: Option<usize>,
    precond: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    name: Option<String>,
    source: Option<String>,
    reference_h: Option<f64>,
    metric: Option<String>,
    study: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub params: TflParams,
    pub lower: f64,
    pub upper: f64,
    pub nf: Option<usize>,
    pub ng: usize,
    pub cache: Option<PathBuf>,
    pub solver: SolverSettings,
    pub problem: TestFunction,
    pub source: Option<String>,
    pub reference_h: Option<f64>,
    pub schedule: Vec<f64>,
    pub metric: Option<Metric>,
    pub study: Option<String>,
    pub out: PathBuf,
}

pub const DEFAULT_ALPHA: f64 = 1.2;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_ORDER: u32 = 4;
pub const DEFAULT_H: f64 = 1.0 / 32.0;
pub const DEFAULT_NG: usize = 20;
pub const DEFAULT_PROBLEM: &str = "bump:s=6";

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_domain(text: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split([',', ':']).map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| config_err(format!("domain: cannot parse `{s}` as a number")))
    };
    match parts.as_slice() {
        [a] => {
            let a = num(a)?;
            Ok((-a, a))
        }
        [lo, hi] => Ok((num(lo)?, num(hi)?)),
        _ => Err(config_err(format!("domain: expected `a` or `lo,hi`, got `{text}`"))),
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let m = &file.model;
        let alpha = flags.alpha.or(m.alpha).unwrap_or(DEFAULT_ALPHA);
        let lambda = flags.lambda.or(m.lambda).unwrap_or(DEFAULT_LAMBDA);
        let sigma = flags.sigma.or(m.sigma).unwrap_or(0.0);
        let nu = flags.nu.or(m.nu).unwrap_or(0.0);
        let p = SchemeOrder::from_u32(flags.p.or(m.p).unwrap_or(DEFAULT_ORDER))?;
        let d = flags.d.or(m.d).unwrap_or(1);
        let h = flags.h.or(file.grid.h).unwrap_or(DEFAULT_H);
        let params = TflParams::new(alpha, lambda, d, p, h)?
            .with_sigma(sigma)?
            .with_nu(nu)?;

        let (lower, upper) = match (&flags.domain, &file.grid.domain) {
            (Some(text), _) => parse_domain(text)?,
            (None, Some(DomainValue::HalfWidth(a))) => (-a, *a),
            (None, Some(DomainValue::Interval([lo, hi]))) => (*lo, *hi),
            (None, Some(DomainValue::Text(text))) => parse_domain(text)?,
            (None, None) => (-1.0, 1.0),
        };
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(config_err(format!("domain: empty interval ({lower}, {upper})")));
        }

        let c = &file.coefficients;
        let nf = flags.nf.or(c.nf);
        if let Some(nf) = nf {
            if !nf.is_power_of_two() {
                return Err(config_err(format!("nf: {nf} is not a power of two")));
            }
        }
        let ng = flags.ng.or(c.ng).unwrap_or(DEFAULT_NG);

        let s = &file.solver;
        let precond = match flags.precond.as_ref().or(s.precond.as_ref()) {
            Some(text) => text.parse::<Preconditioner>()?,
            None => Preconditioner::Circulant,
        };
        let solver = SolverSettings {
            tolerance: flags.tol.or(s.tol).unwrap_or(DEFAULT_TOLERANCE),
            max_iterations: flags.maxiter.or(s.maxiter),
            preconditioner: precond,
        };
        if !(solver.tolerance.is_finite() && solver.tolerance > 0.0) {
            return Err(config_err(format!("tol: {} is not positive", solver.tolerance)));
        }

        let pr = &file.problem;
        let problem_text = flags.problem.clone().or_else(|| pr.name.clone());
        let problem = problem_text.as_deref().unwrap_or(DEFAULT_PROBLEM).parse::<TestFunction>()?;
        let metric = pr.metric.as_deref().map(str::parse::<Metric>).transpose()?;
        if let Some(r) = pr.reference_h {
            if !(r.is_finite() && r > 0.0) {
                return Err(config_err(format!("reference_h: {r} is not positive")));
            }
        }

        Ok(Self {
            params,
            lower,
            upper,
            nf,
            ng,
            cache: flags.cache.clone().or_else(|| c.cache.clone()),
            solver,
            problem,
            source: pr.source.clone(),
            reference_h: pr.reference_h,
            schedule: file.grid.schedule.clone().unwrap_or_default(),
            metric,
            study: pr.study.clone(),
            out: flags.out.clone().or_else(|| file.output.dir.clone()).unwrap_or_else(|| ".".into()),
        })
    }

    pub fn grid(&self) -> Result<UniformGrid, CliError> {
        let d = self.params.dim;
        Ok(UniformGrid::with_step(vec![self.lower; d], self.upper - self.lower, self.params.h)?)
    }

    /// Half-width of a domain centred at the origin, as the ladder studies
    /// require.
    pub fn half_width(&self) -> Result<f64, CliError> {
        if (self.lower + self.upper).abs() > 1e-12 * self.upper.abs() {
            return Err(config_err(format!(
                "convergence studies need a domain centred at 0, got ({}, {})",
                self.lower, self.upper
            )));
        }
        Ok(self.upper)
    }

    /// `N_f = 2^20` in one dimension unless overridden; the per-grid
    /// automatic rule otherwise.
    pub fn resolution(&self) -> Resolution {
        let nf = self.nf.or((self.params.dim == 1).then_some(NF_1D));
        Resolution {
            fft_resolution: nf,
            quadrature_order: self.ng,
            cache_dir: self.cache.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_file(text: &str) -> Result<Settings, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        Settings::resolve(&Flags {
            config: Some(path),
            ..Flags::default()
        })
    }

    #[test]
    fn defaults_apply_without_a_file() {
        let s = Settings::resolve(&Flags::default()).unwrap();
        assert_eq!(s.params.alpha, DEFAULT_ALPHA);
        assert_eq!((s.lower, s.upper), (-1.0, 1.0));
        assert_eq!(s.resolution().fft_resolution, Some(NF_1D));
        assert_eq!(s.solver.preconditioner, Preconditioner::Circulant);
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[model]\nalpha = 0.4\np = 6\n[grid]\ndomain = [0.0, 2.0]\n").unwrap();
        let s = Settings::resolve(&Flags {
            config: Some(path),
            alpha: Some(1.8),
            ..Flags::default()
        })
        .unwrap();
        assert_eq!(s.params.alpha, 1.8);
        assert_eq!(s.params.order, SchemeOrder::P6);
        assert_eq!((s.lower, s.upper), (0.0, 2.0));
        assert!(s.half_width().is_err());
    }

    #[test]
    fn unknown_keys_name_the_key_and_line() {
        let err = with_file("[model]\nalpha = 0.4\nbeta = 1\n").unwrap_err().to_string();
        assert!(err.contains("beta") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(with_file("[model]\np = 5\n"), Err(CliError::Config(_))));
        assert!(matches!(with_file("[coefficients]\nnf = 1000\n"), Err(CliError::Config(_))));
        assert!(matches!(with_file("[grid]\ndomain = \"1,1\"\n"), Err(CliError::Config(_))));
        assert!(matches!(with_file("[problem]\nname = \"wave\"\n"), Err(CliError::Config(_))));
    }
}
