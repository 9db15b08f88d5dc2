use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde_json::json;

use tfl_core::analysis::{Metric, RateTable};
use tfl_core::coefficients::{write_cache, write_coefficients_csv};
use tfl_core::experiments::{preset, run_experiment, Experiment, PresetOptions, Study};
use tfl_core::problems::manufacture_source;
use tfl_core::symbols::{continuous_tfl_symbol, discrete_tfl_symbol, laplacian_symbol, symbol_bound};
use tfl_core::{
    assemble_operator, pcg_solve, sphere_rule, GridFunction, LinearOperator, SchemeOrder, TflError, UniformGrid,
};

use crate::config::{Flags, Settings};
use crate::CliError;

fn artifact_name(stem: &str, s: &Settings, ext: &str) -> String {
    let csv = RateTable::file_name(stem, s.params.order.as_u32(), s.params.alpha, s.params.lambda);
    format!("{}.{ext}", csv.trim_end_matches(".csv"))
}

fn output_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_grid_function(u: &GridFunction, path: &Path) -> Result<(), CliError> {
    u.write_csv(create(path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_grid_function(path: &Path) -> Result<GridFunction, CliError> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    GridFunction::read_csv(BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_table(table: &RateTable, dir: &Path, name: &str) -> Result<(), CliError> {
    let csv_path = dir.join(name);
    table.write_csv(create(&csv_path)?)?;
    let json_path = csv_path.with_extension("json");
    std::fs::write(&json_path, table.to_json()?).map_err(TflError::from)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn print_table(table: &RateTable) {
    println!("{} ({})", table.id, table.metric);
    for row in &table.rows {
        let rate = row.rate.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into());
        println!("  {:>12e}  {:>12.4e}  {:>6}", row.step, row.error, rate);
    }
}

pub fn symbols(flags: &Flags, samples: usize) -> Result<(), CliError> {
    let s = Settings::resolve(flags)?;
    if samples < 2 {
        return Err(CliError::Config("samples: need at least 2".into()));
    }
    let p = &s.params;
    let rule = sphere_rule(p.dim, s.ng)?;
    let dir = output_dir(&s.out)?;
    let path = dir.join(artifact_name("symbols", &s, "csv"));
    let mut w = csv::Writer::from_writer(create(&path)?);
    let io = |e: csv::Error| CliError::Numerical(e.to_string());
    w.write_record(["xi", "psi_h", "symbol", "discrete_symbol", "bound"]).map_err(io)?;
    let band = std::f64::consts::PI / p.h;
    for k in 0..samples {
        let t = -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
        let mut xi = vec![0.0; p.dim];
        xi[0] = t * band;
        let row = [
            xi[0],
            laplacian_symbol(xi[0], p),
            continuous_tfl_symbol(&xi, p, &rule)?,
            discrete_tfl_symbol(&xi, p, &rule)?,
            symbol_bound(&xi, p.lambda, p.alpha),
        ];
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    w.flush().map_err(TflError::from)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn coeffs(flags: &Flags, ladder: usize, ladder_start: usize) -> Result<(), CliError> {
    let s = Settings::resolve(flags)?;
    if ladder > 0 && !(ladder_start.is_power_of_two() && ladder_start >= 4) {
        return Err(CliError::Config(format!("ladder-start: {ladder_start} is not a power of two ≥ 4")));
    }
    let grid = s.grid()?;
    let dir = output_dir(&s.out)?;
    let tensor = s.resolution().tensor(&s.params, grid.n_cells())?;
    let csv_path = dir.join(artifact_name("coeffs", &s, "csv"));
    write_coefficients_csv(&tensor, create(&csv_path)?)?;
    let bin_path = dir.join(artifact_name("coeffs", &s, "tflc"));
    write_cache(&tensor, &bin_path)?;
    println!(
        "wrote {} and {} (N1 = {}, N_f = {}, N_G = {})",
        csv_path.display(),
        bin_path.display(),
        tensor.n_per_dim(),
        tensor.fft_resolution(),
        tensor.quadrature_order()
    );
    if ladder > 0 {
        let steps = (0..ladder).map(|k| (ladder_start << k) as f64).collect();
        let exp = experiment(&s, "selferror".into(), Study::CoefficientSelfError, steps, Metric::CoeffMse)?;
        run_ladder(&exp, &dir)?;
    }
    Ok(())
}

pub fn apply(flags: &Flags, input: &Path, rhs: Option<&Path>) -> Result<(), CliError> {
    let s = Settings::resolve(flags)?;
    let u = read_grid_function(input)?;
    let grid = u.grid().clone();
    if grid.dim() != s.params.dim {
        return Err(CliError::Config(format!(
            "{} is {}-dimensional but d = {}",
            input.display(),
            grid.dim(),
            s.params.dim
        )));
    }
    let f = rhs.map(read_grid_function).transpose()?;
    let dir = output_dir(&s.out)?;
    let params = s.params.with_h(grid.h())?;
    let tensor = s.resolution().tensor(&params, grid.n_cells())?;
    let op = assemble_operator(&params, &grid, &tensor)?;
    let au = op.apply(&u)?;
    match f {
        None => write_grid_function(&au, &dir.join(artifact_name("apply", &s, "csv"))),
        Some(f) => {
            let r = f.axpy(-1.0, &au)?;
            println!("max |f - Au| = {:e}, relative to ‖f‖_inf {:e}", r.norm_inf(), r.norm_inf() / f.norm_inf());
            write_grid_function(&r, &dir.join(artifact_name("residual", &s, "csv")))
        }
    }
}

pub fn solve(flags: &Flags, source: Option<String>, reference_h: Option<f64>) -> Result<(), CliError> {
    let s = Settings::resolve(flags)?;
    let source = source.or_else(|| s.source.clone());
    let reference_h = reference_h.or(s.reference_h);
    let (grid, f, exact) = match &source {
        Some(path) => {
            let f = read_grid_function(Path::new(path))?;
            (f.grid().clone(), f, None)
        }
        None => {
            let grid = s.grid()?;
            let fine_h = reference_h.unwrap_or(grid.h());
            let f = manufacture_source(&s.problem, &s.params, &grid, fine_h, &s.resolution())?;
            let exact = s.problem.sample(&grid);
            (grid, f, Some(exact))
        }
    };
    if grid.dim() != s.params.dim {
        return Err(CliError::Config(format!("source is {}-dimensional but d = {}", grid.dim(), s.params.dim)));
    }
    let dir = output_dir(&s.out)?;
    let params = s.params.with_h(grid.h())?;
    let resolution = s.resolution();
    let tensor = resolution.tensor(&params, grid.n_cells())?;
    let op = assemble_operator(&params, &grid, &tensor)?;
    if source.is_none() {
        write_grid_function(&f, &dir.join(artifact_name("source", &s, "csv")))?;
    }
    let outcome = pcg_solve(&op, &f, &s.solver);
    let report_path = dir.join(artifact_name("solve", &s, "json"));
    let (solution, report, failure) = match outcome {
        Ok((u, report)) => (Some(u), report, None),
        Err(TflError::NotConverged(report)) => {
            let msg = format!("conjugate gradient did not converge: {report}");
            (None, *report, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let error = match (&solution, &exact) {
        (Some(u), Some(x)) => Some(json!({
            "linf": u.axpy(-1.0, x)?.norm_inf(),
            "l2": u.axpy(-1.0, x)?.norm_l2(),
        })),
        _ => None,
    };
    let doc = json!({
        "params": params,
        "grid": grid_json(&grid),
        "problem": source.clone().unwrap_or_else(|| s.problem.to_string()),
        "reference_h": reference_h.unwrap_or(grid.h()),
        "nf": tensor.fft_resolution(),
        "ng": tensor.quadrature_order(),
        "error_vs_exact": error,
        "report": report,
    });
    std::fs::write(&report_path, serde_json::to_string_pretty(&doc).map_err(TflError::from)?)
        .map_err(TflError::from)?;
    println!("{report}");
    println!("wrote {}", report_path.display());
    if let Some(msg) = failure {
        return Err(CliError::Numerical(msg));
    }
    if let Some(u) = solution {
        write_grid_function(&u, &dir.join(artifact_name("solution", &s, "csv")))?;
    }
    Ok(())
}

fn grid_json(grid: &UniformGrid) -> serde_json::Value {
    json!({
        "d": grid.dim(),
        "n_cells": grid.n_cells(),
        "h": grid.h(),
        "lower": grid.lower(),
        "length": grid.length(),
    })
}

pub struct LadderArgs {
    pub study: Option<String>,
    pub schedule: Option<Vec<f64>>,
    pub metric: Option<String>,
    pub reference_h: Option<f64>,
    pub id: String,
}

fn parse_study(text: &str) -> Result<Study, CliError> {
    match text.trim() {
        "coefficients" | "coeffs" => Ok(Study::CoefficientSelfError),
        "operator" => Ok(Study::OperatorSelfDifference),
        "solve" => Ok(Study::SolveSelfDifference),
        "exact" => Ok(Study::SolveExact),
        other => Err(CliError::Config(format!(
            "unknown study `{other}` (expected coefficients, operator, solve or exact)"
        ))),
    }
}

fn experiment(s: &Settings, id: String, study: Study, steps: Vec<f64>, metric: Metric) -> Result<Experiment, CliError> {
    let exp = Experiment {
        id,
        study,
        params: s.params.clone(),
        laplacian_order: None::<SchemeOrder>,
        problem: s.problem,
        half_width: if study == Study::CoefficientSelfError { 1.0 } else { s.half_width()? },
        steps,
        metric,
        reference_h: s.reference_h,
        resolution: s.resolution(),
        solver: s.solver,
    };
    exp.validate()?;
    Ok(exp)
}

/// Runs one ladder, writes whatever rows it produced and reports a failed
/// rung or a broken table invariant as a numerical failure.
fn run_ladder(exp: &Experiment, dir: &Path) -> Result<RateTable, CliError> {
    let outcome = run_experiment(exp);
    print_table(&outcome.table);
    write_table(&outcome.table, dir, &exp.file_name())?;
    if let Some((rung, e)) = &outcome.failure {
        return Err(CliError::Numerical(format!("{}: rung {rung} failed: {e}", exp.id)));
    }
    outcome
        .table
        .check()
        .map_err(|e| CliError::Numerical(format!("{}: {e}", exp.id)))?;
    Ok(outcome.table)
}

pub fn convergence(flags: &Flags, args: LadderArgs) -> Result<(), CliError> {
    let mut s = Settings::resolve(flags)?;
    if args.reference_h.is_some() {
        s.reference_h = args.reference_h;
    }
    let study = parse_study(args.study.as_deref().or(s.study.as_deref()).unwrap_or("solve"))?;
    let metric = match args.metric.as_deref() {
        Some(m) => m.parse()?,
        None => s.metric.unwrap_or(match study {
            Study::CoefficientSelfError => Metric::CoeffMse,
            Study::OperatorSelfDifference => Metric::Linf,
            _ => Metric::L2,
        }),
    };
    let steps = args.schedule.unwrap_or_else(|| s.schedule.clone());
    if steps.is_empty() {
        return Err(CliError::Config("empty step schedule: set --schedule or [grid] schedule".into()));
    }
    let exp = experiment(&s, args.id, study, steps, metric)?;
    let dir = output_dir(&s.out)?;
    run_ladder(&exp, &dir).map(|_| ())
}

pub fn reproduce(id: &str, flags: &Flags, full: bool) -> Result<(), CliError> {
    // only knobs given on the command line filter or override the preset;
    // the config file contributes the output directory
    let s = Settings::resolve(flags)?;
    let opts = PresetOptions {
        full,
        alpha: flags.alpha,
        lambda: flags.lambda,
        order: flags.p.map(SchemeOrder::from_u32).transpose()?,
        fft_resolution: flags.nf,
        quadrature_order: flags.ng,
        tolerance: flags.tol,
        preconditioner: flags.precond.as_deref().map(str::parse).transpose()?,
        max_iterations: flags.maxiter,
    };
    let mut experiments = preset(id, &opts)?;
    if let Some(cache) = &s.cache {
        for exp in &mut experiments {
            exp.resolution.cache_dir = Some(cache.clone());
        }
    }
    let dir = output_dir(&s.out)?;
    let mut failures = Vec::new();
    for exp in &experiments {
        if let Err(e) = run_ladder(exp, &dir) {
            eprintln!("tfl: {e}");
            failures.push(exp.id.clone());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "{} of {} columns failed: {}",
            failures.len(),
            experiments.len(),
            failures.join(", ")
        )))
    }
}
