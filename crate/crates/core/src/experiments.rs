//! Convergence studies and the reference table presets.
//!
//! Each [`Experiment`] yields one [`RateTable`]. Self-difference studies
//! solve (or apply) on the ladder `h₀, h₀/2, …, h₀/2^rows` and compare
//! neighbouring levels on the coarser grid, so every level is computed once.

use serde::{Deserialize, Serialize};

use crate::analysis::{convergence_ladder, grid_error, nonmesh_error, Abscissa, LadderOutcome, Metric, RateTable};
use crate::coefficients::{coefficient_self_error_ladder, Resolution};
use crate::error::{Result, TflError};
use crate::grid::{GridFunction, UniformGrid};
use crate::operators::{assemble_operator, CompositeOperator, LinearOperator};
use crate::params::{SchemeOrder, TflParams};
use crate::problems::{nonmesh_points, restrict, TestFunction};
use crate::solver::{pcg_solve, Preconditioner, SolverSettings};

/// Number of off-grid query points for [`Metric::L2Nonmesh`].
pub const NONMESH_POINTS: usize = 3000;

/// What is measured on each rung.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// `e(N_f)` of the generator tensor at fixed `h`.
    CoefficientSelfError,
    /// `‖A_h U - A_{h/2} U‖` on the coarse nodes.
    OperatorSelfDifference,
    /// `‖U^h - U^{h/2}‖` on the coarse nodes.
    SolveSelfDifference,
    /// `U - U^h` against the sampled exact solution.
    SolveExact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    /// Table identifier, used in artifact names.
    pub id: String,
    pub study: Study,
    /// Model parameters; `h` is overwritten per rung except for
    /// [`Study::CoefficientSelfError`].
    pub params: TflParams,
    /// Order of the `-Δ_h` term when `σ ≠ 0`; defaults to `params.order`.
    #[serde(default)]
    pub laplacian_order: Option<SchemeOrder>,
    pub problem: TestFunction,
    /// The domain is `(-a, a)^d`.
    pub half_width: f64,
    /// `h` ladder, or `N_f` ladder for coefficient studies.
    pub steps: Vec<f64>,
    pub metric: Metric,
    /// Step of the grid on which manufactured sources are computed.
    pub reference_h: Option<f64>,
    pub resolution: Resolution,
    pub solver: SolverSettings,
}

impl Experiment {
    /// Checks the schedule: nonempty, positive, factor-2 ladder.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.steps.is_empty() {
            return Err(TflError::Format(format!("{}: empty step schedule", self.id)));
        }
        let doubling = self.study == Study::CoefficientSelfError;
        for w in self.steps.windows(2) {
            let ratio = if doubling { w[1] / w[0] } else { w[0] / w[1] };
            if (ratio - 2.0).abs() > 1e-12 {
                return Err(TflError::Format(format!(
                    "{}: steps must change by a factor of 2 ({} -> {})",
                    self.id, w[0], w[1]
                )));
            }
        }
        if self.steps.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(TflError::Format(format!("{}: steps must be positive", self.id)));
        }
        Ok(())
    }

    /// `<id>_<p>_<alpha>_<lambda>.csv`.
    pub fn file_name(&self) -> String {
        RateTable::file_name(&self.id, self.params.order.as_u32(), self.params.alpha, self.params.lambda)
    }

    fn empty_table(&self) -> RateTable {
        let abscissa = if self.study == Study::CoefficientSelfError {
            Abscissa::Nf
        } else {
            Abscissa::H
        };
        let config = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        RateTable::new(self.id.clone(), self.metric, abscissa, config)
    }

    fn grid(&self, h: f64) -> Result<UniformGrid> {
        UniformGrid::centered(self.params.dim, self.half_width, h)
    }

    fn operator(&self, grid: &UniformGrid) -> Result<CompositeOperator> {
        let params = self.params.with_h(grid.h())?;
        let coeffs = self.resolution.tensor(&params, grid.n_cells())?;
        let op = assemble_operator(&params, grid, &coeffs)?;
        match self.laplacian_order {
            Some(order) => op.with_laplacian_order(order),
            None => Ok(op),
        }
    }

    fn nf_for(&self, grid: &UniformGrid) -> usize {
        self.resolution.fft_resolution_for(self.params.dim, grid.n_cells())
    }
}

/// Runs an experiment. Pipeline failures on a rung stop the ladder and are
/// reported next to the rows completed before it.
pub fn run_experiment(exp: &Experiment) -> LadderOutcome {
    let table = exp.empty_table();
    if let Err(e) = exp.validate() {
        return LadderOutcome {
            table,
            failure: Some((0, e)),
        };
    }
    match exp.study {
        Study::CoefficientSelfError => coefficient_study(exp, table),
        Study::OperatorSelfDifference => {
            let mut level = |h: f64| -> Result<(GridFunction, usize)> {
                let grid = exp.grid(h)?;
                let op = exp.operator(&grid)?;
                Ok((op.apply(&exp.problem.sample(&grid))?, exp.nf_for(&grid)))
            };
            self_difference(exp, table, &mut level)
        }
        Study::SolveSelfDifference => {
            let source = match SourceProvider::new(exp) {
                Ok(s) => s,
                Err(e) => {
                    return LadderOutcome {
                        table,
                        failure: Some((0, e)),
                    }
                }
            };
            let mut level = |h: f64| -> Result<(GridFunction, usize)> {
                let grid = exp.grid(h)?;
                let op = exp.operator(&grid)?;
                let f = source.on(&grid)?;
                let (u, _) = pcg_solve(&op, &f, &exp.solver)?;
                Ok((u, exp.nf_for(&grid)))
            };
            self_difference(exp, table, &mut level)
        }
        Study::SolveExact => exact_study(exp, table),
    }
}

fn coefficient_study(exp: &Experiment, mut table: RateTable) -> LadderOutcome {
    let nf0 = exp.steps[0] as usize;
    if nf0 as f64 != exp.steps[0] {
        return LadderOutcome {
            table,
            failure: Some((0, TflError::Format("N_f steps must be integers".into()))),
        };
    }
    let ng = exp.resolution.quadrature_order;
    match coefficient_self_error_ladder(&exp.params, nf0, exp.steps.len(), ng) {
        Ok(rows) => {
            for r in rows {
                // the row needs tensors at N_f and 2 N_f
                table.push(r.nf as f64, r.error, 2 * r.nf, ng);
            }
            LadderOutcome {
                table,
                failure: None,
            }
        }
        Err(e) => LadderOutcome {
            table,
            failure: Some((0, e)),
        },
    }
}

fn self_difference(
    exp: &Experiment,
    table: RateTable,
    level: &mut dyn FnMut(f64) -> Result<(GridFunction, usize)>,
) -> LadderOutcome {
    let ng = exp.resolution.quadrature_order;
    let mut previous: Option<GridFunction> = None;
    convergence_ladder(table, &exp.steps, |_, h| {
        let coarse = match previous.take() {
            Some(v) => v,
            None => level(h)?.0,
        };
        let (fine, nf) = level(0.5 * h)?;
        let e = grid_error(&coarse, &fine, exp.metric)?;
        previous = Some(fine);
        Ok((e, nf, ng))
    })
}

fn exact_study(exp: &Experiment, table: RateTable) -> LadderOutcome {
    let source = match SourceProvider::new(exp) {
        Ok(s) => s,
        Err(e) => {
            return LadderOutcome {
                table,
                failure: Some((0, e)),
            }
        }
    };
    let ng = exp.resolution.quadrature_order;
    let points: Vec<Vec<f64>> = if exp.metric == Metric::L2Nonmesh {
        let axis = nonmesh_points(-exp.half_width, exp.half_width, NONMESH_POINTS);
        match exp.params.dim {
            1 => axis.into_iter().map(|x| vec![x]).collect(),
            d => axis.into_iter().map(|x| vec![x; d]).collect(),
        }
    } else {
        Vec::new()
    };
    convergence_ladder(table, &exp.steps, |_, h| {
        let grid = exp.grid(h)?;
        let op = exp.operator(&grid)?;
        let f = source.on(&grid)?;
        let (u, _) = pcg_solve(&op, &f, &exp.solver)?;
        let e = match exp.metric {
            Metric::L2Nonmesh => nonmesh_error(|y| exp.problem.evaluate(y), &u, &points)?,
            m => grid_error(&exp.problem.sample(&grid), &u, m)?,
        };
        Ok((e, exp.nf_for(&grid), ng))
    })
}

/// Right-hand sides for every grid of a ladder: the manufactured `A U` for
/// bump solutions, computed once on the reference grid, or `f ≡ 1`.
struct SourceProvider {
    fine: Option<GridFunction>,
}

impl SourceProvider {
    fn new(exp: &Experiment) -> Result<Self> {
        match exp.problem {
            TestFunction::ConstantOne => Ok(Self { fine: None }),
            TestFunction::BumpPower { .. } => {
                let finest = exp.steps.iter().copied().fold(f64::INFINITY, f64::min);
                let needed = if exp.study == Study::SolveSelfDifference {
                    0.5 * finest
                } else {
                    finest
                };
                let href = exp.reference_h.unwrap_or(needed);
                if href > needed * (1.0 + 1e-12) {
                    return Err(TflError::NotNested {
                        coarse_h: needed,
                        fine_h: href,
                    });
                }
                let grid = exp.grid(href)?;
                let op = exp.operator(&grid)?;
                Ok(Self {
                    fine: Some(op.apply(&exp.problem.sample(&grid))?),
                })
            }
        }
    }

    fn on(&self, grid: &UniformGrid) -> Result<GridFunction> {
        match &self.fine {
            Some(f) => restrict(f, grid),
            None => Ok(GridFunction::from_fn(grid, |_| 1.0)),
        }
    }
}

/// Knobs shared by all presets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetOptions {
    /// Lift the desk-scale cap on `d = 2` ladders (finest rung `2^{-7}`).
    pub full: bool,
    /// Keep only columns with these values, when given.
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub order: Option<SchemeOrder>,
    /// Overrides `N_f` on every grid.
    pub fft_resolution: Option<usize>,
    pub quadrature_order: Option<usize>,
    pub tolerance: Option<f64>,
    pub preconditioner: Option<Preconditioner>,
    pub max_iterations: Option<usize>,
}

/// Finest `h` run by default in two dimensions.
pub const DESK_FINEST_H_2D: f64 = 1.0 / 128.0;
/// Reference step for manufactured sources.
pub const REFERENCE_H_1D: f64 = 1.0 / 4096.0;
pub const REFERENCE_H_2D: f64 = 1.0 / 512.0;
/// `N_f` used for every `d = 1` grid.
pub const NF_1D: usize = 1 << 20;

pub const PRESET_IDS: [&str; 17] = [
    "table1", "table2", "table3", "table4", "table5", "table6", "table7", "table8", "table9", "table10", "table11",
    "fig1", "fig2", "fig4", "fig5", "fig6", "fig7",
];

fn ladder(first_exp: i32, last_exp: i32) -> Vec<f64> {
    (first_exp..=last_exp).map(|k| 2f64.powi(-k)).collect()
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

struct Builder<'a> {
    opts: &'a PresetOptions,
    out: Vec<Experiment>,
}

impl Builder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        id: String,
        study: Study,
        params: TflParams,
        problem: TestFunction,
        steps: Vec<f64>,
        metric: Metric,
    ) -> Result<()> {
        let o = self.opts;
        if o.alpha.is_some_and(|a| !same(a, params.alpha))
            || o.lambda.is_some_and(|l| !same(l, params.lambda))
            || o.order.is_some_and(|p| p != params.order)
        {
            return Ok(());
        }
        let mut steps = steps;
        if params.dim == 2 && study != Study::CoefficientSelfError && !o.full {
            steps.retain(|&h| h >= DESK_FINEST_H_2D * (1.0 - 1e-12));
        }
        let resolution = Resolution {
            fft_resolution: o
                .fft_resolution
                .or(if params.dim == 1 { Some(NF_1D) } else { None }),
            quadrature_order: o.quadrature_order.unwrap_or(crate::quadrature::DEFAULT_SPHERE_ORDER),
            cache_dir: None,
        };
        let defaults = SolverSettings {
            preconditioner: Preconditioner::Circulant,
            ..SolverSettings::default()
        };
        let solver = SolverSettings {
            tolerance: o.tolerance.unwrap_or(defaults.tolerance),
            max_iterations: o.max_iterations,
            preconditioner: o.preconditioner.unwrap_or(defaults.preconditioner),
        };
        let reference_h = match (study, problem) {
            (Study::SolveSelfDifference | Study::SolveExact, TestFunction::BumpPower { .. }) => {
                Some(if params.dim == 1 { REFERENCE_H_1D } else { REFERENCE_H_2D })
            }
            _ => None,
        };
        self.out.push(Experiment {
            id,
            study,
            params,
            laplacian_order: None,
            problem,
            half_width: 1.0,
            steps,
            metric,
            reference_h,
            resolution,
            solver,
        });
        Ok(())
    }
}

fn p(order: u32) -> SchemeOrder {
    SchemeOrder::from_u32(order).expect("preset orders are valid")
}

/// The experiments behind a named table or figure.
///
/// Multi-column presets whose columns share `(p, α, λ)` get a suffix on the
/// id (`table8-s6`) so artifact names stay unique.
pub fn preset(id: &str, opts: &PresetOptions) -> Result<Vec<Experiment>> {
    let mut b = Builder { opts, out: Vec::new() };
    let alphas = [0.4, 0.8, 1.2, 1.8];
    match id {
        "table1" | "table2" | "table3" => {
            let order = p(match id {
                "table1" => 4,
                "table2" => 6,
                _ => 8,
            });
            for alpha in alphas {
                let params = TflParams::new(alpha, 0.5, 2, order, 1.0 / 32.0)?;
                let steps = (6..=10).map(|k| (1u64 << k) as f64).collect();
                b.add(id.into(), Study::CoefficientSelfError, params, TestFunction::ConstantOne, steps, Metric::CoeffMse)?;
            }
        }
        "table4" | "table5" | "table6" | "table7" => {
            let alpha = if id == "table4" || id == "table6" { 0.4 } else { 1.8 };
            let (columns, steps): (&[(u32, f64)], _) = if id == "table4" || id == "table5" {
                (&[(4, 2.0), (6, 3.0), (8, 3.6)], ladder(5, 8))
            } else {
                (&[(4, 6.0), (6, 8.0), (8, 10.0)], ladder(3, 6))
            };
            for &(order, s) in columns {
                let params = TflParams::new(alpha, 0.5, 2, p(order), steps[0])?;
                b.add(id.into(), Study::OperatorSelfDifference, params, TestFunction::bump(s)?, steps.clone(), Metric::Linf)?;
            }
        }
        "table8" | "table9" | "table10" => {
            let (order, ss, steps) = match id {
                "table8" => (4, [2.0, 6.0], ladder(4, 7)),
                "table9" => (6, [3.0, 8.0], ladder(4, 7)),
                _ => (8, [3.6, 10.0], ladder(3, 6)),
            };
            for s in ss {
                for alpha in [0.4, 1.8] {
                    let params = TflParams::new(alpha, 0.5, 2, p(order), steps[0])?.with_nu(1.0)?;
                    b.add(format!("{id}-s{s}"), Study::SolveSelfDifference, params, TestFunction::bump(s)?, steps.clone(), Metric::L2)?;
                }
            }
        }
        "table11" => {
            for lambda in [0.2, 0.5] {
                for alpha in [0.4, 1.8] {
                    let steps = ladder(5, 8);
                    let params = TflParams::new(alpha, lambda, 2, p(4), steps[0])?;
                    b.add(id.into(), Study::SolveSelfDifference, params, TestFunction::ConstantOne, steps, Metric::L2)?;
                }
            }
        }
        "fig1" | "fig2" => {
            let shift = if id == "fig1" { 5.0 } else { 2.0 };
            for alpha in [0.4, 1.8] {
                for order in [2, 4, 6, 8] {
                    for metric in [Metric::Linf, Metric::L2] {
                        let steps = ladder(3, 6);
                        let params = TflParams::new(alpha, 0.5, 2, p(order), steps[0])?;
                        b.add(format!("{id}-{metric}"), Study::OperatorSelfDifference, params, TestFunction::bump(shift + alpha)?, steps, metric)?;
                    }
                }
            }
        }
        "fig4" => {
            for alpha in [0.4, 1.8] {
                for lambda in [0.2, 0.5, 1.0, 1.5, 3.0, 5.0] {
                    let steps = ladder(3, 8);
                    let params = TflParams::new(alpha, lambda, 1, p(4), steps[0])?;
                    b.add(id.into(), Study::SolveExact, params, TestFunction::bump(4.0 + alpha)?, steps, Metric::Linf)?;
                }
            }
        }
        "fig5" | "fig6" => {
            let s = if id == "fig5" { 6.0 } else { 1.0 };
            let metrics: &[Metric] = if id == "fig5" {
                &[Metric::L2Nonmesh]
            } else {
                &[Metric::Linf, Metric::L2]
            };
            for alpha in [0.4, 1.8] {
                for order in [2, 4, 6, 8] {
                    for &metric in metrics {
                        let steps = ladder(3, 8);
                        let params = TflParams::new(alpha, 0.5, 1, p(order), steps[0])?;
                        let tag = if metrics.len() > 1 { format!("{id}-{metric}") } else { id.into() };
                        b.add(tag, Study::SolveExact, params, TestFunction::bump(s)?, steps, metric)?;
                    }
                }
            }
        }
        "fig7" => {
            for alpha in [0.4, 1.8] {
                for order in [2, 4, 6, 8] {
                    let steps = ladder(4, 7);
                    let params = TflParams::new(alpha, 0.5, 2, p(order), steps[0])?.with_sigma(1.0)?;
                    b.add(id.into(), Study::SolveSelfDifference, params, TestFunction::ConstantOne, steps, Metric::L2)?;
                    if let Some(last) = b.out.last_mut() {
                        if last.params.order == params.order && last.params.alpha == alpha {
                            last.laplacian_order = Some(SchemeOrder::P2);
                        }
                    }
                }
            }
        }
        other => {
            return Err(TflError::Format(format!(
                "unknown table id `{other}` (known: {})",
                PRESET_IDS.join(", ")
            )))
        }
    }
    if b.out.is_empty() {
        return Err(TflError::Format(format!("{id}: no column matches the given filters")));
    }
    Ok(b.out)
}
