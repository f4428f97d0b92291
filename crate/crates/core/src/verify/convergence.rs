use std::fmt::Write as _;

use crate::error::VerifyError;
use crate::estimator::{compute_indicators, mark_fraction, EstimatorOptions};
use crate::fespace::{build_space, error_norms, extra_load, transfer, FeFunction};
use crate::geometry::Rect;
use crate::mesh::QuadForest;
use crate::regsolver::{assemble_for, solve_stationary, SolverConfig, StopMode};

use super::ManufacturedCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

impl RefinementMode {
    pub fn name(&self) -> &'static str {
        match self {
            RefinementMode::Uniform => "uniform",
            RefinementMode::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dofs: usize,
    /// Largest cell diameter.
    pub h: f64,
    /// `|u - u_h|_1 = ||e(u - u_h)||`.
    pub error: f64,
    pub rate: Option<f64>,
    pub theta: f64,
    pub eff: f64,
    pub iterations: usize,
}

/// Everything a convergence run needs besides the case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSetup {
    pub mode: RefinementMode,
    pub degree: usize,
    pub levels: usize,
    /// Uniform refinements of the unit square before the first level.
    pub initial_refinements: u32,
    pub theta_refine: f64,
    pub solver: SolverConfig,
    /// Order of the error and estimator rules (the origin cell gets six more).
    pub error_order: usize,
}

impl ConvergenceSetup {
    pub fn new(mode: RefinementMode, degree: usize, levels: usize, theta_refine: f64) -> Self {
        let initial_refinements = match mode {
            RefinementMode::Uniform => 1,
            RefinementMode::Adaptive => 2,
        };
        Self {
            mode,
            degree,
            levels,
            initial_refinements,
            theta_refine,
            solver: SolverConfig {
                dt: 1.0,
                tol: 1e-11,
                max_iter: 400,
                stop_mode: StopMode::RelativeResidual,
                aa_depth: 5,
                q_img: 6,
                ..SolverConfig::default()
            },
            error_order: 2 * degree + 3,
        }
    }
}

pub fn run_convergence(
    case: &ManufacturedCase,
    mode: RefinementMode,
    k: usize,
    levels: usize,
    theta_refine: f64,
) -> Result<Vec<ConvergenceRow>, VerifyError> {
    run_convergence_with(case, &ConvergenceSetup::new(mode, k, levels, theta_refine))
}

pub fn run_convergence_with(
    case: &ManufacturedCase,
    setup: &ConvergenceSetup,
) -> Result<Vec<ConvergenceRow>, VerifyError> {
    if setup.levels < 2 {
        return Err(VerifyError::Levels(setup.levels));
    }
    let params = case.params;
    let forcing = case.forcing(setup.error_order);
    let pair = case.pair();
    let exact = |x: [f64; 2]| {
        let (u, g, _) = case.derivatives(x);
        (u, g)
    };
    let mut forest = QuadForest::new(Rect::unit()).uniform_refine(setup.initial_refinements);
    let mut prev: Option<FeFunction> = None;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(setup.levels);
    for level in 0..setup.levels {
        let space =
            build_space(&forest, setup.degree, &params, true).map_err(|source| VerifyError::Fe { level, source })?;
        let extra = extra_load(&space, &forcing);
        let sys =
            assemble_for(&space, &params, &setup.solver).map_err(|source| VerifyError::Solver { level, source })?;
        let u0 = prev.as_ref().map_or_else(|| FeFunction::zeros(&space), |p| transfer(p, &space));
        let (u, log) = solve_stationary(&sys, &pair, &setup.solver, u0, Some(&extra))
            .map_err(|source| VerifyError::Solver { level, source })?;
        if !log.converged() {
            return Err(VerifyError::NotConverged {
                level,
                iterations: log.iterations(),
                residual: log.last().map_or(f64::NAN, |r| r.residual),
            });
        }
        let error = error_norms(&u, &exact, setup.error_order, case.singular_point()).energy;
        let opts = EstimatorOptions::manufactured(setup.error_order.max(setup.solver.q_img), &forcing);
        let ind =
            compute_indicators(&u, &pair, &params, &opts).map_err(|source| VerifyError::Estimator { level, source })?;
        let theta = ind.theta();
        let h = (0..space.n_cells()).map(|c| space.cell_geometry(c).h).fold(0.0, f64::max);
        let dofs = space.n_dofs();
        let rate = rows.last().map(|p| match setup.mode {
            RefinementMode::Uniform => (error / p.error).ln() / (h / p.h).ln(),
            RefinementMode::Adaptive => -2.0 * (error / p.error).ln() / (dofs as f64 / p.dofs as f64).ln(),
        });
        rows.push(ConvergenceRow { dofs, h, error, rate, theta, eff: error / theta, iterations: log.iterations() });

        if level + 1 < setup.levels {
            forest = match setup.mode {
                RefinementMode::Uniform => forest.uniform_refine(1),
                RefinementMode::Adaptive => {
                    let marks = mark_fraction(&ind, setup.theta_refine, 0.0)
                        .map_err(|source| VerifyError::Estimator { level, source })?;
                    let keys: Vec<_> = marks.refine.iter().map(|&i| forest.leaves()[i]).collect();
                    forest.adapt(&keys, &[]).map_err(|source| VerifyError::Mesh { level, source })?.0
                }
            };
        }
        prev = Some(u);
    }
    Ok(rows)
}

/// CSV with the column layout `dofs,h,error,rate,eff` (empty rate on the first row).
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("dofs,h,error,rate,eff\n");
    for r in rows {
        let rate = r.rate.map_or(String::new(), |v| format!("{v:.3}"));
        let _ = writeln!(s, "{},{:.4},{:.3e},{},{:.3}", r.dofs, r.h, r.error, rate, r.eff);
    }
    s
}

/// Whitespace-separated `dofs error theta` columns for plotting.
pub fn error_vs_dofs(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("# dofs error theta\n");
    for r in rows {
        let _ = writeln!(s, "{} {:.6e} {:.6e}", r.dofs, r.error, r.theta);
    }
    s
}
