//! Adaptive loop: solve to stationarity, estimate, mark, adapt, transfer.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{AmrError, ImageError};
use crate::estimator::{compute_indicators, mark_fraction, EstimatorOptions, MarkingRecord};
use crate::fespace::{build_space, continuity_defect, extra_load, transfer, ExtraForcing, FeFunction, MaterialParams};
use crate::geometry::Rect;
use crate::image::{ImagePair, IntensityField, RasterImage};
use crate::mesh::{MortonKey, QuadForest};
use crate::regsolver::{assemble_for, solve_stationary, IterationLog, SolverConfig};

/// Slack on the per-level similarity check.
pub const SIMILARITY_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct AmrConfig {
    pub domain: Rect,
    pub degree: usize,
    /// Uniform refinements of the one-cell mesh before the first solve.
    pub n0_ref: u32,
    /// Adaptive cycles after the first solve.
    pub n_ref: usize,
    pub theta_refine: f64,
    pub theta_coarsen: f64,
    pub params: MaterialParams,
    /// Constrain rigid-body modes with multipliers (needed when `kappa = 0`).
    pub rm_mode: bool,
    /// Solver settings per level; the last entry is reused for later levels.
    pub solvers: Vec<SolverConfig>,
    /// Exactness order of the estimator rules.
    pub estimator_order: usize,
}

impl AmrConfig {
    pub fn new(params: MaterialParams, solver: SolverConfig) -> Self {
        Self {
            domain: Rect::unit(),
            degree: 1,
            n0_ref: 4,
            n_ref: 5,
            theta_refine: 0.4,
            theta_coarsen: 0.2,
            params,
            rm_mode: params.kappa == 0.0,
            estimator_order: solver.q_img,
            solvers: vec![solver],
        }
    }

    pub fn solver(&self, level: usize) -> &SolverConfig {
        &self.solvers[level.min(self.solvers.len() - 1)]
    }

    pub fn validate(&self) -> Result<(), AmrError> {
        let bad = |m: String| Err(AmrError::Config(m));
        if !(self.domain.size[0] > 0.0 && self.domain.size[1] > 0.0) {
            return bad(format!("domain must have positive size, got {:?}", self.domain.size));
        }
        if !matches!(self.degree, 1 | 2) {
            return bad(format!("degree must be 1 or 2, got {}", self.degree));
        }
        for t in [self.theta_refine, self.theta_coarsen] {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("marking fraction {t} outside [0, 1]"));
            }
        }
        if self.theta_refine + self.theta_coarsen > 1.0 {
            return bad(format!("theta_refine + theta_coarsen = {} exceeds 1", self.theta_refine + self.theta_coarsen));
        }
        if self.theta_coarsen > 0.0 && self.n0_ref == 0 {
            return bad("coarsening needs at least one initial uniform refinement".into());
        }
        if self.params.kappa == 0.0 && !self.rm_mode {
            return bad("kappa = 0 requires rigid-body multipliers".into());
        }
        if self.solvers.is_empty() {
            return bad("at least one solver configuration is required".into());
        }
        for s in &self.solvers {
            s.validate().map_err(|e| AmrError::Config(e.to_string()))?;
        }
        if self.estimator_order == 0 {
            return bad("estimator order must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub dofs: usize,
    pub cells: usize,
    pub iterations: usize,
    pub converged: bool,
    pub theta: f64,
    pub initial_similarity: f64,
    pub similarity: f64,
    pub seconds: f64,
}

impl LevelStats {
    /// Final similarity does not exceed the one after transfer by more than the slack.
    pub fn similarity_ok(&self) -> bool {
        self.similarity <= self.initial_similarity * (1.0 + SIMILARITY_SLACK) + f64::EPSILON
    }
}

pub fn level_stats_csv(levels: &[LevelStats]) -> String {
    let mut s = String::from("level,dofs,iterations,theta,similarity,seconds\n");
    for l in levels {
        let _ = writeln!(
            s,
            "{},{},{},{:.6e},{:.8e},{:.4}",
            l.level, l.dofs, l.iterations, l.theta, l.similarity, l.seconds
        );
    }
    s
}

/// Everything produced by [`run_amr`].
#[derive(Debug, Clone)]
pub struct AmrResult {
    pub solution: FeFunction,
    pub levels: Vec<LevelStats>,
    pub logs: Vec<IterationLog>,
    pub marks: Vec<MarkingRecord>,
    /// Mesh and per-leaf indicator `Theta_K` of every level.
    pub meshes: Vec<(QuadForest, Vec<f64>)>,
}

pub fn run_amr(config: &AmrConfig, pair: &ImagePair<'_>) -> Result<AmrResult, AmrError> {
    run_amr_with(config, pair, None)
}

/// [`run_amr`] with optional manufactured data, which enters both the load and the estimator.
pub fn run_amr_with(
    config: &AmrConfig,
    pair: &ImagePair<'_>,
    manufactured: Option<&dyn ExtraForcing>,
) -> Result<AmrResult, AmrError> {
    config.validate()?;
    let mut forest = QuadForest::new(config.domain).uniform_refine(config.n0_ref);
    let mut prev: Option<FeFunction> = None;
    let mut levels = Vec::with_capacity(config.n_ref + 1);
    let mut logs = Vec::with_capacity(config.n_ref + 1);
    let mut marks = Vec::with_capacity(config.n_ref);
    let mut meshes = Vec::with_capacity(config.n_ref + 1);

    for level in 0..=config.n_ref {
        let start = Instant::now();
        check_mesh(&forest, level)?;
        let solver = config.solver(level);
        let space = build_space(&forest, config.degree, &config.params, config.rm_mode)
            .map_err(|source| AmrError::Fe { level, source })?;
        let extra = manufactured.map(|m| extra_load(&space, m));
        // a fresh factorization per level; the AA window lives inside the solve
        let sys = assemble_for(&space, &config.params, solver).map_err(|source| AmrError::Solver { level, source })?;
        let u0 = match prev.take() {
            Some(p) => transfer(&p, &space),
            None => FeFunction::zeros(&space),
        };
        let (u, log) = solve_stationary(&sys, pair, solver, u0, extra.as_deref())
            .map_err(|source| AmrError::Solver { level, source })?;

        let scale = u.displacement().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let defect = continuity_defect(&u, 5);
        if defect > 1e-12 * scale {
            return Err(AmrError::Invariant { level, what: format!("continuity defect {defect:.3e}") });
        }

        let opts = EstimatorOptions {
            manufactured,
            require_manufactured: false,
            ..EstimatorOptions::new(config.estimator_order)
        };
        let ind = compute_indicators(&u, pair, &config.params, &opts)
            .map_err(|source| AmrError::Estimator { level, source })?;
        let theta = ind.theta();
        levels.push(LevelStats {
            level,
            dofs: space.n_dofs(),
            cells: forest.len(),
            iterations: log.iterations(),
            converged: log.converged(),
            theta,
            initial_similarity: log.initial_similarity,
            similarity: log.final_similarity(),
            seconds: start.elapsed().as_secs_f64(),
        });
        logs.push(log);
        meshes.push((forest.clone(), ind.totals().iter().map(|v| v.sqrt()).collect()));

        if level < config.n_ref {
            let m = mark_fraction(&ind, config.theta_refine, config.theta_coarsen)
                .map_err(|source| AmrError::Estimator { level, source })?;
            marks.push(MarkingRecord {
                level,
                n_cells: forest.len(),
                theta,
                refined: m.refine.len(),
                coarsened: m.coarsen.len(),
            });
            let keys = |idx: &[usize]| -> Vec<MortonKey> { idx.iter().map(|&i| forest.leaves()[i]).collect() };
            let (next, _) =
                forest.adapt(&keys(&m.refine), &keys(&m.coarsen)).map_err(|source| AmrError::Mesh { level, source })?;
            forest = next;
        }
        prev = Some(u);
    }
    Ok(AmrResult { solution: prev.expect("at least one level"), levels, logs, marks, meshes })
}

fn check_mesh(forest: &QuadForest, level: usize) -> Result<(), AmrError> {
    forest.check_balance().map_err(|source| AmrError::Mesh { level, source })?;
    forest.check_tiling().map_err(|source| AmrError::Mesh { level, source })
}

/// `T(x + u_h(x))` at the pixel centers of a `width x height` raster over `domain`, clamped to `[0, 1]`.
pub fn warp_image(
    template: &dyn IntensityField,
    u: &FeFunction,
    width: usize,
    height: usize,
    domain: Rect,
) -> Result<RasterImage, ImageError> {
    let data: Vec<f64> = (0..width * height)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % width, idx / width);
            let x = [
                domain.origin[0] + (i as f64 + 0.5) * domain.size[0] / width as f64,
                domain.origin[1] + (j as f64 + 0.5) * domain.size[1] / height as f64,
            ];
            let d = u.evaluate(x);
            template.value([x[0] + d[0], x[1] + d[1]]).clamp(0.0, 1.0)
        })
        .collect();
    RasterImage::new(width, height, data)
}

#[cfg(test)]
mod tests;
