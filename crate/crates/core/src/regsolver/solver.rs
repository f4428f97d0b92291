use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::error::SolverError;
use crate::fespace::{
    assemble_operator, image_load_and_similarity, AssembledSystem, FeFunction, FeSpace, LKind, MaterialParams,
};
use crate::image::ImagePair;

use super::AndersonWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// `||r_k|| / ||r(0)||` with `r` the stationarity residual.
    RelativeResidual,
    /// `||u_{k+1} - u_k|| / (dt ||u_k|| + eps)`.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stop_mode: StopMode,
    pub aa_depth: usize,
    pub l_kind: LKind,
    pub q_img: usize,
    pub cond_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            tol: 1e-8,
            max_iter: 1000,
            stop_mode: StopMode::RelativeResidual,
            aa_depth: 10,
            l_kind: LKind::Identity,
            q_img: 6,
            cond_limit: 1e10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolverError::Config("max_iter must be at least 1".into()));
        }
        if !(self.cond_limit > 1.0) {
            return Err(SolverError::Config(format!("cond_limit must exceed 1, got {}", self.cond_limit)));
        }
        Ok(())
    }
}

/// Assemble and factorize the pseudo-time operator with the step size of `config`.
pub fn assemble_for(
    space: &Arc<FeSpace>,
    params: &MaterialParams,
    config: &SolverConfig,
) -> Result<AssembledSystem, SolverError> {
    config.validate()?;
    let p = MaterialParams { dt: config.dt, ..*params };
    Ok(assemble_operator(space, &p, config.l_kind)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub velocity: f64,
    pub similarity: f64,
    pub aa_used: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopStatus {
    Converged,
    MaxIter,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub status: StopStatus,
    /// Similarity of the initial iterate.
    pub initial_similarity: f64,
    /// Reference norm used by the relative residual (`||r(0)||`, 1 if that vanishes).
    pub residual_scale: f64,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn converged(&self) -> bool {
        self.status == StopStatus::Converged
    }

    pub fn final_similarity(&self) -> f64 {
        self.last().map_or(self.initial_similarity, |r| r.similarity)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual,velocity,similarity,aa_used,seconds\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:.6e},{:.6e},{:.8e},{},{:.4}",
                r.iter, r.residual, r.velocity, r.similarity, r.aa_used as u8, r.seconds
            );
        }
        s
    }
}

/// Right-hand side of the stationary problem at `u`: `alpha b(u) + extra`, and the similarity.
fn forcing_terms(
    sys: &AssembledSystem,
    u: &FeFunction,
    pair: &ImagePair<'_>,
    q_img: usize,
    extra: Option<&[f64]>,
) -> (Vec<f64>, f64) {
    let (mut b, sim) = image_load_and_similarity(u, pair, sys.params().alpha, q_img);
    if let Some(e) = extra {
        for (bi, ei) in b.iter_mut().zip(e) {
            *bi += ei;
        }
    }
    (b, sim)
}

fn check(sys: &AssembledSystem, u: &FeFunction, extra: Option<&[f64]>) -> Result<(), SolverError> {
    use crate::error::FeError;
    let n = sys.space().n_dofs();
    if !Arc::ptr_eq(u.space(), sys.space()) {
        return Err(FeError::Dimension { expected: n, got: u.coeffs().len() }.into());
    }
    if let Some(e) = extra {
        if e.len() != n {
            return Err(FeError::Dimension { expected: n, got: e.len() }.into());
        }
    }
    Ok(())
}

/// One pseudo-time step `g(u_k)` reusing the factorization held by `sys`.
pub fn imex_step(
    sys: &AssembledSystem,
    u_k: &FeFunction,
    pair: &ImagePair<'_>,
    q_img: usize,
    extra: Option<&[f64]>,
) -> Result<FeFunction, SolverError> {
    check(sys, u_k, extra)?;
    let rhs = sys.load(u_k, pair, q_img, extra)?;
    Ok(FeFunction::from_coeffs(sys.space(), sys.solve(&rhs)?)?)
}

/// `r = alpha F_u(phi) + extra - a(u, phi)` including the multiplier rows.
pub fn stationarity_residual(
    sys: &AssembledSystem,
    u: &FeFunction,
    pair: &ImagePair<'_>,
    q_img: usize,
    extra: Option<&[f64]>,
) -> Result<Vec<f64>, SolverError> {
    check(sys, u, extra)?;
    Ok(sys.stationarity_residual(u, pair, q_img, extra)?)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Iterate `u_{k+1} = AA_m(g(u_k))` from `u0` until the stopping rule holds or
/// `max_iter` steps were taken.
pub fn solve_stationary(
    sys: &AssembledSystem,
    pair: &ImagePair<'_>,
    config: &SolverConfig,
    u0: FeFunction,
    extra: Option<&[f64]>,
) -> Result<(FeFunction, IterationLog), SolverError> {
    config.validate()?;
    check(sys, &u0, extra)?;
    if sys.params().dt != config.dt || sys.l_kind() != config.l_kind {
        return Err(SolverError::Config("system was assembled with a different dt or proximal operator".into()));
    }
    let start = Instant::now();
    let space = sys.space().clone();
    let dt = config.dt;
    let q = config.q_img;

    let zero = FeFunction::zeros(&space);
    let scale = {
        let (b0, _) = forcing_terms(sys, &zero, pair, q, extra);
        let s = norm(&b0);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };

    let mut window = AndersonWindow::new(config.aa_depth, config.cond_limit);
    let mut x = u0;
    let (mut b, sim0) = forcing_terms(sys, &x, pair, q, extra);
    let mut log = IterationLog {
        records: Vec::new(),
        status: StopStatus::MaxIter,
        initial_similarity: sim0,
        residual_scale: scale,
    };

    for iter in 1..=config.max_iter {
        let mut rhs = b;
        sys.prox().add_matvec(1.0 / dt, x.coeffs(), &mut rhs);
        let g = sys.solve(&rhs)?;
        let step = window.update(x.coeffs(), &g);
        let next = FeFunction::from_coeffs(&space, step.next)?;

        let (b_next, sim) = forcing_terms(sys, &next, pair, q, extra);
        let mut r = b_next.clone();
        sys.stationary_operator().add_matvec(-1.0, next.coeffs(), &mut r);
        let residual = norm(&r) / scale;
        let dx: Vec<f64> = next.coeffs().iter().zip(x.coeffs()).map(|(a, b)| a - b).collect();
        let velocity = norm(&dx) / (dt * x.norm2() + f64::EPSILON);

        log.records.push(IterationRecord {
            iter,
            residual,
            velocity,
            similarity: sim,
            aa_used: step.accelerated,
            seconds: start.elapsed().as_secs_f64(),
        });
        if !residual.is_finite() || !sim.is_finite() || next.coeffs().iter().any(|v| !v.is_finite()) {
            log.status = StopStatus::NonFinite;
            return Err(SolverError::NonFinite { iteration: iter, log: Box::new(log) });
        }
        x = next;
        b = b_next;
        let measure = match config.stop_mode {
            StopMode::RelativeResidual => residual,
            StopMode::Velocity => velocity,
        };
        if measure < config.tol {
            log.status = StopStatus::Converged;
            break;
        }
    }
    Ok((x, log))
}
