//! Pseudo-time IMEX iteration with Anderson acceleration.

mod anderson;
mod solver;

pub use anderson::{AndersonStep, AndersonWindow};
pub use solver::{
    assemble_for, imex_step, solve_stationary, stationarity_residual, IterationLog, IterationRecord, SolverConfig,
    StopMode, StopStatus,
};

#[cfg(test)]
mod tests;
