use std::path::PathBuf;

use thiserror::Error;

use crate::mesh::MortonKey;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read image {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("image {path} is not grayscale ({color})")]
    NotGrayscale { path: PathBuf, color: String },
    #[error("image dimensions {width}x{height} are degenerate (need at least 2x2)")]
    Degenerate { width: usize, height: usize },
    #[error("intensity grid has {got} values, expected {expected}")]
    GridLength { expected: usize, got: usize },
    #[error("intensity {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("domain must have positive side lengths, got {0:?}")]
    BadDomain([f64; 2]),
    #[error("{pixels} pixels along an axis cannot be split into blocks of {block} pixels")]
    MeshPixelMismatch { pixels: usize, block: usize },
    #[error("truth order {truth} must exceed every studied order (max {max})")]
    TruthOrder { truth: usize, max: usize },
    #[error("cannot write image {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("coordinates ({i}, {j}) out of range for level {level}")]
    OutOfRange { level: u8, i: u32, j: u32 },
    #[error("level {0} exceeds the maximum supported depth")]
    TooDeep(u8),
    #[error("key {0:?} is not a leaf of the forest")]
    NotALeaf(MortonKey),
    #[error("forest is not 2:1 balanced near {0:?}")]
    Unbalanced(MortonKey),
}

#[derive(Debug, Error)]
pub enum FeError {
    #[error("polynomial degree {0} is not supported (use 1 or 2)")]
    Degree(usize),
    #[error("kappa = 0 requires the rigid-body multiplier block (singular system)")]
    SingularWithoutMultiplier,
    #[error("rigid-body block requested on a space built without it")]
    NoMultiplier,
    #[error("vector of length {got} does not match space dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("sparse factorization failed for a {n}x{n} system ({nnz} nonzeros): {reason}")]
    Factorization { n: usize, nnz: usize, reason: String },
    #[error("material parameters invalid: {0}")]
    Material(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize, log: Box<crate::regsolver::IterationLog> },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fe(#[from] FeError),
}

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("theta_refine + theta_coarsen = {0} exceeds 1")]
    Fractions(f64),
    #[error("fraction {0} outside [0, 1]")]
    FractionRange(f64),
    #[error("manufactured-mode estimation requested without exact data")]
    MissingExactData,
}

#[derive(Debug, Error)]
pub enum AmrError {
    #[error("invalid AMR configuration: {0}")]
    Config(String),
    #[error("level {level}: {source}")]
    Solver { level: usize, source: SolverError },
    #[error("level {level}: {source}")]
    Fe { level: usize, source: FeError },
    #[error("level {level}: {source}")]
    Mesh { level: usize, source: MeshError },
    #[error("level {level}: {source}")]
    Estimator { level: usize, source: EstimatorError },
    #[error("level {level}: invariant violated: {what}")]
    Invariant { level: usize, what: String },
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("exact gradient is unbounded at the singular point {0:?}")]
    SingularPoint([f64; 2]),
    #[error("at least two levels are needed to compute rates, got {0}")]
    Levels(usize),
    #[error("level {level} did not converge within {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { level: usize, iterations: usize, residual: f64 },
    #[error("level {level}: {source}")]
    Solver { level: usize, source: SolverError },
    #[error("level {level}: {source}")]
    Fe { level: usize, source: FeError },
    #[error("level {level}: {source}")]
    Mesh { level: usize, source: MeshError },
    #[error("level {level}: {source}")]
    Estimator { level: usize, source: EstimatorError },
}
