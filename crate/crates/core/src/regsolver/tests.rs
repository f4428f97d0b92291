use std::sync::Arc;

use super::*;
use crate::fespace::{build_space, FeFunction, FeSpace, LKind, MaterialParams};
use crate::geometry::Rect;
use crate::image::{ImagePair, Paraboloid};
use crate::mesh::QuadForest;

fn setup(levels: u32, k: usize) -> (Arc<FeSpace>, MaterialParams) {
    let p = MaterialParams::new(1.0, 0.25, 0.5, 1.0, 1.0).unwrap();
    let f = QuadForest::new(Rect::unit()).uniform_refine(levels);
    (build_space(&f, k, &p, true).unwrap(), p)
}

fn config(m: usize) -> SolverConfig {
    SolverConfig { aa_depth: m, tol: 1e-10, max_iter: 500, ..SolverConfig::default() }
}

#[test]
fn identical_images_converge_in_one_iteration() {
    let (s, p) = setup(2, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let pair = ImagePair::new(&t, &t);
    let sys = assemble_for(&s, &p, &config(5)).unwrap();
    let (u, log) = solve_stationary(&sys, &pair, &config(5), FeFunction::zeros(&s), None).unwrap();
    assert_eq!(log.iterations(), 1);
    assert!(log.converged());
    assert!(u.coeffs().iter().all(|v| *v == 0.0));
    let next = imex_step(&sys, &u, &pair, 6, None).unwrap();
    assert!(next.coeffs().iter().all(|v| *v == 0.0));
}

#[test]
fn imex_step_matches_dense_solve() {
    let (s, p) = setup(1, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let r = Paraboloid::new([0.2, 0.2]);
    let pair = ImagePair::new(&t, &r);
    let cfg = SolverConfig { dt: 0.5, ..config(0) };
    let sys = assemble_for(&s, &p, &cfg).unwrap();
    let u = FeFunction::interpolate(&s, |x| [0.1 * x[1], -0.05 * x[0]]);
    let rhs = sys.load(&u, &pair, 6, None).unwrap();
    let n = s.n_dofs();
    assert!(n <= 50);
    let d = sys.matrix().to_dense();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| d[i][j]);
    let x = a.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
    let step = imex_step(&sys, &u, &pair, 6, None).unwrap();
    for (a, b) in step.coeffs().iter().zip(x.iter()) {
        assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn depth_zero_reproduces_plain_imex_bitwise() {
    let (s, p) = setup(2, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let r = Paraboloid::new([0.2, 0.2]);
    let pair = ImagePair::new(&t, &r);
    let cfg = SolverConfig { max_iter: 7, tol: 1e-300, ..config(0) };
    let sys = assemble_for(&s, &p, &cfg).unwrap();
    let (u, log) = solve_stationary(&sys, &pair, &cfg, FeFunction::zeros(&s), None).unwrap();
    assert_eq!(log.status, StopStatus::MaxIter);
    let mut v = FeFunction::zeros(&s);
    for _ in 0..7 {
        v = imex_step(&sys, &v, &pair, 6, None).unwrap();
    }
    assert_eq!(u.coeffs(), v.coeffs());
    assert!(log.records.iter().all(|r| !r.aa_used));
}

#[test]
fn accepted_iterate_meets_residual_tolerance() {
    let (s, p) = setup(3, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let r = Paraboloid::new([0.2, 0.2]);
    let pair = ImagePair::new(&t, &r);
    for l in [LKind::Identity, LKind::H1] {
        let cfg = SolverConfig { l_kind: l, ..config(5) };
        let sys = assemble_for(&s, &p, &cfg).unwrap();
        let (u, log) = solve_stationary(&sys, &pair, &cfg, FeFunction::zeros(&s), None).unwrap();
        assert!(log.converged(), "{:?}", log.last());
        let res = stationarity_residual(&sys, &u, &pair, 6, None).unwrap();
        let rel = res.iter().map(|v| v * v).sum::<f64>().sqrt() / log.residual_scale;
        assert!(rel < cfg.tol);
        assert!(log.final_similarity() < log.initial_similarity);
    }
}

#[test]
fn acceleration_reduces_iterations_on_synthetic_pair() {
    let (s, p) = setup(4, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let r = Paraboloid::new([0.2, 0.2]);
    let pair = ImagePair::new(&t, &r);
    let plain = config(0);
    let sys = assemble_for(&s, &p, &plain).unwrap();
    let (u0, l0) = solve_stationary(&sys, &pair, &plain, FeFunction::zeros(&s), None).unwrap();
    let (u10, l10) = solve_stationary(&sys, &pair, &config(10), FeFunction::zeros(&s), None).unwrap();
    assert!(l0.converged() && l10.converged());
    assert!(l10.iterations() < l0.iterations(), "{} vs {}", l10.iterations(), l0.iterations());
    let d: Vec<f64> = u0.coeffs().iter().zip(u10.coeffs()).map(|(a, b)| a - b).collect();
    let diff = FeFunction::from_coeffs(&s, d).unwrap();
    assert!(crate::fespace::norms(&diff).energy < 1e-6);
}

#[test]
fn mismatched_configuration_rejected() {
    let (s, p) = setup(1, 1);
    let t = Paraboloid::new([0.8, 0.8]);
    let pair = ImagePair::new(&t, &t);
    let sys = assemble_for(&s, &p, &config(0)).unwrap();
    let other = SolverConfig { dt: 2.0, ..config(0) };
    assert!(solve_stationary(&sys, &pair, &other, FeFunction::zeros(&s), None).is_err());
    let bad = SolverConfig { tol: 0.0, ..config(0) };
    assert!(bad.validate().is_err());
    let (s2, _) = setup(2, 1);
    assert!(solve_stationary(&sys, &pair, &config(0), FeFunction::zeros(&s2), None).is_err());
}

#[test]
fn csv_header() {
    let log = IterationLog {
        records: vec![IterationRecord {
            iter: 1,
            residual: 0.5,
            velocity: 1.0,
            similarity: 0.1,
            aa_used: true,
            seconds: 0.0,
        }],
        status: StopStatus::MaxIter,
        initial_similarity: 0.2,
        residual_scale: 1.0,
    };
    let csv = log.to_csv();
    assert!(csv.starts_with("iter,residual,velocity,similarity,aa_used,seconds\n1,5.000000e-1,"));
}
