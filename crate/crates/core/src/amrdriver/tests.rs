use super::*;
use crate::image::{brain_phantom, build_field, similarity, Paraboloid};
use crate::verify::ManufacturedCase;

fn params() -> MaterialParams {
    MaterialParams::new(1.0, 0.25, 0.5, 1.0, 1.0).unwrap()
}

fn solver() -> SolverConfig {
    SolverConfig { dt: 1.0, tol: 1e-10, max_iter: 200, aa_depth: 5, ..SolverConfig::default() }
}

fn config(n0: u32, n_ref: usize, tr: f64, tc: f64) -> AmrConfig {
    AmrConfig { n0_ref: n0, n_ref, theta_refine: tr, theta_coarsen: tc, ..AmrConfig::new(params(), solver()) }
}

fn paraboloids() -> (Paraboloid, Paraboloid) {
    (Paraboloid::new([0.6, 0.55]), Paraboloid::new([0.5, 0.5]))
}

#[test]
fn no_cycles_is_a_single_solve() {
    let (t, r) = paraboloids();
    let pair = ImagePair::new(&t, &r);
    let cfg = config(3, 0, 0.4, 0.2);
    let res = run_amr(&cfg, &pair).unwrap();
    assert_eq!(res.levels.len(), 1);
    assert!(res.marks.is_empty());

    let forest = QuadForest::new(Rect::unit()).uniform_refine(3);
    let space = build_space(&forest, 1, &params(), false).unwrap();
    let sys = assemble_for(&space, &params(), &solver()).unwrap();
    let (u, log) = solve_stationary(&sys, &pair, &solver(), FeFunction::zeros(&space), None).unwrap();
    assert_eq!(res.solution.coeffs(), u.coeffs());
    assert_eq!(res.levels[0].iterations, log.iterations());
}

#[test]
fn zero_fractions_resolve_on_the_same_mesh_in_one_step() {
    let (t, r) = paraboloids();
    let res = run_amr(&config(3, 3, 0.0, 0.0), &ImagePair::new(&t, &r)).unwrap();
    assert_eq!(res.levels.len(), 4);
    assert!(res.levels[0].iterations > 1);
    for l in &res.levels[1..] {
        assert!(l.iterations <= 1, "{l:?}");
        assert_eq!(l.dofs, res.levels[0].dofs);
        assert!(l.converged);
    }
    assert!(res.marks.iter().all(|m| m.refined == 0 && m.coarsened == 0));
}

#[test]
fn adaptive_run_is_deterministic_and_keeps_invariants() {
    let (t, r) = paraboloids();
    let pair = ImagePair::new(&t, &r);
    let cfg = config(3, 4, 0.3, 0.1);
    let a = run_amr(&cfg, &pair).unwrap();
    let b = run_amr(&cfg, &pair).unwrap();
    assert_eq!(a.levels.len(), 5);
    assert_eq!(a.marks.len(), 4);
    assert_eq!(a.logs.len(), 5);
    for ((fa, ia), (fb, ib)) in a.meshes.iter().zip(&b.meshes) {
        assert_eq!(fa.leaves(), fb.leaves());
        assert_eq!(ia, ib);
        assert!(fa.is_balanced());
        assert!(fa.check_tiling().is_ok());
        assert_eq!(ia.len(), fa.len());
    }
    assert_eq!(a.solution.coeffs(), b.solution.coeffs());
    assert!(a.meshes.windows(2).any(|w| w[0].0.leaves() != w[1].0.leaves()));
    for l in &a.levels {
        assert!(l.converged && l.similarity_ok(), "{l:?}");
    }
    for (m, l) in a.marks.iter().zip(&a.levels) {
        assert_eq!(m.n_cells, l.cells);
        assert_eq!(m.refined, (0.3 * l.cells as f64).floor() as usize);
    }
}

#[test]
fn manufactured_data_drives_refinement_toward_the_corner() {
    let case = ManufacturedCase::singular();
    let forcing = case.forcing(5);
    let cfg = AmrConfig {
        n0_ref: 2,
        n_ref: 3,
        theta_refine: 0.15,
        theta_coarsen: 0.0,
        rm_mode: true,
        estimator_order: 6,
        ..AmrConfig::new(case.params, SolverConfig { tol: 1e-11, q_img: 6, ..solver() })
    };
    let res = run_amr_with(&cfg, &case.pair(), Some(&forcing)).unwrap();
    let finest = res.meshes.last().unwrap().0.clone();
    let corner = finest.leaves()[finest.locate_point([1e-9, 1e-9])];
    assert_eq!(corner.level(), 5);
    assert!(res.levels.windows(2).all(|w| w[1].theta < w[0].theta));
}

#[test]
fn invalid_configurations_are_rejected() {
    let (t, r) = paraboloids();
    let pair = ImagePair::new(&t, &r);
    let cases = [
        config(0, 2, 0.3, 0.1),
        config(2, 2, 0.7, 0.4),
        config(2, 2, -0.1, 0.0),
        AmrConfig { degree: 3, ..config(2, 1, 0.3, 0.0) },
        AmrConfig { solvers: vec![], ..config(2, 1, 0.3, 0.0) },
        AmrConfig { solvers: vec![SolverConfig { dt: 0.0, ..solver() }], ..config(2, 1, 0.3, 0.0) },
        AmrConfig {
            params: MaterialParams::new(1.0, 0.25, 0.0, 1.0, 1.0).unwrap(),
            rm_mode: false,
            ..config(2, 1, 0.3, 0.0)
        },
    ];
    for c in cases {
        assert!(matches!(run_amr(&c, &pair), Err(AmrError::Config(_))), "{c:?}");
    }
    assert!(run_amr(&config(0, 1, 0.3, 0.0), &pair).is_ok());
}

#[test]
fn per_level_solver_settings() {
    let mut cfg = config(2, 2, 0.2, 0.0);
    cfg.solvers = vec![SolverConfig { tol: 1e-2, ..solver() }, SolverConfig { tol: 1e-9, ..solver() }];
    assert_eq!(cfg.solver(0).tol, 1e-2);
    assert_eq!(cfg.solver(1).tol, 1e-9);
    assert_eq!(cfg.solver(7).tol, 1e-9);
    let (t, r) = paraboloids();
    let res = run_amr(&cfg, &ImagePair::new(&t, &r)).unwrap();
    assert!(res.logs[0].last().unwrap().residual <= 1e-2);
    assert!(res.logs[2].last().unwrap().residual <= 1e-9);
}

#[test]
fn level_csv_layout() {
    let l = LevelStats {
        level: 2,
        dofs: 53,
        cells: 16,
        iterations: 7,
        converged: true,
        theta: 0.25,
        initial_similarity: 0.2,
        similarity: 0.125,
        seconds: 1.5,
    };
    assert_eq!(
        level_stats_csv(&[l]),
        "level,dofs,iterations,theta,similarity,seconds\n2,53,7,2.500000e-1,1.25000000e-1,1.5000\n"
    );
    assert!(l.similarity_ok());
    assert!(!LevelStats { similarity: 0.21, ..l }.similarity_ok());
}

#[test]
fn zero_displacement_resamples_the_template() {
    let img = brain_phantom(24, 0.0);
    let field = build_field(&img, Rect::unit(), 1.0).unwrap();
    let space = build_space(&QuadForest::new(Rect::unit()).uniform_refine(2), 1, &params(), false).unwrap();
    let w = warp_image(&field, &FeFunction::zeros(&space), 24, 24, Rect::unit()).unwrap();
    for j in 0..24 {
        for i in 0..24 {
            assert!((w.get(i, j) - field.coefficients().get(i, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn one_pixel_translation_shifts_the_image() {
    let img = brain_phantom(32, 0.0);
    let field = build_field(&img, Rect::unit(), 1.0).unwrap();
    let space = build_space(&QuadForest::new(Rect::unit()).uniform_refine(1), 1, &params(), false).unwrap();
    let px = 1.0 / 32.0;
    let u = FeFunction::interpolate(&space, |_| [px, 0.0]);
    let w = warp_image(&field, &u, 32, 32, Rect::unit()).unwrap();
    for j in 0..32 {
        for i in 0..31 {
            assert!((w.get(i, j) - field.coefficients().get(i + 1, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn registration_reduces_the_mismatch_of_the_warped_image() {
    let (t_img, r_img) = (brain_phantom(32, 0.03), brain_phantom(32, 0.0));
    let t = build_field(&t_img, Rect::unit(), 1.0).unwrap();
    let r = build_field(&r_img, Rect::unit(), 1.0).unwrap();
    let pair = ImagePair::new(&t, &r);
    let p = MaterialParams::new(1.0, 0.25, 0.5, 100.0, 1e-2).unwrap();
    let s = SolverConfig { dt: 1e-2, tol: 1e-6, max_iter: 500, ..SolverConfig::default() };
    let cfg = AmrConfig { n0_ref: 4, n_ref: 2, ..AmrConfig::new(p, s) };
    let res = run_amr(&cfg, &pair).unwrap();
    let zero = FeFunction::zeros(res.solution.space());
    let before = similarity(&pair, &zero, 6);
    let after = similarity(&pair, &res.solution, 6);
    assert!(after < 0.7 * before, "{after} vs {before}");

    let warped = warp_image(&t, &res.solution, 32, 32, Rect::unit()).unwrap();
    let diff = |a: &RasterImage| -> f64 {
        a.intensity().iter().zip(r.coefficients().intensity()).map(|(x, y)| (x - y).powi(2)).sum()
    };
    assert!(diff(&warped) < diff(t.coefficients()));
}
