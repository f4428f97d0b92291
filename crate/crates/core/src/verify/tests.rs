use std::f64::consts::PI;

use rand::{Rng, SeedableRng};

use super::*;
use crate::error::VerifyError;
use crate::fespace::ExtraForcing;
use crate::quadrature::TensorRule;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn gradients_and_hessians_match_central_differences() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for case in [ManufacturedCase::smooth(), ManufacturedCase::singular()] {
        let d = 1e-6;
        for _ in 0..100 {
            let x = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
            let (_, g, h) = case.derivatives(x);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += d;
                xm[j] -= d;
                let (up, gp, _) = case.derivatives(xp);
                let (um, gm, _) = case.derivatives(xm);
                for i in 0..2 {
                    let fd = (up[i] - um[i]) / (2.0 * d);
                    assert!(close(g[i][j], fd, 1e-6), "{:?} grad {i}{j}: {} vs {fd}", case.kind, g[i][j]);
                    // d/dx_j of the first-derivative row gives (xx, xy) or (xy, yy)
                    let fd0 = (gp[i][0] - gm[i][0]) / (2.0 * d);
                    let fd1 = (gp[i][1] - gm[i][1]) / (2.0 * d);
                    let (h0, h1) = if j == 0 { (h[i][0], h[i][1]) } else { (h[i][1], h[i][2]) };
                    assert!(close(h0, fd0, 1e-5) && close(h1, fd1, 1e-5), "{:?} hess {i} {j}", case.kind);
                }
            }
        }
    }
}

#[test]
fn f_ex_balances_the_divergence_of_the_exact_stress() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    for case in [ManufacturedCase::smooth(), ManufacturedCase::singular()] {
        let d = 1e-5;
        for _ in 0..20 {
            let x = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
            let e = case.eval(x);
            let mut div = [0.0; 2];
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += d;
                xm[j] -= d;
                let (sp, sm) = (case.eval(xp).sigma, case.eval(xm).sigma);
                for i in 0..2 {
                    div[i] += (sp[i][j] - sm[i][j]) / (2.0 * d);
                }
            }
            for (d, f) in div.iter().zip(e.f_ex) {
                assert!((d + f).abs() < 1e-6, "{:?}", case.kind);
            }
        }
    }
}

#[test]
fn smooth_solution_at_origin() {
    let case = ManufacturedCase::smooth();
    let e = case.eval([0.0, 0.0]);
    let a = case.amplitude;
    assert!((e.u[0] - a * 4.0 / (PI * PI)).abs() < 1e-15);
    assert!((e.u[1] + a).abs() < 1e-15);
    assert!(case.try_eval([0.0, 0.0]).is_ok());
}

#[test]
fn singular_solution_is_polar_power() {
    let case = ManufacturedCase::singular();
    let (r, t) = (0.3f64, 0.7f64);
    let (u, _, _) = case.derivatives([r * t.cos(), r * t.sin()]);
    let m = 0.1 * r.powf(2.0 / 3.0);
    assert!((u[0] - m * (2.0 * t / 3.0).cos()).abs() < 1e-15);
    assert!((u[1] - m * (2.0 * t / 3.0).sin()).abs() < 1e-15);
    assert!(matches!(case.try_eval([0.0, 0.0]), Err(VerifyError::SingularPoint(_))));
    assert!(case.try_eval([1e-3, 0.0]).is_ok());
}

#[test]
fn rigid_moments_match_composite_rule() {
    for case in [ManufacturedCase::smooth(), ManufacturedCase::singular()] {
        let rule = TensorRule::new(4);
        let n = 256;
        let s = 1.0 / n as f64;
        let mut acc = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = [(i as f64 + p[0]) * s, (j as f64 + p[1]) * s];
                    let (u, _, _) = case.derivatives(x);
                    acc[0] += w * s * s * u[0];
                    acc[1] += w * s * s * u[1];
                    acc[2] += w * s * s * (-x[1] * u[0] + x[0] * u[1]);
                }
            }
        }
        let m = case.rigid_moments();
        for c in 0..3 {
            assert!((m[c] - acc[c]).abs() < 1e-7, "{:?} {c}: {} vs {}", case.kind, m[c], acc[c]);
        }
    }
}

#[test]
fn forcing_provides_robin_datum() {
    let case = ManufacturedCase::smooth();
    let f = case.forcing(7);
    let x = [1.0, 0.4];
    let e = case.eval(x);
    let t = f.boundary(x, [1.0, 0.0]);
    assert!((t[0] - e.sigma[0][0] - 0.5 * e.u[0]).abs() < 1e-15);
    assert!((t[1] - e.sigma[1][0] - 0.5 * e.u[1]).abs() < 1e-15);
    let v = f.volume(x);
    assert!((v[0] - e.f_ex[0] - e.g_ex[0]).abs() < 1e-15);
    assert_eq!(f.quadrature_order(), 7);
    assert_eq!(f.singular_point(), None);
    assert_eq!(ManufacturedCase::singular().forcing(3).singular_point(), Some([0.0, 0.0]));
}

#[test]
fn a_single_level_is_rejected() {
    let r = run_convergence(&ManufacturedCase::smooth(), RefinementMode::Uniform, 1, 1, 0.0);
    assert!(matches!(r, Err(VerifyError::Levels(1))));
}

#[test]
fn short_uniform_run_converges_at_first_order() {
    let rows = run_convergence(&ManufacturedCase::smooth(), RefinementMode::Uniform, 1, 3, 0.0).unwrap();
    assert_eq!(rows.iter().map(|r| r.dofs).collect::<Vec<_>>(), vec![21, 53, 165]);
    assert!(rows[0].rate.is_none());
    for r in &rows[1..] {
        assert!((r.rate.unwrap() - 1.0).abs() < 0.05, "{r:?}");
    }
    assert!(rows.windows(2).all(|w| (w[0].h / w[1].h - 2.0).abs() < 1e-12));
    let csv = convergence_csv(&rows);
    assert!(csv.starts_with("dofs,h,error,rate,eff\n21,0.7071,"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(error_vs_dofs(&rows).lines().count(), 4);
}

#[test]
fn short_adaptive_run_refines_near_the_corner() {
    let rows = run_convergence(&ManufacturedCase::singular(), RefinementMode::Adaptive, 1, 3, 0.15).unwrap();
    assert_eq!(rows[0].dofs, 53);
    assert!(rows[1].dofs > 53 && rows[1].dofs < 100);
    assert!(rows[2].error < rows[0].error);
}
