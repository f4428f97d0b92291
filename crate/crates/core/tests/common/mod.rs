//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use amreg::fespace::{FeFunction, FeSpace, MaterialParams};
use amreg::geometry::Rect;
use amreg::image::ImagePair;
use amreg::mesh::{FacetKind, QuadForest};

pub type Dense = Vec<Vec<f64>>;

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Every global basis function as a finite-element field with one unit coefficient.
pub fn basis(space: &Arc<FeSpace>) -> Vec<FeFunction> {
    let n = space.n_dofs();
    (0..space.n_displacement_dofs())
        .map(|d| {
            let mut c = vec![0.0; n];
            c[d] = 1.0;
            FeFunction::from_coeffs(space, c).unwrap()
        })
        .collect()
}

fn cell_points(rect: &Rect, rule: &[(f64, f64)]) -> Vec<([f64; 2], [f64; 2], f64)> {
    let mut pts = Vec::new();
    for &(s, ws) in rule {
        for &(t, wt) in rule {
            let x = [rect.origin[0] + s * rect.size[0], rect.origin[1] + t * rect.size[1]];
            pts.push(([s, t], x, ws * wt * rect.area()));
        }
    }
    pts
}

/// Dense `A + kappa M_boundary`, `M` and `A_lap` by direct quadrature of basis products.
pub struct DenseOperators {
    pub elastic: Dense,
    pub mass: Dense,
    pub laplace: Dense,
    pub boundary: Dense,
    /// `int r_i . phi_j` for `r = (1,0), (0,1), (-y,x)`.
    pub rigid: Vec<[f64; 3]>,
}

pub fn dense_operators(space: &Arc<FeSpace>, params: &MaterialParams) -> DenseOperators {
    let nd = space.n_displacement_dofs();
    let phis = basis(space);
    let rule = gauss(space.degree() + 3);
    let zero = || vec![vec![0.0; nd]; nd];
    let (mut el, mut ma, mut la, mut bo) = (zero(), zero(), zero(), zero());
    let mut rigid = vec![[0.0; 3]; nd];
    for c in 0..space.n_cells() {
        let rect = space.cell_geometry(c).rect;
        for (xi, x, w) in cell_points(&rect, &rule) {
            let ev: Vec<([f64; 2], [[f64; 2]; 2])> = phis.iter().map(|p| p.eval_in_cell(c, xi)).collect();
            for i in 0..nd {
                let (vi, gi) = ev[i];
                rigid[i][0] += w * vi[0];
                rigid[i][1] += w * vi[1];
                rigid[i][2] += w * (-x[1] * vi[0] + x[0] * vi[1]);
                if vi == [0.0; 2] && gi == [[0.0; 2]; 2] {
                    continue;
                }
                let di = gi[0][0] + gi[1][1];
                let ei = [[gi[0][0], 0.5 * (gi[0][1] + gi[1][0])], [0.5 * (gi[0][1] + gi[1][0]), gi[1][1]]];
                for j in 0..nd {
                    let (vj, gj) = ev[j];
                    let dj = gj[0][0] + gj[1][1];
                    let ej = [[gj[0][0], 0.5 * (gj[0][1] + gj[1][0])], [0.5 * (gj[0][1] + gj[1][0]), gj[1][1]]];
                    let mut ee = 0.0;
                    let mut gg = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            ee += ei[a][b] * ej[a][b];
                            gg += gi[a][b] * gj[a][b];
                        }
                    }
                    el[i][j] += w * (params.lambda * di * dj + 2.0 * params.mu * ee);
                    ma[i][j] += w * (vi[0] * vj[0] + vi[1] * vj[1]);
                    la[i][j] += w * gg;
                }
            }
        }
    }
    let forest = space.forest();
    for f in space.facets().iter().filter(|f| f.kind == FacetKind::Boundary) {
        let c = forest.leaf_index(f.owner).unwrap();
        let r = space.cell_geometry(c).rect;
        for &(t, w) in &rule {
            // edge point in reference coordinates of the owner
            let [nx, ny] = f.normal;
            let xi =
                if nx != 0.0 { [if nx > 0.0 { 1.0 } else { 0.0 }, t] } else { [t, if ny > 0.0 { 1.0 } else { 0.0 }] };
            let len = if nx != 0.0 { r.size[1] } else { r.size[0] };
            let vals: Vec<[f64; 2]> = phis.iter().map(|p| p.eval_in_cell(c, xi).0).collect();
            for i in 0..nd {
                for j in 0..nd {
                    bo[i][j] += w * len * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
                }
            }
        }
    }
    for i in 0..nd {
        for j in 0..nd {
            el[i][j] += params.kappa * bo[i][j];
        }
    }
    DenseOperators { elastic: el, mass: ma, laplace: la, boundary: bo, rigid }
}

/// Bordered `[K C; C^T 0]` with `K = elastic + s * prox`.
pub fn bordered(k: &Dense, prox: &Dense, s: f64, rigid: Option<&[[f64; 3]]>) -> Dense {
    let nd = k.len();
    let n = nd + if rigid.is_some() { 3 } else { 0 };
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..nd {
        for j in 0..nd {
            m[i][j] = k[i][j] + s * prox[i][j];
        }
    }
    if let Some(c) = rigid {
        for j in 0..nd {
            for r in 0..3 {
                m[j][nd + r] = c[j][r];
                m[nd + r][j] = c[j][r];
            }
        }
    }
    m
}

/// `alpha b(u)_i = -alpha int (T(x+u) - R) grad T(x+u) . phi_i`, zero in multiplier slots.
pub fn dense_image_load(u: &FeFunction, pair: &ImagePair<'_>, alpha: f64, points: usize) -> Vec<f64> {
    let space = u.space();
    let phis = basis(space);
    let rule = gauss(points);
    let mut b = vec![0.0; space.n_dofs()];
    for c in 0..space.n_cells() {
        let rect = space.cell_geometry(c).rect;
        for (xi, x, w) in cell_points(&rect, &rule) {
            let (uq, _) = u.eval_in_cell(c, xi);
            let y = [x[0] + uq[0], x[1] + uq[1]];
            let m = pair.template.value(y) - pair.reference.value(x);
            let g = pair.template.gradient(y);
            for (i, p) in phis.iter().enumerate() {
                let (v, _) = p.eval_in_cell(c, xi);
                b[i] -= alpha * w * m * (g[0] * v[0] + g[1] * v[1]);
            }
        }
    }
    b
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest entrywise difference.
pub fn max_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Small meshes: uniform, and with hanging nodes on one or two levels.
pub fn small_meshes() -> Vec<(&'static str, QuadForest)> {
    let unit = QuadForest::new(Rect::unit());
    let two = unit.uniform_refine(1);
    let hanging = two.adapt(&[two.leaves()[0]], &[]).unwrap().0;
    let double = hanging.adapt(&[hanging.leaves()[3], hanging.leaves()[5]], &[]).unwrap().0;
    let skew = QuadForest::new(Rect::new([0.2, -0.1], [1.5, 0.75])).uniform_refine(1);
    let skew = skew.adapt(&[skew.leaves()[3]], &[]).unwrap().0;
    vec![("one cell", unit), ("2x2", two), ("hanging", hanging), ("two hanging", double), ("rectangle", skew)]
}

/// Random affine contraction `g(x) = M x + b` in dimension `n` with `||M||_F = rho`.
pub struct AffineMap {
    pub n: usize,
    pub m: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn random(seed: u64, n: usize) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let rho: f64 = rng.random_range(0.3..0.95);
        let mut m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fro = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        m.iter_mut().for_each(|v| *v *= rho / fro);
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { n, m, b }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.m[i * self.n + j] * x[j]).sum::<f64>() + self.b[i]).collect()
    }

    /// Fixed point from `(I - M) x = b`.
    pub fn fixed_point(&self) -> Vec<f64> {
        let a = nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| f64::from(i == j) - self.m[i * self.n + j]);
        let x = a.lu().solve(&nalgebra::DVector::from_column_slice(&self.b)).unwrap();
        x.iter().copied().collect()
    }
}

/// Number of map evaluations Anderson with depth `n` needs to reach `tol` in max norm,
/// or `None` within `limit` evaluations.
pub fn anderson_affine_iterations(map: &AffineMap, tol: f64, limit: usize) -> Option<usize> {
    let star = map.fixed_point();
    let mut w = amreg::regsolver::AndersonWindow::new(map.n, 1e10);
    let mut x = vec![0.0; map.n];
    for k in 1..=limit {
        let gx = map.apply(&x);
        x = w.update(&x, &gx).next;
        if x.iter().zip(&star).all(|(a, b)| (a - b).abs() <= tol) {
            return Some(k);
        }
    }
    None
}
