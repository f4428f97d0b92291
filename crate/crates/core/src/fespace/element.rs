//! Tensor-product Lagrange elements on the reference square.

use crate::quadrature::TensorRule;

/// Equispaced 1D Lagrange basis of degree 1 or 2 on `[0, 1]`.
#[inline]
pub fn lagrange_1d(k: usize, t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    match k {
        1 => ([1.0 - t, t, 0.0], [-1.0, 1.0, 0.0], [0.0; 3]),
        2 => (
            [2.0 * (t - 0.5) * (t - 1.0), -4.0 * t * (t - 1.0), 2.0 * t * (t - 0.5)],
            [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
            [4.0, -8.0, 4.0],
        ),
        _ => panic!("unsupported degree {k}"),
    }
}

/// Values, reference gradients and reference Hessians `(xx, xy, yy)` of all
/// `(k+1)^2` shape functions; local node `(a, b)` has index `b (k+1) + a`.
#[derive(Debug, Clone)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

pub fn shape_eval(k: usize, xi: [f64; 2]) -> ShapeEval {
    let (vx, dx, ddx) = lagrange_1d(k, xi[0]);
    let (vy, dy, ddy) = lagrange_1d(k, xi[1]);
    let n = k + 1;
    let mut values = Vec::with_capacity(n * n);
    let mut grads = Vec::with_capacity(n * n);
    let mut hess = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            values.push(vx[a] * vy[b]);
            grads.push([dx[a] * vy[b], vx[a] * dy[b]]);
            hess.push([ddx[a] * vy[b], dx[a] * dy[b], vx[a] * ddy[b]]);
        }
    }
    ShapeEval { values, grads, hess }
}

/// Shape data tabulated at every point of a tensor rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub k: usize,
    pub n_basis: usize,
    pub rule: TensorRule,
    pub at: Vec<ShapeEval>,
}

impl Tabulation {
    pub fn new(k: usize, rule: TensorRule) -> Self {
        let at = rule.points.iter().map(|&p| shape_eval(k, p)).collect();
        Self { k, n_basis: (k + 1) * (k + 1), rule, at }
    }
}

/// Reference coordinates of local node `i`.
pub fn local_node(k: usize, i: usize) -> [f64; 2] {
    let n = k + 1;
    [(i % n) as f64 / k as f64, (i / n) as f64 / k as f64]
}

/// Local nodes on a cell side, ordered by increasing coordinate along the edge.
pub fn side_nodes(k: usize, side: crate::mesh::Side) -> Vec<usize> {
    use crate::mesh::Side;
    let n = k + 1;
    (0..n)
        .map(|m| match side {
            Side::Left => m * n,
            Side::Right => m * n + k,
            Side::Bottom => m,
            Side::Top => k * n + m,
        })
        .collect()
}

/// Element stiffness `int C e(phi_i) : e(phi_j)` on an `sx x sy` rectangle,
/// local dof `2 i + c`.
pub fn elastic_matrix(tab: &Tabulation, size: [f64; 2], lambda: f64, mu: f64) -> Vec<f64> {
    let nb = tab.n_basis;
    let nd = 2 * nb;
    let mut m = vec![0.0; nd * nd];
    let det = size[0] * size[1];
    for (q, w) in tab.rule.weights.iter().enumerate() {
        let g: Vec<[f64; 2]> = tab.at[q].grads.iter().map(|g| [g[0] / size[0], g[1] / size[1]]).collect();
        let wq = w * det;
        for a in 0..nb {
            for b in 0..nb {
                let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                for c in 0..2 {
                    for d in 0..2 {
                        let mut v = lambda * g[a][c] * g[b][d] + mu * g[a][d] * g[b][c];
                        if c == d {
                            v += mu * dot;
                        }
                        m[(2 * a + c) * nd + 2 * b + d] += wq * v;
                    }
                }
            }
        }
    }
    m
}

/// Vector mass matrix `int phi_i phi_j delta_cd`.
pub fn mass_matrix(tab: &Tabulation, size: [f64; 2]) -> Vec<f64> {
    let nb = tab.n_basis;
    let nd = 2 * nb;
    let mut m = vec![0.0; nd * nd];
    let det = size[0] * size[1];
    for (q, w) in tab.rule.weights.iter().enumerate() {
        let v = &tab.at[q].values;
        for a in 0..nb {
            for b in 0..nb {
                let x = w * det * v[a] * v[b];
                m[(2 * a) * nd + 2 * b] += x;
                m[(2 * a + 1) * nd + 2 * b + 1] += x;
            }
        }
    }
    m
}

/// Vector Laplacian `int grad phi_i : grad phi_j delta_cd`.
pub fn laplace_matrix(tab: &Tabulation, size: [f64; 2]) -> Vec<f64> {
    let nb = tab.n_basis;
    let nd = 2 * nb;
    let mut m = vec![0.0; nd * nd];
    let det = size[0] * size[1];
    for (q, w) in tab.rule.weights.iter().enumerate() {
        let g = &tab.at[q].grads;
        for a in 0..nb {
            for b in 0..nb {
                let x = w * det * (g[a][0] * g[b][0] / (size[0] * size[0]) + g[a][1] * g[b][1] / (size[1] * size[1]));
                m[(2 * a) * nd + 2 * b] += x;
                m[(2 * a + 1) * nd + 2 * b + 1] += x;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_nodality() {
        for k in [1, 2] {
            let e = shape_eval(k, [0.3, 0.8]);
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gs: [f64; 2] = e.grads.iter().fold([0.0; 2], |s, g| [s[0] + g[0], s[1] + g[1]]);
            assert!(gs[0].abs() < 1e-13 && gs[1].abs() < 1e-13);
            let nb = (k + 1) * (k + 1);
            for i in 0..nb {
                let e = shape_eval(k, local_node(k, i));
                for j in 0..nb {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((e.values[j] - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-6;
        for k in [1, 2] {
            let p = [0.37, 0.61];
            let e = shape_eval(k, p);
            let ex = [shape_eval(k, [p[0] + h, p[1]]), shape_eval(k, [p[0] - h, p[1]])];
            let ey = [shape_eval(k, [p[0], p[1] + h]), shape_eval(k, [p[0], p[1] - h])];
            for i in 0..e.values.len() {
                let fx = (ex[0].values[i] - ex[1].values[i]) / (2.0 * h);
                let fy = (ey[0].values[i] - ey[1].values[i]) / (2.0 * h);
                assert!((e.grads[i][0] - fx).abs() < 1e-8 && (e.grads[i][1] - fy).abs() < 1e-8);
                let fxx = (ex[0].grads[i][0] - ex[1].grads[i][0]) / (2.0 * h);
                let fxy = (ey[0].grads[i][0] - ey[1].grads[i][0]) / (2.0 * h);
                let fyy = (ey[0].grads[i][1] - ey[1].grads[i][1]) / (2.0 * h);
                assert!((e.hess[i][0] - fxx).abs() < 1e-7);
                assert!((e.hess[i][1] - fxy).abs() < 1e-7);
                assert!((e.hess[i][2] - fyy).abs() < 1e-7);
            }
        }
    }

    /// Symbolic entries of the unit-square Q1 stiffness with lambda = mu = 1,
    /// integrated by hand: `int dx phi_a dx phi_b` etc. on the bilinear basis.
    #[test]
    fn unit_q1_stiffness_against_closed_form() {
        let tab = Tabulation::new(1, TensorRule::new(2));
        let m = elastic_matrix(&tab, [1.0, 1.0], 1.0, 1.0);
        // phi_a = X(x) Y(y) with X, Y in {1-t, t}: int X'X' = +-1, int XX = 1/3 or 1/6
        let node = |a: usize| (a % 2, a / 2);
        let d1 = |p: usize| if p == 0 { -1.0 } else { 1.0 };
        let mass = |p: usize, q: usize| if p == q { 1.0 / 3.0 } else { 1.0 / 6.0 };
        // int X_p' X_q dx over [0,1] = d1(p) / 2 for either q
        let mixed = |p: usize| d1(p) * 0.5;
        let ixx = |a: usize, b: usize| {
            let ((pa, qa), (pb, qb)) = (node(a), node(b));
            d1(pa) * d1(pb) * mass(qa, qb)
        };
        let iyy = |a: usize, b: usize| {
            let ((pa, qa), (pb, qb)) = (node(a), node(b));
            mass(pa, pb) * d1(qa) * d1(qb)
        };
        // int dx phi_a dy phi_b = (int X_a' X_b)(int Y_a Y_b')
        let ixy = |a: usize, b: usize| {
            let ((pa, _), (_, qb)) = (node(a), node(b));
            mixed(pa) * mixed(qb)
        };
        let (lambda, mu) = (1.0, 1.0);
        for a in 0..4 {
            for b in 0..4 {
                let gxgx = ixx(a, b);
                let gygy = iyy(a, b);
                let gxgy = ixy(a, b);
                let gygx = ixy(b, a);
                let dot = gxgx + gygy;
                let expect = [
                    [lambda * gxgx + mu * dot + mu * gxgx, lambda * gxgy + mu * gygx],
                    [lambda * gygx + mu * gxgy, lambda * gygy + mu * dot + mu * gygy],
                ];
                for c in 0..2 {
                    for d in 0..2 {
                        let got = m[(2 * a + c) * 8 + 2 * b + d];
                        assert!((got - expect[c][d]).abs() < 1e-12, "a{a} b{b} c{c} d{d}");
                    }
                }
            }
        }
    }

    #[test]
    fn element_matrices_symmetric() {
        for k in [1, 2] {
            let tab = Tabulation::new(k, TensorRule::new(k + 1));
            let nd = 2 * tab.n_basis;
            for m in [
                elastic_matrix(&tab, [0.5, 0.25], 0.4, 0.4),
                mass_matrix(&tab, [0.5, 0.25]),
                laplace_matrix(&tab, [0.5, 0.25]),
            ] {
                for i in 0..nd {
                    for j in 0..nd {
                        assert!((m[i * nd + j] - m[j * nd + i]).abs() < 1e-14);
                    }
                }
            }
        }
    }
}
