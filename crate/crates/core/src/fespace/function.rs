use std::sync::Arc;

use crate::error::FeError;
use crate::mesh::FacetKind;
use crate::quadrature::TensorRule;

use super::element::{shape_eval, Tabulation};
use super::space::FeSpace;

/// Discrete displacement (plus multipliers in rm mode) on a space.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self { space: space.clone(), coeffs: vec![0.0; space.n_dofs()] }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self, FeError> {
        if coeffs.len() != space.n_dofs() {
            return Err(FeError::Dimension { expected: space.n_dofs(), got: coeffs.len() });
        }
        Ok(Self { space: space.clone(), coeffs })
    }

    /// Nodal interpolant at the free nodes; multipliers are zero.
    pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut u = Self::zeros(space);
        for n in 0..space.n_free_nodes() {
            let v = f(space.free_node_point(n));
            u.coeffs[2 * n] = v[0];
            u.coeffs[2 * n + 1] = v[1];
        }
        u
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn displacement(&self) -> &[f64] {
        &self.coeffs[..self.space.n_displacement_dofs()]
    }

    pub fn multipliers(&self) -> Option<[f64; 3]> {
        let n = self.space.n_displacement_dofs();
        self.space.rm_mode().then(|| [self.coeffs[n], self.coeffs[n + 1], self.coeffs[n + 2]])
    }

    /// Displacement at a node (free or hanging).
    pub fn node_value(&self, node: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for &(f, w) in self.space.expansion(node) {
            v[0] += w * self.coeffs[2 * f];
            v[1] += w * self.coeffs[2 * f + 1];
        }
        v
    }

    /// Nodal values of every local node of cell `c`.
    pub fn cell_values(&self, c: usize) -> Vec<[f64; 2]> {
        self.space.cell_node_ids(c).iter().map(|&n| self.node_value(n)).collect()
    }

    /// Value and gradient `g[i][j] = d u_i / d x_j` at reference point `xi` of cell `c`.
    pub fn eval_in_cell(&self, c: usize, xi: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let vals = self.cell_values(c);
        let e = shape_eval(self.space.degree(), xi);
        let jac = self.space.cell_geometry(c).jacobian;
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (a, v) in vals.iter().enumerate() {
            let dx = e.grads[a][0] / jac[0];
            let dy = e.grads[a][1] / jac[1];
            for i in 0..2 {
                u[i] += v[i] * e.values[a];
                g[i][0] += v[i] * dx;
                g[i][1] += v[i] * dy;
            }
        }
        (u, g)
    }

    pub fn evaluate(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.space.forest().locate_point(p);
        let xi = self.space.to_reference(c, p);
        self.eval_in_cell(c, xi).0
    }

    pub fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let c = self.space.forest().locate_point(p);
        let xi = self.space.to_reference(c, p);
        self.eval_in_cell(c, xi).1
    }

    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(L2, H1, energy seminorm ||e(u)||)`, where H1 is the full norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub energy: f64,
}

fn strain_sq(g: [[f64; 2]; 2]) -> f64 {
    let off = 0.5 * (g[0][1] + g[1][0]);
    g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off
}

fn grad_sq(g: [[f64; 2]; 2]) -> f64 {
    g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
}

pub fn norms(u: &FeFunction) -> Norms {
    let zero = |_: [f64; 2]| ([0.0; 2], [[0.0; 2]; 2]);
    let k = u.space().degree();
    error_norms(u, &zero, 2 * k, None)
}

/// Norms of `u - u_exact` with a tensor rule exact to `order`; cells touching
/// `singular` use `order + 6`.
pub fn error_norms(
    u: &FeFunction,
    exact: &(dyn Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) + Sync),
    order: usize,
    singular: Option<[f64; 2]>,
) -> Norms {
    let space = u.space();
    let k = space.degree();
    let tab = Tabulation::new(k, TensorRule::for_order(order));
    let tab_hi = singular.map(|_| Tabulation::new(k, TensorRule::for_order(order + 6)));
    let (mut l2, mut h1s, mut en) = (0.0, 0.0, 0.0);
    for c in 0..space.n_cells() {
        let g = space.cell_geometry(c);
        let t = match (singular, &tab_hi) {
            (Some(p), Some(hi)) if touches(&g.rect, p) => hi,
            _ => &tab,
        };
        let vals = u.cell_values(c);
        let det = g.rect.area();
        for (q, &w) in t.rule.weights.iter().enumerate() {
            let e = &t.at[q];
            let x = g.rect.map(t.rule.points[q]);
            let (ue, ge) = exact(x);
            let mut d = [-ue[0], -ue[1]];
            let mut gd = [[-ge[0][0], -ge[0][1]], [-ge[1][0], -ge[1][1]]];
            for (a, v) in vals.iter().enumerate() {
                let dx = e.grads[a][0] / g.jacobian[0];
                let dy = e.grads[a][1] / g.jacobian[1];
                for i in 0..2 {
                    d[i] += v[i] * e.values[a];
                    gd[i][0] += v[i] * dx;
                    gd[i][1] += v[i] * dy;
                }
            }
            let wq = w * det;
            l2 += wq * (d[0] * d[0] + d[1] * d[1]);
            h1s += wq * grad_sq(gd);
            en += wq * strain_sq(gd);
        }
    }
    Norms { l2: l2.sqrt(), h1: (l2 + h1s).sqrt(), energy: en.sqrt() }
}

pub(crate) fn touches(r: &crate::geometry::Rect, p: [f64; 2]) -> bool {
    let eps = 1e-14 * (1.0 + r.diameter());
    let hi = r.max();
    p[0] >= r.origin[0] - eps && p[0] <= hi[0] + eps && p[1] >= r.origin[1] - eps && p[1] <= hi[1] + eps
}

/// Nodal interpolation of `u_old` onto another space over the same domain;
/// multipliers are copied when both spaces carry them.
pub fn transfer(u_old: &FeFunction, space_new: &Arc<FeSpace>) -> FeFunction {
    let mut u = FeFunction::interpolate(space_new, |p| u_old.evaluate(p));
    if let (Some(m), true) = (u_old.multipliers(), space_new.rm_mode()) {
        let n = space_new.n_displacement_dofs();
        u.coeffs[n..n + 3].copy_from_slice(&m);
    }
    u
}

/// Largest two-sided mismatch of `u` across nonconforming facets, sampled at
/// `samples` points per subfacet.
pub fn continuity_defect(u: &FeFunction, samples: usize) -> f64 {
    let space = u.space();
    let forest = space.forest();
    let mut worst: f64 = 0.0;
    for f in space.facets().iter().filter(|f| f.kind == FacetKind::Nonconforming) {
        let ci = forest.leaf_index(f.owner).expect("owner is a leaf");
        let cg = space.cell_geometry(ci);
        for sub in &f.subfacets {
            let fi = forest.leaf_index(sub.fine).expect("fine cell is a leaf");
            let fg = space.cell_geometry(fi);
            for s in 0..samples {
                let t = sub.interval[0] + (sub.interval[1] - sub.interval[0]) * (s as f64 + 0.5) / samples as f64;
                let p = edge_point(&cg.rect, f.side, t);
                let a = u.eval_in_cell(ci, reference(&cg.rect, p)).0;
                let b = u.eval_in_cell(fi, reference(&fg.rect, p)).0;
                worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            }
        }
    }
    worst
}

pub(crate) fn reference(r: &crate::geometry::Rect, p: [f64; 2]) -> [f64; 2] {
    [(p[0] - r.origin[0]) / r.size[0], (p[1] - r.origin[1]) / r.size[1]]
}

/// Point at parameter `t` along a side of a rectangle (increasing coordinate).
pub(crate) fn edge_point(r: &crate::geometry::Rect, side: crate::mesh::Side, t: f64) -> [f64; 2] {
    use crate::mesh::Side;
    let [x0, y0] = r.origin;
    let [x1, y1] = r.max();
    match side {
        Side::Left => [x0, y0 + t * (y1 - y0)],
        Side::Right => [x1, y0 + t * (y1 - y0)],
        Side::Bottom => [x0 + t * (x1 - x0), y0],
        Side::Top => [x0 + t * (x1 - x0), y1],
    }
}
