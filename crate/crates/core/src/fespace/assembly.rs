use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::FeError;
use crate::image::ImagePair;
use crate::mesh::FacetKind;
use crate::quadrature::{GaussLegendre, TensorRule};

use super::element::{elastic_matrix, laplace_matrix, mass_matrix, side_nodes, Tabulation};
use super::function::{edge_point, touches, FeFunction};
use super::space::{FeSpace, MaterialParams};
use super::sparse::{BorderedCholesky, CsrMatrix};

/// Proximal operator in the pseudo-time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LKind {
    /// Vector mass matrix.
    Identity,
    /// Mass plus vector Laplacian with natural boundary conditions.
    H1,
}

/// Analytic right-hand-side contributions of a manufactured problem.
pub trait ExtraForcing: Sync {
    /// Volume source `s(x)` tested against the basis.
    fn volume(&self, x: [f64; 2]) -> [f64; 2];
    /// Boundary datum `t(x)` on an edge with outward normal `n`.
    fn boundary(&self, x: [f64; 2], n: [f64; 2]) -> [f64; 2];
    /// Values of `int r_i . u` imposed through the multiplier rows.
    fn rm_target(&self) -> [f64; 3];
    /// Point where the data is singular; cells touching it get a finer rule.
    fn singular_point(&self) -> Option<[f64; 2]> {
        None
    }
    /// Exactness order of the cell rule used for `volume`.
    fn quadrature_order(&self) -> usize;
}

/// Scatter a per-cell local matrix (local dof `2a + c`) through the constraints.
fn assemble_cells(space: &FeSpace, local: impl Fn(usize) -> Arc<Vec<f64>>) -> CsrMatrix {
    let n = space.n_displacement_dofs();
    let nb = space.n_basis();
    let nd = 2 * nb;
    let mut trip = Vec::with_capacity(space.n_cells() * nd * nd);
    for c in 0..space.n_cells() {
        let m = local(c);
        let exp: Vec<&[(usize, f64)]> = space.cell_expansions(c).collect();
        for a in 0..nb {
            for b in 0..nb {
                for &(fa, wa) in exp[a] {
                    for &(fb, wb) in exp[b] {
                        let w = wa * wb;
                        for ci in 0..2 {
                            for di in 0..2 {
                                let v = m[(2 * a + ci) * nd + 2 * b + di];
                                if v != 0.0 {
                                    trip.push((2 * fa + ci, 2 * fb + di, w * v));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Per-level cache of element matrices (cells of one level share their size).
fn per_level(space: &FeSpace, make: impl Fn([f64; 2]) -> Vec<f64>) -> impl Fn(usize) -> Arc<Vec<f64>> + '_ {
    let mut cache: HashMap<u8, Arc<Vec<f64>>> = HashMap::new();
    for c in 0..space.n_cells() {
        let l = space.cell_key(c).level();
        cache.entry(l).or_insert_with(|| Arc::new(make(space.cell_geometry(c).jacobian)));
    }
    move |c| cache[&space.cell_key(c).level()].clone()
}

fn stiffness_tab(space: &FeSpace) -> Tabulation {
    Tabulation::new(space.degree(), TensorRule::new(space.degree() + 1))
}

/// `int C e(u) : e(v)` without boundary terms.
pub fn assemble_elastic(space: &FeSpace, params: &MaterialParams) -> CsrMatrix {
    let tab = stiffness_tab(space);
    assemble_cells(space, per_level(space, |s| elastic_matrix(&tab, s, params.lambda, params.mu)))
}

pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let tab = stiffness_tab(space);
    assemble_cells(space, per_level(space, |s| mass_matrix(&tab, s)))
}

pub fn assemble_laplace(space: &FeSpace) -> CsrMatrix {
    let tab = stiffness_tab(space);
    assemble_cells(space, per_level(space, |s| laplace_matrix(&tab, s)))
}

/// `int_{dOmega} u . v`.
pub fn assemble_boundary_mass(space: &FeSpace) -> CsrMatrix {
    let k = space.degree();
    let gl = GaussLegendre::new(k + 1);
    let n = space.n_displacement_dofs();
    let mut trip = Vec::new();
    let forest = space.forest();
    for f in space.facets().iter().filter(|f| f.kind == FacetKind::Boundary) {
        let c = forest.leaf_index(f.owner).expect("owner is a leaf");
        let ids = space.cell_node_ids(c);
        let locals = side_nodes(k, f.side);
        for (t, w) in gl.iter() {
            let (phi, _, _) = super::element::lagrange_1d(k, t);
            for (ia, &la) in locals.iter().enumerate() {
                for (ib, &lb) in locals.iter().enumerate() {
                    let v = w * f.h * phi[ia] * phi[ib];
                    for &(fa, wa) in space.expansion(ids[la]) {
                        for &(fb, wb) in space.expansion(ids[lb]) {
                            trip.push((2 * fa, 2 * fb, wa * wb * v));
                            trip.push((2 * fa + 1, 2 * fb + 1, wa * wb * v));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Columns `c_i[j] = int r_i . phi_j` for `r = (1,0), (0,1), (-y,x)`.
pub fn rigid_body_block(space: &FeSpace) -> Result<Vec<[f64; 3]>, FeError> {
    if !space.rm_mode() {
        return Err(FeError::NoMultiplier);
    }
    let tab = Tabulation::new(space.degree(), TensorRule::new(space.degree() + 1));
    let mut cols = vec![[0.0; 3]; space.n_displacement_dofs()];
    for c in 0..space.n_cells() {
        let g = space.cell_geometry(c);
        let det = g.rect.area();
        let ids = space.cell_node_ids(c);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = g.rect.map(tab.rule.points[q]);
            for (a, &phi) in tab.at[q].values.iter().enumerate() {
                let v = w * det * phi;
                for &(f, wf) in space.expansion(ids[a]) {
                    cols[2 * f][0] += wf * v;
                    cols[2 * f + 1][1] += wf * v;
                    cols[2 * f][2] -= wf * v * x[1];
                    cols[2 * f + 1][2] += wf * v * x[0];
                }
            }
        }
    }
    Ok(cols)
}

/// Operator data on one space, factorized once.
#[derive(Debug)]
pub struct AssembledSystem {
    space: Arc<FeSpace>,
    params: MaterialParams,
    l_kind: LKind,
    elastic: CsrMatrix,
    prox: CsrMatrix,
    rm: Option<Vec<[f64; 3]>>,
    stationary: CsrMatrix,
    matrix: CsrMatrix,
    factor: BorderedCholesky,
}

fn bordered(base: &CsrMatrix, rm: Option<&Vec<[f64; 3]>>, n: usize) -> CsrMatrix {
    let mut trip = base.triplets();
    if let Some(cols) = rm {
        let nd = base.nrows;
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                if v != 0.0 {
                    trip.push((j, nd + i, v));
                    trip.push((nd + i, j, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

fn add(a: &CsrMatrix, sa: f64, b: &CsrMatrix, sb: f64) -> CsrMatrix {
    let mut trip: Vec<_> = a.triplets().into_iter().map(|(i, j, v)| (i, j, sa * v)).collect();
    trip.extend(b.triplets().into_iter().map(|(i, j, v)| (i, j, sb * v)));
    CsrMatrix::from_triplets(a.nrows, a.ncols, &trip)
}

/// `(1/dt) M_L + A + kappa M_boundary` bordered by the rigid-body block, factorized.
pub fn assemble_operator(
    space: &Arc<FeSpace>,
    params: &MaterialParams,
    l_kind: LKind,
) -> Result<AssembledSystem, FeError> {
    if params.kappa == 0.0 && !space.rm_mode() {
        return Err(FeError::SingularWithoutMultiplier);
    }
    let n = space.n_dofs();
    let mut elastic = assemble_elastic(space, params);
    if params.kappa > 0.0 {
        elastic = add(&elastic, 1.0, &assemble_boundary_mass(space), params.kappa);
    }
    let mass = assemble_mass(space);
    let prox = match l_kind {
        LKind::Identity => mass,
        LKind::H1 => add(&mass, 1.0, &assemble_laplace(space), 1.0),
    };
    let rm = if space.rm_mode() { Some(rigid_body_block(space)?) } else { None };
    let stationary = bordered(&elastic, rm.as_ref(), n);
    let shifted = add(&elastic, 1.0, &prox, 1.0 / params.dt);
    let matrix = bordered(&shifted, rm.as_ref(), n);
    let factor = BorderedCholesky::factor(&shifted, rm.as_deref())?;
    Ok(AssembledSystem { space: space.clone(), params: *params, l_kind, elastic, prox, rm, stationary, matrix, factor })
}

impl AssembledSystem {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn l_kind(&self) -> LKind {
        self.l_kind
    }

    /// `A + kappa M_boundary` on the displacement dofs.
    pub fn elastic(&self) -> &CsrMatrix {
        &self.elastic
    }

    /// `M_L` on the displacement dofs.
    pub fn prox(&self) -> &CsrMatrix {
        &self.prox
    }

    pub fn rm_columns(&self) -> Option<&[[f64; 3]]> {
        self.rm.as_deref()
    }

    /// Bordered stationary operator `[A C; C^T 0]`.
    pub fn stationary_operator(&self) -> &CsrMatrix {
        &self.stationary
    }

    /// Bordered pseudo-time matrix; its displacement block carries the Cholesky factor.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, FeError> {
        if rhs.len() != self.space.n_dofs() {
            return Err(FeError::Dimension { expected: self.space.n_dofs(), got: rhs.len() });
        }
        Ok(self.factor.solve(rhs))
    }

    fn check(&self, u: &FeFunction) -> Result<(), FeError> {
        if !Arc::ptr_eq(u.space(), &self.space) {
            return Err(FeError::Dimension { expected: self.space.n_dofs(), got: u.coeffs().len() });
        }
        Ok(())
    }

    /// Pseudo-time right-hand side `(1/dt) M_L u + alpha b(u) + extra`.
    pub fn load(
        &self,
        u_prev: &FeFunction,
        pair: &ImagePair<'_>,
        q_img: usize,
        extra: Option<&[f64]>,
    ) -> Result<Vec<f64>, FeError> {
        self.check(u_prev)?;
        let mut rhs = image_load(u_prev, pair, self.params.alpha, q_img);
        self.prox.add_matvec(1.0 / self.params.dt, u_prev.coeffs(), &mut rhs);
        if let Some(e) = extra {
            if e.len() != rhs.len() {
                return Err(FeError::Dimension { expected: rhs.len(), got: e.len() });
            }
            for (r, x) in rhs.iter_mut().zip(e) {
                *r += x;
            }
        }
        Ok(rhs)
    }

    /// Residual `alpha b(u) + extra - [A C; C^T 0] (u, lambda)` of the stationary problem.
    pub fn stationarity_residual(
        &self,
        u: &FeFunction,
        pair: &ImagePair<'_>,
        q_img: usize,
        extra: Option<&[f64]>,
    ) -> Result<Vec<f64>, FeError> {
        self.check(u)?;
        let mut r = image_load(u, pair, self.params.alpha, q_img);
        if let Some(e) = extra {
            for (ri, x) in r.iter_mut().zip(e) {
                *ri += x;
            }
        }
        self.stationary.add_matvec(-1.0, u.coeffs(), &mut r);
        Ok(r)
    }
}

/// `alpha b(u)` with `b(u)_i = -int f_u . phi_i`, zero in the multiplier slots.
pub fn image_load(u: &FeFunction, pair: &ImagePair<'_>, alpha: f64, q_img: usize) -> Vec<f64> {
    image_load_and_similarity(u, pair, alpha, q_img).0
}

/// [`image_load`] together with the similarity `int (T(x+u) - R)^2`, from one pass
/// over the same quadrature points.
pub fn image_load_and_similarity(u: &FeFunction, pair: &ImagePair<'_>, alpha: f64, q_img: usize) -> (Vec<f64>, f64) {
    let space = u.space();
    let tab = Tabulation::new(space.degree(), TensorRule::for_order(q_img));
    let locals: Vec<(Vec<[f64; 2]>, f64)> = (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let g = space.cell_geometry(c);
            let det = g.rect.area();
            let vals = u.cell_values(c);
            let mut loc = vec![[0.0; 2]; vals.len()];
            let mut sim = 0.0;
            for (q, &w) in tab.rule.weights.iter().enumerate() {
                let phi = &tab.at[q].values;
                let x = g.rect.map(tab.rule.points[q]);
                let mut uq = [0.0; 2];
                for (a, v) in vals.iter().enumerate() {
                    uq[0] += v[0] * phi[a];
                    uq[1] += v[1] * phi[a];
                }
                let (f, m) = pair.forcing_and_mismatch(x, uq);
                sim += w * det * m * m;
                let s = -alpha * w * det;
                for (a, l) in loc.iter_mut().enumerate() {
                    l[0] += s * f[0] * phi[a];
                    l[1] += s * f[1] * phi[a];
                }
            }
            (loc, sim)
        })
        .collect();
    let mut out = vec![0.0; space.n_dofs()];
    let mut sim = 0.0;
    for (c, (loc, s)) in locals.iter().enumerate() {
        scatter_cell(space, c, loc, &mut out);
        sim += s;
    }
    (out, sim)
}

fn scatter_cell(space: &FeSpace, c: usize, loc: &[[f64; 2]], out: &mut [f64]) {
    for (a, &node) in space.cell_node_ids(c).iter().enumerate() {
        for &(f, w) in space.expansion(node) {
            out[2 * f] += w * loc[a][0];
            out[2 * f + 1] += w * loc[a][1];
        }
    }
}

fn scatter_vector(space: &FeSpace, locals: &[Vec<[f64; 2]>], out: &mut [f64]) {
    for (c, loc) in locals.iter().enumerate() {
        scatter_cell(space, c, loc, out);
    }
}

/// `int s . phi + int_{dOmega} t . phi`, with the rigid-body targets in the multiplier slots.
pub fn extra_load(space: &FeSpace, extra: &dyn ExtraForcing) -> Vec<f64> {
    let k = space.degree();
    let order = extra.quadrature_order();
    let tab = Tabulation::new(k, TensorRule::for_order(order));
    let tab_hi = Tabulation::new(k, TensorRule::for_order(order + 6));
    let sing = extra.singular_point();
    let locals: Vec<Vec<[f64; 2]>> = (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let g = space.cell_geometry(c);
            let t = match sing {
                Some(p) if touches(&g.rect, p) => &tab_hi,
                _ => &tab,
            };
            let det = g.rect.area();
            let mut loc = vec![[0.0; 2]; t.n_basis];
            for (q, &w) in t.rule.weights.iter().enumerate() {
                let s = extra.volume(g.rect.map(t.rule.points[q]));
                for (a, &phi) in t.at[q].values.iter().enumerate() {
                    loc[a][0] += w * det * s[0] * phi;
                    loc[a][1] += w * det * s[1] * phi;
                }
            }
            loc
        })
        .collect();
    let mut out = vec![0.0; space.n_dofs()];
    scatter_vector(space, &locals, &mut out);

    let gl = GaussLegendre::for_order(order);
    let gl_hi = GaussLegendre::for_order(order + 6);
    let forest = space.forest();
    for f in space.facets().iter().filter(|f| f.kind == FacetKind::Boundary) {
        let c = forest.leaf_index(f.owner).expect("owner is a leaf");
        let r = space.cell_geometry(c).rect;
        let rule = match sing {
            Some(p) if touches(&r, p) => &gl_hi,
            _ => &gl,
        };
        let ids = space.cell_node_ids(c);
        let locals = side_nodes(k, f.side);
        for (t, w) in rule.iter() {
            let x = edge_point(&r, f.side, t);
            let d = extra.boundary(x, f.normal);
            let (phi, _, _) = super::element::lagrange_1d(k, t);
            for (i, &l) in locals.iter().enumerate() {
                let v = w * f.h * phi[i];
                for &(fi, wf) in space.expansion(ids[l]) {
                    out[2 * fi] += wf * v * d[0];
                    out[2 * fi + 1] += wf * v * d[1];
                }
            }
        }
    }
    if space.rm_mode() {
        let n = space.n_displacement_dofs();
        out[n..n + 3].copy_from_slice(&extra.rm_target());
    }
    out
}
