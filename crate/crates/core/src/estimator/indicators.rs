use rayon::prelude::*;

use crate::error::EstimatorError;
use crate::fespace::{edge_point, reference, touches, ExtraForcing, FeFunction, FeSpace, MaterialParams};
use crate::image::ImagePair;
use crate::mesh::{FacetKind, MortonKey};
use crate::quadrature::{GaussLegendre, TensorRule};

/// How an interior facet term is attributed to its two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpSplit {
    /// Half to each side, so the squared estimator counts every facet once.
    Half,
    /// The full term to each side (every facet counted twice in the sum).
    Both,
}

/// Optional inputs of [`compute_indicators`].
#[derive(Clone, Copy)]
pub struct EstimatorOptions<'a> {
    /// Exactness order of the cell and edge rules.
    pub order: usize,
    /// Manufactured data: volume source and boundary datum.
    pub manufactured: Option<&'a dyn ExtraForcing>,
    /// Pseudo-time term `(1/dt)(u_h - u_prev)` subtracted from the volume residual.
    pub time_term: Option<(&'a FeFunction, f64)>,
    pub split: JumpSplit,
    /// Require `manufactured` to be present.
    pub require_manufactured: bool,
}

impl<'a> EstimatorOptions<'a> {
    pub fn new(order: usize) -> Self {
        Self { order, manufactured: None, time_term: None, split: JumpSplit::Half, require_manufactured: false }
    }

    pub fn manufactured(order: usize, data: &'a dyn ExtraForcing) -> Self {
        Self { manufactured: Some(data), require_manufactured: true, ..Self::new(order) }
    }
}

/// Per-leaf squared indicators, split by contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CellIndicators {
    pub keys: Vec<MortonKey>,
    pub volume: Vec<f64>,
    pub jump: Vec<f64>,
    pub boundary: Vec<f64>,
    /// `sum over interior (sub)facets of h_e ||[C e(u_h) n]||^2`, each counted once.
    pub facet_jump_sum: f64,
}

impl CellIndicators {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// `Theta_K^2` of leaf `c`.
    pub fn cell(&self, c: usize) -> f64 {
        self.volume[c] + self.jump[c] + self.boundary[c]
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.cell(c)).collect()
    }

    pub fn theta_sq(&self) -> f64 {
        (0..self.len()).map(|c| self.cell(c)).sum()
    }

    pub fn theta(&self) -> f64 {
        self.theta_sq().sqrt()
    }
}

/// Hessian-aware evaluation: value, gradient and `div C e(u_h)` at a reference point.
fn eval_full(
    u: &FeFunction,
    params: &MaterialParams,
    c: usize,
    vals: &[[f64; 2]],
    e: &crate::fespace::element::ShapeEval,
) -> ([f64; 2], [[f64; 2]; 2], [f64; 2]) {
    let jac = u.space().cell_geometry(c).jacobian;
    let (jx, jy) = (jac[0], jac[1]);
    let mut val = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    let mut h = [[0.0; 3]; 2];
    for (a, v) in vals.iter().enumerate() {
        let [hxx, hxy, hyy] = e.hess[a];
        for i in 0..2 {
            val[i] += v[i] * e.values[a];
            g[i][0] += v[i] * e.grads[a][0] / jx;
            g[i][1] += v[i] * e.grads[a][1] / jy;
            h[i][0] += v[i] * hxx / (jx * jx);
            h[i][1] += v[i] * hxy / (jx * jy);
            h[i][2] += v[i] * hyy / (jy * jy);
        }
    }
    (val, g, params.div_stress(h))
}

fn traction(params: &MaterialParams, g: [[f64; 2]; 2], n: [f64; 2]) -> [f64; 2] {
    let s = params.stress(g);
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

/// Residual indicators `Theta_K^2` for every leaf of `u_h`'s space.
///
/// Volume: `h_K^2 ||s - alpha f_{u_h} + div C e(u_h)||^2`; interior facets:
/// `h_e ||[C e(u_h) n]||^2`; boundary facets: `h_e ||t - C e(u_h) n - kappa u_h||^2`.
/// `s` and `t` vanish unless manufactured data is given.
pub fn compute_indicators(
    u_h: &FeFunction,
    pair: &ImagePair<'_>,
    params: &MaterialParams,
    opts: &EstimatorOptions<'_>,
) -> Result<CellIndicators, EstimatorError> {
    if opts.require_manufactured && opts.manufactured.is_none() {
        return Err(EstimatorError::MissingExactData);
    }
    let space: &FeSpace = u_h.space();
    let k = space.degree();
    let sing = opts.manufactured.and_then(|m| m.singular_point());
    let rule = TensorRule::for_order(opts.order);
    let rule_hi = TensorRule::for_order(opts.order + 6);
    let tab = |r: &TensorRule| -> Vec<crate::fespace::element::ShapeEval> {
        r.points.iter().map(|&p| crate::fespace::element::shape_eval(k, p)).collect()
    };
    let (at, at_hi) = (tab(&rule), tab(&rule_hi));

    let volume: Vec<f64> = (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let g = space.cell_geometry(c);
            let (r, evals) = match sing {
                Some(p) if touches(&g.rect, p) => (&rule_hi, &at_hi),
                _ => (&rule, &at),
            };
            let vals = u_h.cell_values(c);
            let prev = opts.time_term.map(|(up, dt)| (up.cell_values(c), dt));
            let det = g.rect.area();
            let mut s = 0.0;
            for (q, &w) in r.weights.iter().enumerate() {
                let x = g.rect.map(r.points[q]);
                let (uq, _, div) = eval_full(u_h, params, c, &vals, &evals[q]);
                let (f, _) = pair.forcing_and_mismatch(x, uq);
                let src = opts.manufactured.map_or([0.0; 2], |m| m.volume(x));
                let mut res = [src[0] - params.alpha * f[0] + div[0], src[1] - params.alpha * f[1] + div[1]];
                if let Some((pv, dt)) = &prev {
                    let mut up = [0.0; 2];
                    for (a, v) in pv.iter().enumerate() {
                        up[0] += v[0] * evals[q].values[a];
                        up[1] += v[1] * evals[q].values[a];
                    }
                    res[0] -= (uq[0] - up[0]) / dt;
                    res[1] -= (uq[1] - up[1]) / dt;
                }
                s += w * det * (res[0] * res[0] + res[1] * res[1]);
            }
            g.h * g.h * s
        })
        .collect();

    let gl = GaussLegendre::for_order(opts.order);
    let gl_hi = GaussLegendre::for_order(opts.order + 6);
    let forest = space.forest();
    let stress_at = |c: usize, p: [f64; 2]| -> ([f64; 2], [[f64; 2]; 2]) {
        let g = space.cell_geometry(c);
        u_h.eval_in_cell(c, reference(&g.rect, p))
    };
    // (cell, value, is_jump) contributions per facet
    let contributions: Vec<Vec<(usize, f64, bool)>> = space
        .facets()
        .par_iter()
        .map(|f| {
            let owner = forest.leaf_index(f.owner).expect("owner is a leaf");
            let orect = space.cell_geometry(owner).rect;
            let edge_rule = |r: &crate::geometry::Rect| match sing {
                Some(p) if touches(r, p) => &gl_hi,
                _ => &gl,
            };
            let mut out = Vec::new();
            match f.kind {
                FacetKind::Boundary => {
                    let mut s = 0.0;
                    for (t, w) in edge_rule(&orect).iter() {
                        let p = edge_point(&orect, f.side, t);
                        let (uq, g) = stress_at(owner, p);
                        let tn = traction(params, g, f.normal);
                        let datum = opts.manufactured.map_or([0.0; 2], |m| m.boundary(p, f.normal));
                        let r = [datum[0] - tn[0] - params.kappa * uq[0], datum[1] - tn[1] - params.kappa * uq[1]];
                        s += w * f.h * (r[0] * r[0] + r[1] * r[1]);
                    }
                    out.push((owner, f.h * s, false));
                }
                FacetKind::Conforming => {
                    let nb = forest.leaf_index(f.neighbor.expect("conforming facet has a neighbor")).expect("leaf");
                    let mut s = 0.0;
                    for (t, w) in edge_rule(&orect).iter() {
                        let p = edge_point(&orect, f.side, t);
                        let a = traction(params, stress_at(owner, p).1, f.normal);
                        let b = traction(params, stress_at(nb, p).1, f.normal);
                        s += w * f.h * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
                    }
                    out.push((owner, f.h * s, true));
                    out.push((nb, f.h * s, true));
                }
                FacetKind::Nonconforming => {
                    for sub in &f.subfacets {
                        let fine = forest.leaf_index(sub.fine).expect("subfacet is a leaf");
                        let frect = space.cell_geometry(fine).rect;
                        let rule = if matches!(sing, Some(p) if touches(&frect, p) || touches(&orect, p)) {
                            &gl_hi
                        } else {
                            &gl
                        };
                        let mut s = 0.0;
                        for (t, w) in rule.iter() {
                            let tc = sub.interval[0] + t * (sub.interval[1] - sub.interval[0]);
                            let p = edge_point(&orect, f.side, tc);
                            let a = traction(params, stress_at(owner, p).1, f.normal);
                            let b = traction(params, stress_at(fine, p).1, f.normal);
                            s += w * sub.h * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
                        }
                        out.push((owner, sub.h * s, true));
                        out.push((fine, sub.h * s, true));
                    }
                }
            }
            out
        })
        .collect();

    let n = space.n_cells();
    let mut jump = vec![0.0; n];
    let mut boundary = vec![0.0; n];
    let mut facet_jump_sum = 0.0;
    let share = match opts.split {
        JumpSplit::Half => 0.5,
        JumpSplit::Both => 1.0,
    };
    for list in &contributions {
        for (i, &(c, v, is_jump)) in list.iter().enumerate() {
            if is_jump {
                jump[c] += share * v;
                if i % 2 == 0 {
                    facet_jump_sum += v;
                }
            } else {
                boundary[c] += v;
            }
        }
    }
    Ok(CellIndicators { keys: forest.leaves().to_vec(), volume, jump, boundary, facet_jump_sum })
}
