use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::ImageError;
use crate::quadrature::TensorRule;

use super::{ImageField, ImagePair, IntensityField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRow {
    pub pixels_per_element: usize,
    pub order: usize,
    pub e_q: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadratureStudyResult {
    pub rows: Vec<QuadratureRow>,
}

impl QuadratureStudyResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pixels_per_element,order,e_q\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6e}", r.pixels_per_element, r.order, r.e_q);
        }
        s
    }

    /// Rows of one block size, in the order they were computed.
    pub fn block(&self, ppe: usize) -> impl Iterator<Item = &QuadratureRow> + '_ {
        self.rows.iter().filter(move |r| r.pixels_per_element == ppe)
    }
}

/// Structured `Q1` grid over the field domain with `ppe x ppe` pixels per element.
#[derive(Debug, Clone, Copy)]
struct Grid {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    h: [f64; 2],
}

impl Grid {
    fn new(field: &ImageField, ppe: usize) -> Result<Self, ImageError> {
        let img = field.coefficients();
        for n in [img.width(), img.height()] {
            if ppe == 0 || n % ppe != 0 {
                return Err(ImageError::MeshPixelMismatch { pixels: n, block: ppe });
            }
        }
        let (nx, ny) = (img.width() / ppe, img.height() / ppe);
        let d = field.domain();
        Ok(Self { nx, ny, origin: d.origin, h: [d.size[0] / nx as f64, d.size[1] / ny as f64] })
    }

    fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }
}

/// `[W(q)]_i = int (T - R) grad T . v_i` against the `Q1` basis, using an order-`q` rule.
fn residual_vector(pair: &ImagePair<'_>, grid: Grid, q: usize) -> Vec<f64> {
    let rule = TensorRule::for_order(q);
    let cells: Vec<[[f64; 2]; 4]> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % grid.nx, c / grid.nx);
            let o = [grid.origin[0] + i as f64 * grid.h[0], grid.origin[1] + j as f64 * grid.h[1]];
            let det = grid.h[0] * grid.h[1];
            let mut loc = [[0.0; 2]; 4];
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let x = [o[0] + xi[0] * grid.h[0], o[1] + xi[1] * grid.h[1]];
                let (f, _) = pair.forcing_and_mismatch(x, [0.0, 0.0]);
                let phi = [(1.0 - xi[0]) * (1.0 - xi[1]), xi[0] * (1.0 - xi[1]), (1.0 - xi[0]) * xi[1], xi[0] * xi[1]];
                for a in 0..4 {
                    loc[a][0] += w * det * f[0] * phi[a];
                    loc[a][1] += w * det * f[1] * phi[a];
                }
            }
            loc
        })
        .collect();
    let mut out = vec![0.0; 2 * grid.n_nodes()];
    for (c, loc) in cells.iter().enumerate() {
        let (i, j) = (c % grid.nx, c / grid.nx);
        let nodes = [
            j * (grid.nx + 1) + i,
            j * (grid.nx + 1) + i + 1,
            (j + 1) * (grid.nx + 1) + i,
            (j + 1) * (grid.nx + 1) + i + 1,
        ];
        for (a, &n) in nodes.iter().enumerate() {
            out[2 * n] += loc[a][0];
            out[2 * n + 1] += loc[a][1];
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error `e(q) = |W(q) - W(q_truth)| / |W(q_truth)|` for every block size and order.
///
/// Each block ends with the `q_truth` row itself, whose error is zero.
pub fn quadrature_study(
    template: &ImageField,
    reference: &ImageField,
    pixels_per_element: &[usize],
    orders: &[usize],
    q_truth: usize,
) -> Result<QuadratureStudyResult, ImageError> {
    let max = orders.iter().copied().max().unwrap_or(0);
    if q_truth <= max {
        return Err(ImageError::TruthOrder { truth: q_truth, max });
    }
    quadrature_study_fields(template, reference, template, pixels_per_element, orders, q_truth)
}

/// Same as [`quadrature_study`] for arbitrary intensity fields; `grid_source`
/// fixes the domain and pixel grid.
pub fn quadrature_study_fields(
    template: &dyn IntensityField,
    reference: &dyn IntensityField,
    grid_source: &ImageField,
    pixels_per_element: &[usize],
    orders: &[usize],
    q_truth: usize,
) -> Result<QuadratureStudyResult, ImageError> {
    let max = orders.iter().copied().max().unwrap_or(0);
    if q_truth <= max {
        return Err(ImageError::TruthOrder { truth: q_truth, max });
    }
    let pair = ImagePair::new(template, reference);
    let mut rows = Vec::new();
    for &ppe in pixels_per_element {
        let grid = Grid::new(grid_source, ppe)?;
        let truth = residual_vector(&pair, grid, q_truth);
        let scale = norm(&truth);
        let rel = |w: &[f64]| {
            let d: Vec<f64> = w.iter().zip(&truth).map(|(a, b)| a - b).collect();
            if scale > 0.0 {
                norm(&d) / scale
            } else {
                norm(&d)
            }
        };
        for &q in orders {
            rows.push(QuadratureRow { pixels_per_element: ppe, order: q, e_q: rel(&residual_vector(&pair, grid, q)) });
        }
        rows.push(QuadratureRow { pixels_per_element: ppe, order: q_truth, e_q: rel(&truth) });
    }
    Ok(QuadratureStudyResult { rows })
}
