use std::fmt::Write as _;

use crate::error::EstimatorError;

use super::CellIndicators;

/// Leaves selected by [`mark_fraction`], as indices into the Z-ordered leaf list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSets {
    pub refine: Vec<usize>,
    pub coarsen: Vec<usize>,
}

fn count(theta: f64, n: usize) -> usize {
    // tolerate products such as 0.29 * 100 = 28.999999999999996
    ((theta * n as f64) + 1e-9).floor() as usize
}

/// Mark the `floor(theta_refine N)` largest and `floor(theta_coarsen N)` smallest leaves.
///
/// Ties go to the lower Z-order key for refinement and the higher one for coarsening.
pub fn mark_fraction(ind: &CellIndicators, theta_refine: f64, theta_coarsen: f64) -> Result<MarkSets, EstimatorError> {
    for t in [theta_refine, theta_coarsen] {
        if !(0.0..=1.0).contains(&t) {
            return Err(EstimatorError::FractionRange(t));
        }
    }
    if theta_refine + theta_coarsen > 1.0 + 1e-12 {
        return Err(EstimatorError::Fractions(theta_refine + theta_coarsen));
    }
    let n = ind.len();
    let totals = ind.totals();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    let nr = count(theta_refine, n);
    let nc = count(theta_coarsen, n).min(n - nr);
    let mut refine: Vec<usize> = order[..nr].to_vec();
    let mut coarsen: Vec<usize> = order[n - nc..].to_vec();
    refine.sort_unstable();
    coarsen.sort_unstable();
    Ok(MarkSets { refine, coarsen })
}

/// One row of the marking summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkingRecord {
    pub level: usize,
    pub n_cells: usize,
    pub theta: f64,
    pub refined: usize,
    pub coarsened: usize,
}

pub fn marking_csv(rows: &[MarkingRecord]) -> String {
    let mut s = String::from("level,n_cells,theta,refined,coarsened\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6e},{},{}", r.level, r.n_cells, r.theta, r.refined, r.coarsened);
    }
    s
}
