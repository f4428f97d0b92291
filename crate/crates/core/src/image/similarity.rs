use rayon::prelude::*;

use crate::fespace::FeFunction;
use crate::quadrature::TensorRule;

use super::ImagePair;

/// `int (T(x + u(x)) - R(x))^2 dx` by cellwise tensor Gauss rules of order `q_img`.
pub fn similarity(pair: &ImagePair<'_>, u: &FeFunction, q_img: usize) -> f64 {
    let space = u.space();
    let rule = TensorRule::for_order(q_img);
    let per_cell: Vec<f64> = (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let g = space.cell_geometry(c);
            let det = g.rect.area();
            let mut s = 0.0;
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let x = g.rect.map(*xi);
                let (uq, _) = u.eval_in_cell(c, *xi);
                let (_, m) = pair.forcing_and_mismatch(x, uq);
                s += w * det * m * m;
            }
            s
        })
        .collect();
    per_cell.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FeSpace;
    use crate::geometry::Rect;
    use crate::image::{IntensityField, Paraboloid};
    use crate::mesh::QuadForest;
    use crate::quadrature::GaussLegendre;
    use std::sync::Arc;

    struct Const(f64);
    impl IntensityField for Const {
        fn value(&self, _: [f64; 2]) -> f64 {
            self.0
        }
        fn gradient(&self, _: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
    }

    fn zero_on(levels: u32) -> FeFunction {
        let f = QuadForest::new(Rect::unit()).uniform_refine(levels);
        FeFunction::zeros(&Arc::new(FeSpace::new(&f, 1, true).unwrap()))
    }

    #[test]
    fn trivial_values() {
        let u = zero_on(2);
        let t = Paraboloid::new([0.8, 0.8]);
        assert_eq!(similarity(&ImagePair::new(&t, &t), &u, 6), 0.0);
        let (one, zero) = (Const(1.0), Const(0.0));
        assert!((similarity(&ImagePair::new(&one, &zero), &u, 6) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matches_high_order_reference() {
        let t = Paraboloid::new([0.8, 0.8]);
        let r = Paraboloid::new([0.2, 0.2]);
        let g = GaussLegendre::new(101);
        let mut reference = 0.0;
        for (x, wx) in g.iter() {
            for (y, wy) in g.iter() {
                let d = t.value([x, y]) - r.value([x, y]);
                reference += wx * wy * d * d;
            }
        }
        let v = similarity(&ImagePair::new(&t, &r), &zero_on(1), 20);
        assert!((v - reference).abs() <= 1e-8 * reference);
    }

    #[test]
    fn warp_enters_through_the_template() {
        // T(x + u) with u = (0.6, 0.6) moves the paraboloid center onto R's
        let t = Paraboloid::new([0.8, 0.8]);
        let r = Paraboloid::new([0.2, 0.2]);
        let u0 = zero_on(2);
        let u = FeFunction::interpolate(u0.space(), |_| [0.6, 0.6]);
        assert!(similarity(&ImagePair::new(&t, &r), &u, 6) < 1e-26);
    }
}
