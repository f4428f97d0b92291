use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::forest::QuadForest;

/// Legacy ASCII unstructured grid of the leaves, with the refinement level
/// and any extra per-cell scalars attached as cell data.
pub fn vtk_string(forest: &QuadForest, cell_data: &[(&str, &[f64])]) -> String {
    let n = forest.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nquadtree leaves\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", 4 * n);
    for &k in forest.leaves() {
        for v in forest.geometry_of(k).vertices() {
            let _ = writeln!(s, "{} {} 0", v[0], v[1]);
        }
    }
    let _ = writeln!(s, "CELLS {} {}", n, 5 * n);
    for c in 0..n {
        let b = 4 * c;
        let _ = writeln!(s, "4 {} {} {} {}", b, b + 1, b + 2, b + 3);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "CELL_DATA {n}");
    s.push_str("SCALARS level int 1\nLOOKUP_TABLE default\n");
    for &k in forest.leaves() {
        let _ = writeln!(s, "{}", k.level());
    }
    for (name, values) in cell_data {
        assert_eq!(values.len(), n, "cell data '{name}' has wrong length");
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in *values {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

pub fn write_vtk(path: &Path, forest: &QuadForest, cell_data: &[(&str, &[f64])]) -> io::Result<()> {
    std::fs::write(path, vtk_string(forest, cell_data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    #[test]
    fn layout() {
        let f = QuadForest::new(Rect::unit()).uniform_refine(1);
        let ind = [0.5, 1.0, 1.5, 2.0];
        let s = vtk_string(&f, &[("indicator", &ind)]);
        assert!(s.contains("POINTS 16 double"));
        assert!(s.contains("CELLS 4 20"));
        assert!(s.contains("SCALARS indicator double 1"));
        assert_eq!(s.lines().filter(|l| *l == "9").count(), 4);
    }
}
