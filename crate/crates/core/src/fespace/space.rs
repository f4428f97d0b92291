use std::collections::HashMap;
use std::sync::Arc;

use crate::error::FeError;
use crate::mesh::{facets, CellGeometry, Facet, FacetKind, MortonKey, QuadForest};

use super::element::{lagrange_1d, local_node, side_nodes};

/// Isotropic linear-elastic material plus the registration weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub dt: f64,
}

impl MaterialParams {
    pub fn new(young: f64, poisson: f64, kappa: f64, alpha: f64, dt: f64) -> Result<Self, FeError> {
        if !(young > 0.0) {
            return Err(FeError::Material(format!("Young modulus must be positive, got {young}")));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(FeError::Material(format!("Poisson ratio must lie in (-1, 1/2), got {poisson}")));
        }
        if !(kappa >= 0.0) {
            return Err(FeError::Material(format!("kappa must be non-negative, got {kappa}")));
        }
        if !(alpha > 0.0) {
            return Err(FeError::Material(format!("alpha must be positive, got {alpha}")));
        }
        if !(dt > 0.0) {
            return Err(FeError::Material(format!("dt must be positive, got {dt}")));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Ok(Self { young, poisson, lambda, mu, kappa, alpha, dt })
    }

    /// `C e(u)` from the displacement gradient `g[i][j] = d u_i / d x_j`.
    #[inline]
    pub fn stress(&self, g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let tr = g[0][0] + g[1][1];
        let off = self.mu * (g[0][1] + g[1][0]);
        [[self.lambda * tr + 2.0 * self.mu * g[0][0], off], [off, self.lambda * tr + 2.0 * self.mu * g[1][1]]]
    }

    /// `div C e(u)` from the second derivatives `h[i] = (u_i,xx, u_i,xy, u_i,yy)`.
    #[inline]
    pub fn div_stress(&self, h: [[f64; 3]; 2]) -> [f64; 2] {
        let (l, m) = (self.lambda, self.mu);
        [
            (l + 2.0 * m) * h[0][0] + m * h[0][2] + (l + m) * h[1][1],
            (l + 2.0 * m) * h[1][2] + m * h[1][0] + (l + m) * h[0][1],
        ]
    }
}

/// A hanging node expressed through free nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub node: usize,
    pub point: [f64; 2],
    pub masters: Vec<(usize, f64)>,
}

/// All hanging-node constraints of a space, masters given as free-node indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub entries: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Vector-valued continuous `Q_k` space on a balanced quadtree.
#[derive(Debug)]
pub struct FeSpace {
    forest: QuadForest,
    facets: Vec<Facet>,
    degree: usize,
    rm_mode: bool,
    lattice_level: u8,
    cell_nodes: Vec<usize>,
    node_lattice: Vec<(u64, u64)>,
    expansions: Vec<Vec<(usize, f64)>>,
    free_nodes: Vec<usize>,
    constraints: ConstraintSet,
}

pub fn build_space(
    forest: &QuadForest,
    degree: usize,
    params: &MaterialParams,
    rm_mode: bool,
) -> Result<Arc<FeSpace>, FeError> {
    if params.kappa == 0.0 && !rm_mode {
        return Err(FeError::SingularWithoutMultiplier);
    }
    FeSpace::new(forest, degree, rm_mode).map(Arc::new)
}

impl FeSpace {
    pub fn new(forest: &QuadForest, degree: usize, rm_mode: bool) -> Result<Self, FeError> {
        if !(1..=2).contains(&degree) {
            return Err(FeError::Degree(degree));
        }
        let facets = facets(forest)?;
        let k = degree;
        let nb = (k + 1) * (k + 1);
        let lattice_level = forest.max_level();
        let cell_size = |key: MortonKey| (k as u64) << (lattice_level - key.level());

        let mut ids: HashMap<(u64, u64), usize> = HashMap::new();
        let mut node_lattice = Vec::new();
        let mut cell_nodes = Vec::with_capacity(forest.len() * nb);
        for &key in forest.leaves() {
            let (i, j) = key.coords();
            let s = cell_size(key);
            let step = s / k as u64;
            for b in 0..=k as u64 {
                for a in 0..=k as u64 {
                    let p = (i as u64 * s + a * step, j as u64 * s + b * step);
                    let id = *ids.entry(p).or_insert_with(|| {
                        node_lattice.push(p);
                        node_lattice.len() - 1
                    });
                    cell_nodes.push(id);
                }
            }
        }

        // direct constraints from nonconforming facets
        let mut direct: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for f in facets.iter().filter(|f| f.kind == FacetKind::Nonconforming) {
            let ci = forest.leaf_index(f.owner).expect("owner is a leaf");
            let coarse: Vec<usize> = side_nodes(k, f.side).iter().map(|&l| cell_nodes[ci * nb + l]).collect();
            let along = |id: usize| {
                let p = node_lattice[id];
                if f.side.is_vertical() {
                    p.1
                } else {
                    p.0
                }
            };
            let start = along(coarse[0]) as f64;
            let len = along(coarse[k]) as f64 - start;
            for sub in &f.subfacets {
                let fi = forest.leaf_index(sub.fine).expect("subfacet is a leaf");
                for &l in &side_nodes(k, f.side.opposite()) {
                    let id = cell_nodes[fi * nb + l];
                    if coarse.contains(&id) || direct.contains_key(&id) {
                        continue;
                    }
                    let t = (along(id) as f64 - start) / len;
                    let (w, _, _) = lagrange_1d(k, t);
                    direct.insert(id, coarse.iter().zip(w).map(|(&m, w)| (m, w)).collect());
                }
            }
        }

        let mut free_of = vec![usize::MAX; node_lattice.len()];
        let mut free_nodes = Vec::new();
        for &id in &cell_nodes {
            if free_of[id] == usize::MAX && !direct.contains_key(&id) {
                free_of[id] = free_nodes.len();
                free_nodes.push(id);
            }
        }

        let mut expansions: Vec<Option<Vec<(usize, f64)>>> = vec![None; node_lattice.len()];
        for (id, e) in expansions.iter_mut().enumerate() {
            if free_of[id] != usize::MAX {
                *e = Some(vec![(free_of[id], 1.0)]);
            }
        }
        let mut hanging: Vec<usize> = direct.keys().copied().collect();
        hanging.sort_unstable();
        for &h in &hanging {
            resolve(h, &direct, &mut expansions, 0);
        }
        let expansions: Vec<Vec<(usize, f64)>> =
            expansions.into_iter().map(|e| e.expect("every node resolved")).collect();

        let mut space = Self {
            forest: forest.clone(),
            facets,
            degree,
            rm_mode,
            lattice_level,
            cell_nodes,
            node_lattice,
            expansions,
            free_nodes,
            constraints: ConstraintSet::default(),
        };
        space.constraints = ConstraintSet {
            entries: hanging
                .iter()
                .map(|&h| Constraint { node: h, point: space.node_point(h), masters: space.expansions[h].clone() })
                .collect(),
        };
        Ok(space)
    }

    pub fn forest(&self) -> &QuadForest {
        &self.forest
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rm_mode(&self) -> bool {
        self.rm_mode
    }

    pub fn n_basis(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.forest.len()
    }

    pub fn n_free_nodes(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn n_displacement_dofs(&self) -> usize {
        2 * self.free_nodes.len()
    }

    /// System unknowns: displacement dofs plus three multipliers in rm mode.
    pub fn n_dofs(&self) -> usize {
        self.n_displacement_dofs() + if self.rm_mode { 3 } else { 0 }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_lattice.len()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn cell_key(&self, c: usize) -> MortonKey {
        self.forest.leaves()[c]
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        self.forest.geometry_of(self.cell_key(c))
    }

    pub fn cell_node_ids(&self, c: usize) -> &[usize] {
        let nb = self.n_basis();
        &self.cell_nodes[c * nb..(c + 1) * nb]
    }

    /// Free-node combination representing the node (a single unit entry for free nodes).
    pub fn expansion(&self, node: usize) -> &[(usize, f64)] {
        &self.expansions[node]
    }

    pub fn node_point(&self, node: usize) -> [f64; 2] {
        let (x, y) = self.node_lattice[node];
        let n = ((self.degree as u64) << self.lattice_level) as f64;
        self.forest.domain().map([x as f64 / n, y as f64 / n])
    }

    pub fn free_node_point(&self, f: usize) -> [f64; 2] {
        self.node_point(self.free_nodes[f])
    }

    /// Local node `i` of a cell in reference coordinates of that cell.
    pub fn local_node(&self, i: usize) -> [f64; 2] {
        local_node(self.degree, i)
    }

    /// Reference coordinates of a physical point inside cell `c`.
    pub fn to_reference(&self, c: usize, p: [f64; 2]) -> [f64; 2] {
        let g = self.cell_geometry(c);
        [(p[0] - g.rect.origin[0]) / g.rect.size[0], (p[1] - g.rect.origin[1]) / g.rect.size[1]]
    }

    /// Free-node combination of each local node of cell `c`.
    pub fn cell_expansions(&self, c: usize) -> impl Iterator<Item = &[(usize, f64)]> + '_ {
        self.cell_node_ids(c).iter().map(move |&n| self.expansions[n].as_slice())
    }
}

fn resolve(
    node: usize,
    direct: &HashMap<usize, Vec<(usize, f64)>>,
    memo: &mut Vec<Option<Vec<(usize, f64)>>>,
    depth: usize,
) -> Vec<(usize, f64)> {
    if let Some(e) = &memo[node] {
        return e.clone();
    }
    assert!(depth < 64, "constraint cycle at node {node}");
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for &(m, w) in &direct[&node] {
        if w == 0.0 {
            continue;
        }
        for (f, wf) in resolve(m, direct, memo, depth + 1) {
            match acc.iter_mut().find(|(g, _)| *g == f) {
                Some(slot) => slot.1 += w * wf,
                None => acc.push((f, w * wf)),
            }
        }
    }
    acc.sort_by_key(|e| e.0);
    memo[node] = Some(acc.clone());
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn params(kappa: f64) -> MaterialParams {
        MaterialParams::new(1.0, 0.25, kappa, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lame_from_young_poisson() {
        let p = params(0.5);
        assert!((p.lambda - 0.4).abs() < 1e-15 && (p.mu - 0.4).abs() < 1e-15);
        assert!(MaterialParams::new(1.0, 0.5, 0.0, 1.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, 0.25, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dof_counts_on_two_by_two() {
        let f = QuadForest::new(Rect::unit()).uniform_refine(1);
        assert_eq!(build_space(&f, 1, &params(0.5), true).unwrap().n_dofs(), 21);
        assert_eq!(build_space(&f, 2, &params(0.5), true).unwrap().n_dofs(), 53);
        assert_eq!(build_space(&f, 1, &params(0.5), false).unwrap().n_dofs(), 18);
        assert!(matches!(build_space(&f, 1, &params(0.0), false), Err(FeError::SingularWithoutMultiplier)));
        assert!(matches!(build_space(&f, 3, &params(0.5), true), Err(FeError::Degree(3))));
    }

    #[test]
    fn singular_uniform_dof_column() {
        let f = QuadForest::new(Rect::unit());
        let counts: Vec<usize> =
            (1..=7).map(|l| build_space(&f.uniform_refine(l), 1, &params(0.0), true).unwrap().n_dofs()).collect();
        assert_eq!(counts, vec![21, 53, 165, 581, 2181, 8453, 33285]);
    }

    #[test]
    fn q1_hanging_vertex_halves() {
        let key = |l, i, j| MortonKey::encode(l, i, j).unwrap();
        let f = QuadForest::new(Rect::unit()).uniform_refine(1);
        let f = f.adapt(&[key(1, 1, 0)], &[]).unwrap().0;
        let s = FeSpace::new(&f, 1, true).unwrap();
        // hanging vertices at (0.5, 0.25) and (0.75, 0.5)
        assert_eq!(s.constraints().len(), 2);
        for c in &s.constraints().entries {
            assert_eq!(c.masters.len(), 2);
            for &(_, w) in &c.masters {
                assert!((w - 0.5).abs() < 1e-15);
            }
            let mid = {
                let a = s.free_node_point(c.masters[0].0);
                let b = s.free_node_point(c.masters[1].0);
                [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
            };
            assert!((mid[0] - c.point[0]).abs() < 1e-15 && (mid[1] - c.point[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn q2_edge_weights() {
        let key = |l, i, j| MortonKey::encode(l, i, j).unwrap();
        let f = QuadForest::new(Rect::unit()).uniform_refine(1);
        let f = f.adapt(&[key(1, 1, 0)], &[]).unwrap().0;
        let s = FeSpace::new(&f, 2, true).unwrap();
        // each nonconforming edge has hanging nodes at t = 1/4 and 3/4
        assert_eq!(s.constraints().len(), 4);
        for c in &s.constraints().entries {
            let mut w: Vec<f64> = c.masters.iter().map(|m| m.1).collect();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect = [-0.125, 0.375, 0.75];
            for (a, b) in w.iter().zip(expect) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constraint_weights_sum_to_one_with_chains() {
        // deep corner refinement produces hanging nodes whose masters hang themselves
        let mut f = QuadForest::new(Rect::unit()).uniform_refine(1);
        for _ in 0..4 {
            let c = f.leaves()[3];
            f = f.adapt(&[c], &[]).unwrap().0;
        }
        for k in [1, 2] {
            let s = FeSpace::new(&f, k, true).unwrap();
            assert!(!s.constraints().is_empty());
            for c in &s.constraints().entries {
                let sum: f64 = c.masters.iter().map(|m| m.1).sum();
                assert!((sum - 1.0).abs() < 1e-13);
            }
        }
    }
}
