use std::collections::{BTreeSet, HashSet};

use crate::error::MeshError;
use crate::geometry::Rect;

use super::morton::{MortonKey, Side, MAX_LEVEL};

/// Quadtree over a single rectangular coarse cell, leaves kept in Z-order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForest {
    domain: Rect,
    leaves: Vec<MortonKey>,
}

/// Where a leaf of an adapted forest came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Unchanged old leaf (index into the old leaf list).
    Same(usize),
    /// Descendant of the given old leaf.
    ChildOf(usize),
    /// Parent of the listed old leaves.
    ParentOf(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub rect: Rect,
    /// Cell diameter (diagonal length).
    pub h: f64,
    /// Diagonal of the affine reference map Jacobian.
    pub jacobian: [f64; 2],
}

impl CellGeometry {
    /// Corners counter-clockwise from the lower left.
    pub fn vertices(&self) -> [[f64; 2]; 4] {
        let [x0, y0] = self.rect.origin;
        let [x1, y1] = self.rect.max();
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }
}

impl QuadForest {
    pub fn new(domain: Rect) -> Self {
        Self { domain, leaves: vec![MortonKey::ROOT] }
    }

    /// Build from an arbitrary leaf list, checking tiling and order.
    pub fn from_leaves(domain: Rect, mut leaves: Vec<MortonKey>) -> Result<Self, MeshError> {
        leaves.sort();
        leaves.dedup();
        let f = Self { domain, leaves };
        f.check_tiling()?;
        Ok(f)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn leaves(&self) -> &[MortonKey] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn max_level(&self) -> u8 {
        self.leaves.iter().map(|k| k.level()).max().unwrap_or(0)
    }

    pub fn leaf_index(&self, key: MortonKey) -> Option<usize> {
        self.leaves.binary_search(&key).ok()
    }

    pub fn contains_leaf(&self, key: MortonKey) -> bool {
        self.leaf_index(key).is_some()
    }

    /// The leaf equal to or containing `key`, if `key` is not subdivided.
    pub fn covering_leaf(&self, key: MortonKey) -> Option<usize> {
        let pos = self.leaves.partition_point(|l| *l <= key);
        if pos == 0 {
            return None;
        }
        let cand = self.leaves[pos - 1];
        cand.is_ancestor_or_self_of(key).then_some(pos - 1)
    }

    /// Neighbor region across `side` of a leaf, classified.
    pub fn neighbor_of(&self, key: MortonKey, side: Side) -> Neighbor {
        let Some(n) = key.neighbor(side) else {
            return Neighbor::Boundary;
        };
        match self.covering_leaf(n) {
            Some(idx) if self.leaves[idx] == n => Neighbor::Same(idx),
            Some(idx) => Neighbor::Coarser(idx),
            None => Neighbor::Finer(n),
        }
    }

    pub fn uniform_refine(&self, n: u32) -> QuadForest {
        let mut leaves = self.leaves.clone();
        for _ in 0..n {
            leaves = leaves.iter().flat_map(|k| k.children()).collect();
        }
        QuadForest { domain: self.domain, leaves }
    }

    pub fn cell_geometry(&self, key: MortonKey) -> Result<CellGeometry, MeshError> {
        if !self.contains_leaf(key) {
            return Err(MeshError::NotALeaf(key));
        }
        Ok(self.geometry_of(key))
    }

    /// Geometry of any key, leaf or not.
    pub fn geometry_of(&self, key: MortonKey) -> CellGeometry {
        let (o, s) = key.reference_box();
        let sx = self.domain.size[0] * s;
        let sy = self.domain.size[1] * s;
        let rect = Rect::new(self.domain.map(o), [sx, sy]);
        CellGeometry { rect, h: sx.hypot(sy), jacobian: [sx, sy] }
    }

    /// Leaf containing a physical point (clamped into the domain). Points on
    /// an interior cell edge belong to the cell on the greater-coordinate side.
    pub fn locate_point(&self, p: [f64; 2]) -> usize {
        let n = (1u64 << MAX_LEVEL) as f64;
        let rx = ((p[0] - self.domain.origin[0]) / self.domain.size[0]).clamp(0.0, 1.0);
        let ry = ((p[1] - self.domain.origin[1]) / self.domain.size[1]).clamp(0.0, 1.0);
        let i = ((rx * n).floor() as u64).min((1u64 << MAX_LEVEL) - 1) as u32;
        let j = ((ry * n).floor() as u64).min((1u64 << MAX_LEVEL) - 1) as u32;
        let key = MortonKey::encode(MAX_LEVEL, i, j).expect("clamped coordinates");
        self.covering_leaf(key).expect("leaves tile the domain")
    }

    /// Every edge-adjacent leaf pair differs by at most one level.
    pub fn is_balanced(&self) -> bool {
        self.first_unbalanced().is_none()
    }

    fn first_unbalanced(&self) -> Option<MortonKey> {
        for &k in &self.leaves {
            for side in Side::ALL {
                if let Neighbor::Coarser(idx) = self.neighbor_of(k, side) {
                    if self.leaves[idx].level() + 1 < k.level() {
                        return Some(k);
                    }
                }
            }
        }
        None
    }

    pub fn check_balance(&self) -> Result<(), MeshError> {
        match self.first_unbalanced() {
            Some(k) => Err(MeshError::Unbalanced(k)),
            None => Ok(()),
        }
    }

    /// Leaves strictly increasing, non-overlapping, and covering the root.
    pub fn check_tiling(&self) -> Result<(), MeshError> {
        let total = 1u128 << (2 * MAX_LEVEL as u32);
        let mut next = 0u128;
        for &k in &self.leaves {
            if k.anchor() as u128 != next {
                return Err(MeshError::NotALeaf(k));
            }
            next += 1u128 << (2 * (MAX_LEVEL - k.level()) as u32);
        }
        if next != total {
            return Err(MeshError::NotALeaf(*self.leaves.last().unwrap_or(&MortonKey::ROOT)));
        }
        Ok(())
    }

    pub fn leaf_area_sum(&self) -> f64 {
        self.leaves.iter().map(|&k| self.geometry_of(k).rect.area()).sum()
    }

    /// Refine `marked` (which may contain non-leaves already subdivided; those
    /// are ignored) and then close under the balance condition.
    fn refine_and_balance(leaves: &[MortonKey], marked: &HashSet<MortonKey>, domain: Rect) -> QuadForest {
        let mut cur: Vec<MortonKey> = Vec::with_capacity(leaves.len() + 3 * marked.len());
        for &k in leaves {
            if marked.contains(&k) {
                cur.extend(k.children());
            } else {
                cur.push(k);
            }
        }
        let mut f = QuadForest { domain, leaves: cur };
        loop {
            let mut violators = BTreeSet::new();
            for &k in &f.leaves {
                for side in Side::ALL {
                    if let Neighbor::Coarser(idx) = f.neighbor_of(k, side) {
                        if f.leaves[idx].level() + 1 < k.level() {
                            violators.insert(f.leaves[idx]);
                        }
                    }
                }
            }
            if violators.is_empty() {
                return f;
            }
            let mut next = Vec::with_capacity(f.leaves.len() + 3 * violators.len());
            for &k in &f.leaves {
                if violators.contains(&k) {
                    next.extend(k.children());
                } else {
                    next.push(k);
                }
            }
            f.leaves = next;
        }
    }

    /// Whether replacing the four children of `parent` by `parent` keeps balance.
    fn can_collapse(&self, parent: MortonKey) -> bool {
        for c in parent.children() {
            if !self.contains_leaf(c) {
                return false;
            }
        }
        for side in Side::ALL {
            for (dx, dy) in side.children() {
                let c = parent.child_at(dx, dy);
                if let Neighbor::Finer(_) = self.neighbor_of(c, side) {
                    return false;
                }
            }
        }
        true
    }

    /// Apply refine and coarsen marks transactionally.
    ///
    /// Refinement wins: a parent collapses only if all four children are
    /// marked for coarsening and none of them is refined or needed by the
    /// balance closure. Collapses are tried in Z-order and skipped if they
    /// would violate balance.
    pub fn adapt(
        &self,
        refine: &[MortonKey],
        coarsen: &[MortonKey],
    ) -> Result<(QuadForest, Vec<Provenance>), MeshError> {
        for &k in refine.iter().chain(coarsen) {
            if !self.contains_leaf(k) {
                return Err(MeshError::NotALeaf(k));
            }
        }
        let refine_set: HashSet<MortonKey> = refine.iter().copied().collect();
        let coarsen_set: HashSet<MortonKey> = coarsen.iter().copied().filter(|k| !refine_set.contains(k)).collect();

        let mut new = Self::refine_and_balance(&self.leaves, &refine_set, self.domain);

        let parents: BTreeSet<MortonKey> = coarsen_set
            .iter()
            .filter_map(|k| k.parent())
            .filter(|p| p.children().iter().all(|c| coarsen_set.contains(c)))
            .collect();
        for p in parents {
            if new.can_collapse(p) {
                let first = new.leaf_index(p.child(0)).expect("checked by can_collapse");
                new.leaves.splice(first..first + 4, [p]);
            }
        }

        let prov = new.leaves.iter().map(|&k| self.provenance_of(k)).collect();
        Ok((new, prov))
    }

    fn provenance_of(&self, key: MortonKey) -> Provenance {
        match self.covering_leaf(key) {
            Some(idx) if self.leaves[idx] == key => Provenance::Same(idx),
            Some(idx) => Provenance::ChildOf(idx),
            None => {
                let lo = self.leaves.partition_point(|l| *l < key);
                let mut ids = Vec::new();
                let mut i = lo;
                while i < self.leaves.len() && key.is_ancestor_or_self_of(self.leaves[i]) {
                    ids.push(i);
                    i += 1;
                }
                Provenance::ParentOf(ids)
            }
        }
    }
}

/// Classification of the region across a leaf edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Boundary,
    /// Leaf of the same level (index).
    Same(usize),
    /// Coarser leaf covering the same-level neighbor (index).
    Coarser(usize),
    /// The same-level neighbor key is subdivided.
    Finer(MortonKey),
}
