use crate::error::MeshError;

use super::forest::{Neighbor, QuadForest};
use super::morton::{MortonKey, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetKind {
    Conforming,
    Nonconforming,
    Boundary,
}

/// One fine edge lying on a coarse cell's edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subfacet {
    pub fine: MortonKey,
    /// Parameter interval `[t0, t1]` occupied on the coarse edge (0 at the
    /// lower-coordinate end).
    pub interval: [f64; 2],
    pub h: f64,
}

/// A mesh edge seen from its owner.
///
/// Conforming facets are owned by the lower Z-order cell. Nonconforming
/// facets are owned by the coarse cell; `neighbor` is then the (non-leaf)
/// same-level key whose two children are listed as subfacets. Boundary
/// facets have no neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub kind: FacetKind,
    pub owner: MortonKey,
    pub side: Side,
    pub neighbor: Option<MortonKey>,
    pub subfacets: Vec<Subfacet>,
    /// Physical length of the full edge of the owner.
    pub h: f64,
    /// Unit normal pointing out of the owner.
    pub normal: [f64; 2],
}

fn edge_length(forest: &QuadForest, key: MortonKey, side: Side) -> f64 {
    let g = forest.geometry_of(key);
    if side.is_vertical() {
        g.jacobian[1]
    } else {
        g.jacobian[0]
    }
}

/// Enumerate every leaf edge once, in Z-order of the owner then side order.
pub fn facets(forest: &QuadForest) -> Result<Vec<Facet>, MeshError> {
    let mut out = Vec::with_capacity(2 * forest.len() + 8);
    for &k in forest.leaves() {
        for side in Side::ALL {
            let h = edge_length(forest, k, side);
            let normal = side.normal();
            match forest.neighbor_of(k, side) {
                Neighbor::Boundary => out.push(Facet {
                    kind: FacetKind::Boundary,
                    owner: k,
                    side,
                    neighbor: None,
                    subfacets: Vec::new(),
                    h,
                    normal,
                }),
                Neighbor::Same(idx) => {
                    let nb = forest.leaves()[idx];
                    if k < nb {
                        out.push(Facet {
                            kind: FacetKind::Conforming,
                            owner: k,
                            side,
                            neighbor: Some(nb),
                            subfacets: Vec::new(),
                            h,
                            normal,
                        });
                    }
                }
                Neighbor::Coarser(idx) => {
                    if forest.leaves()[idx].level() + 1 < k.level() {
                        return Err(MeshError::Unbalanced(k));
                    }
                }
                Neighbor::Finer(n) => {
                    let opp = side.opposite();
                    let mut subs = Vec::with_capacity(2);
                    for (m, (dx, dy)) in opp.children().into_iter().enumerate() {
                        let fine = n.child_at(dx, dy);
                        if !forest.contains_leaf(fine) {
                            return Err(MeshError::Unbalanced(k));
                        }
                        let t0 = 0.5 * m as f64;
                        subs.push(Subfacet { fine, interval: [t0, t0 + 0.5], h: 0.5 * h });
                    }
                    out.push(Facet {
                        kind: FacetKind::Nonconforming,
                        owner: k,
                        side,
                        neighbor: Some(n),
                        subfacets: subs,
                        h,
                        normal,
                    });
                }
            }
        }
    }
    Ok(out)
}
