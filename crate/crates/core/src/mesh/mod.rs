//! Balanced quadtree over one rectangular coarse cell.

mod facets;
mod forest;
mod morton;
mod vtk;

pub use facets::{facets, Facet, FacetKind, Subfacet};
pub use forest::{CellGeometry, Neighbor, Provenance, QuadForest};
pub use morton::{morton_decode, morton_encode, MortonKey, Side, MAX_LEVEL};
pub use vtk::{vtk_string, write_vtk};
