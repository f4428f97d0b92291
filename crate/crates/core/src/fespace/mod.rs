//! Vector Lagrange spaces on the quadtree, assembly and field transfer.

mod assembly;
pub mod element;
mod function;
mod space;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_elastic, assemble_laplace, assemble_mass, assemble_operator, extra_load,
    image_load, image_load_and_similarity, rigid_body_block, AssembledSystem, ExtraForcing, LKind,
};
pub use function::{continuity_defect, error_norms, norms, transfer, FeFunction, Norms};
pub use space::{build_space, Constraint, ConstraintSet, FeSpace, MaterialParams};
pub use sparse::{factorization_count, BorderedCholesky, CsrMatrix, SparseLu};

pub(crate) use function::{edge_point, reference, touches};
