//! Raster images, smoothed intensity fields, similarity and the quadrature study.

mod field;
mod phantom;
mod quadrature_study;
mod raster;
mod similarity;

pub use field::{
    build_field, forcing, gaussian_kernel, gaussian_smooth, Bilinear, ImageField, ImagePair, IntensityField, Paraboloid,
};
pub use phantom::brain_phantom;
pub use quadrature_study::{quadrature_study, quadrature_study_fields, QuadratureRow, QuadratureStudyResult};
pub use raster::{load_raster, RasterImage};
pub use similarity::similarity;
