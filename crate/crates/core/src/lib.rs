//! Froxel-space potentially-visible-set estimation.
//!
//! The pipeline froxelizes a triangle scene into the enlarged frustum of a
//! viewcell ([`froxel`]), computes a sampled from-region ground truth
//! ([`oracle`]), learns the geometry → visibility mapping with a small
//! volumetric CNN on interleaved grids ([`interleave`], [`neural`]) and
//! evaluates or applies the predicted set ([`evalrt`]). Synthetic training
//! scenes come from [`scenegen`].
//!
//! Geometry and the estimator are generic over [`Real`]; the aliases below
//! fix the scalar types the command-line pipeline uses.

pub mod error;
pub mod evalrt;
pub mod froxel;
pub mod geom;
pub mod interleave;
pub mod neural;
pub mod oracle;
pub mod scenegen;
mod raster;
mod scalar;

pub use error::{PvsError, Result};
pub use scalar::Real;

/// Scalar for scene geometry, projection and rasterization.
pub type GeomReal = f64;

pub type Vec3f = geom::Vec3<GeomReal>;
pub type Scene = geom::TriScene<GeomReal>;
pub type SceneCamera = geom::Camera<GeomReal>;
pub type SceneViewCell = geom::ViewCell<GeomReal>;
pub type SceneFrustum = geom::Frustum<GeomReal>;

/// Scalar the estimator trains and runs in.
pub type NetReal = f32;

pub type Net = neural::Network<NetReal>;
