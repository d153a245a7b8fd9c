//! Geometry shared by every stage: vectors, triangle scenes, cameras,
//! viewcells and the froxel frustum.

mod camera;
mod scene;
mod vec3;

pub use camera::{build_viewcell_frustum, reproject, Basis, Camera, DepthMapping, Frustum, Ndc, Plane, ViewCell};
pub use scene::{SceneObject, TriScene, DEGENERATE_AREA_EPS};
pub use vec3::{Aabb, Vec3};
