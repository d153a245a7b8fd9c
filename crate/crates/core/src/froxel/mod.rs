//! Frustum-aligned binary occupancy grids and scene froxelization.

mod froxelize;
mod grid;

pub use froxelize::{
    froxel_id_map, froxelize, froxelize_into, quantize, FragmentSink, FroxelIdMap, FroxelizeConfig,
    ProjectionMode, Tee, ORTHO_OVERSAMPLE,
};
pub(crate) use froxelize::quantize_axis;
pub use grid::{FroxelGrid, GridDims, GridRole, GRID_MAGIC, GRID_VERSION};
